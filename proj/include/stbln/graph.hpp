#pragma once

// Spatial graph topology over facial landmarks and the F x T x E edge
// feature tensor fed to the network. F is 2 at the input: each edge carries
// the displacement (x_i - x_j, y_i - y_j) between its endpoints.

#include <algorithm>
#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stbln/delaunay.hpp"
#include "stbln/landmarks.hpp"
#include "stbln/tensor.hpp"

namespace stbln {

inline constexpr std::size_t kInputFeatureChannels = 2;

struct GraphTopology {
    std::size_t node_count = 0;
    EdgeList edges; // (source, target) pairs
    std::size_t master_index = 0;

    std::size_t edge_count() const { return edges.size(); }

    void validate() const {
        if (master_index >= node_count)
            throw std::invalid_argument("GraphTopology: master index out of range");
        std::set<std::pair<std::size_t, std::size_t>> seen;
        std::vector<bool> master_adjacent(node_count, false);
        for (const auto& [i, j] : edges) {
            if (i >= node_count || j >= node_count)
                throw std::invalid_argument("GraphTopology: edge endpoint out of range");
            if (i == j) throw std::invalid_argument("GraphTopology: self loop");
            if (!seen.insert({std::min(i, j), std::max(i, j)}).second)
                throw std::invalid_argument("GraphTopology: duplicate edge");
            if (i == master_index) master_adjacent[j] = true;
            if (j == master_index) master_adjacent[i] = true;
        }
        for (std::size_t v = 0; v < node_count; ++v)
            if (v != master_index && !master_adjacent[v])
                throw std::invalid_argument("GraphTopology: master not connected to node " +
                                            std::to_string(v));
    }
};

// Delaunay edges (low index -> high index) plus master-to-all edges
// (master -> other) for pairs the triangulation missed, sorted for
// determinism.
inline GraphTopology build_topology(const LandmarkFrame& reference, std::size_t master_index) {
    const std::size_t n = reference.size();
    if (master_index >= n)
        throw std::invalid_argument("build_topology: master index out of range");
    GraphTopology topo;
    topo.node_count = n;
    topo.master_index = master_index;
    topo.edges = delaunay_triangulate(reference.points);

    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& [i, j] : topo.edges) seen.insert({std::min(i, j), std::max(i, j)});
    for (std::size_t v = 0; v < n; ++v) {
        if (v == master_index) continue;
        if (!seen.count({std::min(master_index, v), std::max(master_index, v)}))
            topo.edges.emplace_back(master_index, v);
    }
    std::sort(topo.edges.begin(), topo.edges.end());
    topo.validate();
    return topo;
}

// 2 x E matrix: column k is (x_i - x_j, y_i - y_j) for the k-th edge.
inline Tensor edge_features(const LandmarkFrame& frame, const GraphTopology& topo) {
    if (frame.size() != topo.node_count)
        throw std::invalid_argument("edge_features: frame has " + std::to_string(frame.size()) +
                                    " points, topology expects " +
                                    std::to_string(topo.node_count));
    Tensor out({kInputFeatureChannels, topo.edge_count()});
    for (std::size_t k = 0; k < topo.edge_count(); ++k) {
        const auto& [i, j] = topo.edges[k];
        out(0, k) = frame.points[i].x - frame.points[j].x;
        out(1, k) = frame.points[i].y - frame.points[j].y;
    }
    return out;
}

// [2, T, E] tensor; slice [:, t, :] holds the edge features of frame t.
inline Tensor sequence_to_tensor(const LandmarkSequence& seq, const GraphTopology& topo) {
    if (seq.frames.empty()) throw std::invalid_argument("sequence_to_tensor: empty sequence");
    const std::size_t t_n = seq.frame_count(), e_n = topo.edge_count();
    Tensor out({kInputFeatureChannels, t_n, e_n});
    for (std::size_t t = 0; t < t_n; ++t) {
        Tensor feat = edge_features(seq.frames[t], topo);
        for (std::size_t f = 0; f < kInputFeatureChannels; ++f)
            for (std::size_t e = 0; e < e_n; ++e) out(f, t, e) = feat(f, e);
    }
    return out;
}

inline nlohmann::json topology_to_json(const GraphTopology& topo) {
    nlohmann::json j;
    j["node_count"] = topo.node_count;
    j["master_index"] = topo.master_index;
    auto edges = nlohmann::json::array();
    for (const auto& [a, b] : topo.edges) edges.push_back({a, b});
    j["edges"] = std::move(edges);
    return j;
}

inline GraphTopology topology_from_json(const nlohmann::json& j) {
    GraphTopology topo;
    topo.node_count = j.at("node_count").get<std::size_t>();
    topo.master_index = j.at("master_index").get<std::size_t>();
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2)
            throw std::invalid_argument("topology_from_json: edge must be a pair");
        topo.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
    }
    topo.validate();
    return topo;
}

} // namespace stbln
