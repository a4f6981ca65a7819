#pragma once

// Glue from raw landmark sequences to the tensors the network consumes:
// frame selection -> 68->51 reduction -> nose centering -> one shared
// topology (Delaunay on a canonical frame + master edges) -> [2,T,E]
// tensors. The topology is built once per dataset because U is E x E, so
// every sequence must agree on E.

#include <stdexcept>
#include <vector>

#include "stbln/data.hpp"
#include "stbln/graph.hpp"
#include "stbln/landmarks.hpp"
#include "stbln/train.hpp"

namespace stbln {

// select + reduce + center; accepts 68- or already 51-point sequences
inline LandmarkSequence preprocess_sequence(const LandmarkSequence& seq,
                                            const FrameSelection& selection,
                                            std::size_t master_index = kNoseMasterIndex) {
    LandmarkSequence s = select_frames(seq, selection);
    if (!s.frames.empty() && s.frames.front().size() == kRawLandmarkCount)
        s = extract_informative(s);
    return normalize_sequence(s, master_index);
}

inline std::vector<LandmarkSequence>
preprocess_dataset(const std::vector<LandmarkSequence>& seqs, const FrameSelection& selection,
                   std::size_t master_index = kNoseMasterIndex) {
    std::vector<LandmarkSequence> out;
    out.reserve(seqs.size());
    for (const auto& s : seqs) out.push_back(preprocess_sequence(s, selection, master_index));
    return out;
}

// Mean of all normalized frames across the given sequences; the dataset's
// canonical geometry used to seed the shared triangulation.
inline LandmarkFrame canonical_frame(const std::vector<LandmarkSequence>& processed) {
    if (processed.empty()) throw std::invalid_argument("canonical_frame: no sequences");
    const std::size_t n_points = processed.front().frames.front().size();
    LandmarkFrame mean;
    mean.points.assign(n_points, {0.0, 0.0});
    std::size_t total = 0;
    for (const auto& seq : processed)
        for (const auto& frame : seq.frames) {
            if (frame.size() != n_points)
                throw std::invalid_argument("canonical_frame: inconsistent point counts");
            for (std::size_t i = 0; i < n_points; ++i) {
                mean.points[i].x += frame.points[i].x;
                mean.points[i].y += frame.points[i].y;
            }
            ++total;
        }
    for (auto& p : mean.points) {
        p.x /= static_cast<double>(total);
        p.y /= static_cast<double>(total);
    }
    return mean;
}

inline GraphTopology topology_from_dataset(const std::vector<LandmarkSequence>& processed,
                                           std::size_t master_index = kNoseMasterIndex) {
    return build_topology(canonical_frame(processed), master_index);
}

inline TensorDataset to_tensor_dataset(const std::vector<LandmarkSequence>& processed,
                                       const GraphTopology& topology) {
    TensorDataset data;
    data.inputs.reserve(processed.size());
    data.labels.reserve(processed.size());
    for (const auto& seq : processed) {
        data.inputs.push_back(sequence_to_tensor(seq, topology));
        data.labels.push_back(seq.label);
    }
    data.validate();
    return data;
}

inline std::size_t infer_class_count(const std::vector<LandmarkSequence>& seqs) {
    int max_label = -1;
    for (const auto& s : seqs) max_label = std::max(max_label, s.label);
    if (max_label < 1) throw data_error("dataset: need at least 2 classes");
    return static_cast<std::size_t>(max_label) + 1;
}

} // namespace stbln
