#pragma once

// Versioned little-endian checkpoint: magic "STBLN1", the network spec and
// (optionally) the graph topology as embedded JSON, then a named parameter
// table with explicit shapes. Round trips are bit-exact for parameter
// values, batch-norm running stats and the seed; SGD momentum buffers are
// not persisted and reload as zero.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stbln/errors.hpp"
#include "stbln/graph.hpp"
#include "stbln/model.hpp"

namespace stbln {

inline constexpr char kCheckpointMagic[6] = {'S', 'T', 'B', 'L', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace checkpoint_detail {

template <class T> void put(std::vector<std::uint8_t>& out, const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

inline void put_string(std::vector<std::uint8_t>& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

inline void put_tensor(std::vector<std::uint8_t>& out, const std::string& name,
                       const Tensor& t) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), p, p + t.numel() * sizeof(double));
}

struct Reader {
    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw data_error("checkpoint: truncated file");
    }
    template <class T> T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    std::string get_string() {
        const std::uint32_t n = get<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
    void get_tensor(const std::string& expect_name, Tensor& into) {
        const std::string name = get_string();
        if (name != expect_name)
            throw data_error("checkpoint: expected tensor '" + expect_name + "', found '" +
                             name + "'");
        const std::uint32_t rank = get<std::uint32_t>();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>());
        if (shape != into.shape)
            throw data_error("checkpoint: shape mismatch for tensor '" + name + "'");
        need(into.numel() * sizeof(double));
        std::memcpy(into.data.data(), buf.data() + pos, into.numel() * sizeof(double));
        pos += into.numel() * sizeof(double);
    }
};

// Shared walk so save and load agree on entry order by construction.
template <class Fn> void for_each_entry(ModelState& state, Fn&& fn) {
    for (std::size_t l = 0; l < state.layers.size(); ++l) {
        const std::string prefix = "layer" + std::to_string(l) + ".";
        LayerParams& p = state.layers[l];
        fn(prefix + "u", p.u.value);
        fn(prefix + "proj_weight", p.proj_weight.value);
        fn(prefix + "proj_bias", p.proj_bias.value);
        fn(prefix + "temporal_kernel", p.temporal_kernel.value);
        fn(prefix + "temporal_bias", p.temporal_bias.value);
        fn(prefix + "bn1_gamma", p.bn1_gamma.value);
        fn(prefix + "bn1_beta", p.bn1_beta.value);
        fn(prefix + "bn1_running_mean", p.bn1_state.running_mean);
        fn(prefix + "bn1_running_var", p.bn1_state.running_var);
        fn(prefix + "bn2_gamma", p.bn2_gamma.value);
        fn(prefix + "bn2_beta", p.bn2_beta.value);
        fn(prefix + "bn2_running_mean", p.bn2_state.running_mean);
        fn(prefix + "bn2_running_var", p.bn2_state.running_var);
        fn(prefix + "res1_kernel", p.res1_kernel.value);
        fn(prefix + "res1_bias", p.res1_bias.value);
        fn(prefix + "res2_kernel", p.res2_kernel.value);
        fn(prefix + "res2_bias", p.res2_bias.value);
    }
    fn(std::string("classifier.weight"), state.classifier_weight.value);
    fn(std::string("classifier.bias"), state.classifier_bias.value);
}

} // namespace checkpoint_detail

inline std::vector<std::uint8_t> save_checkpoint(const ModelState& state,
                                                 const GraphTopology* topology = nullptr) {
    using namespace checkpoint_detail;
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 6);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, state.seed);
    put_string(out, network_spec_to_json(state.spec).dump());
    put<std::uint8_t>(out, topology ? 1 : 0);
    if (topology) put_string(out, topology_to_json(*topology).dump());

    std::uint64_t count = 0;
    auto& mutable_state = const_cast<ModelState&>(state);
    for_each_entry(mutable_state, [&count](const std::string&, Tensor&) { ++count; });
    put<std::uint64_t>(out, count);
    for_each_entry(mutable_state, [&out](const std::string& name, Tensor& t) {
        put_tensor(out, name, t);
    });
    return out;
}

struct LoadedCheckpoint {
    ModelState state;
    std::optional<GraphTopology> topology;
};

inline LoadedCheckpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
    using namespace checkpoint_detail;
    Reader r{bytes};
    r.need(6);
    if (std::memcmp(bytes.data(), kCheckpointMagic, 6) != 0)
        throw data_error("checkpoint: bad magic header");
    r.pos = 6;
    const std::uint32_t version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw data_error("checkpoint: unsupported version " + std::to_string(version));
    const std::uint64_t seed = r.get<std::uint64_t>();

    NetworkSpec spec;
    try {
        spec = network_spec_from_json(nlohmann::json::parse(r.get_string()));
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("checkpoint: bad spec json: ") + e.what());
    }

    LoadedCheckpoint loaded;
    if (r.get<std::uint8_t>() != 0) {
        try {
            loaded.topology = topology_from_json(nlohmann::json::parse(r.get_string()));
        } catch (const nlohmann::json::exception& e) {
            throw data_error(std::string("checkpoint: bad topology json: ") + e.what());
        }
    }

    loaded.state = build_model(spec, seed);
    std::uint64_t expected = 0;
    for_each_entry(loaded.state, [&expected](const std::string&, Tensor&) { ++expected; });
    const std::uint64_t count = r.get<std::uint64_t>();
    if (count != expected) throw data_error("checkpoint: entry count mismatch");
    for_each_entry(loaded.state, [&r](const std::string& name, Tensor& t) {
        r.get_tensor(name, t);
    });
    if (r.pos != bytes.size()) throw data_error("checkpoint: trailing bytes");
    return loaded;
}

inline void save_checkpoint_file(const std::string& path, const ModelState& state,
                                 const GraphTopology* topology = nullptr) {
    const auto bytes = save_checkpoint(state, topology);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("checkpoint: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw data_error("checkpoint: short write to '" + path + "'");
}

inline LoadedCheckpoint load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("checkpoint: cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return load_checkpoint(bytes);
}

} // namespace stbln
