#pragma once

// The ST-BLN model: a stack of spatio-temporal bilinear layers followed by
// global average pooling and a linear classifier. Each layer runs
//
//   r1 = conv1x1(input)                         residual 1
//   s  = ReLU( BN1(bilinear(input)) + r1 )
//   r2 = conv1x1(s)                             residual 2
//   y  = ReLU( BN2(temporal_conv(s)) + r2 )
//   out = dropout(y)            (train / mc modes only)
//
// The bilinear step keeps the edge count E constant, so U is E x E in every
// layer. Backward passes are hand-derived and accumulate into ParamTensors.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "stbln/ops.hpp"
#include "stbln/rng.hpp"
#include "stbln/tensor.hpp"

namespace stbln {

struct LayerSpec {
    std::size_t out_channels = 8;  // F^(l)
    std::size_t temporal_kernel = 3;
    double dropout_p = 0.2;

    void validate() const {
        if (out_channels < 1) throw std::invalid_argument("LayerSpec: out_channels must be >= 1");
        if (temporal_kernel % 2 == 0)
            throw std::invalid_argument("LayerSpec: temporal kernel must be odd");
        if (dropout_p < 0.0 || dropout_p >= 1.0)
            throw std::invalid_argument("LayerSpec: dropout_p must be in [0,1)");
    }
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::size_t edge_count = 0;
    std::size_t input_channels = 2;
    std::size_t class_count = 0;
    std::size_t input_frames = 0;

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("NetworkSpec: needs at least one layer");
        for (const auto& l : layers) l.validate();
        if (edge_count < 1) throw std::invalid_argument("NetworkSpec: edge_count must be >= 1");
        if (class_count < 2) throw std::invalid_argument("NetworkSpec: class_count must be >= 2");
        if (input_frames < 1) throw std::invalid_argument("NetworkSpec: input_frames must be >= 1");
        if (input_channels < 1)
            throw std::invalid_argument("NetworkSpec: input_channels must be >= 1");
    }
};

inline nlohmann::json network_spec_to_json(const NetworkSpec& spec) {
    nlohmann::json j;
    auto layers = nlohmann::json::array();
    for (const auto& l : spec.layers)
        layers.push_back({{"f", l.out_channels}, {"k", l.temporal_kernel}, {"p", l.dropout_p}});
    j["layers"] = std::move(layers);
    j["edge_count"] = spec.edge_count;
    j["classes"] = spec.class_count;
    j["frames"] = spec.input_frames;
    return j;
}

inline NetworkSpec network_spec_from_json(const nlohmann::json& j) {
    NetworkSpec spec;
    for (const auto& l : j.at("layers")) {
        LayerSpec ls;
        ls.out_channels = l.at("f").get<std::size_t>();
        ls.temporal_kernel = l.at("k").get<std::size_t>();
        ls.dropout_p = l.at("p").get<double>();
        spec.layers.push_back(ls);
    }
    spec.edge_count = j.at("edge_count").get<std::size_t>();
    spec.class_count = j.at("classes").get<std::size_t>();
    spec.input_frames = j.at("frames").get<std::size_t>();
    spec.validate();
    return spec;
}

struct LayerParams {
    ParamTensor u;               // [E, E]
    ParamTensor proj_weight;     // [F_out, F_in]
    ParamTensor proj_bias;       // [F_out]
    ParamTensor temporal_kernel; // [F_out, F_out, K, 1]
    ParamTensor temporal_bias;   // [F_out]
    ParamTensor bn1_gamma, bn1_beta;
    BatchNormState bn1_state;
    ParamTensor bn2_gamma, bn2_beta;
    BatchNormState bn2_state;
    ParamTensor res1_kernel; // [F_out, F_in, 1, 1]
    ParamTensor res1_bias;   // [F_out]
    ParamTensor res2_kernel; // [F_out, F_out, 1, 1]
    ParamTensor res2_bias;   // [F_out]
};

struct ModelState {
    NetworkSpec spec;
    std::vector<LayerParams> layers;
    ParamTensor classifier_weight; // [C, F_last]
    ParamTensor classifier_bias;   // [C]
    std::uint64_t seed = 0;

    std::vector<ParamTensor*> parameters() {
        std::vector<ParamTensor*> out;
        for (auto& l : layers) {
            out.push_back(&l.u);
            out.push_back(&l.proj_weight);
            out.push_back(&l.proj_bias);
            out.push_back(&l.temporal_kernel);
            out.push_back(&l.temporal_bias);
            out.push_back(&l.bn1_gamma);
            out.push_back(&l.bn1_beta);
            out.push_back(&l.bn2_gamma);
            out.push_back(&l.bn2_beta);
            out.push_back(&l.res1_kernel);
            out.push_back(&l.res1_bias);
            out.push_back(&l.res2_kernel);
            out.push_back(&l.res2_bias);
        }
        out.push_back(&classifier_weight);
        out.push_back(&classifier_bias);
        return out;
    }

    void zero_grad() {
        for (ParamTensor* p : parameters()) p->zero_grad();
    }
};

namespace model_detail {

inline void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

// Per-tensor derived streams keep initialization independent of the order
// layers are built or rebuilt in.
enum Slot : std::uint64_t {
    kU = 1,
    kProjW,
    kTemporalK,
    kRes1K,
    kRes2K,
    kClassifierW
};

inline std::size_t layer_in_channels(const NetworkSpec& spec, std::size_t layer) {
    return layer == 0 ? spec.input_channels : spec.layers[layer - 1].out_channels;
}

inline LayerParams make_layer(const NetworkSpec& spec, std::size_t layer, std::uint64_t seed) {
    const std::size_t f_in = layer_in_channels(spec, layer);
    const std::size_t f = spec.layers[layer].out_channels;
    const std::size_t k = spec.layers[layer].temporal_kernel;
    const std::size_t e = spec.edge_count;

    LayerParams p;
    p.u = ParamTensor({e, e});
    p.proj_weight = ParamTensor({f, f_in});
    p.proj_bias = ParamTensor({f});
    p.temporal_kernel = ParamTensor({f, f, k, 1});
    p.temporal_bias = ParamTensor({f});
    p.bn1_gamma = ParamTensor(Tensor::full({f}, 1.0));
    p.bn1_beta = ParamTensor({f});
    p.bn1_state = BatchNormState(f);
    p.bn2_gamma = ParamTensor(Tensor::full({f}, 1.0));
    p.bn2_beta = ParamTensor({f});
    p.bn2_state = BatchNormState(f);
    p.res1_kernel = ParamTensor({f, f_in, 1, 1});
    p.res1_bias = ParamTensor({f});
    p.res2_kernel = ParamTensor({f, f, 1, 1});
    p.res2_bias = ParamTensor({f});

    RngStream u_rng(derive_seed(seed, layer + 1, kU));
    glorot_fill(p.u.value, e, e, u_rng);
    RngStream w_rng(derive_seed(seed, layer + 1, kProjW));
    glorot_fill(p.proj_weight.value, f_in, f, w_rng);
    RngStream t_rng(derive_seed(seed, layer + 1, kTemporalK));
    glorot_fill(p.temporal_kernel.value, f * k, f * k, t_rng);
    RngStream r1_rng(derive_seed(seed, layer + 1, kRes1K));
    glorot_fill(p.res1_kernel.value, f_in, f, r1_rng);
    RngStream r2_rng(derive_seed(seed, layer + 1, kRes2K));
    glorot_fill(p.res2_kernel.value, f, f, r2_rng);
    return p;
}

} // namespace model_detail

inline void rebuild_classifier(ModelState& state) {
    const std::size_t f_last = state.spec.layers.back().out_channels;
    const std::size_t c = state.spec.class_count;
    state.classifier_weight = ParamTensor({c, f_last});
    state.classifier_bias = ParamTensor({c});
    RngStream rng(derive_seed(state.seed, 0, model_detail::kClassifierW,
                              state.spec.layers.size() * 1000 + f_last));
    model_detail::glorot_fill(state.classifier_weight.value, f_last, c, rng);
}

inline ModelState build_model(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    ModelState state;
    state.spec = spec;
    state.seed = seed;
    for (std::size_t l = 0; l < spec.layers.size(); ++l)
        state.layers.push_back(model_detail::make_layer(spec, l, seed));
    rebuild_classifier(state);
    return state;
}

// Exact count of scalar learnables; running stats and momentum buffers are
// excluded. Depends only on the spec.
inline std::size_t count_params(const NetworkSpec& spec) {
    const std::size_t e = spec.edge_count;
    std::size_t total = 0;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const std::size_t f_in = model_detail::layer_in_channels(spec, l);
        const std::size_t f = spec.layers[l].out_channels;
        const std::size_t k = spec.layers[l].temporal_kernel;
        total += e * e;             // U
        total += f * f_in + f;      // bilinear projection + bias
        total += f * f * k + f;     // temporal kernel + bias
        total += 4 * f;             // two batch norms, gamma + beta each
        total += f * f_in + f;      // residual 1
        total += f * f + f;         // residual 2
    }
    total += spec.class_count * spec.layers.back().out_channels + spec.class_count;
    return total;
}

inline std::size_t count_params(const ModelState& state) { return count_params(state.spec); }

enum class RunMode { train, eval, mc };

struct LayerCacheEntry {
    Tensor bl_out; // post-ReLU bilinear output (mask source)
    BatchNormCache bn1;
    Tensor s; // post first residual join
    BatchNormCache bn2;
    Tensor y; // post second residual join; only stored when dropout fired (else y == out)
    Tensor drop_mask;
    bool drop_active = false;
    Tensor out;
};

struct ForwardCache {
    Tensor input;
    std::vector<LayerCacheEntry> layers;
    Tensor pooled;
    Tensor logits;
};

// batch: [N, input_channels, T, E]. In train mode batch-norm running stats
// are updated; eval and mc modes freeze them. Dropout draws from `rng` in
// train and mc modes. `relu_margin`, when given, receives the smallest
// |pre-activation| seen at any ReLU, which gradient checks use to stay away
// from the kinks.
inline Tensor forward(ModelState& state, const Tensor& batch, RunMode mode,
                      RngStream* rng = nullptr, ForwardCache* cache = nullptr,
                      double* relu_margin = nullptr) {
    const NetworkSpec& spec = state.spec;
    require_rank(batch, 4, "forward");
    if (batch.shape[1] != spec.input_channels || batch.shape[2] != spec.input_frames ||
        batch.shape[3] != spec.edge_count)
        throw std::invalid_argument("forward: batch " + batch.shape_str() +
                                    " does not match the network spec");
    const bool drop_active = mode == RunMode::train || mode == RunMode::mc;
    if (drop_active && rng == nullptr) {
        for (const auto& l : spec.layers)
            if (l.dropout_p > 0.0)
                throw std::invalid_argument("forward: train/mc modes need an rng for dropout");
    }
    const bool training_bn = mode == RunMode::train;
    if (relu_margin) *relu_margin = 1e300;

    auto track_margin = [&](const Tensor& pre_a, const Tensor& pre_b) {
        if (!relu_margin) return;
        for (std::size_t i = 0; i < pre_a.numel(); ++i) {
            const double v = std::abs(pre_a.data[i] + pre_b.data[i]);
            if (v < *relu_margin) *relu_margin = v;
        }
    };

    if (cache) {
        cache->input = batch;
        cache->layers.assign(spec.layers.size(), {});
    }

    Tensor x_local;
    const Tensor* cur = &batch;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        LayerParams& p = state.layers[l];
        const double drop_p = spec.layers[l].dropout_p;

        Tensor r1 = temporal_conv(*cur, p.res1_kernel.value, p.res1_bias.value);
        Tensor bl = bilinear_forward(*cur, p.u.value, p.proj_weight.value, &p.proj_bias.value,
                                     relu_margin);
        Tensor bn1 = batch_norm(bl, p.bn1_gamma.value, p.bn1_beta.value, p.bn1_state,
                                training_bn, cache ? &cache->layers[l].bn1 : nullptr);
        track_margin(bn1, r1);
        Tensor s = relu_sum(bn1, r1);

        Tensor r2 = temporal_conv(s, p.res2_kernel.value, p.res2_bias.value);
        Tensor tc = temporal_conv(s, p.temporal_kernel.value, p.temporal_bias.value);
        Tensor bn2 = batch_norm(tc, p.bn2_gamma.value, p.bn2_beta.value, p.bn2_state,
                                training_bn, cache ? &cache->layers[l].bn2 : nullptr);
        track_margin(bn2, r2);
        Tensor y = relu_sum(bn2, r2);

        const bool layer_drop = drop_active && drop_p > 0.0;
        Tensor out;
        if (layer_drop) {
            auto d = dropout(y, drop_p, *rng, true);
            out = std::move(d.out);
            if (cache) cache->layers[l].drop_mask = std::move(d.mask);
        } else {
            out = std::move(y);
        }
        if (cache) {
            LayerCacheEntry& entry = cache->layers[l];
            entry.bl_out = std::move(bl);
            entry.s = std::move(s);
            if (layer_drop) entry.y = std::move(y);
            entry.drop_active = layer_drop;
            entry.out = std::move(out);
            cur = &entry.out;
        } else {
            x_local = std::move(out);
            cur = &x_local;
        }
    }

    Tensor pooled = global_avg_pool(*cur);
    Tensor logits =
        linear_classify(pooled, state.classifier_weight.value, state.classifier_bias.value);
    if (cache) {
        cache->pooled = pooled;
        cache->logits = logits;
    }
    return logits;
}

// Accumulates parameter gradients for a train-mode forward captured in
// `cache`. grad_logits is typically the softmax cross-entropy gradient.
inline void backward(ModelState& state, const ForwardCache& cache, const Tensor& grad_logits) {
    const NetworkSpec& spec = state.spec;
    const std::size_t n_layers = spec.layers.size();
    if (cache.layers.size() != n_layers)
        throw std::invalid_argument("backward: cache does not match the model");

    Tensor grad_pooled(cache.pooled.shape);
    linear_classify_backward(cache.pooled, state.classifier_weight.value, grad_logits,
                             &grad_pooled, state.classifier_weight.grad,
                             state.classifier_bias.grad);

    const Tensor& last_out = cache.layers.back().out;
    Tensor grad_out(last_out.shape);
    global_avg_pool_backward(grad_pooled, last_out, grad_out);

    for (std::size_t li = n_layers; li-- > 0;) {
        LayerParams& p = state.layers[li];
        const LayerCacheEntry& c = cache.layers[li];
        const Tensor& input = li == 0 ? cache.input : cache.layers[li - 1].out;
        const double drop_p = spec.layers[li].dropout_p;
        const Tensor& y_src = c.drop_active ? c.y : c.out; // mask source for the second ReLU

        // fused dropout + ReLU(y) backward, in place on grad_out
        if (c.drop_active) {
            const double scale = 1.0 / (1.0 - drop_p);
            for (std::size_t i = 0; i < grad_out.numel(); ++i)
                grad_out.data[i] = y_src.data[i] > 0.0
                                       ? grad_out.data[i] * c.drop_mask.data[i] * scale
                                       : 0.0;
        } else {
            for (std::size_t i = 0; i < grad_out.numel(); ++i)
                if (y_src.data[i] <= 0.0) grad_out.data[i] = 0.0;
        }
        const Tensor& grad_y_pre = grad_out;

        Tensor grad_s(c.s.shape);
        temporal_conv_backward(c.s, p.res2_kernel.value, grad_y_pre, &grad_s,
                               p.res2_kernel.grad, p.res2_bias.grad);

        Tensor grad_tc(grad_y_pre.shape);
        batch_norm_backward(grad_y_pre, c.bn2, p.bn2_gamma.value, grad_tc, p.bn2_gamma.grad,
                            p.bn2_beta.grad);
        temporal_conv_backward(c.s, p.temporal_kernel.value, grad_tc, &grad_s,
                               p.temporal_kernel.grad, p.temporal_bias.grad);

        // s = ReLU(bn1 + r1), masked in place
        for (std::size_t i = 0; i < grad_s.numel(); ++i)
            if (c.s.data[i] <= 0.0) grad_s.data[i] = 0.0;
        const Tensor& grad_s_pre = grad_s;

        Tensor grad_input(input.shape);
        temporal_conv_backward(input, p.res1_kernel.value, grad_s_pre, &grad_input,
                               p.res1_kernel.grad, p.res1_bias.grad);

        Tensor grad_bl(c.bl_out.shape);
        batch_norm_backward(grad_s_pre, c.bn1, p.bn1_gamma.value, grad_bl, p.bn1_gamma.grad,
                            p.bn1_beta.grad);
        bilinear_backward(input, p.u.value, p.proj_weight.value, c.bl_out, grad_bl,
                          &grad_input, p.u.grad, p.proj_weight.grad, &p.proj_bias.grad);

        grad_out = std::move(grad_input);
    }
}

// ---------------------------------------------------------------------------
// Topology mutation used by the progressive search. Existing weights are
// preserved slice-for-slice; newly exposed slices are freshly seeded.
// ---------------------------------------------------------------------------

namespace model_detail {

// Copy the overlapping region of `old_t` into a fresh tensor of `shape`,
// drawing everything outside the overlap from `rng` within +-bound.
inline Tensor grow_tensor(const Tensor& old_t, std::vector<std::size_t> shape, double bound,
                          RngStream& rng) {
    Tensor out(std::move(shape));
    std::vector<std::size_t> idx(out.rank(), 0);
    for (std::size_t flat = 0; flat < out.numel(); ++flat) {
        std::size_t rem = flat;
        bool inside = true;
        std::size_t old_flat = 0;
        for (std::size_t d = 0; d < out.rank(); ++d) {
            const std::size_t stride = std::accumulate(out.shape.begin() + d + 1,
                                                       out.shape.end(), std::size_t{1},
                                                       std::multiplies<>());
            idx[d] = rem / stride;
            rem %= stride;
            if (idx[d] >= old_t.shape[d]) inside = false;
        }
        if (inside) {
            for (std::size_t d = 0; d < out.rank(); ++d) {
                const std::size_t stride = std::accumulate(old_t.shape.begin() + d + 1,
                                                           old_t.shape.end(), std::size_t{1},
                                                           std::multiplies<>());
                old_flat += idx[d] * stride;
            }
            out.data[flat] = old_t.data[old_flat];
        } else {
            out.data[flat] = bound > 0.0 ? rng.uniform(-bound, bound) : 0.0;
        }
    }
    return out;
}

inline ParamTensor grow_param(const ParamTensor& old_p, std::vector<std::size_t> shape,
                              double bound, RngStream& rng) {
    ParamTensor out(shape);
    out.value = grow_tensor(old_p.value, shape, bound, rng);
    out.momentum = grow_tensor(old_p.momentum, shape, 0.0, rng); // new slices start at rest
    return out;
}

} // namespace model_detail

// Widen the last layer's output channels to `new_width`. U is untouched
// (it is edge-sized); every channel-indexed tensor keeps its old slices
// bit-identical. The classifier is rebuilt from scratch because its input
// width changed.
inline void widen_last_layer(ModelState& state, std::size_t new_width, RngStream& rng) {
    if (state.layers.empty()) throw std::invalid_argument("widen_last_layer: no layers");
    const std::size_t li = state.layers.size() - 1;
    LayerSpec& ls = state.spec.layers[li];
    if (new_width <= ls.out_channels)
        throw std::invalid_argument("widen_last_layer: new width must exceed current width");
    const std::size_t f_in = model_detail::layer_in_channels(state.spec, li);
    const std::size_t f = new_width;
    const std::size_t k = ls.temporal_kernel;
    LayerParams& p = state.layers[li];

    const double proj_bound = std::sqrt(6.0 / static_cast<double>(f_in + f));
    const double temp_bound = std::sqrt(6.0 / static_cast<double>(f * k + f * k));
    const double res2_bound = std::sqrt(6.0 / static_cast<double>(f + f));

    p.proj_weight = model_detail::grow_param(p.proj_weight, {f, f_in}, proj_bound, rng);
    p.proj_bias = model_detail::grow_param(p.proj_bias, {f}, 0.0, rng);
    p.temporal_kernel =
        model_detail::grow_param(p.temporal_kernel, {f, f, k, 1}, temp_bound, rng);
    p.temporal_bias = model_detail::grow_param(p.temporal_bias, {f}, 0.0, rng);
    p.res1_kernel = model_detail::grow_param(p.res1_kernel, {f, f_in, 1, 1}, proj_bound, rng);
    p.res1_bias = model_detail::grow_param(p.res1_bias, {f}, 0.0, rng);
    p.res2_kernel = model_detail::grow_param(p.res2_kernel, {f, f, 1, 1}, res2_bound, rng);
    p.res2_bias = model_detail::grow_param(p.res2_bias, {f}, 0.0, rng);

    auto grow_bn = [&](ParamTensor& gamma, ParamTensor& beta, BatchNormState& st) {
        ParamTensor g({f}), b({f});
        BatchNormState ns(f);
        for (std::size_t i = 0; i < f; ++i) {
            g.value.data[i] = i < ls.out_channels ? gamma.value.data[i] : 1.0;
            b.value.data[i] = i < ls.out_channels ? beta.value.data[i] : 0.0;
            g.momentum.data[i] = i < ls.out_channels ? gamma.momentum.data[i] : 0.0;
            b.momentum.data[i] = i < ls.out_channels ? beta.momentum.data[i] : 0.0;
            ns.running_mean.data[i] = i < ls.out_channels ? st.running_mean.data[i] : 0.0;
            ns.running_var.data[i] = i < ls.out_channels ? st.running_var.data[i] : 1.0;
        }
        gamma = std::move(g);
        beta = std::move(b);
        st = std::move(ns);
    };
    grow_bn(p.bn1_gamma, p.bn1_beta, p.bn1_state);
    grow_bn(p.bn2_gamma, p.bn2_beta, p.bn2_state);

    ls.out_channels = new_width;
    rebuild_classifier(state);
}

// Append a fresh layer of width `width` on top; previous layers keep their
// fine-tuned weights. The classifier is rebuilt for the new feature width.
inline void append_layer(ModelState& state, std::size_t width, std::size_t temporal_kernel,
                         double dropout_p, RngStream& rng) {
    LayerSpec ls;
    ls.out_channels = width;
    ls.temporal_kernel = temporal_kernel;
    ls.dropout_p = dropout_p;
    ls.validate();
    state.spec.layers.push_back(ls);
    const std::size_t li = state.spec.layers.size() - 1;
    // fresh-seed the new layer from the caller's stream so repeated
    // append/remove cycles do not repeat draws
    const std::uint64_t layer_seed = rng.next_u64();
    state.layers.push_back(model_detail::make_layer(state.spec, li, layer_seed));
    rebuild_classifier(state);
}

inline void remove_last_layer(ModelState& state) {
    if (state.spec.layers.size() <= 1)
        throw std::invalid_argument("remove_last_layer: cannot drop the only layer");
    state.spec.layers.pop_back();
    state.layers.pop_back();
    rebuild_classifier(state);
}

} // namespace stbln
