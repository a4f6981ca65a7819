#pragma once

// Mini-batch SGD training over edge-feature tensors, plus eval-mode
// accuracy. Shuffling and dropout streams are derived from the config seed,
// so a run is a pure function of (model, data, config).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "stbln/errors.hpp"
#include "stbln/model.hpp"
#include "stbln/ops.hpp"
#include "stbln/rng.hpp"
#include "stbln/tensor.hpp"

namespace stbln {

struct TensorDataset {
    std::vector<Tensor> inputs; // each [2, T, E]
    std::vector<int> labels;

    std::size_t size() const { return inputs.size(); }

    void validate() const {
        if (inputs.size() != labels.size())
            throw std::invalid_argument("TensorDataset: inputs/labels size mismatch");
    }
};

inline Tensor make_batch(const TensorDataset& data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
    const Tensor& first = data.inputs[indices[0]];
    Tensor batch({indices.size(), first.shape[0], first.shape[1], first.shape[2]});
    const std::size_t item = first.numel();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const Tensor& t = data.inputs[indices[i]];
        if (!t.same_shape(first))
            throw std::invalid_argument("make_batch: inconsistent tensor shapes");
        std::copy(t.data.begin(), t.data.end(), batch.data.begin() + i * item);
    }
    return batch;
}

struct TrainLog {
    std::vector<double> epoch_loss; // mean cross-entropy per epoch
    double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

// Callback runs after every epoch; it may snapshot the state (e.g. to keep
// a last-good checkpoint).
using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

namespace train_detail {
inline constexpr std::uint64_t kShuffleTag = 0x5348; // "SH"
inline constexpr std::uint64_t kDropoutTag = 0x4452; // "DR"
} // namespace train_detail

inline TrainLog train_model(ModelState& state, const TensorDataset& data,
                            const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    data.validate();
    if (data.size() == 0) throw std::invalid_argument("train_model: empty dataset");

    std::vector<ParamTensor*> params = state.parameters();
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainLog log;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        RngStream shuffle_rng(derive_seed(cfg.seed, train_detail::kShuffleTag, epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            std::span<const std::size_t> idx(order.data() + start, count);
            Tensor batch = make_batch(data, idx);
            std::vector<int> labels(count);
            for (std::size_t i = 0; i < count; ++i) labels[i] = data.labels[idx[i]];

            RngStream drop_rng(
                derive_seed(cfg.seed, train_detail::kDropoutTag, epoch, batch_index));
            ForwardCache cache;
            Tensor logits = forward(state, batch, RunMode::train, &drop_rng, &cache);
            auto ce = softmax_cross_entropy(logits, labels);
            if (!std::isfinite(ce.loss))
                throw numeric_error("train_model: non-finite loss at epoch " +
                                    std::to_string(epoch));
            loss_sum += ce.loss * static_cast<double>(count);
            backward(state, cache, ce.grad);
            sgd_step(params, cfg);
            ++batch_index;
        }
        const double mean_loss = loss_sum / static_cast<double>(order.size());
        log.epoch_loss.push_back(mean_loss);
        if (on_epoch) on_epoch(epoch, mean_loss);
    }
    return log;
}

inline std::vector<int> predict_classes(ModelState& state, const TensorDataset& data,
                                        std::size_t chunk = 64) {
    std::vector<int> out;
    out.reserve(data.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t count = std::min(chunk, data.size() - start);
        idx.resize(count);
        std::iota(idx.begin(), idx.end(), start);
        Tensor batch = make_batch(data, idx);
        Tensor logits = forward(state, batch, RunMode::eval);
        const std::size_t c = logits.shape[1];
        for (std::size_t n = 0; n < count; ++n) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < c; ++j)
                if (logits(n, j) > logits(n, best)) best = j;
            out.push_back(static_cast<int>(best));
        }
    }
    return out;
}

inline double accuracy(ModelState& state, const TensorDataset& data) {
    if (data.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
    const std::vector<int> pred = predict_classes(state, data);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (pred[i] == data.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

inline double mean_eval_loss(ModelState& state, const TensorDataset& data,
                             std::size_t chunk = 64) {
    if (data.size() == 0) throw std::invalid_argument("mean_eval_loss: empty dataset");
    double loss_sum = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t count = std::min(chunk, data.size() - start);
        idx.resize(count);
        std::iota(idx.begin(), idx.end(), start);
        Tensor batch = make_batch(data, idx);
        std::vector<int> labels(count);
        for (std::size_t i = 0; i < count; ++i) labels[i] = data.labels[start + i];
        Tensor logits = forward(state, batch, RunMode::eval);
        loss_sum += softmax_cross_entropy(logits, labels).loss * static_cast<double>(count);
    }
    return loss_sum / static_cast<double>(data.size());
}

} // namespace stbln
