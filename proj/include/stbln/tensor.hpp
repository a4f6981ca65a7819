#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stbln {

// 64-byte aligned storage keeps vectorized kernels on the same code path
// for every allocation, which makes reductions bit-reproducible run to run.
template <class T> struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <class U> AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(alignment)));
    }
    void deallocate(T* p, std::size_t) noexcept {
        ::operator delete(p, std::align_val_t(alignment));
    }
    template <class U> bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

// Dense row-major tensor of 64-bit reals. The last axis is contiguous.
struct Tensor {
    AlignedBuffer data;
    std::vector<std::size_t> shape;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : data(product(s), fill), shape(std::move(s)) {}

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s), 0.0); }

    static Tensor full(std::vector<std::size_t> s, double v) { return Tensor(std::move(s), v); }

    static std::size_t product(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    std::size_t dim(std::size_t axis) const {
        assert(axis < shape.size());
        return shape[axis];
    }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& operator()(std::size_t i) {
        assert(rank() == 1 && i < shape[0]);
        return data[i];
    }
    double operator()(std::size_t i) const {
        assert(rank() == 1 && i < shape[0]);
        return data[i];
    }
    double& operator()(std::size_t i, std::size_t j) {
        assert(rank() == 2 && i < shape[0] && j < shape[1]);
        return data[i * shape[1] + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        assert(rank() == 2 && i < shape[0] && j < shape[1]);
        return data[i * shape[1] + j];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        assert(rank() == 3 && i < shape[0] && j < shape[1] && k < shape[2]);
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        assert(rank() == 3 && i < shape[0] && j < shape[1] && k < shape[2]);
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        assert(rank() == 4 && i < shape[0] && j < shape[1] && k < shape[2] && l < shape[3]);
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        assert(rank() == 4 && i < shape[0] && j < shape[1] && k < shape[2] && l < shape[3]);
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) os << 'x';
            os << shape[i];
        }
        os << ']';
        return os.str();
    }
};

inline void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                          const char* what) {
    if (t.shape != shape)
        throw std::invalid_argument(std::string(what) + ": unexpected shape " + t.shape_str());
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank)
        throw std::invalid_argument(std::string(what) + ": expected rank " +
                                    std::to_string(rank) + ", got " + t.shape_str());
}

// Learnable tensor: value plus gradient and SGD momentum buffer, all
// shape-identical.
struct ParamTensor {
    Tensor value;
    Tensor grad;
    Tensor momentum;

    ParamTensor() = default;
    explicit ParamTensor(std::vector<std::size_t> shape)
        : value(shape), grad(shape), momentum(std::move(shape)) {}
    explicit ParamTensor(Tensor v) : value(std::move(v)) {
        grad = Tensor(value.shape);
        momentum = Tensor(value.shape);
    }

    void zero_grad() { grad.fill(0.0); }
};

struct TrainConfig {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::size_t epochs = 400;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0))
            throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
        if (momentum < 0.0 || momentum >= 1.0)
            throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
        if (weight_decay < 0.0)
            throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
        if (batch_size == 0)
            throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    }
};

} // namespace stbln
