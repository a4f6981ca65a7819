#pragma once

// Forward and manually derived backward passes for every primitive the
// spatio-temporal bilinear layer needs. All gradients are accumulated
// (+=) into the provided buffers so batch loops can reuse them.
//
// Tensor layouts are row-major with the edge axis contiguous:
//   activations  [F,T,E] or [N,F,T,E]
//   bilinear     U [E_out,E_in], projection W [F_out,F_in]
//   temporal     kernel [F_out,F_in,K,1], bias [F_out]
// The hot contractions are dispatched to Eigen; everything else is
// plain loops.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stbln/rng.hpp"
#include "stbln/tensor.hpp"

namespace stbln {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

namespace detail {

struct ActShape {
    std::size_t n, f, t, e;
    bool batched;
};

inline ActShape activation_shape(const Tensor& h, const char* what) {
    if (h.rank() == 3) return {1, h.shape[0], h.shape[1], h.shape[2], false};
    if (h.rank() == 4) return {h.shape[0], h.shape[1], h.shape[2], h.shape[3], true};
    throw std::invalid_argument(std::string(what) + ": activation must have rank 3 or 4, got " +
                                h.shape_str());
}

inline std::vector<std::size_t> with_channels(const ActShape& s, std::size_t f,
                                              std::size_t e) {
    if (s.batched) return {s.n, f, s.t, e};
    return {f, s.t, e};
}

} // namespace detail

// --------------------------------------------------------------------------
// Bilinear transform: out = ReLU(U * H * W^T + bias), contracting the edge
// axis with U and the channel axis with W. The two-stage evaluation
// (channels first, then edges) keeps the cost at F_out*F_in*T*E + F_out*T*E^2
// instead of the naive F_out*F_in*T*E^2*E.
// --------------------------------------------------------------------------

// `min_abs_pre`, when given, is lowered to the smallest |pre-activation|
// encountered; gradient checks use it to resample inputs near ReLU kinks.
inline Tensor bilinear_forward(const Tensor& h, const Tensor& u, const Tensor& w,
                               const Tensor* bias = nullptr,
                               double* min_abs_pre = nullptr) {
    const auto s = detail::activation_shape(h, "bilinear_forward");
    require_rank(u, 2, "bilinear_forward: U");
    require_rank(w, 2, "bilinear_forward: W");
    const std::size_t e_out = u.shape[0], e_in = u.shape[1];
    const std::size_t f_out = w.shape[0], f_in = w.shape[1];
    if (s.f != f_in || s.e != e_in)
        throw std::invalid_argument("bilinear_forward: input " + h.shape_str() +
                                    " does not match U " + u.shape_str() + " / W " +
                                    w.shape_str());
    if (bias && bias->shape != std::vector<std::size_t>{f_out})
        throw std::invalid_argument("bilinear_forward: bias shape mismatch");

    Tensor out(detail::with_channels(s, f_out, e_out));
    ECMap u_m(u.data.data(), static_cast<Eigen::Index>(e_out), static_cast<Eigen::Index>(e_in));
    ECMap w_m(w.data.data(), static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(f_in));

    EMat tmp(static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(s.t * e_in));
    for (std::size_t n = 0; n < s.n; ++n) {
        ECMap h_m(h.data.data() + n * s.f * s.t * s.e, static_cast<Eigen::Index>(f_in),
                  static_cast<Eigen::Index>(s.t * e_in));
        EMap out_m(out.data.data() + n * f_out * s.t * e_out, static_cast<Eigen::Index>(f_out),
                   static_cast<Eigen::Index>(s.t * e_out));
        tmp.noalias() = w_m * h_m;
        for (std::size_t t = 0; t < s.t; ++t) {
            out_m.middleCols(static_cast<Eigen::Index>(t * e_out),
                             static_cast<Eigen::Index>(e_out))
                .noalias() = tmp.middleCols(static_cast<Eigen::Index>(t * e_in),
                                            static_cast<Eigen::Index>(e_in)) *
                             u_m.transpose();
        }
        for (std::size_t fo = 0; fo < f_out; ++fo) {
            double* row = out.data.data() + (n * f_out + fo) * s.t * e_out;
            const double b = bias ? bias->data[fo] : 0.0;
            for (std::size_t i = 0; i < s.t * e_out; ++i) {
                const double v = row[i] + b;
                if (min_abs_pre && std::abs(v) < *min_abs_pre) *min_abs_pre = std::abs(v);
                row[i] = v > 0.0 ? v : 0.0;
            }
        }
    }
    return out;
}

// `out` must be the tensor returned by the matching forward call; its sign
// pattern encodes the ReLU mask.
inline void bilinear_backward(const Tensor& h, const Tensor& u, const Tensor& w,
                              const Tensor& out, const Tensor& grad_out, Tensor* grad_h,
                              Tensor& grad_u, Tensor& grad_w, Tensor* grad_bias = nullptr) {
    const auto s = detail::activation_shape(h, "bilinear_backward");
    const std::size_t e_out = u.shape[0], e_in = u.shape[1];
    const std::size_t f_out = w.shape[0], f_in = w.shape[1];
    if (!grad_out.same_shape(out))
        throw std::invalid_argument("bilinear_backward: grad_out/out shape mismatch");
    if (grad_h && !grad_h->same_shape(h))
        throw std::invalid_argument("bilinear_backward: grad_h shape mismatch");

    ECMap u_m(u.data.data(), static_cast<Eigen::Index>(e_out), static_cast<Eigen::Index>(e_in));
    ECMap w_m(w.data.data(), static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(f_in));
    EMap gu_m(grad_u.data.data(), static_cast<Eigen::Index>(e_out),
              static_cast<Eigen::Index>(e_in));
    EMap gw_m(grad_w.data.data(), static_cast<Eigen::Index>(f_out),
              static_cast<Eigen::Index>(f_in));

    EMat tmp(static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(s.t * e_in));
    EMat dtmp(static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(s.t * e_in));
    EMat dpre(static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(s.t * e_out));

    for (std::size_t n = 0; n < s.n; ++n) {
        const double* out_p = out.data.data() + n * f_out * s.t * e_out;
        const double* go_p = grad_out.data.data() + n * f_out * s.t * e_out;
        for (std::size_t i = 0; i < f_out * s.t * e_out; ++i)
            dpre.data()[i] = out_p[i] > 0.0 ? go_p[i] : 0.0;

        ECMap h_m(h.data.data() + n * f_in * s.t * e_in, static_cast<Eigen::Index>(f_in),
                  static_cast<Eigen::Index>(s.t * e_in));
        tmp.noalias() = w_m * h_m;

        for (std::size_t t = 0; t < s.t; ++t) {
            auto dpre_t = dpre.middleCols(static_cast<Eigen::Index>(t * e_out),
                                          static_cast<Eigen::Index>(e_out));
            auto tmp_t = tmp.middleCols(static_cast<Eigen::Index>(t * e_in),
                                        static_cast<Eigen::Index>(e_in));
            gu_m.noalias() += dpre_t.transpose() * tmp_t;
            dtmp.middleCols(static_cast<Eigen::Index>(t * e_in),
                            static_cast<Eigen::Index>(e_in))
                .noalias() = dpre_t * u_m;
        }
        gw_m.noalias() += dtmp * h_m.transpose();
        if (grad_h) {
            EMap gh_m(grad_h->data.data() + n * f_in * s.t * e_in,
                      static_cast<Eigen::Index>(f_in), static_cast<Eigen::Index>(s.t * e_in));
            gh_m.noalias() += w_m.transpose() * dtmp;
        }
        if (grad_bias) {
            for (std::size_t fo = 0; fo < f_out; ++fo)
                grad_bias->data[fo] += dpre.row(static_cast<Eigen::Index>(fo)).sum();
        }
    }
}

// --------------------------------------------------------------------------
// Temporal convolution: K x 1 kernel along the frame axis, zero padding
// (K-1)/2 on both sides, stride 1. T and E are preserved.
// --------------------------------------------------------------------------

inline void check_temporal_kernel(const Tensor& kernel, std::size_t f_out, std::size_t f_in) {
    if (kernel.rank() != 4 || kernel.shape[3] != 1)
        throw std::invalid_argument("temporal_conv: kernel must have shape [F_out,F_in,K,1]");
    if (kernel.shape[0] != f_out || kernel.shape[1] != f_in)
        throw std::invalid_argument("temporal_conv: kernel channels mismatch");
    if (kernel.shape[2] % 2 == 0)
        throw std::invalid_argument("temporal_conv: kernel size K must be odd");
}

// Each kernel tap is one strided [F_out x F_in] x [F_in x T_valid*E] matrix
// product per sample: the t-shifted slab of a sample is a row-strided matrix
// over channels, which Eigen maps without copying.
inline Tensor temporal_conv(const Tensor& h, const Tensor& kernel, const Tensor& bias) {
    const auto s = detail::activation_shape(h, "temporal_conv");
    if (kernel.rank() != 4 || kernel.shape[3] != 1)
        throw std::invalid_argument("temporal_conv: kernel must have shape [F_out,F_in,K,1]");
    const std::size_t f_out = kernel.shape[0], f_in = kernel.shape[1], k = kernel.shape[2];
    if (k % 2 == 0) throw std::invalid_argument("temporal_conv: kernel size K must be odd");
    if (s.f != f_in)
        throw std::invalid_argument("temporal_conv: input channels mismatch");
    if (bias.shape != std::vector<std::size_t>{f_out})
        throw std::invalid_argument("temporal_conv: bias shape mismatch");

    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::ptrdiff_t n_t = static_cast<std::ptrdiff_t>(s.t);
    Tensor out(detail::with_channels(s, f_out, s.e));
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t fo = 0; fo < f_out; ++fo) {
            double* row = out.data.data() + (n * f_out + fo) * s.t * s.e;
            const double b = bias.data[fo];
            for (std::size_t i = 0; i < s.t * s.e; ++i) row[i] = b;
        }

    using StrideT = Eigen::OuterStride<>;
    const Eigen::Index plane = static_cast<Eigen::Index>(s.t * s.e);
    // kernel tap kk as a dense [F_out x F_in] matrix (stride K over fi)
    EMat tap(static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(f_in));
    for (std::size_t kk = 0; kk < k; ++kk) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - pad;
        const std::ptrdiff_t t_lo = std::max<std::ptrdiff_t>(0, -off);
        const std::ptrdiff_t t_hi = std::min(n_t, n_t - off);
        if (t_lo >= t_hi) continue;
        const Eigen::Index cols = static_cast<Eigen::Index>((t_hi - t_lo) * s.e);
        for (std::size_t fo = 0; fo < f_out; ++fo)
            for (std::size_t fi = 0; fi < f_in; ++fi)
                tap(static_cast<Eigen::Index>(fo), static_cast<Eigen::Index>(fi)) =
                    kernel(fo, fi, kk, 0);
        for (std::size_t n = 0; n < s.n; ++n) {
            Eigen::Map<const EMat, 0, StrideT> in_m(
                h.data.data() + n * f_in * s.t * s.e +
                    static_cast<std::size_t>(t_lo + off) * s.e,
                static_cast<Eigen::Index>(f_in), cols, StrideT(plane));
            Eigen::Map<EMat, 0, StrideT> out_m(
                out.data.data() + n * f_out * s.t * s.e + static_cast<std::size_t>(t_lo) * s.e,
                static_cast<Eigen::Index>(f_out), cols, StrideT(plane));
            out_m.noalias() += tap * in_m;
        }
    }
    return out;
}

inline void temporal_conv_backward(const Tensor& h, const Tensor& kernel,
                                   const Tensor& grad_out, Tensor* grad_h,
                                   Tensor& grad_kernel, Tensor& grad_bias) {
    const auto s = detail::activation_shape(h, "temporal_conv_backward");
    const std::size_t f_out = kernel.shape[0], f_in = kernel.shape[1], k = kernel.shape[2];
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const std::ptrdiff_t n_t = static_cast<std::ptrdiff_t>(s.t);

    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t fo = 0; fo < f_out; ++fo) {
            const double* row = grad_out.data.data() + (n * f_out + fo) * s.t * s.e;
            double acc = 0.0;
            for (std::size_t i = 0; i < s.t * s.e; ++i) acc += row[i];
            grad_bias.data[fo] += acc;
        }

    using StrideT = Eigen::OuterStride<>;
    const Eigen::Index plane = static_cast<Eigen::Index>(s.t * s.e);
    EMat tap(static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(f_in));
    EMat dtap(static_cast<Eigen::Index>(f_out), static_cast<Eigen::Index>(f_in));
    for (std::size_t kk = 0; kk < k; ++kk) {
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - pad;
        const std::ptrdiff_t t_lo = std::max<std::ptrdiff_t>(0, -off);
        const std::ptrdiff_t t_hi = std::min(n_t, n_t - off);
        if (t_lo >= t_hi) continue;
        const Eigen::Index cols = static_cast<Eigen::Index>((t_hi - t_lo) * s.e);
        for (std::size_t fo = 0; fo < f_out; ++fo)
            for (std::size_t fi = 0; fi < f_in; ++fi)
                tap(static_cast<Eigen::Index>(fo), static_cast<Eigen::Index>(fi)) =
                    kernel(fo, fi, kk, 0);
        dtap.setZero();
        for (std::size_t n = 0; n < s.n; ++n) {
            Eigen::Map<const EMat, 0, StrideT> in_m(
                h.data.data() + n * f_in * s.t * s.e +
                    static_cast<std::size_t>(t_lo + off) * s.e,
                static_cast<Eigen::Index>(f_in), cols, StrideT(plane));
            Eigen::Map<const EMat, 0, StrideT> go_m(
                grad_out.data.data() + n * f_out * s.t * s.e +
                    static_cast<std::size_t>(t_lo) * s.e,
                static_cast<Eigen::Index>(f_out), cols, StrideT(plane));
            dtap.noalias() += go_m * in_m.transpose();
            if (grad_h) {
                Eigen::Map<EMat, 0, StrideT> gh_m(
                    grad_h->data.data() + n * f_in * s.t * s.e +
                        static_cast<std::size_t>(t_lo + off) * s.e,
                    static_cast<Eigen::Index>(f_in), cols, StrideT(plane));
                gh_m.noalias() += tap.transpose() * go_m;
            }
        }
        for (std::size_t fo = 0; fo < f_out; ++fo)
            for (std::size_t fi = 0; fi < f_in; ++fi)
                grad_kernel(fo, fi, kk, 0) +=
                    dtap(static_cast<Eigen::Index>(fo), static_cast<Eigen::Index>(fi));
    }
}

// --------------------------------------------------------------------------
// Batch normalization over the N, T, E axes, per channel.
// --------------------------------------------------------------------------

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct BatchNormState {
    Tensor running_mean; // [F]
    Tensor running_var;  // [F]

    BatchNormState() = default;
    explicit BatchNormState(std::size_t channels)
        : running_mean({channels}, 0.0), running_var({channels}, 1.0) {}
};

struct BatchNormCache {
    Tensor xhat;
    std::vector<double> inv_std;
};

inline Tensor batch_norm(const Tensor& h, const Tensor& gamma, const Tensor& beta,
                         BatchNormState& state, bool training,
                         BatchNormCache* cache = nullptr) {
    require_rank(h, 4, "batch_norm");
    const std::size_t n = h.shape[0], f = h.shape[1], t = h.shape[2], e = h.shape[3];
    if (n == 0) throw std::invalid_argument("batch_norm: zero-size batch");
    if (gamma.shape != std::vector<std::size_t>{f} || beta.shape != std::vector<std::size_t>{f})
        throw std::invalid_argument("batch_norm: gamma/beta shape mismatch");
    if (state.running_mean.shape != std::vector<std::size_t>{f})
        throw std::invalid_argument("batch_norm: running stats shape mismatch");

    Tensor out(h.shape);
    const std::size_t plane = t * e;
    const std::size_t cnt = n * plane;

    using AMap = Eigen::Map<Eigen::ArrayXd>;
    using CAMap = Eigen::Map<const Eigen::ArrayXd>;
    const Eigen::Index pl = static_cast<Eigen::Index>(plane);

    if (!training) {
        for (std::size_t ch = 0; ch < f; ++ch) {
            const double inv = 1.0 / std::sqrt(state.running_var.data[ch] + kBatchNormEpsilon);
            const double mu = state.running_mean.data[ch];
            const double g = gamma.data[ch], b = beta.data[ch];
            for (std::size_t nn = 0; nn < n; ++nn) {
                CAMap in(h.data.data() + (nn * f + ch) * plane, pl);
                AMap o(out.data.data() + (nn * f + ch) * plane, pl);
                o = g * (in - mu) * inv + b;
            }
        }
        return out;
    }

    if (cache) {
        cache->xhat = Tensor(h.shape);
        cache->inv_std.assign(f, 0.0);
    }
    for (std::size_t ch = 0; ch < f; ++ch) {
        double sum = 0.0;
        for (std::size_t nn = 0; nn < n; ++nn)
            sum += CAMap(h.data.data() + (nn * f + ch) * plane, pl).sum();
        const double mu = sum / static_cast<double>(cnt);
        double sq = 0.0;
        for (std::size_t nn = 0; nn < n; ++nn)
            sq += (CAMap(h.data.data() + (nn * f + ch) * plane, pl) - mu).square().sum();
        const double var = sq / static_cast<double>(cnt);
        const double inv = 1.0 / std::sqrt(var + kBatchNormEpsilon);
        const double g = gamma.data[ch], b = beta.data[ch];
        for (std::size_t nn = 0; nn < n; ++nn) {
            CAMap in(h.data.data() + (nn * f + ch) * plane, pl);
            AMap o(out.data.data() + (nn * f + ch) * plane, pl);
            if (cache) {
                AMap xh(cache->xhat.data.data() + (nn * f + ch) * plane, pl);
                xh = (in - mu) * inv;
                o = g * xh + b;
            } else {
                o = g * ((in - mu) * inv) + b;
            }
        }
        if (cache) cache->inv_std[ch] = inv;
        const double var_for_running =
            cnt > 1 ? var * static_cast<double>(cnt) / static_cast<double>(cnt - 1) : var;
        state.running_mean.data[ch] =
            (1.0 - kBatchNormMomentum) * state.running_mean.data[ch] + kBatchNormMomentum * mu;
        state.running_var.data[ch] = (1.0 - kBatchNormMomentum) * state.running_var.data[ch] +
                                     kBatchNormMomentum * var_for_running;
    }
    return out;
}

// Train-mode backward through the batch statistics.
inline void batch_norm_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                const Tensor& gamma, Tensor& grad_in, Tensor& grad_gamma,
                                Tensor& grad_beta) {
    const Tensor& xhat = cache.xhat;
    require_rank(xhat, 4, "batch_norm_backward");
    if (!grad_out.same_shape(xhat) || !grad_in.same_shape(xhat))
        throw std::invalid_argument("batch_norm_backward: shape mismatch");
    const std::size_t n = xhat.shape[0], f = xhat.shape[1],
                      plane = xhat.shape[2] * xhat.shape[3];
    const double cnt = static_cast<double>(n * plane);

    using AMap = Eigen::Map<Eigen::ArrayXd>;
    using CAMap = Eigen::Map<const Eigen::ArrayXd>;
    const Eigen::Index pl = static_cast<Eigen::Index>(plane);
    for (std::size_t ch = 0; ch < f; ++ch) {
        const double g = gamma.data[ch];
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t nn = 0; nn < n; ++nn) {
            CAMap go(grad_out.data.data() + (nn * f + ch) * plane, pl);
            CAMap xh(xhat.data.data() + (nn * f + ch) * plane, pl);
            sum_d += go.sum();
            sum_dx += (go * xh).sum();
        }
        grad_beta.data[ch] += sum_d;
        grad_gamma.data[ch] += sum_dx;
        const double inv = cache.inv_std[ch];
        const double scale = g * inv / cnt;
        for (std::size_t nn = 0; nn < n; ++nn) {
            CAMap go(grad_out.data.data() + (nn * f + ch) * plane, pl);
            CAMap xh(xhat.data.data() + (nn * f + ch) * plane, pl);
            AMap gi(grad_in.data.data() + (nn * f + ch) * plane, pl);
            gi += scale * (cnt * go - sum_d - xh * sum_dx);
        }
    }
}

// --------------------------------------------------------------------------
// Inverted dropout. Survivors are scaled by 1/(1-p) at sample time so
// inactive inference needs no rescaling. The 0/1 mask is returned for an
// exact backward pass.
// --------------------------------------------------------------------------

struct DropoutResult {
    Tensor out;
    Tensor mask;
};

inline DropoutResult dropout(const Tensor& h, double p, RngStream& rng, bool active) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
    DropoutResult r{Tensor(h.shape), Tensor(h.shape, 1.0)};
    if (!active || p == 0.0) {
        r.out = h;
        return r;
    }
    const double scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < h.numel(); ++i) {
        if (rng.uniform() < p) {
            r.mask.data[i] = 0.0;
            r.out.data[i] = 0.0;
        } else {
            r.out.data[i] = h.data[i] * scale;
        }
    }
    return r;
}

inline void dropout_backward(const Tensor& grad_out, const Tensor& mask, double p, bool active,
                             Tensor& grad_in) {
    using AMap = Eigen::Map<Eigen::ArrayXd>;
    using CAMap = Eigen::Map<const Eigen::ArrayXd>;
    const Eigen::Index n = static_cast<Eigen::Index>(grad_out.numel());
    AMap gi(grad_in.data.data(), n);
    CAMap go(grad_out.data.data(), n);
    if (!active || p == 0.0) {
        gi += go;
        return;
    }
    const double scale = 1.0 / (1.0 - p);
    CAMap m(mask.data.data(), n);
    gi += go * m * scale;
}

// --------------------------------------------------------------------------
// Global average pooling over T and E.
// --------------------------------------------------------------------------

inline Tensor global_avg_pool(const Tensor& h) {
    const auto s = detail::activation_shape(h, "global_avg_pool");
    if (s.t == 0 || s.e == 0) throw std::invalid_argument("global_avg_pool: empty plane");
    Tensor out(s.batched ? std::vector<std::size_t>{s.n, s.f} : std::vector<std::size_t>{s.f});
    const std::size_t plane = s.t * s.e;
    for (std::size_t n = 0; n < s.n; ++n) {
        for (std::size_t f = 0; f < s.f; ++f) {
            const double* in = h.data.data() + (n * s.f + f) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += in[i];
            out.data[n * s.f + f] = acc / static_cast<double>(plane);
        }
    }
    return out;
}

inline void global_avg_pool_backward(const Tensor& grad_out, const Tensor& h_like,
                                     Tensor& grad_in) {
    const auto s = detail::activation_shape(h_like, "global_avg_pool_backward");
    const std::size_t plane = s.t * s.e;
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t n = 0; n < s.n; ++n)
        for (std::size_t f = 0; f < s.f; ++f) {
            const double g = grad_out.data[n * s.f + f] * inv;
            double* gi = grad_in.data.data() + (n * s.f + f) * plane;
            for (std::size_t i = 0; i < plane; ++i) gi[i] += g;
        }
}

// --------------------------------------------------------------------------
// Linear classifier: logits = weight * x + bias.
// --------------------------------------------------------------------------

inline Tensor linear_classify(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(weight, 2, "linear_classify: weight");
    const std::size_t c = weight.shape[0], f = weight.shape[1];
    if (bias.shape != std::vector<std::size_t>{c})
        throw std::invalid_argument("linear_classify: bias shape mismatch");
    const bool batched = x.rank() == 2;
    if (!batched) require_rank(x, 1, "linear_classify: x");
    const std::size_t n = batched ? x.shape[0] : 1;
    if ((batched ? x.shape[1] : x.shape[0]) != f)
        throw std::invalid_argument("linear_classify: feature size mismatch");

    Tensor out(batched ? std::vector<std::size_t>{n, c} : std::vector<std::size_t>{c});
    for (std::size_t nn = 0; nn < n; ++nn) {
        const double* xv = x.data.data() + nn * f;
        for (std::size_t cc = 0; cc < c; ++cc) {
            const double* wrow = weight.data.data() + cc * f;
            double acc = bias.data[cc];
            for (std::size_t i = 0; i < f; ++i) acc += wrow[i] * xv[i];
            out.data[nn * c + cc] = acc;
        }
    }
    return out;
}

inline void linear_classify_backward(const Tensor& x, const Tensor& weight,
                                     const Tensor& grad_out, Tensor* grad_x,
                                     Tensor& grad_weight, Tensor& grad_bias) {
    const std::size_t c = weight.shape[0], f = weight.shape[1];
    const bool batched = x.rank() == 2;
    const std::size_t n = batched ? x.shape[0] : 1;
    for (std::size_t nn = 0; nn < n; ++nn) {
        const double* xv = x.data.data() + nn * f;
        double* gx = grad_x ? grad_x->data.data() + nn * f : nullptr;
        for (std::size_t cc = 0; cc < c; ++cc) {
            const double g = grad_out.data[nn * c + cc];
            grad_bias.data[cc] += g;
            const double* wrow = weight.data.data() + cc * f;
            double* gw = grad_weight.data.data() + cc * f;
            for (std::size_t i = 0; i < f; ++i) {
                gw[i] += g * xv[i];
                if (gx) gx[i] += g * wrow[i];
            }
        }
    }
}

// --------------------------------------------------------------------------
// Softmax cross entropy with max-subtraction for stability.
// --------------------------------------------------------------------------

inline Tensor softmax(const Tensor& logits) {
    require_rank(logits, 1, "softmax");
    Tensor p(logits.shape);
    double mx = logits.data[0];
    for (double v : logits.data) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        p.data[i] = std::exp(logits.data[i] - mx);
        sum += p.data[i];
    }
    for (double& v : p.data) v /= sum;
    return p;
}

struct CrossEntropyResult {
    double loss;
    Tensor grad; // [N,C], already divided by N
};

inline CrossEntropyResult softmax_cross_entropy(const Tensor& logits,
                                                std::span<const int> labels) {
    require_rank(logits, 2, "softmax_cross_entropy");
    const std::size_t n = logits.shape[0], c = logits.shape[1];
    if (labels.size() != n)
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    CrossEntropyResult r{0.0, Tensor({n, c})};
    for (std::size_t nn = 0; nn < n; ++nn) {
        const int label = labels[nn];
        if (label < 0 || static_cast<std::size_t>(label) >= c)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        const double* row = logits.data.data() + nn * c;
        double mx = row[0];
        for (std::size_t i = 1; i < c; ++i) mx = std::max(mx, row[i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < c; ++i) sum += std::exp(row[i] - mx);
        const double log_sum = std::log(sum) + mx;
        r.loss += log_sum - row[label];
        double* grow = r.grad.data.data() + nn * c;
        for (std::size_t i = 0; i < c; ++i)
            grow[i] = std::exp(row[i] - log_sum) / static_cast<double>(n);
        grow[label] -= 1.0 / static_cast<double>(n);
    }
    r.loss /= static_cast<double>(n);
    return r;
}

// --------------------------------------------------------------------------
// SGD with classic momentum and decoupled-from-nothing L2 weight decay:
//   g <- grad + wd * value;  buf <- mu * buf + g;  value <- value - lr * buf
// Gradients are zeroed after the step.
// --------------------------------------------------------------------------

inline void sgd_step(std::span<ParamTensor* const> params, const TrainConfig& cfg) {
    for (ParamTensor* p : params) {
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad.data[i] + cfg.weight_decay * p->value.data[i];
            p->momentum.data[i] = cfg.momentum * p->momentum.data[i] + g;
            p->value.data[i] -= cfg.learning_rate * p->momentum.data[i];
        }
        p->zero_grad();
    }
}

inline void sgd_step(std::vector<ParamTensor*>& params, const TrainConfig& cfg) {
    sgd_step(std::span<ParamTensor* const>(params.data(), params.size()), cfg);
}

// Elementwise ReLU(a + b); used for the residual joins.
inline Tensor relu_sum(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("relu_sum: shape mismatch");
    Tensor out(a.shape);
    const Eigen::Index n = static_cast<Eigen::Index>(a.numel());
    Eigen::Map<Eigen::ArrayXd>(out.data.data(), n) =
        (Eigen::Map<const Eigen::ArrayXd>(a.data.data(), n) +
         Eigen::Map<const Eigen::ArrayXd>(b.data.data(), n))
            .max(0.0);
    return out;
}

} // namespace stbln
