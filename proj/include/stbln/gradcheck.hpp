#pragma once

// Central finite-difference gradient checker. The op under test is wrapped
// as a scalar loss; analytic gradients are produced once by the caller's
// backward closure, then every coordinate of every watched tensor is
// perturbed by +-step.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "stbln/rng.hpp"
#include "stbln/tensor.hpp"

namespace stbln {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    bool finite = true; // false if any loss/gradient evaluation was non-finite
    std::size_t worst_tensor = 0;
    std::size_t worst_coord = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;

    bool passed(double tolerance) const { return finite && max_rel_error <= tolerance; }
};

// Relative error with an absolute floor so near-zero gradients are compared
// absolutely instead of blowing up the ratio.
inline double gradcheck_rel_error(double analytic, double numeric, double floor_ = 1e-3) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor_});
    return std::abs(analytic - numeric) / denom;
}

// `loss` must be a pure function of the current contents of `wrt` (re-seed
// any internal randomness per call). `analytic[i]` holds d loss / d wrt[i].
inline GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                               const std::vector<Tensor*>& wrt,
                                               const std::vector<const Tensor*>& analytic,
                                               double step = 1e-4, double floor_ = 1e-3) {
    GradCheckReport report;
    for (std::size_t ti = 0; ti < wrt.size(); ++ti) {
        Tensor& x = *wrt[ti];
        const Tensor& g = *analytic[ti];
        for (std::size_t i = 0; i < x.numel(); ++i) {
            const double saved = x.data[i];
            x.data[i] = saved + step;
            const double up = loss();
            x.data[i] = saved - step;
            const double down = loss();
            x.data[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = g.data[i];
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                report.finite = false;
                report.max_rel_error = std::numeric_limits<double>::infinity();
                return report;
            }
            const double rel = gradcheck_rel_error(a, numeric, floor_);
            ++report.coords_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_tensor = ti;
                report.worst_coord = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

// Convenience wrapper for ops that produce a tensor: the scalar loss is a
// fixed random weighting of the output, which exercises every output
// coordinate with a generic upstream gradient.
struct TensorOpCase {
    std::function<Tensor()> forward;                     // recompute from current inputs
    std::function<void(const Tensor& grad_out)> backward; // fill analytic grads from scratch
    std::vector<Tensor*> wrt;
    std::vector<const Tensor*> analytic;
};

inline GradCheckReport grad_check(TensorOpCase& c, RngStream& rng, double step = 1e-4,
                                  double floor_ = 1e-3) {
    Tensor out = c.forward();
    Tensor weights(out.shape);
    for (double& v : weights.data) v = rng.uniform(-1.0, 1.0);
    c.backward(weights);
    auto loss = [&]() {
        Tensor o = c.forward();
        double acc = 0.0;
        for (std::size_t i = 0; i < o.numel(); ++i) acc += o.data[i] * weights.data[i];
        return acc;
    };
    return finite_difference_check(loss, c.wrt, c.analytic, step, floor_);
}

} // namespace stbln
