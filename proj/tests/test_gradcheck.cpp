#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "stbln/gradcheck.hpp"
#include "stbln/ops.hpp"
#include "stbln/rng.hpp"

using namespace stbln;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("gradcheck: linear_classify") {
    RngStream rng(100);
    Tensor x = random_tensor({3}, rng);
    Tensor w = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor gx({3}), gw({4, 3}), gb({4});

    TensorOpCase c;
    c.forward = [&]() { return linear_classify(x, w, b); };
    c.backward = [&](const Tensor& grad_out) {
        gx.fill(0.0);
        gw.fill(0.0);
        gb.fill(0.0);
        linear_classify_backward(x, w, grad_out, &gx, gw, gb);
    };
    c.wrt = {&x, &w, &b};
    c.analytic = {&gx, &gw, &gb};
    auto report = grad_check(c, rng);
    INFO("max rel err " << report.max_rel_error);
    REQUIRE(report.passed(1e-5));
}

TEST_CASE("gradcheck: bilinear away from ReLU kinks") {
    RngStream rng(101);
    Tensor h, u, w, bias;
    // resample until every pre-activation is safely away from zero
    for (int attempt = 0;; ++attempt) {
        REQUIRE(attempt < 200);
        h = random_tensor({2, 3, 4}, rng);
        u = random_tensor({3, 4}, rng);
        w = random_tensor({3, 2}, rng);
        bias = random_tensor({3}, rng);
        Tensor pre = oracle::bilinear_pre(h, u, w, &bias);
        double min_abs = 1e30;
        for (double v : pre.data) min_abs = std::min(min_abs, std::abs(v));
        if (min_abs >= 1e-3) break;
    }
    Tensor gh(h.shape), gu(u.shape), gw(w.shape), gb(bias.shape);

    TensorOpCase c;
    c.forward = [&]() { return bilinear_forward(h, u, w, &bias); };
    c.backward = [&](const Tensor& grad_out) {
        gh.fill(0.0);
        gu.fill(0.0);
        gw.fill(0.0);
        gb.fill(0.0);
        Tensor out = bilinear_forward(h, u, w, &bias);
        bilinear_backward(h, u, w, out, grad_out, &gh, gu, gw, &gb);
    };
    c.wrt = {&h, &u, &w, &bias};
    c.analytic = {&gh, &gu, &gw, &gb};
    auto report = grad_check(c, rng);
    INFO("max rel err " << report.max_rel_error);
    REQUIRE(report.passed(1e-4));
}

TEST_CASE("gradcheck: temporal conv K=3") {
    RngStream rng(102);
    Tensor h = random_tensor({2, 4, 3}, rng);
    Tensor kernel = random_tensor({3, 2, 3, 1}, rng);
    Tensor bias = random_tensor({3}, rng);
    Tensor gh(h.shape), gk(kernel.shape), gb(bias.shape);

    TensorOpCase c;
    c.forward = [&]() { return temporal_conv(h, kernel, bias); };
    c.backward = [&](const Tensor& grad_out) {
        gh.fill(0.0);
        gk.fill(0.0);
        gb.fill(0.0);
        temporal_conv_backward(h, kernel, grad_out, &gh, gk, gb);
    };
    c.wrt = {&h, &kernel, &bias};
    c.analytic = {&gh, &gk, &gb};
    auto report = grad_check(c, rng);
    INFO("max rel err " << report.max_rel_error);
    REQUIRE(report.passed(1e-5));
}

TEST_CASE("gradcheck: batch norm training mode") {
    RngStream rng(103);
    Tensor h = random_tensor({3, 2, 2, 3}, rng, -2.0, 2.0);
    Tensor gamma = random_tensor({2}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({2}, rng);
    Tensor gh(h.shape), gg(gamma.shape), gb(beta.shape);

    TensorOpCase c;
    c.forward = [&]() {
        BatchNormState state(2); // fresh stats; train output ignores them
        return batch_norm(h, gamma, beta, state, true);
    };
    c.backward = [&](const Tensor& grad_out) {
        gh.fill(0.0);
        gg.fill(0.0);
        gb.fill(0.0);
        BatchNormState state(2);
        BatchNormCache cache;
        batch_norm(h, gamma, beta, state, true, &cache);
        batch_norm_backward(grad_out, cache, gamma, gh, gg, gb);
    };
    c.wrt = {&h, &gamma, &beta};
    c.analytic = {&gh, &gg, &gb};
    auto report = grad_check(c, rng);
    INFO("max rel err " << report.max_rel_error);
    REQUIRE(report.passed(1e-4));
}

TEST_CASE("gradcheck: dropout with a frozen seed") {
    RngStream rng(104);
    Tensor h = random_tensor({4, 2, 3}, rng);
    Tensor gh(h.shape);
    const std::uint64_t seed = 555;

    TensorOpCase c;
    c.forward = [&]() {
        RngStream r(seed);
        return dropout(h, 0.4, r, true).out;
    };
    c.backward = [&](const Tensor& grad_out) {
        gh.fill(0.0);
        RngStream r(seed);
        auto res = dropout(h, 0.4, r, true);
        dropout_backward(grad_out, res.mask, 0.4, true, gh);
    };
    c.wrt = {&h};
    c.analytic = {&gh};
    auto report = grad_check(c, rng);
    REQUIRE(report.passed(1e-6));
}

TEST_CASE("gradcheck: global average pool") {
    RngStream rng(105);
    Tensor h = random_tensor({3, 2, 4}, rng);
    Tensor gh(h.shape);

    TensorOpCase c;
    c.forward = [&]() { return global_avg_pool(h); };
    c.backward = [&](const Tensor& grad_out) {
        gh.fill(0.0);
        global_avg_pool_backward(grad_out, h, gh);
    };
    c.wrt = {&h};
    c.analytic = {&gh};
    auto report = grad_check(c, rng);
    REQUIRE(report.passed(1e-6));
}

TEST_CASE("gradcheck: softmax cross entropy against finite differences") {
    RngStream rng(106);
    Tensor logits = random_tensor({4, 3}, rng, -2.0, 2.0);
    std::vector<int> labels{0, 2, 1, 2};
    auto result = softmax_cross_entropy(logits, labels);

    auto loss = [&]() { return softmax_cross_entropy(logits, labels).loss; };
    auto report =
        finite_difference_check(loss, {&logits}, {&result.grad}, 1e-4, 1e-3);
    INFO("max rel err " << report.max_rel_error);
    REQUIRE(report.passed(1e-5));
}

TEST_CASE("gradcheck reports non-finite evaluations") {
    Tensor x({1});
    x.data = {0.0};
    Tensor g({1});
    g.data = {1.0};
    auto loss = [&]() { return std::log(x.data[0]); }; // -inf at perturbed points
    auto report = finite_difference_check(loss, {&x}, {&g});
    REQUIRE_FALSE(report.finite);
    REQUIRE_FALSE(report.passed(1.0));
}
