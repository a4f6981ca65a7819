#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
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

Tensor identity_matrix(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

} // namespace

TEST_CASE("bilinear with identity U and W is ReLU") {
    RngStream rng(1);
    Tensor h = random_tensor({3, 2, 4}, rng);
    Tensor u = identity_matrix(4);
    Tensor w = identity_matrix(3);
    Tensor out = bilinear_forward(h, u, w);
    for (std::size_t i = 0; i < h.numel(); ++i)
        REQUIRE(out.data[i] == std::max(0.0, h.data[i]));
}

TEST_CASE("bilinear scalar case saturates at zero") {
    Tensor h({1, 1, 1});
    h.data[0] = 3.0;
    Tensor u({1, 1});
    u.data[0] = 2.0;
    Tensor w({1, 1});
    w.data[0] = -1.0;
    Tensor out = bilinear_forward(h, u, w);
    REQUIRE(out.data[0] == 0.0); // ReLU(-6)
}

TEST_CASE("bilinear matches the naive-loop oracle") {
    RngStream rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t f_in = 1 + rng.uniform_int(4);
        const std::size_t f_out = 1 + rng.uniform_int(4);
        const std::size_t t = 1 + rng.uniform_int(4);
        const std::size_t e_in = 1 + rng.uniform_int(6);
        const std::size_t e_out = 1 + rng.uniform_int(6);
        Tensor h = random_tensor({f_in, t, e_in}, rng);
        Tensor u = random_tensor({e_out, e_in}, rng);
        Tensor w = random_tensor({f_out, f_in}, rng);
        Tensor bias = random_tensor({f_out}, rng);
        Tensor fast = bilinear_forward(h, u, w, &bias);
        Tensor slow = oracle::bilinear(h, u, w, &bias);
        REQUIRE(oracle::max_rel_err(fast, slow) <= 1e-12);
    }
}

TEST_CASE("bilinear batched equals per-sample") {
    RngStream rng(3);
    Tensor batch = random_tensor({3, 2, 2, 5}, rng);
    Tensor u = random_tensor({4, 5}, rng);
    Tensor w = random_tensor({3, 2}, rng);
    Tensor out = bilinear_forward(batch, u, w);
    for (std::size_t n = 0; n < 3; ++n) {
        Tensor single({2, 2, 5});
        std::copy_n(batch.data.begin() + n * 20, 20, single.data.begin());
        Tensor ref = bilinear_forward(single, u, w);
        for (std::size_t i = 0; i < ref.numel(); ++i)
            REQUIRE(out.data[n * ref.numel() + i] == ref.data[i]);
    }
}

TEST_CASE("bilinear rejects mismatched shapes") {
    Tensor h({2, 2, 3});
    Tensor u({3, 4}); // E_in mismatch
    Tensor w({2, 2});
    REQUIRE_THROWS_AS(bilinear_forward(h, u, w), std::invalid_argument);
}

TEST_CASE("temporal conv K=1 identity kernel is identity") {
    RngStream rng(4);
    Tensor h = random_tensor({2, 3, 4}, rng);
    Tensor kernel({2, 2, 1, 1});
    kernel(0, 0, 0, 0) = 1.0;
    kernel(1, 1, 0, 0) = 1.0;
    Tensor bias({2});
    Tensor out = temporal_conv(h, kernel, bias);
    for (std::size_t i = 0; i < h.numel(); ++i) REQUIRE(out.data[i] == h.data[i]);
}

TEST_CASE("temporal conv K=3 all-ones kernel on constant input") {
    const double c = 2.5;
    Tensor h = Tensor::full({1, 5, 3}, c);
    Tensor kernel = Tensor::full({1, 1, 3, 1}, 1.0);
    Tensor bias({1});
    Tensor out = temporal_conv(h, kernel, bias);
    for (std::size_t e = 0; e < 3; ++e) {
        REQUIRE(out(0, 0, e) == Catch::Approx(2 * c));
        REQUIRE(out(0, 4, e) == Catch::Approx(2 * c));
        for (std::size_t t = 1; t < 4; ++t) REQUIRE(out(0, t, e) == Catch::Approx(3 * c));
    }
}

TEST_CASE("temporal conv matches the direct-sum oracle") {
    RngStream rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t f_in = 1 + rng.uniform_int(3);
        const std::size_t f_out = 1 + rng.uniform_int(3);
        const std::size_t t = 1 + rng.uniform_int(6);
        const std::size_t e = 1 + rng.uniform_int(5);
        const std::size_t k = 1 + 2 * rng.uniform_int(3); // 1, 3, 5
        Tensor h = random_tensor({f_in, t, e}, rng);
        Tensor kernel = random_tensor({f_out, f_in, k, 1}, rng);
        Tensor bias = random_tensor({f_out}, rng);
        Tensor fast = temporal_conv(h, kernel, bias);
        Tensor slow = oracle::temporal_conv(h, kernel, bias);
        REQUIRE(oracle::max_rel_err(fast, slow) <= 1e-12);
    }
}

TEST_CASE("temporal conv rejects even kernels") {
    Tensor h({1, 2, 2});
    Tensor kernel({1, 1, 2, 1});
    Tensor bias({1});
    REQUIRE_THROWS_AS(temporal_conv(h, kernel, bias), std::invalid_argument);
}

TEST_CASE("batch norm on constant channels yields beta") {
    Tensor h = Tensor::full({2, 3, 2, 2}, 4.0);
    Tensor gamma = Tensor::full({3}, 1.0);
    Tensor beta({3});
    beta.data = {0.5, -1.0, 2.0};
    BatchNormState state(3);
    Tensor out = batch_norm(h, gamma, beta, state, true);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t f = 0; f < 3; ++f)
            for (std::size_t t = 0; t < 2; ++t)
                for (std::size_t e = 0; e < 2; ++e)
                    REQUIRE(out(n, f, t, e) == Catch::Approx(beta.data[f]).margin(1e-12));
}

TEST_CASE("batch norm is near identity on standardized input") {
    RngStream rng(6);
    Tensor h({4, 2, 3, 5});
    // per-channel standardized data
    for (std::size_t f = 0; f < 2; ++f) {
        std::vector<double> vals;
        for (std::size_t i = 0; i < 4 * 3 * 5; ++i) vals.push_back(rng.normal());
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= vals.size();
        const double inv = 1.0 / std::sqrt(var);
        std::size_t idx = 0;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t t = 0; t < 3; ++t)
                for (std::size_t e = 0; e < 5; ++e) h(n, f, t, e) = (vals[idx++] - mean) * inv;
    }
    Tensor gamma = Tensor::full({2}, 1.0);
    Tensor beta({2});
    BatchNormState state(2);
    Tensor out = batch_norm(h, gamma, beta, state, true);
    for (std::size_t i = 0; i < h.numel(); ++i)
        REQUIRE(out.data[i] == Catch::Approx(h.data[i]).margin(1e-4));
}

TEST_CASE("batch norm train output has zero mean unit variance per channel") {
    RngStream rng(7);
    Tensor h = random_tensor({5, 3, 4, 6}, rng, -3.0, 5.0);
    Tensor gamma = Tensor::full({3}, 1.0);
    Tensor beta({3});
    BatchNormState state(3);
    Tensor out = batch_norm(h, gamma, beta, state, true);
    const std::size_t plane = 4 * 6;
    for (std::size_t f = 0; f < 3; ++f) {
        double mean = 0.0, var = 0.0;
        for (std::size_t n = 0; n < 5; ++n)
            for (std::size_t i = 0; i < plane; ++i) mean += out.data[(n * 3 + f) * plane + i];
        mean /= 5 * plane;
        for (std::size_t n = 0; n < 5; ++n)
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = out.data[(n * 3 + f) * plane + i] - mean;
                var += d * d;
            }
        var /= 5 * plane;
        REQUIRE(std::abs(mean) <= 1e-6);
        REQUIRE(std::abs(var - 1.0) <= 1e-3);
    }
}

TEST_CASE("batch norm eval uses running statistics") {
    Tensor gamma = Tensor::full({1}, 1.0);
    Tensor beta({1});
    BatchNormState state(1);
    state.running_mean.data[0] = 2.0;
    state.running_var.data[0] = 4.0;
    Tensor h = Tensor::full({1, 1, 1, 1}, 4.0);
    Tensor out = batch_norm(h, gamma, beta, state, false);
    REQUIRE(out.data[0] == Catch::Approx((4.0 - 2.0) / std::sqrt(4.0 + 1e-5)));
    // eval must not touch the stats
    REQUIRE(state.running_mean.data[0] == 2.0);
}

TEST_CASE("dropout p=0 and inactive modes are the identity") {
    RngStream rng(8);
    Tensor h = random_tensor({3, 2, 2}, rng);
    auto r0 = dropout(h, 0.0, rng, true);
    for (std::size_t i = 0; i < h.numel(); ++i) {
        REQUIRE(r0.out.data[i] == h.data[i]);
        REQUIRE(r0.mask.data[i] == 1.0);
    }
    auto r1 = dropout(h, 0.7, rng, false);
    for (std::size_t i = 0; i < h.numel(); ++i) REQUIRE(r1.out.data[i] == h.data[i]);
}

TEST_CASE("dropout keeps roughly 1-p survivors and preserves the mean") {
    RngStream rng(9);
    const std::size_t n = 1000000;
    Tensor h = Tensor::full({n}, 1.0);
    auto r = dropout(h, 0.2, rng, true);
    double survivors = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        survivors += r.mask.data[i];
        mean += r.out.data[i];
    }
    survivors /= n;
    mean /= n;
    REQUIRE(std::abs(survivors - 0.8) <= 0.002);
    REQUIRE(std::abs(mean - 1.0) <= 0.01);
}

TEST_CASE("dropout rejects p >= 1") {
    RngStream rng(10);
    Tensor h({2});
    REQUIRE_THROWS_AS(dropout(h, 1.0, rng, true), std::invalid_argument);
}

TEST_CASE("dropout is reproducible from its seed") {
    Tensor h = Tensor::full({64}, 1.0);
    RngStream a(77), b(77);
    auto ra = dropout(h, 0.5, a, true);
    auto rb = dropout(h, 0.5, b, true);
    REQUIRE(ra.mask.data == rb.mask.data);
}

TEST_CASE("global average pool basics and oracle") {
    Tensor c = Tensor::full({3, 2, 5}, 1.25);
    Tensor pooled = global_avg_pool(c);
    for (std::size_t f = 0; f < 3; ++f) REQUIRE(pooled(f) == Catch::Approx(1.25));

    Tensor single({2, 1, 1});
    single.data = {3.0, -4.0};
    Tensor ps = global_avg_pool(single);
    REQUIRE(ps(0) == 3.0);
    REQUIRE(ps(1) == -4.0);

    RngStream rng(11);
    Tensor h = random_tensor({4, 3, 7}, rng);
    REQUIRE(oracle::max_rel_err(global_avg_pool(h), oracle::global_avg_pool(h)) <= 1e-12);
}

TEST_CASE("linear classify basics and oracle") {
    RngStream rng(12);
    Tensor x = random_tensor({4}, rng);

    Tensor w = identity_matrix(4);
    Tensor b({4});
    Tensor logits = linear_classify(x, w, b);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(logits(i) == x(i));

    Tensor zero_w({3, 4});
    Tensor bias({3});
    bias.data = {1.0, -2.0, 0.5};
    Tensor lb = linear_classify(x, zero_w, bias);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(lb(i) == bias(i));

    Tensor rw = random_tensor({3, 4}, rng);
    Tensor rb = random_tensor({3}, rng);
    REQUIRE(oracle::max_rel_err(linear_classify(x, rw, rb), oracle::linear(x, rw, rb)) <=
            1e-12);
}

TEST_CASE("cross entropy on uniform logits is ln C") {
    Tensor logits = Tensor::full({2, 5}, 0.3);
    std::vector<int> labels{1, 4};
    auto r = softmax_cross_entropy(logits, labels);
    REQUIRE(r.loss == Catch::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("cross entropy saturates for a dominant logit") {
    Tensor logits({1, 3});
    logits.data = {20.0, 0.0, 0.0};
    std::vector<int> labels{0};
    auto r = softmax_cross_entropy(logits, labels);
    REQUIRE(r.loss < 1e-8);
    REQUIRE(r.loss >= 0.0);
}

TEST_CASE("cross entropy rejects out-of-range labels") {
    Tensor logits({1, 3});
    std::vector<int> labels{3};
    REQUIRE_THROWS_AS(softmax_cross_entropy(logits, labels), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one and loss is non-negative") {
    RngStream rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t c = 2 + rng.uniform_int(6);
        Tensor logits = random_tensor({c}, rng, -8.0, 8.0);
        Tensor p = softmax(logits);
        double sum = 0.0;
        for (double v : p.data) {
            sum += v;
            REQUIRE(v >= 0.0);
        }
        REQUIRE(std::abs(sum - 1.0) <= 1e-6);

        Tensor batch({1, c});
        batch.data = logits.data;
        std::vector<int> labels{static_cast<int>(rng.uniform_int(c))};
        REQUIRE(softmax_cross_entropy(batch, labels).loss >= 0.0);
    }
}

TEST_CASE("sgd with zero gradient and decay is a bit-exact no-op") {
    ParamTensor p({3});
    p.value.data = {0.1, -0.2, 0.3};
    const auto before = p.value.data;
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    std::vector<ParamTensor*> params{&p};
    sgd_step(params, cfg);
    REQUIRE(p.value.data == before);
}

TEST_CASE("sgd with zero momentum and decay is plain gradient descent") {
    ParamTensor p({2});
    p.value.data = {1.0, 2.0};
    p.grad.data = {0.5, -1.0};
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    std::vector<ParamTensor*> params{&p};
    sgd_step(params, cfg);
    REQUIRE(p.value.data[0] == Catch::Approx(1.0 - 0.1 * 0.5));
    REQUIRE(p.value.data[1] == Catch::Approx(2.0 + 0.1 * 1.0));
    REQUIRE(p.grad.data[0] == 0.0);
}

TEST_CASE("sgd momentum recurrence: second update is lr * 1.9 * g") {
    // closed form: buf1 = g, buf2 = 0.9 g + g = 1.9 g
    ParamTensor p({1});
    p.value.data = {0.0};
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0;
    const double g = 2.0;
    std::vector<ParamTensor*> params{&p};

    p.grad.data = {g};
    sgd_step(params, cfg);
    const double after_first = p.value.data[0];
    REQUIRE(after_first == Catch::Approx(-cfg.learning_rate * g));

    p.grad.data = {g};
    sgd_step(params, cfg);
    const double second_update = after_first - p.value.data[0];
    REQUIRE(second_update == Catch::Approx(cfg.learning_rate * 1.9 * g).epsilon(1e-12));
}

TEST_CASE("relu_sum joins residuals") {
    Tensor a({2});
    a.data = {1.0, -3.0};
    Tensor b({2});
    b.data = {-0.5, 1.0};
    Tensor out = relu_sum(a, b);
    REQUIRE(out.data[0] == 0.5);
    REQUIRE(out.data[1] == 0.0);
}
