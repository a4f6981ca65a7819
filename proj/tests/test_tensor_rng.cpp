#include <catch2/catch_amalgamated.hpp>

#include "stbln/rng.hpp"
#include "stbln/tensor.hpp"

using namespace stbln;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3, 4});
    REQUIRE(t.numel() == 24);
    REQUIRE(t.rank() == 3);
    t(1, 2, 3) = 7.5;
    REQUIRE(t.data[23] == 7.5);
    REQUIRE(t.all_finite());
    t(0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_FALSE(t.all_finite());
}

TEST_CASE("require_shape throws on mismatch") {
    Tensor t({2, 2});
    REQUIRE_NOTHROW(require_shape(t, {2, 2}, "t"));
    REQUIRE_THROWS_AS(require_shape(t, {2, 3}, "t"), std::invalid_argument);
    REQUIRE_THROWS_AS(require_rank(t, 3, "t"), std::invalid_argument);
}

TEST_CASE("param tensor keeps three same-shape arrays") {
    ParamTensor p({3, 2});
    REQUIRE(p.value.same_shape(p.grad));
    REQUIRE(p.value.same_shape(p.momentum));
    p.grad.fill(1.0);
    p.zero_grad();
    REQUIRE(p.grad.data[0] == 0.0);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    REQUIRE_NOTHROW(cfg.validate());
    cfg.learning_rate = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.learning_rate = 0.1;
    cfg.momentum = 1.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.momentum = 0.9;
    cfg.weight_decay = -1.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("rng streams are reproducible and seed-sensitive") {
    RngStream a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
    bool differs = false;
    RngStream a2(42);
    for (int i = 0; i < 16; ++i) differs |= a2.next_u64() != c.next_u64();
    REQUIRE(differs);
}

TEST_CASE("uniform stays in range, uniform_int is unbiased enough") {
    RngStream r(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) counts[r.uniform_int(5)]++;
    for (int c : counts) REQUIRE(std::abs(c - 10000) < 600);
}

TEST_CASE("normal draws have the right first two moments") {
    RngStream r(123);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("derive_seed decorrelates tags") {
    REQUIRE(derive_seed(1, 2) != derive_seed(1, 3));
    REQUIRE(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}
