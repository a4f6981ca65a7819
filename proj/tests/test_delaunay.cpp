#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "oracles.hpp"
#include "stbln/delaunay.hpp"
#include "stbln/rng.hpp"

using namespace stbln;

namespace {

std::set<std::pair<std::size_t, std::size_t>> as_set(const EdgeList& edges) {
    return {edges.begin(), edges.end()};
}

std::vector<oracle::Point> to_oracle(const std::vector<LandmarkPoint>& pts) {
    std::vector<oracle::Point> out;
    for (const auto& p : pts) out.push_back({p.x, p.y});
    return out;
}

// Random point set guaranteed to be in general position (margin-checked)
// so the exhaustive oracle and the incremental algorithm must agree exactly.
std::vector<LandmarkPoint> general_position_points(RngStream& rng, std::size_t count) {
    const double span = 100.0;
    for (;;) {
        std::vector<LandmarkPoint> pts;
        for (std::size_t i = 0; i < count; ++i)
            pts.push_back({rng.uniform(0.0, span), rng.uniform(0.0, span)});
        const long double margin = oracle::general_position_margin(to_oracle(pts));
        if (margin > 1.0L) return pts; // comfortably nondegenerate
    }
}

} // namespace

TEST_CASE("three non-collinear points form one triangle") {
    std::vector<LandmarkPoint> pts{{0, 0}, {4, 0}, {1, 3}};
    EdgeList edges = delaunay_triangulate(pts);
    REQUIRE(edges.size() == 3);
    REQUIRE(as_set(edges) ==
            std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 2}, {1, 2}});
}

TEST_CASE("unit square: four sides plus one diagonal") {
    // corners are cocircular, so either diagonal is a valid Delaunay choice;
    // the result must still be a triangulation (5 edges), contain all sides,
    // and be a subset of the brute-force empty-circumcircle edge set
    std::vector<LandmarkPoint> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    EdgeList edges = delaunay_triangulate(pts);
    REQUIRE(edges.size() == 5);
    auto s = as_set(edges);
    REQUIRE(s.count({0, 1}));
    REQUIRE(s.count({1, 2}));
    REQUIRE(s.count({2, 3}));
    REQUIRE(s.count({0, 3}));
    const bool diag02 = s.count({0, 2}) > 0;
    const bool diag13 = s.count({1, 3}) > 0;
    REQUIRE(diag02 != diag13); // exactly one diagonal

    auto oracle_edges = oracle::delaunay_edges(to_oracle(pts));
    for (const auto& e : s) REQUIRE(oracle_edges.count(e));
}

TEST_CASE("matches the exhaustive empty-circumcircle oracle on random sets") {
    RngStream rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t count = 3 + rng.uniform_int(10); // up to 12 points
        auto pts = general_position_points(rng, count);
        EdgeList edges = delaunay_triangulate(pts);
        auto expected = oracle::delaunay_edges(to_oracle(pts));
        INFO("trial " << trial << " with " << count << " points");
        REQUIRE(as_set(edges) == expected);
    }
}

TEST_CASE("degenerate configurations are rejected") {
    REQUIRE_THROWS_AS(delaunay_triangulate({{0, 0}, {1, 1}}), std::invalid_argument);
    REQUIRE_THROWS_AS(delaunay_triangulate({{0, 0}, {1, 1}, {2, 2}, {3, 3}}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(delaunay_triangulate({{0, 0}, {1, 0}, {0, 0}, {2, 3}}),
                      std::invalid_argument);
}

TEST_CASE("triangulation is deterministic") {
    RngStream rng(11);
    auto pts = general_position_points(rng, 10);
    REQUIRE(delaunay_triangulate(pts) == delaunay_triangulate(pts));
}

TEST_CASE("triangulation scales to the 51-landmark regime") {
    RngStream rng(12);
    auto pts = general_position_points(rng, 51);
    EdgeList edges = delaunay_triangulate(pts);
    // planar triangulation bound
    REQUIRE(edges.size() <= 3 * 51 - 6);
    std::vector<bool> seen(51, false);
    for (const auto& [a, b] : edges) {
        seen[a] = true;
        seen[b] = true;
    }
    for (bool v : seen) REQUIRE(v);
}
