#pragma once

// Bowyer-Watson Delaunay triangulation in 2-D. Predicates run in extended
// precision with coordinates translated to the query point, which is ample
// for landmark-scale inputs. Degenerate inputs (duplicates, all collinear)
// are rejected rather than perturbed.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stbln/landmarks.hpp"

namespace stbln {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

namespace delaunay_detail {

// > 0 when (a,b,c) wind counter-clockwise.
inline long double orient2d(const LandmarkPoint& a, const LandmarkPoint& b,
                            const LandmarkPoint& c) {
    const long double abx = static_cast<long double>(b.x) - a.x;
    const long double aby = static_cast<long double>(b.y) - a.y;
    const long double acx = static_cast<long double>(c.x) - a.x;
    const long double acy = static_cast<long double>(c.y) - a.y;
    return abx * acy - aby * acx;
}

// > 0 when d lies strictly inside the circumcircle of ccw triangle (a,b,c).
inline long double incircle(const LandmarkPoint& a, const LandmarkPoint& b,
                            const LandmarkPoint& c, const LandmarkPoint& d) {
    const long double adx = static_cast<long double>(a.x) - d.x;
    const long double ady = static_cast<long double>(a.y) - d.y;
    const long double bdx = static_cast<long double>(b.x) - d.x;
    const long double bdy = static_cast<long double>(b.y) - d.y;
    const long double cdx = static_cast<long double>(c.x) - d.x;
    const long double cdy = static_cast<long double>(c.y) - d.y;
    const long double ad2 = adx * adx + ady * ady;
    const long double bd2 = bdx * bdx + bdy * bdy;
    const long double cd2 = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2) +
           ad2 * (bdx * cdy - cdx * bdy);
}

struct Triangle {
    std::size_t a, b, c; // ccw
};

} // namespace delaunay_detail

// Returns the unordered Delaunay edge set as (low index, high index) pairs,
// sorted lexicographically.
inline EdgeList delaunay_triangulate(const std::vector<LandmarkPoint>& input) {
    using namespace delaunay_detail;
    const std::size_t n = input.size();
    if (n < 3) throw std::invalid_argument("delaunay_triangulate: need at least 3 points");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (input[i] == input[j])
                throw std::invalid_argument(
                    "delaunay_triangulate: duplicate points (degenerate configuration)");

    // enclosing super-triangle, far enough out that circumcircles of real
    // triangles cannot reach its vertices
    double min_x = input[0].x, max_x = input[0].x, min_y = input[0].y, max_y = input[0].y;
    for (const auto& p : input) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const double span = std::max({max_x - min_x, max_y - min_y, 1.0});
    const double cx = (min_x + max_x) / 2.0, cy = (min_y + max_y) / 2.0;
    const double m = 3e4 * span;

    std::vector<LandmarkPoint> pts = input;
    pts.push_back({cx - 2.0 * m, cy - m});
    pts.push_back({cx + 2.0 * m, cy - m});
    pts.push_back({cx, cy + 2.0 * m});
    const std::size_t s0 = n, s1 = n + 1, s2 = n + 2;

    std::vector<Triangle> tris;
    if (orient2d(pts[s0], pts[s1], pts[s2]) > 0.0L)
        tris.push_back({s0, s1, s2});
    else
        tris.push_back({s0, s2, s1});

    std::vector<std::size_t> bad;
    std::vector<std::pair<std::size_t, std::size_t>> cavity_edges;
    for (std::size_t i = 0; i < n; ++i) {
        bad.clear();
        cavity_edges.clear();
        for (std::size_t t = 0; t < tris.size(); ++t) {
            const Triangle& tr = tris[t];
            if (incircle(pts[tr.a], pts[tr.b], pts[tr.c], pts[i]) > 0.0L) {
                bad.push_back(t);
                cavity_edges.emplace_back(tr.a, tr.b);
                cavity_edges.emplace_back(tr.b, tr.c);
                cavity_edges.emplace_back(tr.c, tr.a);
            }
        }
        // boundary = directed cavity edges with no reversed twin
        std::vector<std::pair<std::size_t, std::size_t>> boundary;
        for (const auto& e : cavity_edges) {
            bool twin = false;
            for (const auto& o : cavity_edges)
                if (o.first == e.second && o.second == e.first) {
                    twin = true;
                    break;
                }
            if (!twin) boundary.push_back(e);
        }
        for (auto it = bad.rbegin(); it != bad.rend(); ++it) tris.erase(tris.begin() + *it);
        for (const auto& e : boundary) tris.push_back({e.first, e.second, i});
    }

    EdgeList edges;
    for (const Triangle& tr : tris) {
        if (tr.a >= n || tr.b >= n || tr.c >= n) continue;
        auto add = [&edges](std::size_t u, std::size_t v) {
            edges.emplace_back(std::min(u, v), std::max(u, v));
        };
        add(tr.a, tr.b);
        add(tr.b, tr.c);
        add(tr.c, tr.a);
    }
    if (edges.empty())
        throw std::invalid_argument(
            "delaunay_triangulate: collinear input (degenerate configuration)");
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

} // namespace stbln
