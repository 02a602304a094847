#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lemwave/delaunay.hpp"
#include "lemwave/errors.hpp"
#include "lemwave/geometry.hpp"
#include "lemwave/rng.hpp"

using namespace lemwave;

TEST(Geometry, ClipSegmentKeepsInteriorSegmentUnchanged) {
    const Segment s{{0.2, 0.3}, {0.7, 0.6}};
    auto c = clip_segment(s, {0, 0}, {1, 1});
    ASSERT_TRUE(c);
    EXPECT_EQ(c->a, s.a);
    EXPECT_EQ(c->b, s.b);
}

TEST(Geometry, ClipSegmentCutsAtBoundary) {
    auto c = clip_segment({{0.009, 0.005}, {0.014, 0.005}}, {0, 0}, {0.01, 0.01});
    ASSERT_TRUE(c);
    EXPECT_DOUBLE_EQ(c->b.x, 0.01);
    EXPECT_NEAR(c->length(), 0.001, 1e-15);
    EXPECT_FALSE(clip_segment({{2, 2}, {3, 3}}, {0, 0}, {1, 1}));
}

TEST(Geometry, PolygonAreaOfUnitSquare) {
    const std::vector<Vec2> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    EXPECT_DOUBLE_EQ(polygon_area(sq), 1.0);
    EXPECT_TRUE(point_in_convex_polygon({0.5, 0.5}, sq));
    EXPECT_TRUE(point_in_convex_polygon({1.0, 0.5}, sq));
    EXPECT_FALSE(point_in_convex_polygon({1.5, 0.5}, sq));
    EXPECT_TRUE(segment_intersects_convex_polygon({{-1, 0.5}, {2, 0.5}}, sq));
    EXPECT_TRUE(segment_intersects_convex_polygon({{-1, 1}, {2, 1}}, sq));
    EXPECT_FALSE(segment_intersects_convex_polygon({{-1, 1.1}, {2, 1.1}}, sq));
}

TEST(Delaunay, SquareGivesFiveEdges) {
    const std::vector<Vec2> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    auto tri = delaunay_triangulate(pts);
    EXPECT_EQ(tri.triangles.size(), 2u);
    EXPECT_EQ(tri.edges.size(), 5u);
}

TEST(Delaunay, RejectsDegenerateInput) {
    EXPECT_THROW(delaunay_triangulate(std::vector<Vec2>{{0, 0}, {1, 1}}), DegenerateTriangulationError);
    EXPECT_THROW(delaunay_triangulate(std::vector<Vec2>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}),
                 DegenerateTriangulationError);
    EXPECT_THROW(delaunay_triangulate(std::vector<Vec2>{{0, 0}, {1, 0}, {0, 1}, {1, 0}}),
                 DegenerateTriangulationError);
}

// Brute force: no input point lies strictly inside any triangle's circumcircle,
// and the triangle count matches Euler's formula 2n - 2 - h.
TEST(Delaunay, EmptyCircumcircleOnRandomPoints) {
    Rng rng(11);
    std::vector<Vec2> pts(300);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    auto tri = delaunay_triangulate(pts);
    for (const auto& t : tri.triangles) {
        ASSERT_GT(orient2d(pts[t[0]], pts[t[1]], pts[t[2]]), 0.0);
        for (std::uint32_t k = 0; k < pts.size(); ++k) {
            if (k == t[0] || k == t[1] || k == t[2]) continue;
            ASSERT_LE(incircle(pts[t[0]], pts[t[1]], pts[t[2]], pts[k]), 1e-15);
        }
    }
    std::size_t hull = 0;
    for (auto [a, b] : tri.edges) {
        int sides = 0;
        for (const auto& t : tri.triangles) {
            const bool has_a = std::find(t.begin(), t.end(), a) != t.end();
            const bool has_b = std::find(t.begin(), t.end(), b) != t.end();
            sides += has_a && has_b;
        }
        ASSERT_GE(sides, 1);
        hull += sides == 1;
    }
    EXPECT_EQ(tri.triangles.size(), 2 * pts.size() - 2 - hull);
}

TEST(Voronoi, CellsTileTheDomain) {
    Rng rng(5);
    std::vector<Vec2> pts(200);
    for (auto& p : pts) p = {rng.uniform(0.0, 2.0), rng.uniform(0.0, 1.0)};
    auto tri = delaunay_triangulate(pts);
    auto cells = clipped_voronoi_cells(pts, tri.edges, {2.0, 1.0});
    double total = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        EXPECT_GT(cells[i].area(), 0.0);
        EXPECT_TRUE(point_in_convex_polygon(pts[i], cells[i].vertices));
        total += cells[i].area();
    }
    EXPECT_NEAR(total, 2.0, 2.0 * 1e-9);
    for (auto [a, b] : tri.edges) EXPECT_NEAR(cells[a].facet_length(b), cells[b].facet_length(a), 1e-12);
}
