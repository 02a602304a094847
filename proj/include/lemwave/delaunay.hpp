#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lemwave/geometry.hpp"

namespace lemwave {

struct Triangulation {
    /// Counterclockwise vertex triples.
    std::vector<std::array<std::uint32_t, 3>> triangles;
    /// Unique undirected edges (a < b), sorted lexicographically.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
};

/// Incremental Bowyer-Watson triangulation with ghost triangles on the hull,
/// so the full convex hull is recovered without a bounding super-triangle.
/// Points are inserted in the given order; walking point location starts
/// from the last created triangle, so spatially coherent input is fast.
///
/// Throws DegenerateTriangulationError for fewer than three points, an
/// all-collinear point set, or duplicate points.
Triangulation delaunay_triangulate(std::span<const Vec2> points);

/// Voronoi cell of one generator clipped to the plate rectangle.
struct VoronoiCell {
    std::vector<Vec2> vertices;  ///< CCW
    /// tag of the edge vertices[k] -> vertices[k+1]: neighbour index, or
    /// kBoundaryTag for a rectangle side.
    std::vector<std::int64_t> edge_tags;

    static constexpr std::int64_t kBoundaryTag = -1;

    double area() const noexcept { return polygon_area(vertices); }
    /// Total length of the facet shared with generator `neighbour`.
    double facet_length(std::uint32_t neighbour) const noexcept;
};

/// Clip the Voronoi cell of every point to `domain`, using the Delaunay
/// neighbours as the bisector set.
std::vector<VoronoiCell> clipped_voronoi_cells(std::span<const Vec2> points,
                                               std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                                               const Rect& domain);

}  // namespace lemwave
