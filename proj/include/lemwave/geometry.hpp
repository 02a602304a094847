#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lemwave {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) noexcept = default;
};

constexpr double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) noexcept { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) noexcept { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) noexcept { return norm(b - a); }

/// Axis-aligned rectangle [0,width] x [0,height].
struct Rect {
    double width = 0.0;
    double height = 0.0;

    bool contains(Vec2 p) const noexcept {
        return p.x >= 0.0 && p.x <= width && p.y >= 0.0 && p.y <= height;
    }
};

struct Segment {
    Vec2 a;
    Vec2 b;

    double length() const noexcept { return distance(a, b); }
};

/// Twice the signed area of (a, b, c); positive for a counterclockwise turn.
/// Evaluated in long double to push the tie region further out.
double orient2d(Vec2 a, Vec2 b, Vec2 c) noexcept;

/// Positive iff d lies strictly inside the circumcircle of the CCW triangle (a, b, c).
double incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) noexcept;

/// Clip a segment to the closed box [lo, hi] (Liang-Barsky). nullopt if disjoint.
std::optional<Segment> clip_segment(const Segment& s, Vec2 lo, Vec2 hi) noexcept;

/// Signed polygon area (shoelace); positive for CCW vertex order.
double polygon_area(std::span<const Vec2> poly) noexcept;

bool point_in_convex_polygon(Vec2 p, std::span<const Vec2> ccw_poly) noexcept;

/// True iff the closed segments share a point.
bool segments_cross(const Segment& p, const Segment& q) noexcept;

/// True iff the segment touches the closed convex polygon.
bool segment_intersects_convex_polygon(const Segment& s, std::span<const Vec2> ccw_poly) noexcept;

}  // namespace lemwave
