#include "lemwave/geometry.hpp"

#include <algorithm>

namespace lemwave {

double orient2d(Vec2 a, Vec2 b, Vec2 c) noexcept {
    using L = long double;
    const L acx = L(a.x) - L(c.x), bcx = L(b.x) - L(c.x);
    const L acy = L(a.y) - L(c.y), bcy = L(b.y) - L(c.y);
    return static_cast<double>(acx * bcy - acy * bcx);
}

double incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) noexcept {
    using L = long double;
    const L adx = L(a.x) - L(d.x), ady = L(a.y) - L(d.y);
    const L bdx = L(b.x) - L(d.x), bdy = L(b.y) - L(d.y);
    const L cdx = L(c.x) - L(d.x), cdy = L(c.y) - L(d.y);
    const L alift = adx * adx + ady * ady;
    const L blift = bdx * bdx + bdy * bdy;
    const L clift = cdx * cdx + cdy * cdy;
    return static_cast<double>(alift * (bdx * cdy - bdy * cdx) + blift * (cdx * ady - cdy * adx) +
                               clift * (adx * bdy - ady * bdx));
}

std::optional<Segment> clip_segment(const Segment& s, Vec2 lo, Vec2 hi) noexcept {
    const Vec2 d = s.b - s.a;
    double t0 = 0.0, t1 = 1.0;
    const double p[4] = {-d.x, d.x, -d.y, d.y};
    const double q[4] = {s.a.x - lo.x, hi.x - s.a.x, s.a.y - lo.y, hi.y - s.a.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return std::nullopt;
            continue;
        }
        const double r = q[i] / p[i];
        if (p[i] < 0.0) {
            t0 = std::max(t0, r);
        } else {
            t1 = std::min(t1, r);
        }
        if (t0 > t1) return std::nullopt;
    }
    Segment out{s.a + t0 * d, s.a + t1 * d};
    if (t0 == 0.0) out.a = s.a;
    if (t1 == 1.0) out.b = s.b;
    // Pin endpoints that landed on the box to the exact boundary value.
    for (Vec2* v : {&out.a, &out.b}) {
        v->x = std::clamp(v->x, lo.x, hi.x);
        v->y = std::clamp(v->y, lo.y, hi.y);
    }
    return out;
}

double polygon_area(std::span<const Vec2> poly) noexcept {
    double a = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) a += cross(poly[i], poly[(i + 1) % n]);
    return 0.5 * a;
}

bool point_in_convex_polygon(Vec2 p, std::span<const Vec2> ccw_poly) noexcept {
    const std::size_t n = ccw_poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (orient2d(ccw_poly[i], ccw_poly[(i + 1) % n], p) < 0.0) return false;
    }
    return true;
}

namespace {

bool on_segment(Vec2 a, Vec2 b, Vec2 p) noexcept {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) noexcept {
    const double d1 = orient2d(q1, q2, p1);
    const double d2 = orient2d(q1, q2, p2);
    const double d3 = orient2d(p1, p2, q1);
    const double d4 = orient2d(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && on_segment(q1, q2, p1)) return true;
    if (d2 == 0 && on_segment(q1, q2, p2)) return true;
    if (d3 == 0 && on_segment(p1, p2, q1)) return true;
    if (d4 == 0 && on_segment(p1, p2, q2)) return true;
    return false;
}

}  // namespace

bool segments_cross(const Segment& p, const Segment& q) noexcept { return segments_intersect(p.a, p.b, q.a, q.b); }

bool segment_intersects_convex_polygon(const Segment& s, std::span<const Vec2> ccw_poly) noexcept {
    if (point_in_convex_polygon(s.a, ccw_poly) || point_in_convex_polygon(s.b, ccw_poly)) return true;
    const std::size_t n = ccw_poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (segments_intersect(s.a, s.b, ccw_poly[i], ccw_poly[(i + 1) % n])) return true;
    }
    return false;
}

}  // namespace lemwave
