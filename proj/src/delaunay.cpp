#include "lemwave/delaunay.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "lemwave/errors.hpp"

namespace lemwave {

namespace {

constexpr std::uint32_t kGhost = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

// Edge i of a triangle runs v[(i+1)%3] -> v[(i+2)%3] and is opposite v[i];
// n[i] is the triangle across it. Ghost triangles are stored as (u, w, kGhost)
// where u -> w is a hull edge with the exterior on its left.
struct Tri {
    std::array<std::uint32_t, 3> v;
    std::array<std::uint32_t, 3> n{kNone, kNone, kNone};
    bool alive = true;

    bool ghost() const noexcept { return v[2] == kGhost; }
};

constexpr std::uint64_t edge_key(std::uint32_t from, std::uint32_t to) noexcept {
    return (static_cast<std::uint64_t>(from) << 32) | to;
}

class Mesher {
public:
    explicit Mesher(std::span<const Vec2> pts) : pts_(pts) { tris_.reserve(8 * pts.size() + 16); }

    Triangulation run() {
        const std::size_t n = pts_.size();
        if (n < 3) throw DegenerateTriangulationError(fmt::format("need at least 3 points, got {}", n));

        std::uint32_t i0 = 0, i1 = kNone, i2 = kNone;
        for (std::uint32_t k = 1; k < n; ++k) {
            if (pts_[k] != pts_[i0]) {
                i1 = k;
                break;
            }
        }
        if (i1 == kNone) throw DegenerateTriangulationError("all points coincide");
        for (std::uint32_t k = i1 + 1; k < n; ++k) {
            if (orient2d(pts_[i0], pts_[i1], pts_[k]) != 0.0) {
                i2 = k;
                break;
            }
        }
        if (i2 == kNone) throw DegenerateTriangulationError("all points are collinear");

        seed_triangle(i0, i1, i2);
        for (std::uint32_t k = 0; k < n; ++k) {
            if (k == i0 || k == i1 || k == i2) continue;
            insert(k);
        }
        return collect();
    }

private:
    const Vec2& P(std::uint32_t i) const { return pts_[i]; }

    void seed_triangle(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
        if (orient2d(P(a), P(b), P(c)) < 0.0) std::swap(b, c);
        std::vector<std::uint32_t> created;
        created.push_back(add({a, b, c}));
        created.push_back(add({c, b, kGhost}));
        created.push_back(add({a, c, kGhost}));
        created.push_back(add({b, a, kGhost}));
        std::unordered_map<std::uint64_t, std::pair<std::uint32_t, int>> dir;
        for (auto t : created)
            for (int i = 0; i < 3; ++i) dir[edge_key(from(t, i), to(t, i))] = {t, i};
        for (auto t : created)
            for (int i = 0; i < 3; ++i) tris_[t].n[i] = dir.at(edge_key(to(t, i), from(t, i))).first;
        last_ = created.front();
    }

    std::uint32_t add(std::array<std::uint32_t, 3> v) {
        tris_.push_back(Tri{v});
        return static_cast<std::uint32_t>(tris_.size() - 1);
    }

    std::uint32_t from(std::uint32_t t, int i) const { return tris_[t].v[(i + 1) % 3]; }
    std::uint32_t to(std::uint32_t t, int i) const { return tris_[t].v[(i + 2) % 3]; }

    bool in_circumcircle(std::uint32_t t, Vec2 p) const {
        const Tri& tri = tris_[t];
        if (tri.ghost()) {
            const Vec2 u = P(tri.v[0]), w = P(tri.v[1]);
            const double o = orient2d(u, w, p);
            if (o > 0.0) return true;
            if (o < 0.0) return false;
            // collinear with the hull edge: only the open segment counts
            return dot(p - u, w - u) > 0.0 && dot(p - w, u - w) > 0.0;
        }
        return incircle(P(tri.v[0]), P(tri.v[1]), P(tri.v[2]), p) > 0.0;
    }

    std::uint32_t locate(Vec2 p) const {
        std::uint32_t t = last_;
        const std::size_t cap = 4 * tris_.size() + 64;
        for (std::size_t steps = 0; steps < cap; ++steps) {
            const Tri& tri = tris_[t];
            if (tri.ghost()) return t;
            bool moved = false;
            for (int i = 0; i < 3; ++i) {
                if (orient2d(P(from(t, i)), P(to(t, i)), p) < 0.0) {
                    t = tri.n[i];
                    moved = true;
                    break;
                }
            }
            if (!moved) return t;
        }
        // Walk cycled on a numerically ambiguous configuration: fall back to a scan.
        for (std::uint32_t k = 0; k < tris_.size(); ++k) {
            const Tri& tri = tris_[k];
            if (!tri.alive || tri.ghost()) continue;
            if (orient2d(P(tri.v[0]), P(tri.v[1]), p) >= 0.0 && orient2d(P(tri.v[1]), P(tri.v[2]), p) >= 0.0 &&
                orient2d(P(tri.v[2]), P(tri.v[0]), p) >= 0.0)
                return k;
        }
        for (std::uint32_t k = 0; k < tris_.size(); ++k)
            if (tris_[k].alive && tris_[k].ghost() && in_circumcircle(k, p)) return k;
        throw DegenerateTriangulationError("point location failed");
    }

    void insert(std::uint32_t pi) {
        const Vec2 p = P(pi);
        const std::uint32_t start = locate(p);
        for (auto vi : tris_[start].v)
            if (vi != kGhost && P(vi) == p)
                throw DegenerateTriangulationError(fmt::format("duplicate point {} at ({}, {})", pi, p.x, p.y));

        // Grow the cavity of triangles whose circumcircle holds p.
        std::vector<std::uint32_t> cavity{start};
        tris_[start].alive = false;
        for (std::size_t head = 0; head < cavity.size(); ++head) {
            const std::uint32_t t = cavity[head];
            for (int i = 0; i < 3; ++i) {
                const std::uint32_t nb = tris_[t].n[i];
                if (!tris_[nb].alive) continue;
                if (in_circumcircle(nb, p)) {
                    tris_[nb].alive = false;
                    cavity.push_back(nb);
                }
            }
        }

        // Fan the cavity boundary to p.
        struct Pending {
            std::uint32_t tri;
            std::uint32_t outside;
            std::uint32_t e0, e1;
        };
        std::vector<Pending> fresh;
        for (auto t : cavity) {
            for (int i = 0; i < 3; ++i) {
                const std::uint32_t nb = tris_[t].n[i];
                if (!tris_[nb].alive) continue;
                const std::uint32_t e0 = from(t, i), e1 = to(t, i);
                std::array<std::uint32_t, 3> v{e0, e1, pi};
                if (e1 == kGhost) v = {pi, e0, kGhost};
                else if (e0 == kGhost) v = {e1, pi, kGhost};
                fresh.push_back({add(v), nb, e0, e1});
            }
        }

        std::unordered_map<std::uint64_t, std::uint32_t> dir;
        dir.reserve(fresh.size() * 3);
        for (const auto& f : fresh)
            for (int i = 0; i < 3; ++i) dir[edge_key(from(f.tri, i), to(f.tri, i))] = f.tri;
        for (const auto& f : fresh) {
            for (int i = 0; i < 3; ++i) {
                const std::uint32_t a = from(f.tri, i), b = to(f.tri, i);
                if (a == f.e0 && b == f.e1) {
                    tris_[f.tri].n[i] = f.outside;
                    Tri& o = tris_[f.outside];
                    for (int j = 0; j < 3; ++j)
                        if (from(f.outside, j) == b && to(f.outside, j) == a) o.n[j] = f.tri;
                } else {
                    tris_[f.tri].n[i] = dir.at(edge_key(b, a));
                }
            }
            if (!tris_[f.tri].ghost()) last_ = f.tri;
        }
    }

    Triangulation collect() const {
        Triangulation out;
        for (const auto& t : tris_) {
            if (!t.alive || t.ghost()) continue;
            out.triangles.push_back(t.v);
            for (int i = 0; i < 3; ++i) {
                auto a = t.v[i], b = t.v[(i + 1) % 3];
                out.edges.emplace_back(std::min(a, b), std::max(a, b));
            }
        }
        std::sort(out.triangles.begin(), out.triangles.end());
        std::sort(out.edges.begin(), out.edges.end());
        out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
        return out;
    }

    std::span<const Vec2> pts_;
    std::vector<Tri> tris_;
    std::uint32_t last_ = 0;
};

}  // namespace

Triangulation delaunay_triangulate(std::span<const Vec2> points) { return Mesher(points).run(); }

double VoronoiCell::facet_length(std::uint32_t neighbour) const noexcept {
    double len = 0.0;
    for (std::size_t k = 0, n = vertices.size(); k < n; ++k)
        if (edge_tags[k] == static_cast<std::int64_t>(neighbour)) len += distance(vertices[k], vertices[(k + 1) % n]);
    return len;
}

namespace {

// Sutherland-Hodgman against the bisector half-plane of (self, other); the
// edge created along the bisector is tagged with `other`.
void clip_by_bisector(VoronoiCell& cell, Vec2 self, Vec2 other, std::int64_t tag) {
    const Vec2 d = other - self;
    const Vec2 mid = 0.5 * (self + other);
    auto side = [&](Vec2 x) { return dot(x - mid, d); };

    VoronoiCell out;
    const std::size_t n = cell.vertices.size();
    out.vertices.reserve(n + 1);
    out.edge_tags.reserve(n + 1);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 cur = cell.vertices[k], nxt = cell.vertices[(k + 1) % n];
        const double fc = side(cur), fn = side(nxt);
        const bool cin = fc <= 0.0, nin = fn <= 0.0;
        if (cin) {
            out.vertices.push_back(cur);
            out.edge_tags.push_back(cell.edge_tags[k]);
        }
        if (cin != nin) {
            const double t = fc / (fc - fn);
            const Vec2 hit = cur + t * (nxt - cur);
            out.vertices.push_back(hit);
            out.edge_tags.push_back(cin ? tag : cell.edge_tags[k]);
        }
    }
    cell = std::move(out);
}

}  // namespace

std::vector<VoronoiCell> clipped_voronoi_cells(std::span<const Vec2> points,
                                               std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                                               const Rect& domain) {
    std::vector<std::vector<std::uint32_t>> nbrs(points.size());
    for (auto [a, b] : edges) {
        nbrs[a].push_back(b);
        nbrs[b].push_back(a);
    }
    std::vector<VoronoiCell> cells(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        VoronoiCell& c = cells[i];
        c.vertices = {{0.0, 0.0}, {domain.width, 0.0}, {domain.width, domain.height}, {0.0, domain.height}};
        c.edge_tags.assign(4, VoronoiCell::kBoundaryTag);
        std::sort(nbrs[i].begin(), nbrs[i].end());
        for (auto j : nbrs[i]) clip_by_bisector(c, points[i], points[j], j);
    }
    return cells;
}

}  // namespace lemwave
