#include "lemwave/lattice.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lemwave/binary_io.hpp"
#include "lemwave/errors.hpp"
#include "lemwave/rng.hpp"

namespace lemwave {

void PlateSpec::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("plate {} must be positive, got {}", name, v));
    };
    positive(width, "width");
    positive(height, "height");
    positive(youngs_modulus, "youngs_modulus");
    positive(density, "density");
    positive(thickness, "thickness");
    if (n_particles < 4) throw ConfigError(fmt::format("plate needs at least 4 particles, got {}", n_particles));
    if (!(jitter >= 0.0 && jitter < 0.5))
        throw ConfigError(fmt::format("plate jitter must lie in [0, 0.5), got {}", jitter));
}

std::pair<std::uint32_t, std::uint32_t> PlateSpec::grid_shape() const {
    const double n = static_cast<double>(n_particles);
    auto nx = static_cast<std::uint32_t>(std::ceil(std::sqrt(n * width / height) - 1e-9));
    nx = std::max<std::uint32_t>(nx, 2);
    auto ny = static_cast<std::uint32_t>((n_particles + nx - 1) / nx);
    ny = std::max<std::uint32_t>(ny, 2);
    return {nx, ny};
}

std::vector<std::uint32_t> LatticeModel::free_dofs() const {
    std::vector<std::uint32_t> out;
    out.reserve(n_dofs());
    auto fi = fixed_dofs.begin();
    auto ii = isolated_dofs.begin();
    for (std::uint32_t d = 0; d < n_dofs(); ++d) {
        while (fi != fixed_dofs.end() && *fi < d) ++fi;
        while (ii != isolated_dofs.end() && *ii < d) ++ii;
        const bool fixed = fi != fixed_dofs.end() && *fi == d;
        const bool isolated = ii != isolated_dofs.end() && *ii == d;
        if (!fixed && !isolated) out.push_back(d);
    }
    return out;
}

Eigen::Matrix4d element_stiffness(double youngs_modulus, double area, double length, double orientation) {
    if (!(youngs_modulus > 0.0 && area > 0.0 && length > 0.0))
        throw ConfigError(fmt::format("element_stiffness needs E, A, L > 0 (got {}, {}, {})", youngs_modulus, area,
                                      length));
    Eigen::Matrix4d local = Eigen::Matrix4d::Zero();
    local(0, 0) = local(2, 2) = 1.0;
    local(0, 2) = local(2, 0) = -1.0;
    local *= youngs_modulus * area / length;

    const double c = std::cos(orientation), s = std::sin(orientation);
    Eigen::Matrix4d rot = Eigen::Matrix4d::Zero();
    rot.block<2, 2>(0, 0) << c, s, -s, c;
    rot.block<2, 2>(2, 2) = rot.block<2, 2>(0, 0);
    return rot.transpose() * local * rot;
}

Eigen::Matrix4d element_mass(double density, double area, double length) {
    if (!(density > 0.0 && area > 0.0 && length > 0.0))
        throw ConfigError(fmt::format("element_mass needs rho, A, L > 0 (got {}, {}, {})", density, area, length));
    return (0.5 * density * area * length) * Eigen::Matrix4d::Identity();
}

GlobalMatrices assemble_global(std::size_t n_particles, std::span<const LatticeElement> elements,
                               double youngs_modulus, double density) {
    const auto n_dofs = static_cast<Eigen::Index>(2 * n_particles);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(16 * elements.size());
    GlobalMatrices out;
    out.mass = Vector::Zero(n_dofs);
    std::vector<std::uint32_t> degree(n_particles, 0);

    for (const auto& e : elements) {
        if (!e.active) continue;
        if (e.node_a >= n_particles || e.node_b >= n_particles || e.node_a == e.node_b)
            throw AssemblyDefectError(fmt::format("element {} references invalid particles ({}, {})", e.id, e.node_a,
                                                  e.node_b));
        const Eigen::Matrix4d ke = element_stiffness(youngs_modulus, e.area, e.length, e.orientation);
        const Eigen::Matrix4d me = element_mass(density, e.area, e.length);
        const std::array<Eigen::Index, 4> dofs{2 * Eigen::Index(e.node_a), 2 * Eigen::Index(e.node_a) + 1,
                                               2 * Eigen::Index(e.node_b), 2 * Eigen::Index(e.node_b) + 1};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) triplets.emplace_back(dofs[r], dofs[c], ke(r, c));
            out.mass[dofs[r]] += me(r, r);
        }
        ++degree[e.node_a];
        ++degree[e.node_b];
    }
    out.stiffness.resize(n_dofs, n_dofs);
    out.stiffness.setFromTriplets(triplets.begin(), triplets.end());
    out.stiffness.makeCompressed();
    for (std::uint32_t p = 0; p < n_particles; ++p) {
        if (degree[p] == 0) {
            out.isolated_dofs.push_back(2 * p);
            out.isolated_dofs.push_back(2 * p + 1);
        }
    }
    return out;
}

std::vector<Vec2> seed_particles(const PlateSpec& spec, std::uint32_t attempt) {
    const auto [nx, ny] = spec.grid_shape();
    const double hx = spec.width / nx, hy = spec.height / ny;
    // Retries perturb the seed and force a minimum jitter so a collinear
    // configuration cannot repeat.
    const double jitter = attempt == 0 ? spec.jitter : std::max(spec.jitter, 0.05 * attempt);
    Rng rng(attempt == 0 ? spec.seed : derive_seed(spec.seed, {0x6c617474ULL, attempt}));
    std::vector<Vec2> pts;
    pts.reserve(std::size_t(nx) * ny);
    for (std::uint32_t j = 0; j < ny; ++j) {
        for (std::uint32_t i = 0; i < nx; ++i) {
            const double jx = jitter > 0.0 ? rng.uniform(-jitter, jitter) : 0.0;
            const double jy = jitter > 0.0 ? rng.uniform(-jitter, jitter) : 0.0;
            pts.push_back({(i + 0.5 + jx) * hx, (j + 0.5 + jy) * hy});
        }
    }
    return pts;
}

void reassemble(LatticeModel& model) {
    const auto& spec = model.spec;
    auto global = assemble_global(model.particles.size(), model.elements, spec.youngs_modulus, spec.density);
    model.stiffness = std::move(global.stiffness);
    model.mass = std::move(global.mass);
    model.isolated_dofs = std::move(global.isolated_dofs);
    model.fixed_dofs.clear();
    for (const auto& p : model.particles) {
        if (p.removed || p.position.y >= spec.clamp_height()) continue;
        model.fixed_dofs.push_back(2 * p.id);
        model.fixed_dofs.push_back(2 * p.id + 1);
    }
    if (!model.isolated_dofs.empty()) {
        std::size_t stray = 0;
        for (std::size_t k = 0; k < model.isolated_dofs.size(); k += 2)
            if (!model.particles[model.isolated_dofs[k] / 2].removed) ++stray;
        if (stray > 0) spdlog::warn("lattice has {} isolated particle(s); their DOFs are excluded", stray);
    }
}

LatticeModel build_lattice(const PlateSpec& spec, std::span<const Vec2> positions) {
    const Rect dom = spec.domain();
    for (const auto& p : positions)
        if (!dom.contains(p)) throw ConfigError(fmt::format("particle ({}, {}) lies outside the plate", p.x, p.y));
    const Triangulation tri = delaunay_triangulate(positions);

    LatticeModel model;
    model.spec = spec;
    model.cells = clipped_voronoi_cells(positions, tri.edges, dom);
    model.particles.resize(positions.size());
    for (std::uint32_t i = 0; i < positions.size(); ++i)
        model.particles[i] = Particle{i, positions[i], model.cells[i].area(), false};

    model.elements.reserve(tri.edges.size());
    for (auto [a, b] : tri.edges) {
        const Vec2 d = positions[b] - positions[a];
        const double length = norm(d);
        const double facet = 0.5 * (model.cells[a].facet_length(b) + model.cells[b].facet_length(a));
        LatticeElement e;
        e.id = static_cast<std::uint32_t>(model.elements.size());
        e.node_a = a;
        e.node_b = b;
        e.length = length;
        e.area = std::max(facet, kMinFacetRatio * length) * spec.thickness;
        e.orientation = std::atan2(d.y, d.x);
        model.elements.push_back(e);
    }
    reassemble(model);
    return model;
}

LatticeModel generate_lattice(const PlateSpec& spec) {
    spec.validate();
    constexpr std::uint32_t kMaxRetries = 10;

    for (std::uint32_t attempt = 0;; ++attempt) {
        try {
            return build_lattice(spec, seed_particles(spec, attempt));
        } catch (const DegenerateTriangulationError& err) {
            if (attempt >= kMaxRetries)
                throw DegenerateTriangulationError(
                    fmt::format("lattice generation failed after {} retries: {}", kMaxRetries, err.what()));
            spdlog::warn("degenerate seed set (attempt {}): {}; regenerating", attempt, err.what());
        }
    }
}

PaddedPlate pad_plate(const LatticeModel& model, std::uint32_t pad_cells, std::uint64_t seed) {
    const auto [nx, ny] = model.spec.grid_shape();
    const double hx = model.spec.width / nx, hy = model.spec.height / ny;
    PaddedPlate out;
    out.offset = {0.0, pad_cells * hy};
    PlateSpec spec = model.spec;
    spec.width = (nx + pad_cells) * hx;
    spec.height = (ny + 2 * pad_cells) * hy;
    spec.seed = seed;

    std::vector<Vec2> pts;
    pts.reserve(std::size_t(nx + pad_cells) * (ny + 2 * pad_cells));
    for (const auto& p : model.particles) pts.push_back(p.position + out.offset);
    Rng rng(seed);
    for (std::uint32_t j = 0; j < ny + 2 * pad_cells; ++j) {
        for (std::uint32_t i = 0; i < nx + pad_cells; ++i) {
            if (i < nx && j >= pad_cells && j < pad_cells + ny) continue;
            const double jx = rng.uniform(-spec.jitter, spec.jitter);
            const double jy = rng.uniform(-spec.jitter, spec.jitter);
            pts.push_back({(i + 0.5 + jx) * hx, (j + 0.5 + jy) * hy});
        }
    }
    spec.n_particles = static_cast<std::uint32_t>(pts.size());
    out.model = build_lattice(spec, pts);
    for (std::size_t i = 0; i < model.particles.size(); ++i)
        if (model.particles[i].removed) out.model.particles[i].removed = true;
    for (auto& e : out.model.elements)
        if (out.model.particles[e.node_a].removed || out.model.particles[e.node_b].removed) e.active = false;
    reassemble(out.model);
    return out;
}

std::vector<std::uint32_t> floating_particles(const LatticeModel& model) {
    const std::size_t n = model.particles.size();
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (const auto& e : model.elements) {
        if (!e.active) continue;
        adj[e.node_a].push_back(e.node_b);
        adj[e.node_b].push_back(e.node_a);
    }
    // Label components, then decide which ones are anchored.
    std::vector<std::int64_t> comp(n, -1);
    std::vector<std::size_t> comp_size;
    std::vector<bool> comp_anchored;
    for (std::uint32_t s = 0; s < n; ++s) {
        if (comp[s] >= 0 || model.particles[s].removed) continue;
        const auto id = static_cast<std::int64_t>(comp_size.size());
        comp_size.push_back(0);
        comp_anchored.push_back(false);
        std::vector<std::uint32_t> stack{s};
        comp[s] = id;
        while (!stack.empty()) {
            const auto p = stack.back();
            stack.pop_back();
            ++comp_size[id];
            if (model.particles[p].position.y < model.spec.clamp_height()) comp_anchored[id] = true;
            for (auto q : adj[p]) {
                if (comp[q] < 0 && !model.particles[q].removed) {
                    comp[q] = id;
                    stack.push_back(q);
                }
            }
        }
    }
    const bool any_anchor = std::find(comp_anchored.begin(), comp_anchored.end(), true) != comp_anchored.end();
    if (!any_anchor && !comp_size.empty()) {
        const auto largest = std::max_element(comp_size.begin(), comp_size.end()) - comp_size.begin();
        comp_anchored[largest] = true;
    }
    std::vector<std::uint32_t> out;
    for (std::uint32_t p = 0; p < n; ++p)
        if (comp[p] >= 0 && !comp_anchored[comp[p]]) out.push_back(p);
    return out;
}

namespace {
constexpr std::string_view kLatticeMagic = "WLTC";
constexpr std::uint16_t kLatticeVersion = 1;
}  // namespace

std::vector<std::byte> serialize_lattice(const LatticeModel& model) {
    io::ByteWriter w;
    w.put_bytes(kLatticeMagic);
    w.put<std::uint16_t>(kLatticeVersion);
    w.put<std::uint16_t>(0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.particles.size()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.elements.size()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(model.fixed_dofs.size()));
    const auto& s = model.spec;
    for (double v : {s.width, s.height, s.youngs_modulus, s.density, s.thickness, s.jitter}) w.put<double>(v);
    w.put<std::uint64_t>(s.seed);
    w.put<std::uint32_t>(s.n_particles);

    for (const auto& p : model.particles) {
        w.put<double>(p.position.x);
        w.put<double>(p.position.y);
    }
    for (const auto& p : model.particles) w.put<double>(p.cell_area);
    for (const auto& p : model.particles) w.put<std::uint8_t>(p.removed ? 1 : 0);
    for (const auto& e : model.elements) {
        w.put<std::uint32_t>(e.node_a);
        w.put<std::uint32_t>(e.node_b);
    }
    for (const auto& e : model.elements) {
        w.put<double>(e.length);
        w.put<double>(e.area);
        w.put<double>(e.orientation);
    }
    for (const auto& e : model.elements) w.put<std::uint8_t>(e.active ? 1 : 0);
    w.put_all<std::uint32_t>(model.fixed_dofs);
    for (const auto& c : model.cells) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(c.vertices.size()));
        for (std::size_t k = 0; k < c.vertices.size(); ++k) {
            w.put<double>(c.vertices[k].x);
            w.put<double>(c.vertices[k].y);
            w.put<std::int64_t>(c.edge_tags[k]);
        }
    }
    return std::move(w).take();
}

LatticeModel deserialize_lattice(std::span<const std::byte> bytes) {
    io::ByteReader r(bytes, "lattice container");
    r.expect_magic(kLatticeMagic);
    const auto version = r.get<std::uint16_t>();
    if (version != kLatticeVersion)
        throw CorruptionError(fmt::format("lattice container: unsupported version {}", version));
    r.get<std::uint16_t>();
    const auto np = r.get<std::uint32_t>();
    const auto ne = r.get<std::uint32_t>();
    const auto nf = r.get<std::uint32_t>();

    LatticeModel m;
    auto& s = m.spec;
    for (double* v : {&s.width, &s.height, &s.youngs_modulus, &s.density, &s.thickness, &s.jitter})
        *v = r.get<double>();
    s.seed = r.get<std::uint64_t>();
    s.n_particles = r.get<std::uint32_t>();

    m.particles.resize(np);
    for (std::uint32_t i = 0; i < np; ++i) {
        m.particles[i].id = i;
        m.particles[i].position.x = r.get<double>();
        m.particles[i].position.y = r.get<double>();
    }
    for (auto& p : m.particles) p.cell_area = r.get<double>();
    for (auto& p : m.particles) p.removed = r.get<std::uint8_t>() != 0;
    m.elements.resize(ne);
    for (std::uint32_t i = 0; i < ne; ++i) {
        m.elements[i].id = i;
        m.elements[i].node_a = r.get<std::uint32_t>();
        m.elements[i].node_b = r.get<std::uint32_t>();
        if (m.elements[i].node_a >= np || m.elements[i].node_b >= np)
            throw CorruptionError(fmt::format("lattice container: element {} endpoint out of range", i));
    }
    for (auto& e : m.elements) {
        e.length = r.get<double>();
        e.area = r.get<double>();
        e.orientation = r.get<double>();
    }
    for (auto& e : m.elements) e.active = r.get<std::uint8_t>() != 0;
    std::vector<std::uint32_t> fixed(nf);
    r.get_all<std::uint32_t>(fixed);
    m.cells.resize(np);
    for (auto& c : m.cells) {
        const auto nv = r.get<std::uint32_t>();
        c.vertices.resize(nv);
        c.edge_tags.resize(nv);
        for (std::uint32_t k = 0; k < nv; ++k) {
            c.vertices[k].x = r.get<double>();
            c.vertices[k].y = r.get<double>();
            c.edge_tags[k] = r.get<std::int64_t>();
        }
    }
    r.expect_end();
    reassemble(m);
    if (m.fixed_dofs != fixed) throw CorruptionError("lattice container: clamped DOF set disagrees with geometry");
    return m;
}

}  // namespace lemwave
