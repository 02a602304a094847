#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lemwave/delaunay.hpp"
#include "lemwave/geometry.hpp"

namespace lemwave {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Rectangular plate with lower-left corner at the origin.
struct PlateSpec {
    double width = 0.01;            ///< e_x [m]
    double height = 0.01;           ///< e_y [m]
    double youngs_modulus = 5.0e9;  ///< E [Pa]
    double density = 2400.0;        ///< rho [kg/m^3]
    double thickness = 1.0;         ///< out-of-plane extent [m]
    std::uint32_t n_particles = 10000;
    std::uint64_t seed = 0;
    /// Maximum seed offset from its grid-cell centre, as a fraction of the
    /// cell size. Zero places every particle on its cell centre.
    double jitter = 0.45;

    /// Throws ConfigError when a field is out of range.
    void validate() const;

    Rect domain() const noexcept { return {width, height}; }
    /// Receiver spacing (s_x, s_y) of the 11 x 11 receiver lattice.
    Vec2 receiver_spacing() const noexcept { return {width / 10.0, height / 10.0}; }
    /// Particles strictly below this height are clamped.
    double clamp_height() const noexcept { return 0.5 * receiver_spacing().y; }
    /// Seeding grid (columns, rows).
    std::pair<std::uint32_t, std::uint32_t> grid_shape() const;
};

struct Particle {
    std::uint32_t id = 0;
    Vec2 position;
    double cell_area = 0.0;
    bool removed = false;
};

struct LatticeElement {
    std::uint32_t id = 0;
    std::uint32_t node_a = 0;
    std::uint32_t node_b = 0;
    double length = 0.0;       ///< L [m]
    double area = 0.0;         ///< A [m^2]
    double orientation = 0.0;  ///< phi [rad], atan2 of b - a
    bool active = true;
};

/// Smallest cross-section assigned to an element, as a fraction of
/// length x thickness. Delaunay edges whose Voronoi facet vanishes (cocircular
/// quads, clipped hull facets) would otherwise carry zero stiffness.
inline constexpr double kMinFacetRatio = 0.1;

struct LatticeModel {
    PlateSpec spec;
    std::vector<Particle> particles;
    std::vector<LatticeElement> elements;
    std::vector<VoronoiCell> cells;
    SparseMatrix stiffness;             ///< K, 2n x 2n, unconstrained
    Vector mass;                        ///< diagonal of M
    std::vector<std::uint32_t> fixed_dofs;     ///< sorted
    std::vector<std::uint32_t> isolated_dofs;  ///< DOFs with no active element, sorted

    std::size_t n_dofs() const noexcept { return 2 * particles.size(); }
    /// DOFs that are neither clamped nor isolated, ascending.
    std::vector<std::uint32_t> free_dofs() const;
};

/// Member stiffness in global coordinates, T^T K_local T, for DOF order
/// (u_a, v_a, u_b, v_b).
Eigen::Matrix4d element_stiffness(double youngs_modulus, double area, double length, double orientation);

/// Lumped element mass (rho A L / 2) I_4. Rotation invariant.
Eigen::Matrix4d element_mass(double density, double area, double length);

struct GlobalMatrices {
    SparseMatrix stiffness;
    Vector mass;
    std::vector<std::uint32_t> isolated_dofs;
};

/// Scatter-add every active element. Particles without an active incident
/// element have their DOFs reported in `isolated_dofs`.
GlobalMatrices assemble_global(std::size_t n_particles, std::span<const LatticeElement> elements,
                               double youngs_modulus, double density);

/// Random particle lattice: jittered-grid seeds, Delaunay elements, clipped
/// Voronoi cells for particle areas and element cross-sections, assembled
/// K and M, bottom band clamped.
LatticeModel generate_lattice(const PlateSpec& spec);

/// Lattice over caller-supplied particle positions (all inside the plate).
/// Throws DegenerateTriangulationError for collinear or duplicate input.
LatticeModel build_lattice(const PlateSpec& spec, std::span<const Vec2> positions);

/// The plate of `model` padded by `pad_cells` seeding cells on its right,
/// top and bottom edges. Particle i of the result is particle i of `model`
/// moved by `offset`; the pad is filled with fresh jittered seeds. Waves
/// near the original particles match the original plate until they reach
/// its old edges, which makes it a stand-in for a larger surrounding medium.
struct PaddedPlate {
    LatticeModel model;
    Vec2 offset;
};
PaddedPlate pad_plate(const LatticeModel& model, std::uint32_t pad_cells, std::uint64_t seed);

/// Jittered-grid particle seeds for one generation attempt.
std::vector<Vec2> seed_particles(const PlateSpec& spec, std::uint32_t attempt = 0);

/// Recompute K, M, fixed and isolated DOFs from the current particle and
/// element flags.
void reassemble(LatticeModel& model);

/// Non-removed particles that cannot reach a clamped particle through active
/// elements (or, with no clamps at all, outside the largest component).
std::vector<std::uint32_t> floating_particles(const LatticeModel& model);

/// Binary container "WLTC"; see docs/formats.md.
std::vector<std::byte> serialize_lattice(const LatticeModel& model);
LatticeModel deserialize_lattice(std::span<const std::byte> bytes);

}  // namespace lemwave
