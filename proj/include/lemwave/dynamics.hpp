#pragma once

#include <Eigen/SparseCholesky>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lemwave/lattice.hpp"

namespace lemwave {

struct NewmarkParams {
    double beta = 0.25;
    double gamma = 0.5;
    double dt = 1.0e-9;  ///< [s]
    std::size_t n_steps = 2000;
    /// Use the constants a0 = 6/(gamma dt^2), a2 = 1/(gamma dt),
    /// a3 = 1/(2 gamma) instead of the average-acceleration ones. For
    /// comparison runs only.
    bool paper_literal = false;

    void validate() const;
    /// 2 beta >= gamma >= 1/2
    bool unconditionally_stable() const noexcept { return 2.0 * beta >= gamma && gamma >= 0.5; }
};

/// Coefficients of the effective stiffness and effective load:
///   K^ = K + a0 M,  F^ = F + M (a0 u + a2 v + a3 a).
struct NewmarkCoefficients {
    double a0 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;

    static NewmarkCoefficients from(const NewmarkParams& p);
};

/// Rectangular force pulse on one particle: applied on steps 1..duration_steps.
struct LoadSpec {
    std::uint32_t excitation_particle = 0;
    Vec2 direction{1.0, 0.0};
    double magnitude = 1000.0;  ///< [N]
    std::size_t duration_steps = 1;

    void validate(const NewmarkParams& params) const;
    /// Unit vector along `direction`.
    Vec2 unit_direction() const;
};

struct WaveFieldState {
    Vector u;  ///< displacement [m]
    Vector v;  ///< velocity [m/s]
    Vector a;  ///< acceleration [m/s^2]
    std::size_t step = 0;
};

/// Factorized K^ = K + a0 M, reused for every step of a run.
class EffectiveStiffness {
public:
    /// `mass` is the diagonal of M. Throws SingularSystemError when K^ is not
    /// positive definite.
    EffectiveStiffness(const SparseMatrix& stiffness, const Vector& mass, const NewmarkParams& params);

    const SparseMatrix& matrix() const noexcept { return matrix_; }
    const NewmarkCoefficients& coefficients() const noexcept { return coeff_; }
    Vector solve(const Vector& rhs) const;

private:
    NewmarkCoefficients coeff_;
    SparseMatrix matrix_;
    std::shared_ptr<const Eigen::SimplicialLLT<SparseMatrix>> factor_;
};

inline EffectiveStiffness effective_stiffness(const SparseMatrix& stiffness, const Vector& mass,
                                              const NewmarkParams& params) {
    return EffectiveStiffness(stiffness, mass, params);
}

/// State at t = 0 with a0 = M^-1 (F0 - K u0); massless DOFs get zero acceleration.
WaveFieldState initial_state(const SparseMatrix& stiffness, const Vector& mass, Vector u0, Vector v0,
                             const Vector& force0);

/// One Newmark step to t + dt under the load `force_next` = F(t + dt).
/// Throws DivergenceError (carrying the new step index) on non-finite output.
WaveFieldState newmark_step(const WaveFieldState& state, const EffectiveStiffness& khat, const Vector& mass,
                            const Vector& force_next, const NewmarkParams& params);

/// 1/2 v^T M v + 1/2 u^T K u
double discrete_energy(const SparseMatrix& stiffness, const Vector& mass, const WaveFieldState& state);

/// Lattice restricted to its free DOFs.
struct ReducedSystem {
    std::vector<std::uint32_t> free_dofs;
    std::vector<std::int64_t> global_to_free;  ///< -1 for clamped/isolated DOFs
    SparseMatrix stiffness;
    Vector mass;

    static ReducedSystem from(const LatticeModel& model);
    /// Scatter a reduced vector into the full DOF space (zeros elsewhere).
    Vector expand(const Vector& reduced) const;
};

/// Per-receiver (u_x, u_y) histories, receiver-major, then time, then
/// component. Entry t holds the displacement at time (t + 1) dt.
struct WaveFieldRecord {
    std::size_t n_receivers = 0;
    std::size_t n_steps = 0;
    double dt = 0.0;
    std::vector<float> data;
    std::vector<std::uint32_t> receiver_particles;
    std::vector<Vec2> receiver_positions;
    LoadSpec load;

    float at(std::size_t receiver, std::size_t t, std::size_t component) const {
        return data[(receiver * n_steps + t) * 2 + component];
    }
    float& at(std::size_t receiver, std::size_t t, std::size_t component) {
        return data[(receiver * n_steps + t) * 2 + component];
    }
    /// |u| of one receiver at one step.
    double magnitude(std::size_t receiver, std::size_t t) const;
};

/// Dense displacement field of every particle at one step.
struct FieldSnapshot {
    std::size_t step = 0;
    std::vector<double> ux;
    std::vector<double> uy;
};

struct SimulationResult {
    WaveFieldRecord record;
    std::vector<FieldSnapshot> snapshots;
};

/// Run params.n_steps Newmark steps from rest and record every receiver at
/// every step. `snapshot_every` > 0 additionally stores the full field every
/// that many steps.
SimulationResult simulate_field(const LatticeModel& model, const LoadSpec& load, const NewmarkParams& params,
                                std::span<const std::uint32_t> receivers, std::size_t snapshot_every = 0);

inline WaveFieldRecord simulate(const LatticeModel& model, const LoadSpec& load, const NewmarkParams& params,
                                std::span<const std::uint32_t> receivers) {
    return simulate_field(model, load, params, receivers).record;
}

/// Smallest `n_lowest` circular frequencies sqrt(eig(M^-1 K)) [rad/s],
/// ascending. Small systems are solved densely; larger ones by shifted
/// subspace iteration on a sparse factorization.
std::vector<double> natural_frequencies(const SparseMatrix& stiffness, const Vector& mass, std::size_t n_lowest);
std::vector<double> natural_frequencies(const LatticeModel& model, std::size_t n_lowest);

/// Earliest time at which |u| at `receiver` exceeds threshold_fraction times
/// that receiver's peak |u| over the record. nullopt when it never does
/// (including an all-zero trace).
std::optional<double> first_arrival(const WaveFieldRecord& record, std::size_t receiver,
                                    double threshold_fraction = 0.05);

/// Earliest time at which the receiver's displacement differs from the same
/// receiver in `reference` by more than threshold_fraction times the
/// reference peak |u|. With a reference that lacks some reflector (a crack, a
/// nearby edge) this is the arrival of the wave scattered by it.
std::optional<double> deviation_onset(const WaveFieldRecord& record, const WaveFieldRecord& reference,
                                      std::size_t receiver, double threshold_fraction = 0.05);

/// Record file pair: `<base>.f32` raw tensor and `<base>.json` metadata.
void write_record(const std::filesystem::path& base, const WaveFieldRecord& record);
WaveFieldRecord read_record(const std::filesystem::path& base);

}  // namespace lemwave
