#include "lemwave/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lemwave/binary_io.hpp"
#include "lemwave/errors.hpp"
#include "lemwave/rng.hpp"

namespace lemwave {

void NewmarkParams::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError(fmt::format("newmark dt must be positive, got {}", dt));
    if (n_steps < 1) throw ConfigError("newmark needs at least one step");
    if (!(beta > 0.0) || !(gamma > 0.0))
        throw ConfigError(fmt::format("newmark beta and gamma must be positive (beta={}, gamma={})", beta, gamma));
}

NewmarkCoefficients NewmarkCoefficients::from(const NewmarkParams& p) {
    NewmarkCoefficients c;
    if (p.paper_literal) {
        c.a0 = 6.0 / (p.gamma * p.dt * p.dt);
        c.a2 = 1.0 / (p.gamma * p.dt);
        c.a3 = 1.0 / (2.0 * p.gamma);
    } else {
        c.a0 = 1.0 / (p.beta * p.dt * p.dt);
        c.a2 = 1.0 / (p.beta * p.dt);
        c.a3 = 1.0 / (2.0 * p.beta) - 1.0;
    }
    return c;
}

void LoadSpec::validate(const NewmarkParams& params) const {
    if (magnitude == 0.0 || !std::isfinite(magnitude)) throw ConfigError("load magnitude must be finite and nonzero");
    if (duration_steps < 1 || duration_steps > params.n_steps)
        throw ConfigError(fmt::format("load duration must lie in [1, {}] steps, got {}", params.n_steps,
                                      duration_steps));
    if (norm(direction) == 0.0) throw ConfigError("load direction must be nonzero");
}

Vec2 LoadSpec::unit_direction() const {
    const double n = norm(direction);
    return {direction.x / n, direction.y / n};
}

EffectiveStiffness::EffectiveStiffness(const SparseMatrix& stiffness, const Vector& mass,
                                       const NewmarkParams& params)
    : coeff_(NewmarkCoefficients::from(params)) {
    params.validate();
    if (stiffness.rows() != mass.size() || stiffness.cols() != mass.size())
        throw ConfigError("effective_stiffness: K and M dimensions differ");
    SparseMatrix diag(mass.size(), mass.size());
    diag.reserve(Eigen::VectorXi::Constant(mass.size(), 1));
    for (Eigen::Index i = 0; i < mass.size(); ++i) diag.insert(i, i) = coeff_.a0 * mass[i];
    matrix_ = stiffness + diag;
    matrix_.makeCompressed();
    auto factor = std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>();
    factor->compute(matrix_);
    if (factor->info() != Eigen::Success)
        throw SingularSystemError(
            fmt::format("effective stiffness ({} x {}) is singular or indefinite; check constraints and masses",
                        matrix_.rows(), matrix_.cols()));
    factor_ = std::move(factor);
}

Vector EffectiveStiffness::solve(const Vector& rhs) const { return factor_->solve(rhs); }

WaveFieldState initial_state(const SparseMatrix& stiffness, const Vector& mass, Vector u0, Vector v0,
                             const Vector& force0) {
    WaveFieldState s;
    const Vector residual = force0 - stiffness * u0;
    s.a = Vector::Zero(mass.size());
    for (Eigen::Index i = 0; i < mass.size(); ++i)
        if (mass[i] > 0.0) s.a[i] = residual[i] / mass[i];
    s.u = std::move(u0);
    s.v = std::move(v0);
    return s;
}

WaveFieldState newmark_step(const WaveFieldState& state, const EffectiveStiffness& khat, const Vector& mass,
                            const Vector& force_next, const NewmarkParams& params) {
    const auto& c = khat.coefficients();
    const Vector rhs = force_next + mass.cwiseProduct(c.a0 * state.u + c.a2 * state.v + c.a3 * state.a);
    WaveFieldState next;
    next.step = state.step + 1;
    next.u = khat.solve(rhs);
    next.a = c.a0 * (next.u - state.u) - c.a2 * state.v - c.a3 * state.a;
    next.v = state.v + params.dt * ((1.0 - params.gamma) * state.a + params.gamma * next.a);
    if (!next.u.allFinite() || !next.v.allFinite() || !next.a.allFinite())
        throw DivergenceError(next.step, fmt::format("Newmark integration diverged at step {}", next.step));
    return next;
}

double discrete_energy(const SparseMatrix& stiffness, const Vector& mass, const WaveFieldState& state) {
    return 0.5 * state.v.dot(mass.cwiseProduct(state.v)) + 0.5 * state.u.dot(stiffness * state.u);
}

ReducedSystem ReducedSystem::from(const LatticeModel& model) {
    ReducedSystem r;
    r.free_dofs = model.free_dofs();
    r.global_to_free.assign(model.n_dofs(), -1);
    for (std::size_t k = 0; k < r.free_dofs.size(); ++k) r.global_to_free[r.free_dofs[k]] = std::int64_t(k);

    const auto n = static_cast<Eigen::Index>(r.free_dofs.size());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(model.stiffness.nonZeros());
    for (Eigen::Index col = 0; col < model.stiffness.outerSize(); ++col) {
        const auto fc = r.global_to_free[col];
        if (fc < 0) continue;
        for (SparseMatrix::InnerIterator it(model.stiffness, col); it; ++it) {
            const auto fr = r.global_to_free[it.row()];
            if (fr >= 0) trip.emplace_back(fr, fc, it.value());
        }
    }
    r.stiffness.resize(n, n);
    r.stiffness.setFromTriplets(trip.begin(), trip.end());
    r.stiffness.makeCompressed();
    r.mass.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) r.mass[k] = model.mass[r.free_dofs[k]];
    return r;
}

Vector ReducedSystem::expand(const Vector& reduced) const {
    Vector full = Vector::Zero(static_cast<Eigen::Index>(global_to_free.size()));
    for (std::size_t k = 0; k < free_dofs.size(); ++k) full[free_dofs[k]] = reduced[Eigen::Index(k)];
    return full;
}

double WaveFieldRecord::magnitude(std::size_t receiver, std::size_t t) const {
    return std::hypot(double(at(receiver, t, 0)), double(at(receiver, t, 1)));
}

SimulationResult simulate_field(const LatticeModel& model, const LoadSpec& load, const NewmarkParams& params,
                                std::span<const std::uint32_t> receivers, std::size_t snapshot_every) {
    params.validate();
    load.validate(params);
    const std::size_t np = model.particles.size();
    if (load.excitation_particle >= np)
        throw ConfigError(fmt::format("excitation particle {} out of range", load.excitation_particle));
    for (auto r : receivers)
        if (r >= np) throw ConfigError(fmt::format("receiver particle {} out of range", r));

    const auto sys = ReducedSystem::from(model);
    const auto ex = sys.global_to_free[2 * load.excitation_particle];
    const auto ey = sys.global_to_free[2 * load.excitation_particle + 1];
    if (ex < 0 || ey < 0)
        throw ConfigError(fmt::format("excitation particle {} is clamped, removed or isolated", load.excitation_particle));

    const auto n = static_cast<Eigen::Index>(sys.free_dofs.size());
    const Vec2 dir = load.unit_direction();
    Vector pulse = Vector::Zero(n);
    pulse[ex] = load.magnitude * dir.x;
    pulse[ey] = load.magnitude * dir.y;
    const Vector quiet = Vector::Zero(n);

    const EffectiveStiffness khat(sys.stiffness, sys.mass, params);
    WaveFieldState state = initial_state(sys.stiffness, sys.mass, Vector::Zero(n), Vector::Zero(n), quiet);

    SimulationResult out;
    auto& rec = out.record;
    rec.n_receivers = receivers.size();
    rec.n_steps = params.n_steps;
    rec.dt = params.dt;
    rec.load = load;
    rec.receiver_particles.assign(receivers.begin(), receivers.end());
    for (auto r : receivers) rec.receiver_positions.push_back(model.particles[r].position);
    rec.data.assign(rec.n_receivers * rec.n_steps * 2, 0.0f);

    std::vector<std::array<std::int64_t, 2>> rdofs;
    for (auto r : receivers) rdofs.push_back({sys.global_to_free[2 * r], sys.global_to_free[2 * r + 1]});

    for (std::size_t k = 1; k <= params.n_steps; ++k) {
        state = newmark_step(state, khat, sys.mass, k <= load.duration_steps ? pulse : quiet, params);
        for (std::size_t r = 0; r < rdofs.size(); ++r) {
            for (int c = 0; c < 2; ++c) {
                const auto d = rdofs[r][c];
                rec.at(r, k - 1, c) = d >= 0 ? static_cast<float>(state.u[d]) : 0.0f;
            }
        }
        if (snapshot_every > 0 && k % snapshot_every == 0) {
            FieldSnapshot snap;
            snap.step = k;
            snap.ux.assign(np, 0.0);
            snap.uy.assign(np, 0.0);
            for (std::size_t p = 0; p < np; ++p) {
                const auto dx = sys.global_to_free[2 * p], dy = sys.global_to_free[2 * p + 1];
                if (dx >= 0) snap.ux[p] = state.u[dx];
                if (dy >= 0) snap.uy[p] = state.u[dy];
            }
            out.snapshots.push_back(std::move(snap));
        }
    }
    return out;
}

namespace {

std::vector<double> to_frequencies(std::span<const double> eig, double lambda_max, std::size_t n_lowest) {
    std::vector<double> out;
    for (std::size_t i = 0; i < std::min(n_lowest, eig.size()); ++i) {
        const double lam = eig[i];
        if (lam < -1e-8 * lambda_max)
            throw AssemblyDefectError(
                fmt::format("negative eigenvalue {:.6e} (lambda_max {:.6e}): stiffness is not PSD", lam, lambda_max));
        out.push_back(std::sqrt(std::max(lam, 0.0)));
    }
    return out;
}

// Gershgorin bound on the spectrum of M^-1/2 K M^-1/2.
double spectral_bound(const SparseMatrix& k, const Vector& m) {
    Vector rows = Vector::Zero(m.size());
    for (Eigen::Index col = 0; col < k.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(k, col); it; ++it)
            rows[it.row()] += std::abs(it.value()) / std::sqrt(m[it.row()] * m[col]);
    return rows.maxCoeff();
}

std::vector<double> dense_eigenvalues(const SparseMatrix& k, const Vector& m, double& lambda_max) {
    const Vector s = m.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd a = s.asDiagonal() * Eigen::MatrixXd(k) * s.asDiagonal();
    a = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed to converge");
    const Vector& ev = es.eigenvalues();
    lambda_max = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
    return {ev.data(), ev.data() + ev.size()};
}

// Subspace iteration on (K + tau M)^-1 M with Rayleigh-Ritz on each sweep.
std::vector<double> subspace_eigenvalues(const SparseMatrix& k, const Vector& m, std::size_t n_lowest,
                                         double lambda_bound) {
    const Eigen::Index n = m.size();
    const double tau = 1e-10 * lambda_bound;
    SparseMatrix shifted = k;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += tau * m[i];
    Eigen::SimplicialLLT<SparseMatrix> llt(shifted);
    if (llt.info() != Eigen::Success)
        throw AssemblyDefectError("stiffness is indefinite beyond round-off: shifted factorization failed");

    const auto p = static_cast<Eigen::Index>(std::min<std::size_t>(std::max<std::size_t>(2 * n_lowest, n_lowest + 8), n));
    Rng rng(0x5eed);
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index j = 0; j < p; ++j)
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = rng.uniform(-1.0, 1.0);

    Vector prev = Vector::Constant(Eigen::Index(n_lowest), -1.0);
    Vector theta;
    for (int iter = 0; iter < 500; ++iter) {
        Eigen::MatrixXd y = llt.solve(m.asDiagonal() * x);
        const Eigen::MatrixXd kr = y.transpose() * (k * y);
        const Eigen::MatrixXd mr = y.transpose() * m.asDiagonal() * y;
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(0.5 * (kr + kr.transpose()),
                                                                       0.5 * (mr + mr.transpose()));
        if (ges.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz eigensolve failed");
        theta = ges.eigenvalues();
        x = y * ges.eigenvectors();
        const Vector head = theta.head(Eigen::Index(n_lowest));
        const double change = ((head - prev).array().abs() / head.array().abs().max(1e-300)).maxCoeff();
        prev = head;
        if (iter > 2 && change < 1e-12) break;
    }
    return {theta.data(), theta.data() + theta.size()};
}

}  // namespace

std::vector<double> natural_frequencies(const SparseMatrix& stiffness, const Vector& mass, std::size_t n_lowest) {
    if (stiffness.rows() != mass.size()) throw ConfigError("natural_frequencies: K and M dimensions differ");
    if (mass.size() == 0 || n_lowest == 0) return {};
    if ((mass.array() <= 0.0).any()) throw ConfigError("natural_frequencies: M must be positive on every DOF");
    constexpr Eigen::Index kDenseLimit = 1200;
    if (mass.size() <= kDenseLimit) {
        double lambda_max = 0.0;
        const auto eig = dense_eigenvalues(stiffness, mass, lambda_max);
        return to_frequencies(eig, lambda_max, n_lowest);
    }
    const double bound = spectral_bound(stiffness, mass);
    const auto eig = subspace_eigenvalues(stiffness, mass, std::min<std::size_t>(n_lowest, mass.size()), bound);
    return to_frequencies(eig, bound, n_lowest);
}

std::vector<double> natural_frequencies(const LatticeModel& model, std::size_t n_lowest) {
    const auto sys = ReducedSystem::from(model);
    return natural_frequencies(sys.stiffness, sys.mass, n_lowest);
}

std::optional<double> first_arrival(const WaveFieldRecord& record, std::size_t receiver, double threshold_fraction) {
    if (receiver >= record.n_receivers) throw ConfigError(fmt::format("receiver {} out of range", receiver));
    double peak = 0.0;
    for (std::size_t t = 0; t < record.n_steps; ++t) peak = std::max(peak, record.magnitude(receiver, t));
    if (peak == 0.0) return std::nullopt;
    const double threshold = threshold_fraction * peak;
    for (std::size_t t = 0; t < record.n_steps; ++t)
        if (record.magnitude(receiver, t) > threshold) return double(t + 1) * record.dt;
    return std::nullopt;
}

std::optional<double> deviation_onset(const WaveFieldRecord& record, const WaveFieldRecord& reference,
                                      std::size_t receiver, double threshold_fraction) {
    if (record.n_steps != reference.n_steps || record.n_receivers != reference.n_receivers || record.dt != reference.dt)
        throw ConfigError("records to compare differ in shape or time step");
    if (receiver >= record.n_receivers) throw ConfigError(fmt::format("receiver {} out of range", receiver));
    double peak = 0.0;
    for (std::size_t t = 0; t < reference.n_steps; ++t) peak = std::max(peak, reference.magnitude(receiver, t));
    if (peak == 0.0) return std::nullopt;
    const double threshold = threshold_fraction * peak;
    for (std::size_t t = 0; t < record.n_steps; ++t) {
        const double dx = double(record.at(receiver, t, 0)) - double(reference.at(receiver, t, 0));
        const double dy = double(record.at(receiver, t, 1)) - double(reference.at(receiver, t, 1));
        if (std::hypot(dx, dy) > threshold) return double(t + 1) * record.dt;
    }
    return std::nullopt;
}

void write_record(const std::filesystem::path& base, const WaveFieldRecord& record) {
    const auto bytes = std::as_bytes(std::span(record.data));
    auto tensor = base;
    tensor += ".f32";
    io::write_file_atomic(tensor, bytes);

    nlohmann::json meta;
    meta["format"] = "lemwave-record";
    meta["version"] = 1;
    meta["dtype"] = "f32le";
    meta["layout"] = "receiver,time,component";
    meta["n_receivers"] = record.n_receivers;
    meta["n_steps"] = record.n_steps;
    meta["dt"] = record.dt;
    meta["checksum"] = io::hex64(io::fnv1a64(bytes));
    auto& recv = meta["receivers"] = nlohmann::json::array();
    for (std::size_t r = 0; r < record.n_receivers; ++r)
        recv.push_back({{"particle", record.receiver_particles[r]},
                        {"x", record.receiver_positions[r].x},
                        {"y", record.receiver_positions[r].y}});
    meta["load"] = {{"particle", record.load.excitation_particle},
                    {"direction", {record.load.direction.x, record.load.direction.y}},
                    {"magnitude", record.load.magnitude},
                    {"duration_steps", record.load.duration_steps}};
    auto side = base;
    side += ".json";
    io::write_text_atomic(side, meta.dump(2) + "\n");
}

WaveFieldRecord read_record(const std::filesystem::path& base) {
    auto side = base;
    side += ".json";
    auto tensor = base;
    tensor += ".f32";
    const auto text = io::read_file(side);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(reinterpret_cast<const char*>(text.data()),
                                     reinterpret_cast<const char*>(text.data()) + text.size());
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(fmt::format("{}: {}", side.string(), e.what()));
    }
    WaveFieldRecord rec;
    try {
        rec.n_receivers = meta.at("n_receivers").get<std::size_t>();
        rec.n_steps = meta.at("n_steps").get<std::size_t>();
        rec.dt = meta.at("dt").get<double>();
        for (const auto& r : meta.at("receivers")) {
            rec.receiver_particles.push_back(r.at("particle").get<std::uint32_t>());
            rec.receiver_positions.push_back({r.at("x").get<double>(), r.at("y").get<double>()});
        }
        const auto& l = meta.at("load");
        rec.load.excitation_particle = l.at("particle").get<std::uint32_t>();
        rec.load.direction = {l.at("direction").at(0).get<double>(), l.at("direction").at(1).get<double>()};
        rec.load.magnitude = l.at("magnitude").get<double>();
        rec.load.duration_steps = l.at("duration_steps").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(fmt::format("{}: {}", side.string(), e.what()));
    }
    const auto bytes = io::read_file(tensor);
    if (io::hex64(io::fnv1a64(bytes)) != meta.value("checksum", std::string{}))
        throw CorruptionError(fmt::format("{}: checksum mismatch", tensor.string()));
    if (bytes.size() != rec.n_receivers * rec.n_steps * 2 * sizeof(float))
        throw CorruptionError(fmt::format("{}: size does not match shape", tensor.string()));
    rec.data.resize(rec.n_receivers * rec.n_steps * 2);
    std::memcpy(rec.data.data(), bytes.data(), bytes.size());
    return rec;
}

}  // namespace lemwave
