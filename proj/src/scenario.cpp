#include "lemwave/scenario.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "lemwave/crack.hpp"
#include "lemwave/errors.hpp"

namespace lemwave {

Layout parse_layout(std::string_view s) {
    if (s == "a") return Layout::a;
    if (s == "b") return Layout::b;
    if (s == "c") return Layout::c;
    throw ConfigError(fmt::format("unknown layout '{}' (a, b or c)", s));
}

char layout_letter(Layout l) noexcept { return "abc"[static_cast<int>(l)]; }
bool layout_has_crack(Layout l) noexcept { return l != Layout::a; }
ExcitationSite layout_site(Layout l) noexcept { return l == Layout::c ? ExcitationSite::top : ExcitationSite::left; }
int layout_component(Layout l) noexcept { return l == Layout::c ? 1 : 0; }

Segment default_crack(const PlateSpec& plate) {
    return {{0.0, 0.4 * plate.height}, {0.6 * plate.width, 0.4 * plate.height}};
}

namespace {

std::uint32_t nearest_particle(const LatticeModel& model, Vec2 at) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t owner = 0;
    for (const auto& p : model.particles) {
        if (p.removed) continue;
        const double d = distance(p.position, at);
        if (d < best) {
            best = d;
            owner = p.id;
        }
    }
    if (!std::isfinite(best)) throw ConfigError("plate has no particles left");
    return owner;
}

}  // namespace

ReceiverSet reference_points(const LatticeModel& model) {
    ReceiverSet set;
    const double w = model.spec.width, h = model.spec.height;
    int k = 1;
    for (double fx : {0.25, 0.5, 0.75}) {
        for (double fy : {0.75, 0.5, 0.25}) {
            const Vec2 pos{fx * w, fy * h};
            set.names.push_back(fmt::format("R{}", k++));
            set.positions.push_back(pos);
            set.particles.push_back(nearest_particle(model, pos));
        }
    }
    return set;
}

ReceiverSet grid_points(const LatticeModel& model) {
    const auto g = ReceiverGrid::bind(model);
    ReceiverSet set;
    for (std::size_t k = 0; k < g.positions.size(); ++k) set.names.push_back(fmt::format("G{}", k + 1));
    set.positions = g.positions;
    set.particles = g.particles;
    return set;
}

TwinRun run_twins(const LatticeModel& intact, const Segment& crack, ExcitationSite site, double magnitude,
                  std::size_t duration_steps, const NewmarkParams& params, bool reference_receivers,
                  const TwinOptions& options) {
    const LatticeModel cracked = apply_crack(intact, crack);
    const ReceiverSet receivers = reference_receivers ? reference_points(cracked) : grid_points(cracked);
    // bound on the cracked plate, so the load sits on a particle both twins share
    const LoadSpec load = excitation_load(cracked, site, magnitude, duration_steps);
    const PaddedPlate padded = pad_plate(intact, options.pad_cells, options.pad_seed);

    TwinRun run;
    run.intact = simulate_field(intact, load, params, receivers.particles, options.snapshot_every);
    run.cracked = simulate_field(cracked, load, params, receivers.particles, options.snapshot_every);
    run.free_field = simulate(padded.model, load, params, receivers.particles);
    run.free_field_particles = padded.model.particles.size();

    for (std::size_t k = 0; k < receivers.particles.size(); ++k) {
        ArrivalRow row;
        row.name = receivers.names[k];
        row.position = receivers.positions[k];
        row.first_intact = first_arrival(run.intact.record, k, options.threshold);
        row.first_cracked = first_arrival(run.cracked.record, k, options.threshold);
        row.onset_intact = deviation_onset(run.intact.record, run.free_field, k, options.threshold);
        row.onset_cracked = deviation_onset(run.cracked.record, run.free_field, k, options.threshold);
        run.rows.push_back(std::move(row));
    }
    return run;
}

std::string format_arrival_table(const TwinRun& run) {
    auto us = [](const std::optional<double>& t) { return t ? fmt::format("{:10.3f}", *t * 1e6) : fmt::format("{:>10}", "none"); };
    auto delta = [](const std::optional<double>& a, const std::optional<double>& b) {
        return a && b ? fmt::format("{:+10.3f}", (*b - *a) * 1e6) : fmt::format("{:>10}", "-");
    };
    std::string out = fmt::format("{:<5} {:>8} {:>8} | {:>10} {:>10} {:>10} | {:>10} {:>10} {:>10}\n", "recv", "x[m]",
                                  "y[m]", "first_int", "first_crk", "delay", "scat_int", "scat_crk", "shift");
    out += "# times in microseconds; first = 1st arrival; scat = departure from the free-field plate\n";
    for (const auto& r : run.rows) {
        out += fmt::format("{:<5} {:8.4f} {:8.4f} | {} {} {} | {} {} {}\n", r.name, r.position.x, r.position.y,
                           us(r.first_intact), us(r.first_cracked), delta(r.first_intact, r.first_cracked),
                           us(r.onset_intact), us(r.onset_cracked), delta(r.onset_intact, r.onset_cracked));
    }
    return out;
}

}  // namespace lemwave
