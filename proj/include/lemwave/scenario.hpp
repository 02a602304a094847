#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lemwave/dataset.hpp"
#include "lemwave/dynamics.hpp"
#include "lemwave/lattice.hpp"

namespace lemwave {

/// Single-run boundary layouts: (a) horizontal excitation at the left edge,
/// no crack; (b) the same with a crack; (c) vertical excitation at the top
/// edge with a crack.
enum class Layout : std::uint8_t { a, b, c };

Layout parse_layout(std::string_view s);
char layout_letter(Layout l) noexcept;
bool layout_has_crack(Layout l) noexcept;
ExcitationSite layout_site(Layout l) noexcept;
/// Displacement component shown in frames: 0 = u_x, 1 = u_y.
int layout_component(Layout l) noexcept;

/// Crack used when none is configured: horizontal, from the left edge at
/// 0.4 e_y to 0.6 e_x, so it shadows the lower right receivers.
Segment default_crack(const PlateSpec& plate);

struct ReceiverSet {
    std::vector<std::string> names;
    std::vector<Vec2> positions;
    std::vector<std::uint32_t> particles;
};

/// Nine reference points R1..R9: columns at x = 0.25, 0.5, 0.75 e_x (R1-R3
/// nearest the left edge), rows at y = 0.75, 0.5, 0.25 e_y, top to bottom.
ReceiverSet reference_points(const LatticeModel& model);
/// The 81 interior receivers, named G1..G81.
ReceiverSet grid_points(const LatticeModel& model);

struct ArrivalRow {
    std::string name;
    Vec2 position;
    std::optional<double> first_intact;   ///< [s]
    std::optional<double> first_cracked;  ///< [s]
    /// Departure from the free-field reference: the wave scattered back by
    /// the nearest edge (intact) or by the crack (cracked).
    std::optional<double> onset_intact;
    std::optional<double> onset_cracked;
};

struct TwinRun {
    SimulationResult intact;
    SimulationResult cracked;
    WaveFieldRecord free_field;
    std::size_t free_field_particles = 0;
    std::vector<ArrivalRow> rows;
};

struct TwinOptions {
    double threshold = 0.05;      ///< fraction of the peak that counts as an arrival
    std::uint32_t pad_cells = 15;  ///< free-field padding, in seeding cells
    std::uint64_t pad_seed = 99;
    std::size_t snapshot_every = 0;
};

/// Runs the same load on `intact`, on `intact` with `crack` inserted, and on
/// the intact plate padded on its free edges, then tabulates arrivals. Receivers
/// are bound on the cracked plate so every twin records the same particles.
TwinRun run_twins(const LatticeModel& intact, const Segment& crack, ExcitationSite site, double magnitude,
                  std::size_t duration_steps, const NewmarkParams& params, bool reference_receivers,
                  const TwinOptions& options = {});

std::string format_arrival_table(const TwinRun& run);

}  // namespace lemwave
