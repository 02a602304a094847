#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lemwave/geometry.hpp"
#include "lemwave/lattice.hpp"
#include "lemwave/rng.hpp"

namespace lemwave {

/// Straight crack of given length running from `start` at `orientation_deg`
/// (degrees, counterclockwise from +x).
struct Crack {
    double length = 0.0;
    double orientation_deg = 0.0;
    Vec2 start;

    /// Unclipped far endpoint.
    Vec2 end() const noexcept;
    /// Throws ConfigError when the parameters leave the sampling ranges.
    void validate(const PlateSpec& plate) const;
};

/// Binary image over the plate; row 0 is the top edge (y = height).
struct LabelImage {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    double pitch_x = 0.0;  ///< [m]
    double pitch_y = 0.0;  ///< [m]
    std::vector<std::uint8_t> bits;

    static LabelImage blank(std::uint32_t rows, std::uint32_t cols, double width, double height);

    std::uint8_t at(std::uint32_t r, std::uint32_t c) const { return bits[std::size_t(r) * cols + c]; }
    std::uint8_t& at(std::uint32_t r, std::uint32_t c) { return bits[std::size_t(r) * cols + c]; }
    std::size_t lit_count() const;

    friend bool operator==(const LabelImage&, const LabelImage&) = default;
};

inline constexpr std::uint32_t kFineLabelSize = 100;
inline constexpr std::uint32_t kCoarseLabelSize = 16;

/// Uniform draws: length in (0, min(e_x, e_y)/2], orientation in [0, 360],
/// start in [s_x, e_x - s_x] x [s_y, e_y - s_y].
Crack sample_crack(Rng& rng, const PlateSpec& plate, Vec2 receiver_spacing);

/// The crack segment with the part outside the plate discarded.
Segment clip_crack(const Crack& crack, const PlateSpec& plate);

/// Remove every particle whose Voronoi cell touches the segment (for a
/// zero-length segment: the particle owning that point), deactivate their
/// elements and any remaining element whose bar crosses the segment, then
/// reassemble. Throws FloatingComponentError when the remaining
/// lattice has a part that no longer reaches the clamped edge.
LatticeModel apply_crack(LatticeModel model, const Segment& segment);

/// Supercover rasterization: every pixel the segment passes through is lit.
LabelImage rasterize_label(const Segment& segment, const PlateSpec& plate,
                           std::uint32_t resolution = kFineLabelSize);

/// Area-overlap reduction followed by any-hit binarization: an output pixel
/// is lit iff it overlaps a lit source pixel with positive area.
LabelImage downsample_label(const LabelImage& source, std::uint32_t resolution = kCoarseLabelSize);

/// Plain PBM (P1) with one "# lemwave-label" metadata comment line.
void write_label_pbm(const std::filesystem::path& path, const LabelImage& image);
LabelImage read_label_pbm(const std::filesystem::path& path);

}  // namespace lemwave
