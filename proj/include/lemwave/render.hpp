#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lemwave/lattice.hpp"

namespace lemwave {

/// 8-bit grayscale image, row 0 at the top.
struct GrayImage {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(std::uint32_t x, std::uint32_t y) { return pixels[std::size_t(y) * width + x]; }
    std::uint8_t at(std::uint32_t x, std::uint32_t y) const { return pixels[std::size_t(y) * width + x]; }
};

/// Binary PGM (P5).
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

/// Paints each pixel with the value of the particle nearest to its centre.
/// The pixel-to-particle map is built once and reused for every frame.
class FieldRaster {
public:
    FieldRaster(const LatticeModel& model, std::uint32_t width, std::uint32_t height);

    /// `values` has one entry per particle. Each frame is stretched onto
    /// 0..255 by its own min and max; removed particles are drawn black.
    GrayImage render(std::span<const double> values) const;

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::vector<std::uint32_t> owner_;
    std::vector<bool> removed_;
};

/// Tiles of `rows x cols` values in [0, 1] laid out `per_row` across and
/// `per_column` down, each pixel enlarged by `scale`, separated by `gap`
/// pixels of mid gray. Missing tiles stay mid gray.
GrayImage mosaic(std::span<const std::vector<float>> tiles, std::uint32_t rows, std::uint32_t cols,
                 std::uint32_t per_row = 16, std::uint32_t per_column = 20, std::uint32_t scale = 4,
                 std::uint32_t gap = 2);

}  // namespace lemwave
