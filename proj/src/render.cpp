#include "lemwave/render.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "lemwave/binary_io.hpp"
#include "lemwave/errors.hpp"

namespace lemwave {

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::string data = fmt::format("P5\n{} {}\n255\n", image.width, image.height);
    data.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    io::write_text_atomic(path, data);
}

GrayImage read_pgm(const std::filesystem::path& path) {
    const auto raw = io::read_file(path);
    const std::string text(reinterpret_cast<const char*>(raw.data()), raw.size());
    std::istringstream in(text);
    std::string magic;
    GrayImage img;
    int maxval = 0;
    if (!(in >> magic >> img.width >> img.height >> maxval) || magic != "P5" || maxval != 255)
        throw CorruptionError(fmt::format("{}: not an 8-bit binary PGM", path.string()));
    in.get();
    const auto offset = static_cast<std::size_t>(in.tellg());
    if (text.size() - offset != std::size_t(img.width) * img.height)
        throw CorruptionError(fmt::format("{}: pixel data does not match {}x{}", path.string(), img.width, img.height));
    img.pixels.resize(raw.size() - offset);
    std::memcpy(img.pixels.data(), raw.data() + offset, img.pixels.size());
    return img;
}

FieldRaster::FieldRaster(const LatticeModel& model, std::uint32_t width, std::uint32_t height)
    : width_(width), height_(height), owner_(std::size_t(width) * height), removed_(model.particles.size()) {
    if (width == 0 || height == 0) throw ConfigError("frame size must be positive");
    for (const auto& p : model.particles) removed_[p.id] = p.removed;

    // bucket particles on a coarse grid so each pixel only scans nearby ones
    const auto [nx, ny] = model.spec.grid_shape();
    const double bw = model.spec.width / nx, bh = model.spec.height / ny;
    std::vector<std::vector<std::uint32_t>> bucket(std::size_t(nx) * ny);
    auto bx = [&](double x) { return std::clamp<long>(long(std::floor(x / bw)), 0, long(nx) - 1); };
    auto by = [&](double y) { return std::clamp<long>(long(std::floor(y / bh)), 0, long(ny) - 1); };
    for (const auto& p : model.particles) bucket[std::size_t(by(p.position.y)) * nx + bx(p.position.x)].push_back(p.id);

    for (std::uint32_t r = 0; r < height; ++r) {
        for (std::uint32_t c = 0; c < width; ++c) {
            const Vec2 at{(c + 0.5) * model.spec.width / width, model.spec.height - (r + 0.5) * model.spec.height / height};
            const long cx = bx(at.x), cy = by(at.y);
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t owner = 0;
            // widen the search until a ring beyond the best match has been scanned
            for (long ring = 0; ring <= long(std::max(nx, ny)); ++ring) {
                for (long j = cy - ring; j <= cy + ring; ++j) {
                    for (long i = cx - ring; i <= cx + ring; ++i) {
                        if (std::max(std::abs(i - cx), std::abs(j - cy)) != ring) continue;
                        if (i < 0 || j < 0 || i >= long(nx) || j >= long(ny)) continue;
                        for (auto id : bucket[std::size_t(j) * nx + i]) {
                            const double d = distance(model.particles[id].position, at);
                            if (d < best) best = d, owner = id;
                        }
                    }
                }
                if (best <= ring * std::min(bw, bh)) break;
            }
            owner_[std::size_t(r) * width + c] = owner;
        }
    }
}

GrayImage FieldRaster::render(std::span<const double> values) const {
    if (values.size() != removed_.size())
        throw ConfigError(fmt::format("{} field values for {} particles", values.size(), removed_.size()));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (removed_[k]) continue;
        lo = std::min(lo, values[k]);
        hi = std::max(hi, values[k]);
    }
    GrayImage img{width_, height_, std::vector<std::uint8_t>(owner_.size(), 0)};
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t k = 0; k < owner_.size(); ++k) {
        const auto id = owner_[k];
        if (removed_[id]) continue;
        const double v = hi > lo ? (values[id] - lo) / span : 0.5;
        img.pixels[k] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
    return img;
}

GrayImage mosaic(std::span<const std::vector<float>> tiles, std::uint32_t rows, std::uint32_t cols,
                 std::uint32_t per_row, std::uint32_t per_column, std::uint32_t scale, std::uint32_t gap) {
    GrayImage img;
    img.width = per_row * (cols * scale + gap) + gap;
    img.height = per_column * (rows * scale + gap) + gap;
    img.pixels.assign(std::size_t(img.width) * img.height, 128);
    const std::size_t n = std::min<std::size_t>(tiles.size(), std::size_t(per_row) * per_column);
    for (std::size_t t = 0; t < n; ++t) {
        if (tiles[t].size() != std::size_t(rows) * cols)
            throw ConfigError(fmt::format("mosaic tile {} has {} values, expected {}", t, tiles[t].size(), rows * cols));
        const std::uint32_t x0 = gap + std::uint32_t(t % per_row) * (cols * scale + gap);
        const std::uint32_t y0 = gap + std::uint32_t(t / per_row) * (rows * scale + gap);
        for (std::uint32_t r = 0; r < rows * scale; ++r)
            for (std::uint32_t c = 0; c < cols * scale; ++c) {
                const float v = std::clamp(tiles[t][std::size_t(r / scale) * cols + c / scale], 0.0f, 1.0f);
                img.at(x0 + c, y0 + r) = static_cast<std::uint8_t>(std::lround(255.0f * v));
            }
    }
    return img;
}

}  // namespace lemwave
