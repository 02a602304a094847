#include "lemwave/crack.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "lemwave/binary_io.hpp"
#include "lemwave/errors.hpp"

namespace lemwave {

Vec2 Crack::end() const noexcept {
    const double rad = orientation_deg * std::numbers::pi / 180.0;
    return {start.x + length * std::cos(rad), start.y + length * std::sin(rad)};
}

void Crack::validate(const PlateSpec& plate) const {
    const Vec2 s = plate.receiver_spacing();
    const double lmax = 0.5 * std::min(plate.width, plate.height);
    if (!(length > 0.0 && length <= lmax))
        throw ConfigError(fmt::format("crack length {} outside (0, {}]", length, lmax));
    if (!(orientation_deg >= 0.0 && orientation_deg <= 360.0))
        throw ConfigError(fmt::format("crack orientation {} outside [0, 360]", orientation_deg));
    if (!(start.x >= s.x && start.x <= plate.width - s.x && start.y >= s.y && start.y <= plate.height - s.y))
        throw ConfigError(fmt::format("crack start ({}, {}) outside the sampling window", start.x, start.y));
}

LabelImage LabelImage::blank(std::uint32_t rows, std::uint32_t cols, double width, double height) {
    LabelImage img;
    img.rows = rows;
    img.cols = cols;
    img.pitch_x = width / cols;
    img.pitch_y = height / rows;
    img.bits.assign(std::size_t(rows) * cols, 0);
    return img;
}

std::size_t LabelImage::lit_count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Crack sample_crack(Rng& rng, const PlateSpec& plate, Vec2 spacing) {
    if (!(spacing.x > 0.0 && spacing.x < 0.5 * plate.width && spacing.y > 0.0 && spacing.y < 0.5 * plate.height))
        throw ConfigError("receiver spacing must lie in (0, half the plate size)");
    Crack c;
    c.length = 0.5 * std::min(plate.width, plate.height) * rng.uniform_open_closed();
    c.orientation_deg = rng.uniform(0.0, 360.0);
    c.start.x = rng.uniform(spacing.x, plate.width - spacing.x);
    c.start.y = rng.uniform(spacing.y, plate.height - spacing.y);
    return c;
}

Segment clip_crack(const Crack& crack, const PlateSpec& plate) {
    const Segment raw{crack.start, crack.end()};
    auto clipped = clip_segment(raw, {0.0, 0.0}, {plate.width, plate.height});
    // start lies inside the plate, so the clip is never empty
    return clipped.value_or(Segment{crack.start, crack.start});
}

LatticeModel apply_crack(LatticeModel model, const Segment& segment) {
    const Rect dom = model.spec.domain();
    if (!dom.contains(segment.a) || !dom.contains(segment.b))
        throw ConfigError("crack segment must lie inside the plate");

    std::vector<std::uint32_t> hit;
    if (segment.length() == 0.0) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t owner = 0;
        for (const auto& p : model.particles) {
            if (p.removed) continue;
            const double d = distance(p.position, segment.a);
            if (d < best) {
                best = d;
                owner = p.id;
            }
        }
        if (best < std::numeric_limits<double>::infinity()) hit.push_back(owner);
    } else {
        const Vec2 lo{std::min(segment.a.x, segment.b.x), std::min(segment.a.y, segment.b.y)};
        const Vec2 hi{std::max(segment.a.x, segment.b.x), std::max(segment.a.y, segment.b.y)};
        for (const auto& p : model.particles) {
            if (p.removed) continue;
            const auto& cell = model.cells[p.id].vertices;
            double cx0 = cell[0].x, cx1 = cell[0].x, cy0 = cell[0].y, cy1 = cell[0].y;
            for (const auto& v : cell) {
                cx0 = std::min(cx0, v.x);
                cx1 = std::max(cx1, v.x);
                cy0 = std::min(cy0, v.y);
                cy1 = std::max(cy1, v.y);
            }
            if (cx1 < lo.x || cx0 > hi.x || cy1 < lo.y || cy0 > hi.y) continue;
            if (segment_intersects_convex_polygon(segment, cell)) hit.push_back(p.id);
        }
    }

    for (auto id : hit) model.particles[id].removed = true;
    for (auto& e : model.elements) {
        if (model.particles[e.node_a].removed || model.particles[e.node_b].removed) {
            e.active = false;
            continue;
        }
        // Hull elements can have their facet clipped away entirely and then
        // bridge the removed band without touching it; an open crack carries
        // no load across, so cut those too.
        const Segment bar{model.particles[e.node_a].position, model.particles[e.node_b].position};
        if (segment.length() > 0.0 && segments_cross(bar, segment)) e.active = false;
    }
    reassemble(model);

    const auto floating = floating_particles(model);
    if (!floating.empty())
        throw FloatingComponentError(
            fmt::format("crack detaches {} particle(s) from the clamped edge (first: {})", floating.size(),
                        floating.front()));
    return model;
}

LabelImage rasterize_label(const Segment& segment, const PlateSpec& plate, std::uint32_t resolution) {
    LabelImage img = LabelImage::blank(resolution, resolution, plate.width, plate.height);
    const auto n = static_cast<std::int64_t>(resolution);
    // pixel coordinates: X across columns, Y down rows
    const double x0 = segment.a.x / img.pitch_x, y0 = (plate.height - segment.a.y) / img.pitch_y;
    const double x1 = segment.b.x / img.pitch_x, y1 = (plate.height - segment.b.y) / img.pitch_y;
    auto cell = [n](double v) { return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(v)), 0, n - 1); };
    auto mark = [&](std::int64_t c, std::int64_t r) {
        if (c >= 0 && c < n && r >= 0 && r < n) img.at(std::uint32_t(r), std::uint32_t(c)) = 1;
    };

    std::int64_t c = cell(x0), r = cell(y0);
    const std::int64_t c_end = cell(x1), r_end = cell(y1);
    const double dx = x1 - x0, dy = y1 - y0;
    const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double delta_x = step_x ? 1.0 / std::abs(dx) : inf;
    const double delta_y = step_y ? 1.0 / std::abs(dy) : inf;
    double t_x = step_x > 0 ? (double(c + 1) - x0) / dx : step_x < 0 ? (x0 - double(c)) / -dx : inf;
    double t_y = step_y > 0 ? (double(r + 1) - y0) / dy : step_y < 0 ? (y0 - double(r)) / -dy : inf;

    mark(c, r);
    for (std::int64_t guard = 0; (c != c_end || r != r_end) && guard < 4 * n + 4; ++guard) {
        if (std::min(t_x, t_y) > 1.0) break;
        if (t_x == t_y) {
            // exact corner crossing: the supercover keeps both side cells
            mark(c + step_x, r);
            mark(c, r + step_y);
            c += step_x;
            r += step_y;
            t_x += delta_x;
            t_y += delta_y;
        } else if (t_x < t_y) {
            c += step_x;
            t_x += delta_x;
        } else {
            r += step_y;
            t_y += delta_y;
        }
        mark(c, r);
    }
    return img;
}

LabelImage downsample_label(const LabelImage& source, std::uint32_t resolution) {
    LabelImage out = LabelImage::blank(resolution, resolution, source.pitch_x * source.cols,
                                       source.pitch_y * source.rows);
    const std::uint64_t sr = source.rows, sc = source.cols, d = resolution;
    for (std::uint64_t r = 0; r < sr; ++r) {
        // output rows R with positive overlap: r d < (R + 1) sr and R sr < (r + 1) d
        const std::uint64_t r_lo = (r * d) / sr, r_hi = ((r + 1) * d - 1) / sr;
        for (std::uint64_t c = 0; c < sc; ++c) {
            if (!source.at(std::uint32_t(r), std::uint32_t(c))) continue;
            const std::uint64_t c_lo = (c * d) / sc, c_hi = ((c + 1) * d - 1) / sc;
            for (auto R = r_lo; R <= r_hi; ++R)
                for (auto C = c_lo; C <= c_hi; ++C) out.at(std::uint32_t(R), std::uint32_t(C)) = 1;
        }
    }
    return out;
}

void write_label_pbm(const std::filesystem::path& path, const LabelImage& image) {
    std::string text = fmt::format("P1\n# lemwave-label resolution={}x{} pitch={:.17g},{:.17g}\n{} {}\n", image.rows,
                                   image.cols, image.pitch_x, image.pitch_y, image.cols, image.rows);
    for (std::uint32_t r = 0; r < image.rows; ++r) {
        for (std::uint32_t c = 0; c < image.cols; ++c) {
            text += image.at(r, c) ? '1' : '0';
            text += c + 1 < image.cols ? ' ' : '\n';
        }
    }
    io::write_text_atomic(path, text);
}

LabelImage read_label_pbm(const std::filesystem::path& path) {
    const auto raw = io::read_file(path);
    std::istringstream in(std::string(reinterpret_cast<const char*>(raw.data()), raw.size()));
    std::string magic, comment_tag, meta_name, res, pitch;
    in >> magic;
    if (magic != "P1") throw CorruptionError(fmt::format("{}: not a plain PBM", path.string()));
    in >> comment_tag >> meta_name >> res >> pitch;
    if (comment_tag != "#" || meta_name != "lemwave-label")
        throw CorruptionError(fmt::format("{}: missing lemwave-label metadata", path.string()));
    LabelImage img;
    std::uint32_t cols = 0, rows = 0;
    if (std::sscanf(pitch.c_str(), "pitch=%lf,%lf", &img.pitch_x, &img.pitch_y) != 2 || !(in >> cols >> rows))
        throw CorruptionError(fmt::format("{}: malformed header", path.string()));
    img.rows = rows;
    img.cols = cols;
    img.bits.resize(std::size_t(rows) * cols);
    for (auto& b : img.bits) {
        int v = -1;
        if (!(in >> v) || (v != 0 && v != 1)) throw CorruptionError(fmt::format("{}: truncated bitmap", path.string()));
        b = static_cast<std::uint8_t>(v);
    }
    return img;
}

}  // namespace lemwave
