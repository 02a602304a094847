#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>

#include "lemwave/crack.hpp"
#include "lemwave/errors.hpp"
#include "lemwave/lattice.hpp"
#include "lemwave/render.hpp"

using namespace lemwave;
namespace fs = std::filesystem;

namespace {

LatticeModel plate(std::uint32_t n = 200) {
    PlateSpec s;
    s.n_particles = n;
    s.seed = 4;
    return generate_lattice(s);
}

fs::path temp_file(const char* name) { return fs::temp_directory_path() / (std::string("lemwave-render-") + name); }

}  // namespace

TEST(Pgm, RoundTripAndCorruption) {
    GrayImage img{3, 2, {0, 50, 100, 150, 200, 255}};
    const auto path = temp_file("a.pgm");
    write_pgm(path, img);
    const auto back = read_pgm(path);
    EXPECT_EQ(back.width, 3u);
    EXPECT_EQ(back.height, 2u);
    EXPECT_EQ(back.pixels, img.pixels);

    img.width = 4;  // header now promises more pixels than are stored
    write_pgm(path, img);
    EXPECT_THROW(read_pgm(path), CorruptionError);
    fs::remove(path);
}

TEST(FieldRaster, EachPixelTakesTheNearestParticle) {
    const auto m = plate();
    const std::uint32_t w = 40, h = 40;
    const FieldRaster raster(m, w, h);
    // particle ids as values; the stretch maps id k to round(255 k / (n - 1))
    std::vector<double> ids(m.particles.size());
    for (std::size_t k = 0; k < ids.size(); ++k) ids[k] = double(k);
    const auto img = raster.render(ids);
    const double top = double(ids.size() - 1);
    for (std::uint32_t r = 0; r < h; ++r)
        for (std::uint32_t c = 0; c < w; ++c) {
            const Vec2 at{(c + 0.5) * m.spec.width / w, m.spec.height - (r + 0.5) * m.spec.height / h};
            double best = std::numeric_limits<double>::infinity();
            std::size_t owner = 0;
            for (const auto& p : m.particles)
                if (distance(p.position, at) < best) best = distance(p.position, at), owner = p.id;
            ASSERT_EQ(img.at(c, r), std::uint8_t(std::lround(255.0 * owner / top))) << r << "," << c;
        }
}

TEST(FieldRaster, FramesUseTheirOwnRangeAndRemovedParticlesAreBlack) {
    const auto m = apply_crack(plate(400), {{0.0, 0.005}, {0.004, 0.005}});
    const FieldRaster raster(m, 32, 32);
    std::vector<double> small(m.particles.size()), large(m.particles.size());
    for (std::size_t k = 0; k < small.size(); ++k) {
        small[k] = std::ldexp(double(k % 7), -40);  // power-of-two scales keep the ratios exact
        large[k] = std::ldexp(double(k % 7), -10);
    }
    EXPECT_EQ(raster.render(small).pixels, raster.render(large).pixels);

    const auto img = raster.render(std::vector<double>(m.particles.size(), 2.0));
    std::size_t black = 0;
    for (auto v : img.pixels) {
        EXPECT_TRUE(v == 0 || v == 128);  // a flat field sits mid-gray
        black += v == 0;
    }
    EXPECT_GT(black, 0u);
    EXPECT_THROW(raster.render(std::vector<double>(3, 0.0)), ConfigError);
}

TEST(Mosaic, GeometryAndPlacement) {
    std::vector<std::vector<float>> tiles(17, std::vector<float>(16 * 16, 0.0f));
    tiles[16][0] = 1.0f;  // second row, first column, top-left pixel
    const auto img = mosaic(tiles, 16, 16);
    EXPECT_EQ(img.width, 16u * (64 + 2) + 2);
    EXPECT_EQ(img.height, 20u * (64 + 2) + 2);
    EXPECT_EQ(img.at(0, 0), 128);  // gap
    EXPECT_EQ(img.at(2, 2), 0);
    const std::uint32_t y0 = 2 + 66;
    for (std::uint32_t dy = 0; dy < 4; ++dy)
        for (std::uint32_t dx = 0; dx < 4; ++dx) EXPECT_EQ(img.at(2 + dx, y0 + dy), 255);
    EXPECT_EQ(img.at(6, y0), 0);
    EXPECT_EQ(img.at(2 + 66, y0 + 66), 128);  // no tile there
    tiles[0].pop_back();
    EXPECT_THROW(mosaic(tiles, 16, 16), ConfigError);
}
