#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "lemwave/binary_io.hpp"
#include "lemwave/dataset.hpp"
#include "lemwave/errors.hpp"
#include "lemwave/metrics.hpp"

using namespace lemwave;
namespace fs = std::filesystem;

namespace {

DatasetConfig tiny_config(std::uint64_t seed = 5) {
    DatasetConfig c;
    c.master_seed = seed;
    c.plate.n_particles = 300;
    c.newmark.dt = 2.5e-8;
    c.newmark.n_steps = 40;
    c.train[SampleType::N] = 3;
    c.train[SampleType::R] = 1;
    c.train[SampleType::S] = 2;
    c.train[SampleType::C] = 2;
    c.test[SampleType::N] = 2;
    c.test[SampleType::R] = 1;
    c.test[SampleType::C] = 2;
    c.type_c_group = 2;
    c.type_s_group = 2;
    c.special_cases = 1;
    return c;
}

DatasetConfig desk_config() {
    DatasetConfig c;
    c.master_seed = 7;
    c.train = {{30, 4, 6, 24}};
    c.test = {{6, 1, 1, 8}};
    c.type_c_group = 8;
    c.special_cases = 3;
    return c;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("lemwave_ds_" + name);
    fs::remove_all(dir);
    return dir;
}

const SampleSpec& find(const std::vector<SampleSpec>& plan, Split split, SampleType type, std::size_t nth = 0) {
    for (const auto& s : plan)
        if (s.split == split && s.type == type && nth-- == 0) return s;
    throw std::runtime_error("no such sample in plan");
}

}  // namespace

TEST(Normalize, AffineMapOntoUnitRange) {
    const std::vector<float> raw{-2.0f, 0.0f, 1.0f, 2.0f, -1.0f, 0.5f};
    const auto out = normalize_record(raw);
    for (std::size_t k = 0; k < raw.size(); ++k) EXPECT_EQ(out[k], raw[k] / 2.0f);

    EXPECT_EQ(normalize_record(std::vector<float>(10, 0.0f)), std::vector<float>(10, 0.0f));
    EXPECT_EQ(normalize_record(std::vector<float>(4, 3.5f)), std::vector<float>(4, 0.0f));

    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 100; ++trial) {
        const double scale = std::pow(10.0, double(int(gen() % 30)) - 20.0);
        std::normal_distribution<float> d(0.0f, float(scale));
        std::vector<float> r(500);
        for (auto& v : r) v = d(gen);
        const auto n = normalize_record(r);
        const auto [lo, hi] = std::minmax_element(n.begin(), n.end());
        EXPECT_EQ(*lo, -1.0f);
        EXPECT_EQ(*hi, 1.0f);
    }
}

TEST(ReceiverGridTest, InteriorNineByNineNearestParticles) {
    PlateSpec spec;
    spec.n_particles = 600;
    spec.seed = 4;
    const auto model = generate_lattice(spec);
    const auto g = ReceiverGrid::bind(model);
    ASSERT_EQ(g.positions.size(), 81u);
    ASSERT_EQ(g.particles.size(), 81u);
    const Vec2 s = spec.receiver_spacing();
    for (std::size_t k = 0; k < 81; ++k) {
        const std::size_t i = k % 9 + 1, j = k / 9 + 1;
        EXPECT_DOUBLE_EQ(g.positions[k].x, double(i) * s.x);
        EXPECT_DOUBLE_EQ(g.positions[k].y, double(j) * s.y);
        // edge receivers (i or j = 0 or 10) are never part of the grid
        EXPECT_GT(g.positions[k].x, 0.5 * s.x);
        EXPECT_LT(g.positions[k].x, spec.width - 0.5 * s.x);
        const double d = distance(model.particles[g.particles[k]].position, g.positions[k]);
        for (const auto& p : model.particles) EXPECT_GE(distance(p.position, g.positions[k]), d);
        EXPECT_DOUBLE_EQ(g.offsets[k].x, model.particles[g.particles[k]].position.x - g.positions[k].x);
    }
}

TEST(ReceiverGridTest, SkipsRemovedParticles) {
    PlateSpec spec;
    spec.n_particles = 600;
    spec.seed = 4;
    auto model = generate_lattice(spec);
    const auto before = ReceiverGrid::bind(model);
    model.particles[before.particles[40]].removed = true;
    const auto after = ReceiverGrid::bind(model);
    EXPECT_NE(after.particles[40], before.particles[40]);
}

TEST(Excitation, EdgeMidpointsPushInward) {
    PlateSpec spec;
    spec.n_particles = 600;
    spec.seed = 9;
    const auto model = generate_lattice(spec);
    const auto left = excitation_load(model, ExcitationSite::left, 1000.0, 1);
    EXPECT_EQ(left.direction.x, 1.0);
    EXPECT_LT(model.particles[left.excitation_particle].position.x, 0.1 * spec.width);
    const auto right = excitation_load(model, ExcitationSite::right, 1000.0, 1);
    EXPECT_EQ(right.direction.x, -1.0);
    EXPECT_GT(model.particles[right.excitation_particle].position.x, 0.9 * spec.width);
    const auto top = excitation_load(model, ExcitationSite::top, 1000.0, 2);
    EXPECT_EQ(top.direction.y, -1.0);
    EXPECT_EQ(top.duration_steps, 2u);
    EXPECT_GT(model.particles[top.excitation_particle].position.y, 0.9 * spec.height);
    for (const auto& l : {left, right, top})
        EXPECT_GE(model.particles[l.excitation_particle].position.y, spec.clamp_height());
}

TEST(Plan, CountsMatchRequestExactly) {
    const auto c = desk_config();
    const auto plan = plan_dataset(c);
    ASSERT_EQ(plan.size(), 80u);
    TypeCounts train, test;
    std::set<std::string> ids;
    for (const auto& s : plan) {
        (s.split == Split::train ? train : test)[s.type]++;
        ids.insert(s.id);
        EXPECT_EQ(s.crack.has_value(), s.type == SampleType::N || s.type == SampleType::S);
    }
    EXPECT_EQ(train, c.train);
    EXPECT_EQ(test, c.test);
    EXPECT_EQ(ids.size(), plan.size());
    EXPECT_EQ(plan.front().id, "train-00000");
    EXPECT_EQ(plan.back().id, "test-00015");
}

TEST(Plan, FullScaleComposition) {
    DatasetConfig c;
    c.train = {{1520, 80, 160, 1280}};
    c.test = {{144, 8, 8, 160}};
    const auto plan = plan_dataset(c);
    std::size_t n_train = 0, n_test = 0;
    std::set<std::uint64_t> test_c_plates;
    for (const auto& s : plan) {
        (s.split == Split::train ? n_train : n_test)++;
        if (s.split == Split::test && s.type == SampleType::C) test_c_plates.insert(s.plate_seed);
    }
    EXPECT_EQ(n_train, 3040u);
    EXPECT_EQ(n_test, 320u);
    // ten plates with sixteen cracks each
    EXPECT_EQ(test_c_plates.size(), 10u);
}

TEST(Plan, GroupsAndSpecialCases) {
    const auto c = desk_config();
    const auto plan = plan_dataset(c);

    std::set<std::uint64_t> c_plates, c_crack_seeds;
    for (std::size_t k = 0; k < 8; ++k) {
        const auto& s = find(plan, Split::train, SampleType::C, k);
        EXPECT_EQ(s.group, 0);
        c_plates.insert(s.plate_seed);
        c_crack_seeds.insert(s.crack_seed);
    }
    EXPECT_EQ(c_plates.size(), 1u);
    EXPECT_EQ(c_crack_seeds.size(), 8u);
    EXPECT_NE(find(plan, Split::train, SampleType::C, 8).plate_seed, *c_plates.begin());

    const auto& s0 = find(plan, Split::train, SampleType::S, 0);
    const Vec2 sp = c.plate.receiver_spacing();
    for (std::size_t k = 1; k < 6; ++k) {
        const auto& s = find(plan, Split::train, SampleType::S, k);
        EXPECT_EQ(s.crack->length, s0.crack->length);
        EXPECT_EQ(s.crack->orientation_deg, s0.crack->orientation_deg);
        EXPECT_LE(distance(s.crack->start, s0.crack->start), 2.0 * c.type_s_jitter * sp.x + 1e-15);
        EXPECT_NE(s.plate_seed, s0.plate_seed);
        EXPECT_NO_THROW(s.crack->validate(c.plate));
    }

    std::set<std::string> partners;
    for (std::size_t k = 0; k < c.test[SampleType::N]; ++k) {
        const auto& t = find(plan, Split::test, SampleType::N, k);
        if (k >= c.special_cases) {
            EXPECT_TRUE(t.special_case_of.empty());
            continue;
        }
        const auto partner = std::find_if(plan.begin(), plan.end(), [&](const SampleSpec& s) { return s.id == t.special_case_of; });
        ASSERT_NE(partner, plan.end());
        EXPECT_EQ(partner->type, SampleType::N);
        EXPECT_EQ(partner->split, Split::train);
        EXPECT_EQ(partner->crack->start, t.crack->start);
        EXPECT_EQ(partner->crack->length, t.crack->length);
        EXPECT_NE(partner->plate_seed, t.plate_seed);
        partners.insert(t.special_case_of);
    }
    EXPECT_EQ(partners.size(), c.special_cases);
}

TEST(Plan, PureFunctionOfSeedAndConfig) {
    const auto a = plan_dataset(desk_config());
    const auto b = plan_dataset(desk_config());
    auto other = desk_config();
    other.master_seed = 8;
    const auto d = plan_dataset(other);
    std::size_t same_seed = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].plate_seed, b[k].plate_seed);
        EXPECT_EQ(a[k].crack_seed, b[k].crack_seed);
        EXPECT_EQ(a[k].site, b[k].site);
        same_seed += a[k].plate_seed == d[k].plate_seed;
    }
    EXPECT_EQ(same_seed, 0u);
}

TEST(GenerateSample, LabelsFollowType) {
    const auto c = tiny_config();
    const auto plan = plan_dataset(c);
    for (const auto& spec : plan) {
        const Sample s = generate_sample(spec, c);
        EXPECT_EQ(s.crack.has_value(), spec.type != SampleType::R) << spec.id;
        EXPECT_EQ(s.label100.rows, 100u);
        EXPECT_EQ(s.label16.rows, 16u);
        if (spec.type == SampleType::R) {
            EXPECT_EQ(s.label100.lit_count(), 0u);
            EXPECT_EQ(s.label16.lit_count(), 0u);
        } else {
            EXPECT_GE(s.label100.lit_count(), 1u);
            EXPECT_EQ(s.label16, downsample_label(s.label100));
        }
        ASSERT_EQ(s.record.n_receivers, 81u);
        ASSERT_EQ(s.record.n_steps, c.newmark.n_steps);
        const auto [lo, hi] = std::minmax_element(s.record.data.begin(), s.record.data.end());
        EXPECT_GE(*lo, -1.0f);
        EXPECT_LE(*hi, 1.0f);
    }
}

TEST(GenerateSample, TypeCSharesThePlate) {
    const auto c = tiny_config();
    const auto plan = plan_dataset(c);
    const auto& a = find(plan, Split::train, SampleType::C, 0);
    const auto& b = find(plan, Split::train, SampleType::C, 1);
    const Sample sa = generate_sample(a, c), sb = generate_sample(b, c);
    EXPECT_EQ(sa.plate_seed, sb.plate_seed);
    ASSERT_TRUE(sa.crack && sb.crack);
    EXPECT_NE(sa.crack->start, sb.crack->start);
    PlateSpec ps = c.plate;
    ps.seed = sa.plate_seed;
    const auto pa = generate_lattice(ps);
    ps.seed = sb.plate_seed;
    const auto pb = generate_lattice(ps);
    ASSERT_EQ(pa.particles.size(), pb.particles.size());
    for (std::size_t k = 0; k < pa.particles.size(); ++k) EXPECT_EQ(pa.particles[k].position, pb.particles[k].position);
}

TEST(GenerateSample, DeterministicBytes) {
    const auto c = tiny_config();
    const auto plan = plan_dataset(c);
    const auto& spec = find(plan, Split::train, SampleType::N, 1);
    EXPECT_EQ(serialize_sample(generate_sample(spec, c)), serialize_sample(generate_sample(spec, c)));
}

TEST(SampleFile, RoundTripIsBitExact) {
    const auto c = tiny_config();
    const auto plan = plan_dataset(c);
    const Sample s = generate_sample(find(plan, Split::train, SampleType::S, 0), c);
    SampleLayout layout;
    const auto bytes = serialize_sample(s, &layout);
    const Sample back = deserialize_sample(bytes, "t");
    EXPECT_EQ(back.id, s.id);
    EXPECT_EQ(back.type, s.type);
    EXPECT_EQ(back.plate_seed, s.plate_seed);
    EXPECT_EQ(back.crack->start, s.crack->start);
    EXPECT_EQ(back.crack_segment.b, s.crack_segment.b);
    EXPECT_EQ(back.record.data, s.record.data);
    EXPECT_EQ(back.record.dt, s.record.dt);
    EXPECT_EQ(back.record.receiver_particles, s.record.receiver_particles);
    EXPECT_EQ(back.record.load.excitation_particle, s.record.load.excitation_particle);
    EXPECT_EQ(back.receiver_offsets.size(), 81u);
    EXPECT_EQ(back.label100, s.label100);
    EXPECT_EQ(back.label16, s.label16);
    EXPECT_EQ(serialize_sample(back), bytes);

    // the layout offsets address the raw payloads
    EXPECT_EQ(layout.tensor_offset % 4, 0u);
    EXPECT_EQ(std::memcmp(bytes.data() + layout.tensor_offset, s.record.data.data(), s.record.data.size() * 4), 0);
    EXPECT_EQ(std::memcmp(bytes.data() + layout.label16_offset, s.label16.bits.data(), 256), 0);
    EXPECT_EQ(std::memcmp(bytes.data() + layout.label100_offset, s.label100.bits.data(), 10000), 0);

    for (std::size_t cut : {std::size_t{3}, std::size_t{100}, bytes.size() / 2, bytes.size() - 1}) {
        std::vector<std::byte> part(bytes.begin(), bytes.begin() + std::ptrdiff_t(cut));
        EXPECT_THROW(deserialize_sample(part, "cut"), CorruptionError) << cut;
    }
    auto bad = bytes;
    bad[1] = std::byte{'Z'};
    EXPECT_THROW(deserialize_sample(bad, "magic"), CorruptionError);
}

TEST(BuildDataset, DeterministicRoundTripInManifestOrder) {
    const auto c = tiny_config();
    const auto dir_a = scratch("det_a"), dir_b = scratch("det_b");
    const auto ma = build_dataset(c, dir_a, {2, true});
    const auto mb = build_dataset(c, dir_b, {1, true});
    EXPECT_EQ(ma.dataset_checksum(), mb.dataset_checksum());
    ASSERT_EQ(ma.entries.size(), c.train.total() + c.test.total());
    for (std::size_t k = 0; k < ma.entries.size(); ++k) EXPECT_EQ(ma.entries[k].checksum, mb.entries[k].checksum);
    EXPECT_FALSE(fs::exists(dir_a / kPartialManifestName));

    DatasetReader reader(dir_a / kManifestName);
    EXPECT_EQ(reader.manifest().train, c.train);
    const auto plan = plan_dataset(c);
    std::size_t k = 0;
    while (auto s = reader.next()) {
        ASSERT_LT(k, plan.size());
        EXPECT_EQ(s->id, plan[k].id);
        const Sample fresh = generate_sample(plan[k], c);
        EXPECT_EQ(s->record.data, fresh.record.data);
        EXPECT_EQ(s->label100, fresh.label100);
        ++k;
    }
    EXPECT_EQ(k, plan.size());
    const auto& e = reader.manifest().entries[0];
    EXPECT_EQ(e.crack_size, crack_size(reader.read(0).label100));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST(BuildDataset, CorruptionNamesTheSample) {
    auto c = tiny_config();
    c.train = {{2, 1, 0, 0}};
    c.test = {{1, 0, 0, 0}};
    c.special_cases = 0;
    const auto dir = scratch("corrupt");
    const auto m = build_dataset(c, dir);
    DatasetReader reader(dir / kManifestName);

    const auto victim = dir / m.entries[1].file;
    auto bytes = io::read_file(victim);
    bytes[bytes.size() / 2] ^= std::byte{0x40};
    io::write_file_atomic(victim, bytes);
    try {
        reader.read(1);
        ADD_FAILURE() << "flipped byte went unnoticed";
    } catch (const CorruptionError& e) {
        EXPECT_NE(std::string(e.what()).find(m.entries[1].id), std::string::npos) << e.what();
    }

    bytes.resize(bytes.size() - 10);
    io::write_file_atomic(victim, bytes);
    EXPECT_THROW(reader.read(1), CorruptionError);
    fs::remove(victim);
    EXPECT_THROW(reader.read(1), CorruptionError);
    EXPECT_NO_THROW(reader.read(0));

    // manifest edited by hand
    auto text = io::read_file(dir / kManifestName);
    std::string s(reinterpret_cast<const char*>(text.data()), text.size());
    const auto pos = s.find("\"checksum\": \"0x");
    ASSERT_NE(pos, std::string::npos);
    s[pos + 16] = s[pos + 16] == 'a' ? 'b' : 'a';
    io::write_text_atomic(dir / kManifestName, s);
    EXPECT_THROW(read_manifest(dir / kManifestName), CorruptionError);
    fs::remove_all(dir);
}

TEST(BuildDataset, ResumesFromPartialMarker) {
    const auto c = tiny_config();
    const auto ref_dir = scratch("resume_ref");
    const auto reference = build_dataset(c, ref_dir);

    // Block one sample file with a directory so its write fails mid-build.
    const auto dir = scratch("resume");
    const auto plan = plan_dataset(c);
    const auto blocked = dir / "samples" / (plan[4].id + ".wsmp");
    fs::create_directories(blocked / "x");
    EXPECT_THROW(build_dataset(c, dir), IoError);
    EXPECT_FALSE(fs::exists(dir / kManifestName));
    ASSERT_TRUE(fs::exists(dir / kPartialManifestName));

    // samples finished before the failure must be reused untouched
    const auto first = dir / "samples" / (plan[0].id + ".wsmp");
    ASSERT_TRUE(fs::exists(first));
    const auto old_time = fs::file_time_type::clock::now() - std::chrono::hours(24);
    fs::last_write_time(first, old_time);

    fs::remove_all(blocked);
    const auto resumed = build_dataset(c, dir);
    EXPECT_EQ(resumed.dataset_checksum(), reference.dataset_checksum());
    EXPECT_EQ(fs::last_write_time(first), old_time);
    EXPECT_FALSE(fs::exists(dir / kPartialManifestName));

    // a marker from another configuration is ignored
    auto other = c;
    other.master_seed = c.master_seed + 1;
    std::ofstream(dir / kPartialManifestName) << nlohmann::json{{"config_fingerprint", "0x0000000000000001"}}.dump()
                                               << "\n";
    const auto rebuilt = build_dataset(other, dir);
    EXPECT_NE(rebuilt.dataset_checksum(), reference.dataset_checksum());
    fs::remove_all(ref_dir);
    fs::remove_all(dir);
}
