#include "lemwave/dataset.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include "lemwave/binary_io.hpp"
#include "lemwave/errors.hpp"
#include "lemwave/metrics.hpp"
#include "lemwave/rng.hpp"

namespace lemwave {

using nlohmann::json;

char type_letter(SampleType t) noexcept { return "NRSC"[static_cast<int>(t)]; }

SampleType parse_sample_type(std::string_view s) {
    if (s == "N") return SampleType::N;
    if (s == "R") return SampleType::R;
    if (s == "S") return SampleType::S;
    if (s == "C") return SampleType::C;
    throw ConfigError(fmt::format("unknown sample type '{}'", s));
}

const char* split_name(Split s) noexcept { return s == Split::train ? "train" : "test"; }

namespace {

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw CorruptionError(fmt::format("unknown split '{}'", s));
}

}  // namespace

const char* site_name(ExcitationSite s) noexcept {
    switch (s) {
        case ExcitationSite::left: return "left";
        case ExcitationSite::right: return "right";
        case ExcitationSite::top: return "top";
    }
    return "?";
}

ExcitationSite parse_site(std::string_view s) {
    if (s == "left") return ExcitationSite::left;
    if (s == "right") return ExcitationSite::right;
    if (s == "top") return ExcitationSite::top;
    throw ConfigError(fmt::format("unknown excitation site '{}' (left, right, top)", s));
}

LoadSpec excitation_load(const LatticeModel& model, ExcitationSite site, double magnitude,
                         std::size_t duration_steps) {
    const double w = model.spec.width, h = model.spec.height;
    Vec2 target, dir;
    switch (site) {
        case ExcitationSite::left: target = {0.0, 0.5 * h}, dir = {1.0, 0.0}; break;
        case ExcitationSite::right: target = {w, 0.5 * h}, dir = {-1.0, 0.0}; break;
        case ExcitationSite::top: target = {0.5 * w, h}, dir = {0.0, -1.0}; break;
    }
    const double clamp_y = model.spec.clamp_height();
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t owner = 0;
    for (const auto& p : model.particles) {
        if (p.removed || p.position.y < clamp_y) continue;
        const double d = distance(p.position, target);
        if (d < best) {
            best = d;
            owner = p.id;
        }
    }
    if (!std::isfinite(best)) throw ConfigError("no free particle to carry the excitation");
    LoadSpec load;
    load.excitation_particle = owner;
    load.direction = dir;
    load.magnitude = magnitude;
    load.duration_steps = duration_steps;
    return load;
}

ReceiverGrid ReceiverGrid::bind(const LatticeModel& model) {
    ReceiverGrid g;
    g.spacing = model.spec.receiver_spacing();
    for (std::size_t j = 1; j <= kPerSide; ++j) {
        for (std::size_t i = 1; i <= kPerSide; ++i) {
            const Vec2 pos{double(i) * g.spacing.x, double(j) * g.spacing.y};
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t owner = 0;
            for (const auto& p : model.particles) {
                if (p.removed) continue;
                const double d = distance(p.position, pos);
                if (d < best) {
                    best = d;
                    owner = p.id;
                }
            }
            if (!std::isfinite(best)) throw ConfigError("no particle left to bind a receiver to");
            g.positions.push_back(pos);
            g.particles.push_back(owner);
            g.offsets.push_back(model.particles[owner].position - pos);
        }
    }
    return g;
}

std::vector<float> normalize_record(std::span<const float> raw) {
    std::vector<float> out(raw.size(), 0.0f);
    if (raw.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) return out;
    const double range = hi - lo;
    for (std::size_t k = 0; k < raw.size(); ++k)
        out[k] = static_cast<float>(2.0 * ((double(raw[k]) - lo) / range) - 1.0);
    return out;
}

void DatasetConfig::validate() const {
    plate.validate();
    newmark.validate();
    LoadSpec probe;
    probe.magnitude = load_magnitude;
    probe.duration_steps = load_duration_steps;
    probe.validate(newmark);
    if (sites.empty()) throw ConfigError("load.sites must name at least one excitation site");
    if (train.total() + test.total() == 0) throw ConfigError("dataset has no samples");
    if (type_c_group == 0 || type_s_group == 0) throw ConfigError("group sizes must be positive");
    if (!(type_s_jitter >= 0.0 && type_s_jitter <= 1.0))
        throw ConfigError(fmt::format("dataset.type_s_jitter {} outside [0, 1]", type_s_jitter));
    if (special_cases > test[SampleType::N] || (special_cases > 0 && train[SampleType::N] < special_cases))
        throw ConfigError(fmt::format("dataset.special_cases {} needs that many Type-N samples in both splits",
                                      special_cases));
    if (max_attempts == 0) throw ConfigError("dataset.max_attempts must be positive");
}

std::string DatasetConfig::canonical() const {
    std::string s = fmt::format(
        "plate {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {} {:.17g}\n"
        "newmark {:.17g} {:.17g} {:.17g} {} {}\nload {:.17g} {}",
        plate.width, plate.height, plate.youngs_modulus, plate.density, plate.thickness, plate.n_particles,
        plate.jitter, newmark.beta, newmark.gamma, newmark.dt, newmark.n_steps, newmark.paper_literal,
        load_magnitude, load_duration_steps);
    for (auto site : sites) s += fmt::format(" {}", site_name(site));
    s += fmt::format("\nseed {}\ntrain {} {} {} {}\ntest {} {} {} {}\ngroups {} {} {:.17g} {} {}\n", master_seed,
                     train.n[0], train.n[1], train.n[2], train.n[3], test.n[0], test.n[1], test.n[2], test.n[3],
                     type_c_group, type_s_group, type_s_jitter, special_cases, max_attempts);
    return s;
}

DatasetConfig DatasetConfig::from(const KeyValueConfig& cfg) {
    if (cfg.has("version") && cfg.get_u64("version", 1) != 1)
        throw ConfigError(fmt::format("{}: unsupported config version", cfg.where("version")));
    DatasetConfig c;
    c.master_seed = cfg.get_u64("seed", c.master_seed);

    auto& p = c.plate;
    p.width = cfg.get_double("plate.width", p.width);
    p.height = cfg.get_double("plate.height", p.height);
    p.youngs_modulus = cfg.get_double("plate.youngs_modulus", p.youngs_modulus);
    p.density = cfg.get_double("plate.density", p.density);
    p.thickness = cfg.get_double("plate.thickness", p.thickness);
    p.jitter = cfg.get_double("plate.jitter", p.jitter);
    const auto n = cfg.get_u64("plate.n_particles", p.n_particles);
    if (n > std::numeric_limits<std::uint32_t>::max())
        throw ConfigError(fmt::format("{}: plate.n_particles too large", cfg.where("plate.n_particles")));
    p.n_particles = static_cast<std::uint32_t>(n);

    auto& nm = c.newmark;
    nm.beta = cfg.get_double("newmark.beta", nm.beta);
    nm.gamma = cfg.get_double("newmark.gamma", nm.gamma);
    nm.dt = cfg.get_double("newmark.dt", nm.dt);
    nm.n_steps = cfg.get_u64("newmark.n_steps", nm.n_steps);
    nm.paper_literal = cfg.get_bool("newmark.paper_literal", nm.paper_literal);

    c.load_magnitude = cfg.get_double("load.magnitude", c.load_magnitude);
    c.load_duration_steps = cfg.get_u64("load.duration_steps", c.load_duration_steps);
    if (cfg.has("load.sites")) {
        c.sites.clear();
        for (const auto& s : cfg.get_strings("load.sites", {})) c.sites.push_back(parse_site(s));
    }

    auto count = [&](const std::string& key, std::uint32_t fallback) {
        const auto v = cfg.get_u64(key, fallback);
        if (v > 10'000'000) throw ConfigError(fmt::format("{}: count {} is implausibly large", cfg.where(key), v));
        return static_cast<std::uint32_t>(v);
    };
    for (auto t : kSampleTypes) {
        const char letter = type_letter(t);
        c.train[t] = count(fmt::format("dataset.train.{}", letter), c.train[t]);
        c.test[t] = count(fmt::format("dataset.test.{}", letter), c.test[t]);
    }
    c.type_c_group = count("dataset.type_c_group", c.type_c_group);
    c.type_s_group = count("dataset.type_s_group", c.type_s_group);
    c.type_s_jitter = cfg.get_double("dataset.type_s_jitter", c.type_s_jitter);
    c.special_cases = count("dataset.special_cases", c.special_cases);
    c.max_attempts = count("dataset.max_attempts", c.max_attempts);
    return c;
}

namespace {

// stream tags for derive_seed
enum : std::uint64_t {
    kTagPlate = 1,
    kTagCrack = 2,
    kTagShared = 3,
    kTagJitter = 4,
    kTagGroupPlate = 5,
    kTagGroupCrack = 6,
    kTagSite = 7,
};

Crack jittered(const Crack& base, Rng& rng, const PlateSpec& plate, double radius) {
    const Vec2 s = plate.receiver_spacing();
    const double r = radius * std::sqrt(rng.uniform());
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    Crack c = base;
    c.start.x = std::clamp(base.start.x + r * std::cos(phi), s.x, plate.width - s.x);
    c.start.y = std::clamp(base.start.y + r * std::sin(phi), s.y, plate.height - s.y);
    return c;
}

}  // namespace

std::vector<SampleSpec> plan_dataset(const DatasetConfig& config) {
    config.validate();
    const Vec2 spacing = config.plate.receiver_spacing();
    const std::uint64_t master = config.master_seed;
    std::vector<SampleSpec> plan;

    for (Split split : {Split::train, Split::test}) {
        const auto sp = static_cast<std::uint64_t>(split);
        const TypeCounts& counts = split == Split::train ? config.train : config.test;
        std::uint32_t index = 0;
        for (auto type : kSampleTypes) {
            for (std::uint32_t j = 0; j < counts[type]; ++j, ++index) {
                SampleSpec s;
                s.id = fmt::format("{}-{:05d}", split_name(split), index);
                s.split = split;
                s.index = index;
                s.type = type;
                s.plate_seed = derive_seed(master, {kTagPlate, sp, index});
                Rng site_rng(derive_seed(master, {kTagSite, sp, index}));
                s.site = config.sites[site_rng.below(config.sites.size())];
                switch (type) {
                    case SampleType::N: {
                        Rng rng(derive_seed(master, {kTagCrack, sp, index}));
                        s.crack = sample_crack(rng, config.plate, spacing);
                        break;
                    }
                    case SampleType::R: break;
                    case SampleType::S: {
                        s.group = static_cast<std::int32_t>(j / config.type_s_group);
                        Rng shared(derive_seed(master, {kTagShared, sp, std::uint64_t(s.group)}));
                        const Crack base = sample_crack(shared, config.plate, spacing);
                        Rng rng(derive_seed(master, {kTagJitter, sp, index}));
                        s.crack = jittered(base, rng, config.plate, config.type_s_jitter * spacing.x);
                        break;
                    }
                    case SampleType::C:
                        s.group = static_cast<std::int32_t>(j / config.type_c_group);
                        s.plate_seed = derive_seed(master, {kTagGroupPlate, sp, std::uint64_t(s.group)});
                        s.crack_seed = derive_seed(master, {kTagGroupCrack, sp, index});
                        break;
                }
                plan.push_back(std::move(s));
            }
        }
    }

    // Test Type-N samples that reuse a training crack on a different plate.
    const std::uint32_t k = config.special_cases;
    if (k > 0) {
        std::vector<const SampleSpec*> train_n;
        std::vector<SampleSpec*> test_n;
        for (auto& s : plan) {
            if (s.type != SampleType::N) continue;
            if (s.split == Split::train) train_n.push_back(&s);
            else test_n.push_back(&s);
        }
        for (std::uint32_t i = 0; i < k; ++i) {
            const SampleSpec* src = train_n[std::size_t(i) * train_n.size() / k];
            test_n[i]->crack = src->crack;
            test_n[i]->special_case_of = src->id;
        }
    }
    return plan;
}

Sample generate_sample(const SampleSpec& spec, const DatasetConfig& config) {
    std::string last_error;
    for (std::uint32_t attempt = 0; attempt < config.max_attempts; ++attempt) {
        PlateSpec plate = config.plate;
        // Type-C keeps its group's plate and draws a new crack instead.
        const bool fixed_plate = spec.type == SampleType::C;
        plate.seed = (attempt == 0 || fixed_plate) ? spec.plate_seed : derive_seed(spec.plate_seed, {attempt});
        std::optional<Crack> crack = spec.crack;
        if (spec.type == SampleType::C) {
            Rng rng(attempt == 0 ? spec.crack_seed : derive_seed(spec.crack_seed, {attempt}));
            crack = sample_crack(rng, plate, plate.receiver_spacing());
        }
        try {
            LatticeModel model = generate_lattice(plate);
            Segment segment;
            if (crack) {
                segment = clip_crack(*crack, plate);
                model = apply_crack(std::move(model), segment);
            }
            const ReceiverGrid grid = ReceiverGrid::bind(model);
            const LoadSpec load =
                excitation_load(model, spec.site, config.load_magnitude, config.load_duration_steps);

            Sample out;
            out.id = spec.id;
            out.split = spec.split;
            out.type = spec.type;
            out.plate_seed = plate.seed;
            out.attempts = attempt + 1;
            out.crack = crack;
            out.crack_segment = segment;
            out.site = spec.site;
            out.record = simulate(model, load, config.newmark, grid.particles);
            out.record.data = normalize_record(out.record.data);
            out.receiver_offsets = grid.offsets;
            if (crack) {
                out.label100 = rasterize_label(segment, plate, kFineLabelSize);
                out.label16 = downsample_label(out.label100, kCoarseLabelSize);
            } else {
                out.label100 = LabelImage::blank(kFineLabelSize, kFineLabelSize, plate.width, plate.height);
                out.label16 = LabelImage::blank(kCoarseLabelSize, kCoarseLabelSize, plate.width, plate.height);
            }
            if (attempt > 0) spdlog::info("{}: succeeded on attempt {}", spec.id, attempt + 1);
            return out;
        } catch (const NumericalError& e) {
            last_error = e.what();
            spdlog::warn("{}: attempt {} failed ({}); regenerating with a derived seed", spec.id, attempt + 1,
                         e.what());
        }
    }
    throw NumericalError(
        fmt::format("{}: no valid sample after {} attempts; last error: {}", spec.id, config.max_attempts, last_error));
}

namespace {

constexpr std::uint32_t kSampleVersion = 1;

void put_label(io::ByteWriter& w, const LabelImage& img) {
    w.put<std::uint32_t>(img.rows);
    w.put<std::uint32_t>(img.cols);
    w.put<double>(img.pitch_x);
    w.put<double>(img.pitch_y);
    w.put_all(std::span<const std::uint8_t>(img.bits));
}

LabelImage get_label(io::ByteReader& r, const std::string& context) {
    LabelImage img;
    img.rows = r.get<std::uint32_t>();
    img.cols = r.get<std::uint32_t>();
    img.pitch_x = r.get<double>();
    img.pitch_y = r.get<double>();
    if (std::uint64_t(img.rows) * img.cols > r.remaining())
        throw CorruptionError(fmt::format("{}: label of {}x{} exceeds the file", context, img.rows, img.cols));
    img.bits.resize(std::size_t(img.rows) * img.cols);
    r.get_all(std::span<std::uint8_t>(img.bits));
    for (auto b : img.bits)
        if (b > 1) throw CorruptionError(fmt::format("{}: label pixel is not binary", context));
    return img;
}

}  // namespace

std::vector<std::byte> serialize_sample(const Sample& s, SampleLayout* layout) {
    io::ByteWriter w;
    w.put_bytes("WSMP");
    w.put<std::uint32_t>(kSampleVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.id.size()));
    w.put_bytes(s.id);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.split));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.type));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.site));
    w.put<std::uint8_t>(s.crack ? 1 : 0);
    w.put<std::uint64_t>(s.plate_seed);
    w.put<std::uint32_t>(s.attempts);
    const Crack c = s.crack.value_or(Crack{});
    for (double v : {c.length, c.orientation_deg, c.start.x, c.start.y, s.crack_segment.a.x, s.crack_segment.a.y,
                     s.crack_segment.b.x, s.crack_segment.b.y})
        w.put<double>(v);

    const auto& rec = s.record;
    w.put<std::uint32_t>(rec.load.excitation_particle);
    w.put<double>(rec.load.direction.x);
    w.put<double>(rec.load.direction.y);
    w.put<double>(rec.load.magnitude);
    w.put<std::uint64_t>(rec.load.duration_steps);

    w.put<std::uint32_t>(static_cast<std::uint32_t>(rec.n_receivers));
    for (std::size_t k = 0; k < rec.n_receivers; ++k) {
        const Vec2 off = k < s.receiver_offsets.size() ? s.receiver_offsets[k] : Vec2{};
        w.put<std::uint32_t>(rec.receiver_particles[k]);
        w.put<double>(rec.receiver_positions[k].x);
        w.put<double>(rec.receiver_positions[k].y);
        w.put<double>(off.x);
        w.put<double>(off.y);
    }

    // tensor: shape header, zero padding to a 4-byte boundary, f32 payload
    w.put<std::uint64_t>(rec.n_receivers);
    w.put<std::uint64_t>(rec.n_steps);
    w.put<std::uint64_t>(2);
    w.put<double>(rec.dt);
    while (w.bytes().size() % 4 != 0) w.put<std::uint8_t>(0);
    SampleLayout lay;
    lay.tensor_offset = w.bytes().size();
    w.put_all(std::span<const float>(rec.data));
    lay.label100_offset = w.bytes().size() + 24;
    put_label(w, s.label100);
    lay.label16_offset = w.bytes().size() + 24;
    put_label(w, s.label16);
    if (layout) *layout = lay;
    return std::move(w).take();
}

Sample deserialize_sample(std::span<const std::byte> bytes, const std::string& context) {
    io::ByteReader r(bytes, context);
    r.expect_magic("WSMP");
    if (const auto v = r.get<std::uint32_t>(); v != kSampleVersion)
        throw CorruptionError(fmt::format("{}: unsupported sample version {}", context, v));
    Sample s;
    const auto id_len = r.get<std::uint32_t>();
    s.id = r.get_string(id_len);
    const auto split = r.get<std::uint8_t>(), type = r.get<std::uint8_t>(), site = r.get<std::uint8_t>();
    const auto has_crack = r.get<std::uint8_t>();
    if (split > 1 || type > 3 || site > 2 || has_crack > 1)
        throw CorruptionError(fmt::format("{}: bad sample tags", context));
    s.split = static_cast<Split>(split);
    s.type = static_cast<SampleType>(type);
    s.site = static_cast<ExcitationSite>(site);
    s.plate_seed = r.get<std::uint64_t>();
    s.attempts = r.get<std::uint32_t>();
    Crack c;
    c.length = r.get<double>();
    c.orientation_deg = r.get<double>();
    c.start.x = r.get<double>();
    c.start.y = r.get<double>();
    if (has_crack) s.crack = c;
    s.crack_segment.a.x = r.get<double>();
    s.crack_segment.a.y = r.get<double>();
    s.crack_segment.b.x = r.get<double>();
    s.crack_segment.b.y = r.get<double>();

    auto& rec = s.record;
    rec.load.excitation_particle = r.get<std::uint32_t>();
    rec.load.direction.x = r.get<double>();
    rec.load.direction.y = r.get<double>();
    rec.load.magnitude = r.get<double>();
    rec.load.duration_steps = r.get<std::uint64_t>();

    const auto n_recv = r.get<std::uint32_t>();
    if (std::uint64_t(n_recv) * 36 > r.remaining())
        throw CorruptionError(fmt::format("{}: receiver table exceeds the file", context));
    for (std::uint32_t k = 0; k < n_recv; ++k) {
        rec.receiver_particles.push_back(r.get<std::uint32_t>());
        const double px = r.get<double>(), py = r.get<double>();
        rec.receiver_positions.push_back({px, py});
        const double ox = r.get<double>(), oy = r.get<double>();
        s.receiver_offsets.push_back({ox, oy});
    }

    const auto shape_r = r.get<std::uint64_t>(), shape_t = r.get<std::uint64_t>(), shape_c = r.get<std::uint64_t>();
    rec.dt = r.get<double>();
    if (shape_r != n_recv || shape_c != 2)
        throw CorruptionError(fmt::format("{}: tensor shape does not match the receiver table", context));
    const std::size_t consumed = bytes.size() - r.remaining();
    for (std::size_t k = consumed; k % 4 != 0; ++k) r.get<std::uint8_t>();
    if (shape_t > r.remaining() / (shape_r * 2 * sizeof(float) + 1))
        throw CorruptionError(fmt::format("{}: tensor exceeds the file", context));
    rec.n_receivers = shape_r;
    rec.n_steps = shape_t;
    rec.data.resize(shape_r * shape_t * 2);
    r.get_all(std::span<float>(rec.data));
    s.label100 = get_label(r, context);
    s.label16 = get_label(r, context);
    r.expect_end();
    return s;
}

std::uint64_t DatasetManifest::dataset_checksum() const {
    io::ByteWriter w;
    for (const auto& e : entries) w.put<std::uint64_t>(e.checksum);
    return io::fnv1a64(std::span<const std::byte>(w.bytes()));
}

namespace {

json counts_json(const TypeCounts& c) {
    json j;
    for (auto t : kSampleTypes) j[std::string(1, type_letter(t))] = c[t];
    return j;
}

TypeCounts counts_from(const json& j) {
    TypeCounts c;
    for (auto t : kSampleTypes) c[t] = j.at(std::string(1, type_letter(t))).get<std::uint32_t>();
    return c;
}

json entry_json(const ManifestEntry& e, std::size_t n_receivers, std::size_t n_steps) {
    json j;
    j["id"] = e.id;
    j["split"] = split_name(e.split);
    j["index"] = e.index;
    j["type"] = std::string(1, type_letter(e.type));
    j["plate_seed"] = io::hex64(e.plate_seed);
    j["attempts"] = e.attempts;
    if (e.crack)
        j["crack"] = {{"length", e.crack->length},
                      {"orientation_deg", e.crack->orientation_deg},
                      {"start", {e.crack->start.x, e.crack->start.y}}};
    else
        j["crack"] = nullptr;
    j["group"] = e.group;
    j["site"] = site_name(e.site);
    j["special_case_of"] = e.special_case_of.empty() ? json(nullptr) : json(e.special_case_of);
    j["crack_size"] = e.crack_size;
    j["file"] = e.file;
    j["bytes"] = e.bytes;
    j["tensor"] = {{"offset", e.layout.tensor_offset}, {"dtype", "f32le"}, {"shape", {n_receivers, n_steps, 2}}};
    j["label100"] = {{"offset", e.layout.label100_offset}, {"dtype", "u8"}, {"shape", {kFineLabelSize, kFineLabelSize}}};
    j["label16"] = {
        {"offset", e.layout.label16_offset}, {"dtype", "u8"}, {"shape", {kCoarseLabelSize, kCoarseLabelSize}}};
    j["checksum"] = io::hex64(e.checksum);
    return j;
}

ManifestEntry entry_from(const json& j) {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.split = parse_split(j.at("split").get<std::string>());
    e.index = j.at("index").get<std::uint32_t>();
    const auto type = j.at("type").get<std::string>();
    try {
        e.type = parse_sample_type(type);
    } catch (const ConfigError&) {
        throw CorruptionError(fmt::format("entry {}: unknown type '{}'", e.id, type));
    }
    e.plate_seed = io::parse_hex64(j.at("plate_seed").get<std::string>());
    e.attempts = j.at("attempts").get<std::uint32_t>();
    if (const auto& c = j.at("crack"); !c.is_null()) {
        Crack crack;
        crack.length = c.at("length").get<double>();
        crack.orientation_deg = c.at("orientation_deg").get<double>();
        crack.start = {c.at("start").at(0).get<double>(), c.at("start").at(1).get<double>()};
        e.crack = crack;
    }
    e.group = j.at("group").get<std::int32_t>();
    const auto site = j.at("site").get<std::string>();
    try {
        e.site = parse_site(site);
    } catch (const ConfigError&) {
        throw CorruptionError(fmt::format("entry {}: unknown site '{}'", e.id, site));
    }
    if (const auto& sc = j.at("special_case_of"); !sc.is_null()) e.special_case_of = sc.get<std::string>();
    e.crack_size = j.at("crack_size").get<double>();
    e.file = j.at("file").get<std::string>();
    e.bytes = j.at("bytes").get<std::uint64_t>();
    e.layout.tensor_offset = j.at("tensor").at("offset").get<std::size_t>();
    e.layout.label100_offset = j.at("label100").at("offset").get<std::size_t>();
    e.layout.label16_offset = j.at("label16").at("offset").get<std::size_t>();
    e.checksum = io::parse_hex64(j.at("checksum").get<std::string>());
    return e;
}

json parse_json(std::span<const std::byte> bytes, const std::string& context) {
    try {
        return json::parse(reinterpret_cast<const char*>(bytes.data()),
                           reinterpret_cast<const char*>(bytes.data()) + bytes.size());
    } catch (const json::exception& e) {
        throw CorruptionError(fmt::format("{}: {}", context, e.what()));
    }
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
    json j;
    j["format"] = "lemwave-dataset";
    j["version"] = m.version;
    j["master_seed"] = io::hex64(m.master_seed);
    j["config_fingerprint"] = io::hex64(m.config_fingerprint);
    j["n_receivers"] = m.n_receivers;
    j["n_steps"] = m.n_steps;
    j["dt"] = m.dt;
    j["counts"] = {{"train", counts_json(m.train)}, {"test", counts_json(m.test)}};
    j["total"] = m.entries.size();
    j["dataset_checksum"] = io::hex64(m.dataset_checksum());
    auto& arr = j["samples"] = json::array();
    for (const auto& e : m.entries) arr.push_back(entry_json(e, m.n_receivers, m.n_steps));
    io::write_text_atomic(path, j.dump(1) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    const json j = parse_json(io::read_file(path), path.string());
    DatasetManifest m;
    try {
        if (j.at("format").get<std::string>() != "lemwave-dataset")
            throw CorruptionError(fmt::format("{}: not a dataset manifest", path.string()));
        m.version = j.at("version").get<std::uint32_t>();
        if (m.version != 1)
            throw CorruptionError(fmt::format("{}: unsupported manifest version {}", path.string(), m.version));
        m.master_seed = io::parse_hex64(j.at("master_seed").get<std::string>());
        m.config_fingerprint = io::parse_hex64(j.at("config_fingerprint").get<std::string>());
        m.n_receivers = j.at("n_receivers").get<std::size_t>();
        m.n_steps = j.at("n_steps").get<std::size_t>();
        m.dt = j.at("dt").get<double>();
        m.train = counts_from(j.at("counts").at("train"));
        m.test = counts_from(j.at("counts").at("test"));
        for (const auto& e : j.at("samples")) m.entries.push_back(entry_from(e));
        if (j.at("total").get<std::size_t>() != m.entries.size() ||
            m.train.total() + m.test.total() != m.entries.size())
            throw CorruptionError(fmt::format("{}: sample counts do not add up", path.string()));
        if (io::parse_hex64(j.at("dataset_checksum").get<std::string>()) != m.dataset_checksum())
            throw CorruptionError(fmt::format("{}: dataset checksum mismatch", path.string()));
    } catch (const json::exception& e) {
        throw CorruptionError(fmt::format("{}: {}", path.string(), e.what()));
    }
    return m;
}

namespace {

ManifestEntry describe(const SampleSpec& spec, const Sample& s, const std::vector<std::byte>& bytes,
                       const SampleLayout& layout) {
    ManifestEntry e;
    e.id = spec.id;
    e.split = spec.split;
    e.index = spec.index;
    e.type = spec.type;
    e.plate_seed = s.plate_seed;
    e.attempts = s.attempts;
    e.crack = s.crack;
    e.group = spec.group;
    e.site = spec.site;
    e.special_case_of = spec.special_case_of;
    e.crack_size = crack_size(s.label100);
    e.file = fmt::format("samples/{}.wsmp", spec.id);
    e.bytes = bytes.size();
    e.layout = layout;
    e.checksum = io::fnv1a64(std::span<const std::byte>(bytes));
    return e;
}

bool file_matches(const std::filesystem::path& path, const ManifestEntry& e) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec) || std::filesystem::file_size(path, ec) != e.bytes) return false;
    const auto bytes = io::read_file(path);
    return io::fnv1a64(std::span<const std::byte>(bytes)) == e.checksum;
}

// Entries from a previous interrupted run with the same configuration whose
// sample files are still intact.
std::map<std::string, ManifestEntry> recover_partial(const std::filesystem::path& out_dir,
                                                     std::uint64_t fingerprint) {
    std::map<std::string, ManifestEntry> done;
    const auto marker = out_dir / kPartialManifestName;
    std::ifstream in(marker);
    if (!in) return done;
    std::string line;
    if (!std::getline(in, line)) return done;
    try {
        const json head = json::parse(line);
        if (io::parse_hex64(head.at("config_fingerprint").get<std::string>()) != fingerprint) {
            spdlog::warn("{}: written by a different configuration; starting over", marker.string());
            return done;
        }
    } catch (const std::exception& e) {
        spdlog::warn("{}: unreadable header ({}); starting over", marker.string(), e.what());
        return done;
    }
    while (std::getline(in, line)) {
        try {
            // a crash can leave a torn final line; skip anything unparsable
            ManifestEntry e = entry_from(json::parse(line));
            if (file_matches(out_dir / e.file, e)) done.emplace(e.id, std::move(e));
        } catch (const std::exception&) {
        }
    }
    return done;
}

}  // namespace

DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir,
                              const BuildOptions& options) {
    const auto plan = plan_dataset(config);
    const std::uint64_t fingerprint = io::fnv1a64(config.canonical());
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "samples", ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", (out_dir / "samples").string(), ec.message()));
    // a stale manifest must not outlive the samples it describes
    std::filesystem::remove(out_dir / kManifestName, ec);

    std::map<std::string, ManifestEntry> done;
    if (options.resume) done = recover_partial(out_dir, fingerprint);
    if (!done.empty()) spdlog::info("resuming: {} of {} samples already on disk", done.size(), plan.size());

    const auto marker_path = out_dir / kPartialManifestName;
    std::ofstream marker;
    if (done.empty()) {
        marker.open(marker_path, std::ios::trunc);
        marker << json{{"config_fingerprint", io::hex64(fingerprint)}, {"master_seed", io::hex64(config.master_seed)}}
                      .dump()
               << '\n';
    } else {
        marker.open(marker_path, std::ios::app);
    }
    marker.flush();
    if (!marker) throw IoError(fmt::format("cannot write '{}'", marker_path.string()));

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < plan.size(); ++i)
        if (!done.count(plan[i].id)) todo.push_back(i);

    std::mutex mu;
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::size_t finished = done.size();

    auto worker = [&] {
        while (!failed.load()) {
            const std::size_t k = cursor.fetch_add(1);
            if (k >= todo.size()) return;
            const SampleSpec& spec = plan[todo[k]];
            try {
                const Sample s = generate_sample(spec, config);
                SampleLayout layout;
                const auto bytes = serialize_sample(s, &layout);
                ManifestEntry entry = describe(spec, s, bytes, layout);
                io::write_file_atomic(out_dir / entry.file, bytes);

                std::lock_guard lock(mu);
                marker << entry_json(entry, s.record.n_receivers, s.record.n_steps).dump() << '\n';
                marker.flush();
                if (!marker) throw IoError(fmt::format("write failure on '{}' (disk full?)", marker_path.string()));
                done.emplace(entry.id, std::move(entry));
                ++finished;
                if (finished % 50 == 0 || finished == plan.size())
                    spdlog::info("generated {}/{} samples", finished, plan.size());
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };

    const auto n_workers = static_cast<unsigned>(
        std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(todo.size(), 1)));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);

    DatasetManifest m;
    m.master_seed = config.master_seed;
    m.config_fingerprint = fingerprint;
    m.n_receivers = ReceiverGrid::kCount;
    m.n_steps = config.newmark.n_steps;
    m.dt = config.newmark.dt;
    m.train = config.train;
    m.test = config.test;
    for (const auto& spec : plan) m.entries.push_back(done.at(spec.id));
    write_manifest(out_dir / kManifestName, m);
    marker.close();
    std::filesystem::remove(marker_path, ec);
    return m;
}

DatasetReader::DatasetReader(const std::filesystem::path& manifest_path)
    : root_(manifest_path.parent_path()), manifest_(read_manifest(manifest_path)) {}

Sample DatasetReader::read(std::size_t i) const {
    const ManifestEntry& e = manifest_.entries.at(i);
    std::vector<std::byte> bytes;
    try {
        bytes = io::read_file(root_ / e.file);
    } catch (const IoError& err) {
        throw CorruptionError(fmt::format("sample {}: {}", e.id, err.what()));
    }
    if (bytes.size() != e.bytes)
        throw CorruptionError(fmt::format("sample {}: file is {} bytes, manifest says {}", e.id, bytes.size(), e.bytes));
    if (io::fnv1a64(std::span<const std::byte>(bytes)) != e.checksum)
        throw CorruptionError(fmt::format("sample {}: checksum mismatch", e.id));
    Sample s = deserialize_sample(bytes, fmt::format("sample {}", e.id));
    if (s.id != e.id) throw CorruptionError(fmt::format("sample {}: file holds '{}'", e.id, s.id));
    return s;
}

std::optional<Sample> DatasetReader::next() {
    if (cursor_ >= manifest_.entries.size()) return std::nullopt;
    return read(cursor_++);
}

}  // namespace lemwave
