#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lemwave/config.hpp"
#include "lemwave/crack.hpp"
#include "lemwave/dynamics.hpp"
#include "lemwave/lattice.hpp"

namespace lemwave {

/// N: random plate and crack. R: random plate, no crack. S: different plates
/// sharing a (jittered) crack. C: one plate, different cracks.
enum class SampleType : std::uint8_t { N = 0, R = 1, S = 2, C = 3 };
inline constexpr std::array<SampleType, 4> kSampleTypes{SampleType::N, SampleType::R, SampleType::S, SampleType::C};

char type_letter(SampleType t) noexcept;
SampleType parse_sample_type(std::string_view s);

enum class Split : std::uint8_t { train = 0, test = 1 };
const char* split_name(Split s) noexcept;

enum class ExcitationSite : std::uint8_t { left = 0, right = 1, top = 2 };
const char* site_name(ExcitationSite s) noexcept;
ExcitationSite parse_site(std::string_view s);

/// Point load at the midpoint of a plate edge, pushing into the plate. Binds
/// to the nearest particle that is neither removed nor clamped.
LoadSpec excitation_load(const LatticeModel& model, ExcitationSite site, double magnitude,
                         std::size_t duration_steps);

/// The 9 x 9 interior receivers at (i s_x, j s_y), i, j = 1..9; receiver
/// k = (j - 1) * 9 + (i - 1) counts from the bottom-left, row by row.
struct ReceiverGrid {
    static constexpr std::size_t kPerSide = 9;
    static constexpr std::size_t kCount = kPerSide * kPerSide;

    Vec2 spacing;
    std::vector<Vec2> positions;          ///< nominal grid points
    std::vector<std::uint32_t> particles;  ///< nearest non-removed particle
    std::vector<Vec2> offsets;            ///< particle position - grid point

    static ReceiverGrid bind(const LatticeModel& model);
};

/// Affine map of the whole record (both components together) onto [-1, 1];
/// a constant record maps to zeros.
std::vector<float> normalize_record(std::span<const float> raw);

struct TypeCounts {
    std::array<std::uint32_t, 4> n{};  ///< indexed by SampleType

    std::uint32_t operator[](SampleType t) const { return n[static_cast<int>(t)]; }
    std::uint32_t& operator[](SampleType t) { return n[static_cast<int>(t)]; }
    std::uint32_t total() const noexcept { return n[0] + n[1] + n[2] + n[3]; }
    friend bool operator==(const TypeCounts&, const TypeCounts&) = default;
};

struct DatasetConfig {
    PlateSpec plate;
    NewmarkParams newmark;
    double load_magnitude = 1000.0;  ///< [N]
    std::size_t load_duration_steps = 1;
    std::vector<ExcitationSite> sites{ExcitationSite::left, ExcitationSite::right, ExcitationSite::top};
    std::uint64_t master_seed = 0;
    TypeCounts train;
    TypeCounts test;
    std::uint32_t type_c_group = 16;   ///< cracks per shared Type-C plate
    std::uint32_t type_s_group = 8;    ///< plates per shared Type-S crack
    double type_s_jitter = 0.5;        ///< max start offset of Type-S cracks, in units of s_x
    std::uint32_t special_cases = 7;   ///< test Type-N samples reusing a training crack
    std::uint32_t max_attempts = 20;

    void validate() const;
    /// Stable text rendering of every field; hashed into the manifest so a
    /// resumed build can tell whether its partial output belongs to it.
    std::string canonical() const;

    /// Reads the `plate.*`, `newmark.*`, `load.*`, `dataset.*` and `seed`
    /// keys; anything missing keeps its default.
    static DatasetConfig from(const KeyValueConfig& cfg);
};

/// Everything needed to generate one sample, fixed before generation starts.
struct SampleSpec {
    std::string id;  ///< "train-00012"
    Split split = Split::train;
    std::uint32_t index = 0;  ///< position within the split
    SampleType type = SampleType::N;
    std::uint64_t plate_seed = 0;
    std::uint64_t crack_seed = 0;     ///< Type-C: cracks drawn per attempt from this
    std::optional<Crack> crack;       ///< fixed crack (N, S); empty for R and C
    std::int32_t group = -1;          ///< shared-plate (C) or shared-crack (S) group
    ExcitationSite site = ExcitationSite::left;
    std::string special_case_of;      ///< training sample whose crack is reused
};

/// Deterministic sample plan: train samples first, then test, each split
/// ordered N, R, S, C.
std::vector<SampleSpec> plan_dataset(const DatasetConfig& config);

struct Sample {
    std::string id;
    Split split = Split::train;
    SampleType type = SampleType::N;
    std::uint64_t plate_seed = 0;  ///< seed of the plate actually simulated
    std::uint32_t attempts = 1;
    std::optional<Crack> crack;
    Segment crack_segment;  ///< clipped; meaningless without a crack
    ExcitationSite site = ExcitationSite::left;
    /// Normalized record; its load and receiver bindings describe the run.
    WaveFieldRecord record;
    std::vector<Vec2> receiver_offsets;  ///< bound particle - nominal grid point
    LabelImage label100;
    LabelImage label16;
};

/// Runs the plate simulation for one planned sample. Floating-component and
/// divergence failures are retried with a derived plate seed (or, for Type-C,
/// a fresh crack) up to config.max_attempts times.
Sample generate_sample(const SampleSpec& spec, const DatasetConfig& config);

/// "WSMP" container; see docs/formats.md.
struct SampleLayout {
    std::size_t tensor_offset = 0;
    std::size_t label100_offset = 0;
    std::size_t label16_offset = 0;
};
std::vector<std::byte> serialize_sample(const Sample& sample, SampleLayout* layout = nullptr);
Sample deserialize_sample(std::span<const std::byte> bytes, const std::string& context);

struct ManifestEntry {
    std::string id;
    Split split = Split::train;
    std::uint32_t index = 0;
    SampleType type = SampleType::N;
    std::uint64_t plate_seed = 0;
    std::uint32_t attempts = 1;
    std::optional<Crack> crack;
    std::int32_t group = -1;
    ExcitationSite site = ExcitationSite::left;
    std::string special_case_of;
    double crack_size = 0.0;
    std::string file;  ///< relative to the manifest directory
    std::uint64_t bytes = 0;
    SampleLayout layout;
    std::uint64_t checksum = 0;
};

struct DatasetManifest {
    std::uint32_t version = 1;
    std::uint64_t master_seed = 0;
    std::uint64_t config_fingerprint = 0;
    std::size_t n_receivers = ReceiverGrid::kCount;
    std::size_t n_steps = 0;
    double dt = 0.0;
    TypeCounts train;
    TypeCounts test;
    std::vector<ManifestEntry> entries;

    /// FNV-1a over the ordered per-sample checksums.
    std::uint64_t dataset_checksum() const;
};

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kPartialManifestName = "manifest.partial.jsonl";

struct BuildOptions {
    unsigned workers = 1;
    /// Reuse samples listed in an existing partial-manifest marker whose files
    /// still match their checksums.
    bool resume = true;
};

/// Generate every planned sample into `out_dir/samples/`, then write the
/// manifest. While running, each finished sample is appended to the
/// partial-manifest marker, which is removed once the manifest is in place.
DatasetManifest build_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir,
                              const BuildOptions& options = {});

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Streams samples in manifest order, verifying each file's checksum.
class DatasetReader {
public:
    explicit DatasetReader(const std::filesystem::path& manifest_path);

    const DatasetManifest& manifest() const noexcept { return manifest_; }
    std::size_t size() const noexcept { return manifest_.entries.size(); }
    /// Throws CorruptionError naming the sample on checksum or format mismatch.
    Sample read(std::size_t i) const;
    /// Next sample in order, or nullopt at the end.
    std::optional<Sample> next();
    void rewind() noexcept { cursor_ = 0; }

private:
    std::filesystem::path root_;
    DatasetManifest manifest_;
    std::size_t cursor_ = 0;
};

}  // namespace lemwave
