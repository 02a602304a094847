#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lemwave/config.hpp"
#include "lemwave/dataset.hpp"
#include "lemwave/metrics.hpp"
#include "lemwave/scenario.hpp"

namespace lemwave::cli {

enum ExitCode : int { kOk = 0, kConfigFailure = 2, kNumericalFailure = 3, kIoFailure = 4, kInternalFailure = 70 };

/// Maps a library exception onto the process exit code.
int exit_code_for(const std::exception& e) noexcept;

struct SimulateSettings {
    Layout layout = Layout::a;
    std::optional<Segment> crack;  ///< default_crack() when unset
    bool reference_receivers = true;
    double threshold = 0.05;
    std::uint32_t pad_cells = 15;
    std::uint64_t pad_seed = 99;
    std::uint32_t frame_width = 256;  ///< pixels; height follows the plate aspect
};

struct EvalSettings {
    double t_bin = kDefaultTBin;
    double t_tol = kDefaultTTol;
    std::vector<double> histogram_t_bins{0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    double bin_width = kDefaultHistogramBin;
    std::vector<double> size_cutoffs{0.0, 0.0005, 0.001, 0.0015, 0.002, 0.0025, 0.003, 0.0035, 0.004};
    Averaging averaging = Averaging::micro;
    std::string split = "test";  ///< test, train or all
};

/// Every section of a run config file. Unknown keys are rejected when loading.
struct RunConfig {
    std::filesystem::path source;
    DatasetConfig dataset;
    SimulateSettings simulate;
    EvalSettings eval;

    static RunConfig parse(const KeyValueConfig& cfg);
    static RunConfig load(const std::filesystem::path& path);
    /// Checks the plate, integrator, load and the simulate/eval sections;
    /// dataset counts are checked by gen-dataset only.
    void validate_common() const;
};

struct SimulateRequest {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    std::optional<Layout> layout;
    std::size_t frames_every = 0;
    bool with_crack = false;
    bool paper_literal = false;
};

struct SimulateOutcome {
    std::size_t n_particles = 0;
    std::size_t frames_written = 0;
    std::optional<TwinRun> twins;
};

/// One scenario, or with `with_crack` an intact/cracked/free-field triple
/// and the arrival table. Nothing is written before the config validates.
SimulateOutcome cmd_simulate(const SimulateRequest& request);

struct GenDatasetRequest {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    bool resume = true;
};

DatasetManifest cmd_gen_dataset(const GenDatasetRequest& request);

struct EvalRequest {
    std::filesystem::path manifest;
    std::filesystem::path predictions;
    std::filesystem::path out;
    std::optional<std::filesystem::path> config;  ///< eval.* keys only
    std::optional<double> t_bin;
    std::optional<double> t_tol;
};

struct EvalOutcome {
    AggregateRow row;
    std::vector<SampleEval> samples;
    std::optional<double> alpha;
    std::optional<double> gamma;
};

/// Scores `<predictions>/<id>.wprd` against every selected sample of the
/// manifest. `<predictions>/run.json` may carry the loss hyperparameters.
EvalOutcome cmd_eval(const EvalRequest& request);

}  // namespace lemwave::cli
