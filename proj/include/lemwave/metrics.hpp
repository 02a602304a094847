#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lemwave/crack.hpp"

namespace lemwave {

/// Per-cell damage probabilities of one sample, row 0 at the top.
struct PredictionGrid {
    std::string sample_id;
    std::uint32_t rows = kCoarseLabelSize;
    std::uint32_t cols = kCoarseLabelSize;
    std::vector<float> probs;

    /// Throws ConfigError on a shape mismatch or an entry outside [0, 1].
    void validate() const;
    float at(std::uint32_t r, std::uint32_t c) const { return probs[std::size_t(r) * cols + c]; }
};

/// "WPRD" file; see docs/formats.md.
std::vector<std::byte> serialize_prediction(const PredictionGrid& grid);
PredictionGrid deserialize_prediction(std::span<const std::byte> bytes, const std::string& context);
void write_prediction(const std::filesystem::path& path, const PredictionGrid& grid);
PredictionGrid read_prediction(const std::filesystem::path& path);

struct FocalParams {
    double alpha = 0.25;  ///< weight of the "has crack" class
    double gamma = 2.0;   ///< focusing exponent

    void validate() const;
};

/// Probabilities are clamped to [eps, 1 - eps] before any logarithm.
inline constexpr double kProbEpsilon = 1e-7;

/// How a summed loss is normalized: by the number of samples (grids) or by
/// the total number of pixels.
enum class LossReduction { per_sample, per_pixel };

/// probs and labels hold n_samples grids back to back; labels are 0 or 1.
/// Defaults to the pixel mean.
double cross_entropy(std::span<const double> probs, std::span<const std::uint8_t> labels, std::size_t n_samples,
                     LossReduction reduction = LossReduction::per_pixel);

/// Sum of -alpha_t (1 - p_t)^gamma log p_t divided by the sample count by
/// default, or by the pixel count.
double focal_loss(std::span<const double> probs, std::span<const std::uint8_t> labels, std::size_t n_samples,
                  const FocalParams& params, LossReduction reduction = LossReduction::per_sample);

struct Confusion {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    Confusion& operator+=(const Confusion& o) noexcept {
        tp += o.tp, fp += o.fp, tn += o.tn, fn += o.fn;
        return *this;
    }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Pixel-wise counts; both inputs binary and the same length.
Confusion confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

/// TP / (TP + FP + FN); 1 when neither image has a damaged pixel.
double iou(const Confusion& c) noexcept;
/// 2 TP / (2 TP + FP + FN); 1 when neither image has a damaged pixel.
double dsc(const Confusion& c) noexcept;
/// TP / (TP + FP), 1 when nothing was predicted.
double precision(const Confusion& c) noexcept;
/// TP / (TP + FN), 1 when nothing was to be found.
double recall(const Confusion& c) noexcept;

/// Lit pixel fraction of a (100 x 100) label image.
double crack_size(const LabelImage& label100);

/// Lit where p > t_bin.
std::vector<std::uint8_t> binarize(const PredictionGrid& grid, double t_bin);

inline constexpr double kDefaultTBin = 0.5;
inline constexpr double kDefaultTTol = 0.5;
inline constexpr double kDefaultHistogramBin = 0.05;

/// One test sample: its prediction, its coarse label and its crack size.
struct ScoredSample {
    std::string id;
    char type = 'N';
    double crack_size = 0.0;
    PredictionGrid prediction;
    LabelImage label16;
};

struct SampleEval {
    std::string id;
    char type = 'N';
    double crack_size = 0.0;
    Confusion counts;
    double iou = 0.0;
    double dsc = 0.0;
};

SampleEval evaluate_sample(const ScoredSample& sample, double t_bin);
std::vector<SampleEval> evaluate(std::span<const ScoredSample> samples, double t_bin);

/// Fraction of samples with IoU > t_tol. Throws ConfigError on an empty set.
double accuracy(std::span<const SampleEval> evals, double t_tol);

enum class Averaging { micro, macro };

struct AggregateRow {
    double precision = 0.0;
    double recall = 0.0;
    double mean_iou = 0.0;
    double mean_dsc = 0.0;
    double accuracy = 0.0;
    std::size_t n_samples = 0;
};

/// Micro pools the pixel counts of every sample; macro averages the
/// per-sample rates.
AggregateRow aggregate(std::span<const SampleEval> evals, double t_tol, Averaging averaging = Averaging::micro);

struct AdjustedPoint {
    double cutoff = 0.0;
    std::size_t n_kept = 0;
    std::optional<double> accuracy;  ///< empty when nothing survives the cutoff
};

/// Accuracy over the samples with crack size >= cutoff; samples without a
/// crack are always kept.
std::vector<AdjustedPoint> adjusted_accuracy(std::span<const SampleEval> evals, std::span<const double> cutoffs,
                                             double t_tol);

struct IouHistogram {
    double t_bin = 0.0;
    double bin_width = kDefaultHistogramBin;
    std::vector<std::size_t> counts;      ///< bin k covers [k w, (k + 1) w); the last bin also holds IoU = 1
    std::vector<std::size_t> cumulative;  ///< running sum of counts
};

std::vector<IouHistogram> iou_histograms(std::span<const ScoredSample> samples, std::span<const double> t_bins,
                                         double bin_width = kDefaultHistogramBin);

/// Header and one row in the column order gamma, alpha, prec., recall, IoU,
/// DSC, accu. Unknown hyperparameters print as "-".
std::string format_table_header();
std::string format_table_row(std::optional<double> alpha, std::optional<double> gamma, const AggregateRow& row);

}  // namespace lemwave
