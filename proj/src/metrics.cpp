#include "lemwave/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "lemwave/binary_io.hpp"
#include "lemwave/errors.hpp"

namespace lemwave {

void PredictionGrid::validate() const {
    if (probs.size() != std::size_t(rows) * cols)
        throw ConfigError(fmt::format("prediction {}: {} values for a {}x{} grid", sample_id, probs.size(), rows, cols));
    for (float p : probs)
        if (!(p >= 0.0f && p <= 1.0f))
            throw ConfigError(fmt::format("prediction {}: probability {} outside [0, 1]", sample_id, p));
}

std::vector<std::byte> serialize_prediction(const PredictionGrid& grid) {
    grid.validate();
    io::ByteWriter w;
    w.put_bytes("WPRD");
    w.put<std::uint32_t>(1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.sample_id.size()));
    w.put_bytes(grid.sample_id);
    w.put<std::uint32_t>(grid.rows);
    w.put<std::uint32_t>(grid.cols);
    w.put_all(std::span<const float>(grid.probs));
    return std::move(w).take();
}

PredictionGrid deserialize_prediction(std::span<const std::byte> bytes, const std::string& context) {
    io::ByteReader r(bytes, context);
    r.expect_magic("WPRD");
    if (const auto v = r.get<std::uint32_t>(); v != 1)
        throw CorruptionError(fmt::format("{}: unsupported prediction version {}", context, v));
    PredictionGrid g;
    g.sample_id = r.get_string(r.get<std::uint32_t>());
    g.rows = r.get<std::uint32_t>();
    g.cols = r.get<std::uint32_t>();
    if (std::uint64_t(g.rows) * g.cols * sizeof(float) != r.remaining())
        throw CorruptionError(fmt::format("{}: payload does not match a {}x{} grid", context, g.rows, g.cols));
    g.probs.resize(std::size_t(g.rows) * g.cols);
    r.get_all(std::span<float>(g.probs));
    try {
        g.validate();
    } catch (const ConfigError& e) {
        throw CorruptionError(fmt::format("{}: {}", context, e.what()));
    }
    return g;
}

void write_prediction(const std::filesystem::path& path, const PredictionGrid& grid) {
    const auto bytes = serialize_prediction(grid);
    io::write_file_atomic(path, bytes);
}

PredictionGrid read_prediction(const std::filesystem::path& path) {
    return deserialize_prediction(io::read_file(path), path.string());
}

void FocalParams::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError(fmt::format("focal alpha {} outside [0, 1]", alpha));
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError(fmt::format("focal gamma {} must be >= 0", gamma));
}

namespace {

void check_batch(std::span<const double> probs, std::span<const std::uint8_t> labels, std::size_t n_samples) {
    if (probs.size() != labels.size())
        throw ConfigError(fmt::format("{} probabilities but {} labels", probs.size(), labels.size()));
    if (n_samples == 0 || probs.empty() || probs.size() % n_samples != 0)
        throw ConfigError(fmt::format("{} pixels do not split into {} samples", probs.size(), n_samples));
}

double p_t(double p, std::uint8_t y) {
    const double q = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
    return y ? q : 1.0 - q;
}

double reduce(double sum, std::size_t n_pixels, std::size_t n_samples, LossReduction r) {
    return sum / double(r == LossReduction::per_sample ? n_samples : n_pixels);
}

}  // namespace

double cross_entropy(std::span<const double> probs, std::span<const std::uint8_t> labels, std::size_t n_samples,
                     LossReduction reduction) {
    check_batch(probs, labels, n_samples);
    double sum = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) sum -= std::log(p_t(probs[k], labels[k]));
    return reduce(sum, probs.size(), n_samples, reduction);
}

double focal_loss(std::span<const double> probs, std::span<const std::uint8_t> labels, std::size_t n_samples,
                  const FocalParams& params, LossReduction reduction) {
    params.validate();
    check_batch(probs, labels, n_samples);
    double sum = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const double pt = p_t(probs[k], labels[k]);
        const double at = labels[k] ? params.alpha : 1.0 - params.alpha;
        sum -= at * std::pow(1.0 - pt, params.gamma) * std::log(pt);
    }
    return reduce(sum, probs.size(), n_samples, reduction);
}

Confusion confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
    if (predicted.size() != truth.size())
        throw ConfigError(fmt::format("prediction has {} pixels, label {}", predicted.size(), truth.size()));
    Confusion c;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        const bool p = predicted[k] != 0, t = truth[k] != 0;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double iou(const Confusion& c) noexcept {
    const auto denom = c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : double(c.tp) / double(denom);
}

double dsc(const Confusion& c) noexcept {
    const auto denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : 2.0 * double(c.tp) / double(denom);
}

double precision(const Confusion& c) noexcept {
    return c.tp + c.fp == 0 ? 1.0 : double(c.tp) / double(c.tp + c.fp);
}

double recall(const Confusion& c) noexcept { return c.tp + c.fn == 0 ? 1.0 : double(c.tp) / double(c.tp + c.fn); }

double crack_size(const LabelImage& label100) {
    if (label100.bits.empty()) return 0.0;
    return double(label100.lit_count()) / double(label100.bits.size());
}

std::vector<std::uint8_t> binarize(const PredictionGrid& grid, double t_bin) {
    std::vector<std::uint8_t> out(grid.probs.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = grid.probs[k] > t_bin ? 1 : 0;
    return out;
}

SampleEval evaluate_sample(const ScoredSample& s, double t_bin) {
    if (!(t_bin >= 0.0 && t_bin <= 1.0)) throw ConfigError(fmt::format("T_bin {} outside [0, 1]", t_bin));
    if (s.prediction.rows != s.label16.rows || s.prediction.cols != s.label16.cols)
        throw ConfigError(fmt::format("sample {}: prediction {}x{} vs label {}x{}", s.id, s.prediction.rows,
                                      s.prediction.cols, s.label16.rows, s.label16.cols));
    SampleEval e;
    e.id = s.id;
    e.type = s.type;
    e.crack_size = s.crack_size;
    e.counts = confusion(binarize(s.prediction, t_bin), s.label16.bits);
    e.iou = iou(e.counts);
    e.dsc = dsc(e.counts);
    return e;
}

std::vector<SampleEval> evaluate(std::span<const ScoredSample> samples, double t_bin) {
    std::vector<SampleEval> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(evaluate_sample(s, t_bin));
    return out;
}

double accuracy(std::span<const SampleEval> evals, double t_tol) {
    if (evals.empty()) throw ConfigError("accuracy of an empty sample set");
    if (!(t_tol >= 0.0 && t_tol <= 1.0)) throw ConfigError(fmt::format("T_tol {} outside [0, 1]", t_tol));
    const auto hits = std::count_if(evals.begin(), evals.end(), [&](const SampleEval& e) { return e.iou > t_tol; });
    return double(hits) / double(evals.size());
}

AggregateRow aggregate(std::span<const SampleEval> evals, double t_tol, Averaging averaging) {
    AggregateRow row;
    row.accuracy = accuracy(evals, t_tol);
    row.n_samples = evals.size();
    Confusion pooled;
    double p_sum = 0.0, r_sum = 0.0, iou_sum = 0.0, dsc_sum = 0.0;
    for (const auto& e : evals) {
        pooled += e.counts;
        p_sum += precision(e.counts);
        r_sum += recall(e.counts);
        iou_sum += e.iou;
        dsc_sum += e.dsc;
    }
    const double n = double(evals.size());
    if (averaging == Averaging::micro) {
        row.precision = precision(pooled);
        row.recall = recall(pooled);
    } else {
        row.precision = p_sum / n;
        row.recall = r_sum / n;
    }
    row.mean_iou = iou_sum / n;
    row.mean_dsc = dsc_sum / n;
    return row;
}

std::vector<AdjustedPoint> adjusted_accuracy(std::span<const SampleEval> evals, std::span<const double> cutoffs,
                                             double t_tol) {
    std::vector<AdjustedPoint> out;
    for (double cut : cutoffs) {
        std::vector<SampleEval> kept;
        for (const auto& e : evals)
            if (e.crack_size == 0.0 || e.crack_size >= cut) kept.push_back(e);
        AdjustedPoint pt;
        pt.cutoff = cut;
        pt.n_kept = kept.size();
        if (!kept.empty()) pt.accuracy = accuracy(kept, t_tol);
        out.push_back(pt);
    }
    return out;
}

std::vector<IouHistogram> iou_histograms(std::span<const ScoredSample> samples, std::span<const double> t_bins,
                                         double bin_width) {
    if (t_bins.empty()) throw ConfigError("iou_histograms needs at least one T_bin");
    if (!(bin_width > 0.0 && bin_width <= 1.0)) throw ConfigError(fmt::format("bin width {} outside (0, 1]", bin_width));
    const auto n_bins = static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-9));
    std::vector<IouHistogram> out;
    for (double t : t_bins) {
        IouHistogram h;
        h.t_bin = t;
        h.bin_width = bin_width;
        h.counts.assign(n_bins, 0);
        for (const auto& e : evaluate(samples, t)) {
            // the small nudge keeps values such as 0.6 off the bin below
            const auto k = static_cast<std::size_t>(std::floor(e.iou / bin_width + 1e-9));
            ++h.counts[std::min(k, n_bins - 1)];
        }
        h.cumulative.resize(n_bins);
        std::size_t run = 0;
        for (std::size_t k = 0; k < n_bins; ++k) h.cumulative[k] = run += h.counts[k];
        out.push_back(std::move(h));
    }
    return out;
}

std::string format_table_header() {
    return fmt::format("{:>6} | {:>6} | {:>6} | {:>6} | {:>6} | {:>6} | {:>6}\n", "gamma", "alpha", "prec.", "recall",
                       "IoU", "DSC", "accu.");
}

std::string format_table_row(std::optional<double> alpha, std::optional<double> gamma, const AggregateRow& row) {
    auto hyper = [](std::optional<double> v) { return v ? fmt::format("{:>6.2f}", *v) : fmt::format("{:>6}", "-"); };
    return fmt::format("{} | {} | {:>6.3f} | {:>6.3f} | {:>6.3f} | {:>6.3f} | {:>6.3f}\n", hyper(gamma), hyper(alpha),
                       row.precision, row.recall, row.mean_iou, row.mean_dsc, row.accuracy);
}

}  // namespace lemwave
