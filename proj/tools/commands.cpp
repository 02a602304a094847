#include "commands.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "lemwave/binary_io.hpp"
#include "lemwave/crack.hpp"
#include "lemwave/errors.hpp"
#include "lemwave/render.hpp"

namespace fs = std::filesystem;

namespace lemwave::cli {

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ConfigError*>(&e)) return kConfigFailure;
    if (dynamic_cast<const NumericalError*>(&e)) return kNumericalFailure;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e) ||
        dynamic_cast<const nlohmann::json::exception*>(&e))
        return kIoFailure;
    return kInternalFailure;
}

namespace {

void validate_eval(const EvalSettings& e) {
    auto unit = [](double v) { return v >= 0.0 && v < 1.0; };
    if (!unit(e.t_bin)) throw ConfigError(fmt::format("eval.t_bin = {} is outside [0, 1)", e.t_bin));
    if (!unit(e.t_tol)) throw ConfigError(fmt::format("eval.t_tol = {} is outside [0, 1)", e.t_tol));
    for (double t : e.histogram_t_bins)
        if (!unit(t)) throw ConfigError(fmt::format("eval.t_bins entry {} is outside [0, 1)", t));
    if (!(e.bin_width > 0.0 && e.bin_width <= 1.0))
        throw ConfigError(fmt::format("eval.bin_width = {} is outside (0, 1]", e.bin_width));
    for (double c : e.size_cutoffs)
        if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError(fmt::format("eval.size_cutoffs entry {} is negative", c));
    if (e.split != "test" && e.split != "train" && e.split != "all")
        throw ConfigError(fmt::format("eval.split = '{}' (test, train or all)", e.split));
}

void write_frames(const LatticeModel& model, const std::vector<FieldSnapshot>& snapshots, int component,
                  std::uint32_t width, const fs::path& dir) {
    if (snapshots.empty()) return;
    fs::create_directories(dir);
    const auto height = std::max<std::uint32_t>(1, std::uint32_t(std::lround(width * model.spec.height / model.spec.width)));
    const FieldRaster raster(model, width, height);
    for (const auto& snap : snapshots) {
        const auto& values = component == 0 ? snap.ux : snap.uy;
        write_pgm(dir / fmt::format("frame_{:05}.pgm", snap.step), raster.render(values));
    }
}

void write_receivers(const fs::path& path, const ReceiverSet& set) {
    std::string text = "name\tx\ty\tparticle\n";
    for (std::size_t k = 0; k < set.names.size(); ++k)
        text += fmt::format("{}\t{:.6g}\t{:.6g}\t{}\n", set.names[k], set.positions[k].x, set.positions[k].y,
                            set.particles[k]);
    io::write_text_atomic(path, text);
}

std::optional<double> json_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) return std::nullopt;
    return j[key].get<double>();
}

std::vector<float> label_tile(const LabelImage& label) { return {label.bits.begin(), label.bits.end()}; }

void write_mosaics(const std::string& stem, const std::vector<std::vector<float>>& tiles, const fs::path& out) {
    constexpr std::size_t per_page = 16 * 20;
    for (std::size_t page = 0; page * per_page < tiles.size(); ++page) {
        const auto first = tiles.begin() + std::ptrdiff_t(page * per_page);
        const auto last = tiles.begin() + std::ptrdiff_t(std::min(tiles.size(), (page + 1) * per_page));
        const std::vector<std::vector<float>> chunk(first, last);
        write_pgm(out / fmt::format("{}_{:02}.pgm", stem, page), mosaic(chunk, kCoarseLabelSize, kCoarseLabelSize));
    }
}

}  // namespace

RunConfig RunConfig::parse(const KeyValueConfig& cfg) {
    RunConfig rc;
    rc.source = cfg.source();
    rc.dataset = DatasetConfig::from(cfg);

    auto& s = rc.simulate;
    s.layout = parse_layout(cfg.get_string("simulate.layout", "a"));
    if (cfg.has("simulate.crack")) {
        const auto v = cfg.get_doubles("simulate.crack", {});
        if (v.size() != 4)
            throw ConfigError(fmt::format("{}: simulate.crack needs x0, y0, x1, y1", cfg.where("simulate.crack")));
        s.crack = Segment{{v[0], v[1]}, {v[2], v[3]}};
    }
    const auto receivers = cfg.get_string("simulate.receivers", "reference");
    if (receivers != "reference" && receivers != "grid")
        throw ConfigError(fmt::format("{}: simulate.receivers must be reference or grid", cfg.where("simulate.receivers")));
    s.reference_receivers = receivers == "reference";
    s.threshold = cfg.get_double("simulate.threshold", s.threshold);
    s.pad_cells = static_cast<std::uint32_t>(cfg.get_u64("simulate.pad_cells", s.pad_cells));
    s.pad_seed = cfg.get_u64("simulate.pad_seed", s.pad_seed);
    s.frame_width = static_cast<std::uint32_t>(cfg.get_u64("simulate.frame_width", s.frame_width));

    auto& e = rc.eval;
    e.t_bin = cfg.get_double("eval.t_bin", e.t_bin);
    e.t_tol = cfg.get_double("eval.t_tol", e.t_tol);
    e.histogram_t_bins = cfg.get_doubles("eval.t_bins", e.histogram_t_bins);
    e.bin_width = cfg.get_double("eval.bin_width", e.bin_width);
    e.size_cutoffs = cfg.get_doubles("eval.size_cutoffs", e.size_cutoffs);
    const auto averaging = cfg.get_string("eval.averaging", "micro");
    if (averaging != "micro" && averaging != "macro")
        throw ConfigError(fmt::format("{}: eval.averaging must be micro or macro", cfg.where("eval.averaging")));
    e.averaging = averaging == "micro" ? Averaging::micro : Averaging::macro;
    e.split = cfg.get_string("eval.split", e.split);

    cfg.reject_unknown();
    return rc;
}

RunConfig RunConfig::load(const fs::path& path) { return parse(KeyValueConfig::load(path)); }

void RunConfig::validate_common() const {
    dataset.plate.validate();
    dataset.newmark.validate();
    if (!(dataset.load_magnitude > 0.0) || !std::isfinite(dataset.load_magnitude))
        throw ConfigError(fmt::format("{}: load.magnitude must be positive", source.string()));
    if (dataset.load_duration_steps == 0)
        throw ConfigError(fmt::format("{}: load.duration_steps must be at least 1", source.string()));
    const auto& s = simulate;
    if (!(s.threshold > 0.0 && s.threshold < 1.0))
        throw ConfigError(fmt::format("simulate.threshold = {} is outside (0, 1)", s.threshold));
    if (s.frame_width < 8 || s.frame_width > 8192)
        throw ConfigError(fmt::format("simulate.frame_width = {} is outside [8, 8192]", s.frame_width));
    if (s.crack) {
        const auto& c = *s.crack;
        if (!std::isfinite(c.a.x) || !std::isfinite(c.a.y) || !std::isfinite(c.b.x) || !std::isfinite(c.b.y))
            throw ConfigError("simulate.crack has a non-finite coordinate");
        if (!clip_segment(c, {0.0, 0.0}, {dataset.plate.width, dataset.plate.height}))
            throw ConfigError("simulate.crack lies outside the plate");
    }
    validate_eval(eval);
}

SimulateOutcome cmd_simulate(const SimulateRequest& req) {
    auto rc = RunConfig::load(req.config);
    if (req.seed) rc.dataset.master_seed = *req.seed;
    if (req.layout) rc.simulate.layout = *req.layout;
    if (req.paper_literal) rc.dataset.newmark.paper_literal = true;
    rc.validate_common();

    const auto& s = rc.simulate;
    PlateSpec plate = rc.dataset.plate;
    plate.seed = rc.dataset.master_seed;
    const Segment crack = s.crack.value_or(default_crack(plate));
    const ExcitationSite site = layout_site(s.layout);
    const int component = layout_component(s.layout);
    const auto& nm = rc.dataset.newmark;

    const LatticeModel intact = generate_lattice(plate);
    spdlog::info("plate: {} particles, {} elements; layout {}", intact.particles.size(), intact.elements.size(),
                 layout_letter(s.layout));

    SimulateOutcome outcome;
    outcome.n_particles = intact.particles.size();
    if (!req.with_crack) {
        const LatticeModel model = layout_has_crack(s.layout) ? apply_crack(intact, crack) : intact;
        const ReceiverSet receivers = s.reference_receivers ? reference_points(model) : grid_points(model);
        const LoadSpec load = excitation_load(model, site, rc.dataset.load_magnitude, rc.dataset.load_duration_steps);
        const auto result = simulate_field(model, load, nm, receivers.particles, req.frames_every);

        fs::create_directories(req.out);
        write_record(req.out / "record", result.record);
        write_receivers(req.out / "receivers.tsv", receivers);
        if (layout_has_crack(s.layout)) write_label_pbm(req.out / "label100.pbm", rasterize_label(crack, plate));
        write_frames(model, result.snapshots, component, s.frame_width, req.out / "frames");
        outcome.frames_written = result.snapshots.size();
        return outcome;
    }

    const TwinOptions options{s.threshold, s.pad_cells, s.pad_seed, req.frames_every};
    auto twins = run_twins(intact, crack, site, rc.dataset.load_magnitude, rc.dataset.load_duration_steps, nm,
                           s.reference_receivers, options);

    fs::create_directories(req.out);
    write_record(req.out / "intact", twins.intact.record);
    write_record(req.out / "cracked", twins.cracked.record);
    write_record(req.out / "free_field", twins.free_field);
    write_receivers(req.out / "receivers.tsv",
                    s.reference_receivers ? reference_points(apply_crack(intact, crack)) : grid_points(apply_crack(intact, crack)));
    write_label_pbm(req.out / "label100.pbm", rasterize_label(crack, plate));
    io::write_text_atomic(req.out / "arrivals.txt", format_arrival_table(twins));
    write_frames(intact, twins.intact.snapshots, component, s.frame_width, req.out / "frames" / "intact");
    write_frames(apply_crack(intact, crack), twins.cracked.snapshots, component, s.frame_width,
                 req.out / "frames" / "cracked");
    outcome.frames_written = twins.intact.snapshots.size() + twins.cracked.snapshots.size();
    // the dense snapshots are on disk now; keep the outcome small
    twins.intact.snapshots.clear();
    twins.cracked.snapshots.clear();
    outcome.twins = std::move(twins);
    return outcome;
}

DatasetManifest cmd_gen_dataset(const GenDatasetRequest& req) {
    auto rc = RunConfig::load(req.config);
    if (req.seed) rc.dataset.master_seed = *req.seed;
    rc.validate_common();
    rc.dataset.validate();
    if (req.workers == 0) throw ConfigError("--workers must be at least 1");
    return build_dataset(rc.dataset, req.out, BuildOptions{req.workers, req.resume});
}

EvalOutcome cmd_eval(const EvalRequest& req) {
    EvalSettings settings = req.config ? RunConfig::load(*req.config).eval : EvalSettings{};
    if (req.t_bin) settings.t_bin = *req.t_bin;
    if (req.t_tol) settings.t_tol = *req.t_tol;
    validate_eval(settings);

    DatasetReader reader(req.manifest);
    const auto& manifest = reader.manifest();
    std::vector<ScoredSample> scored;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& entry = manifest.entries[i];
        if (settings.split != "all" && settings.split != split_name(entry.split)) continue;
        const fs::path file = req.predictions / (entry.id + ".wprd");
        if (!fs::exists(file))
            throw IoError(fmt::format("no prediction for sample {} (expected {})", entry.id, file.string()));
        auto grid = read_prediction(file);
        if (grid.sample_id != entry.id)
            throw CorruptionError(fmt::format("{}: holds sample '{}', expected '{}'", file.string(), grid.sample_id, entry.id));
        const Sample sample = reader.read(i);
        scored.push_back({entry.id, type_letter(entry.type), entry.crack_size, std::move(grid), sample.label16});
    }
    if (scored.empty()) throw ConfigError(fmt::format("manifest has no {} samples to score", settings.split));

    EvalOutcome outcome;
    const fs::path run_file = req.predictions / "run.json";
    if (fs::exists(run_file)) {
        const auto raw = io::read_file(run_file);
        const auto j = nlohmann::json::parse(std::string(reinterpret_cast<const char*>(raw.data()), raw.size()));
        outcome.alpha = json_number(j, "alpha");
        outcome.gamma = json_number(j, "gamma");
    }
    outcome.samples = evaluate(scored, settings.t_bin);
    outcome.row = aggregate(outcome.samples, settings.t_tol, settings.averaging);

    fs::create_directories(req.out);
    std::string report = fmt::format("# split {}: {} samples, T_bin = {:.2f}, T_tol = {:.2f}, {} averaging\n",
                                     settings.split, scored.size(), settings.t_bin, settings.t_tol,
                                     settings.averaging == Averaging::micro ? "micro" : "macro");
    report += format_table_header();
    report += format_table_row(outcome.alpha, outcome.gamma, outcome.row);
    report += "\n# accuracy by sample type\n";
    for (auto t : kSampleTypes) {
        std::vector<SampleEval> of_type;
        for (const auto& e : outcome.samples)
            if (e.type == type_letter(t)) of_type.push_back(e);
        if (of_type.empty()) continue;
        report += fmt::format("{}\t{}\t{:.3f}\n", type_letter(t), of_type.size(), accuracy(of_type, settings.t_tol));
    }
    io::write_text_atomic(req.out / "report.txt", report);

    std::string per_sample = "id\ttype\tcrack_size\ttp\tfp\ttn\tfn\tiou\tdsc\tcorrect\n";
    for (const auto& e : outcome.samples)
        per_sample += fmt::format("{}\t{}\t{:.6g}\t{}\t{}\t{}\t{}\t{:.6f}\t{:.6f}\t{}\n", e.id, e.type, e.crack_size,
                                  e.counts.tp, e.counts.fp, e.counts.tn, e.counts.fn, e.iou, e.dsc,
                                  e.iou > settings.t_tol ? 1 : 0);
    io::write_text_atomic(req.out / "per_sample.tsv", per_sample);

    std::string hist = "t_bin\tiou_lo\tiou_hi\tcount\tcumulative\n";
    for (const auto& h : iou_histograms(scored, settings.histogram_t_bins, settings.bin_width))
        for (std::size_t k = 0; k < h.counts.size(); ++k)
            hist += fmt::format("{:.2f}\t{:.4f}\t{:.4f}\t{}\t{}\n", h.t_bin, k * h.bin_width,
                                std::min(1.0, (k + 1) * h.bin_width), h.counts[k], h.cumulative[k]);
    io::write_text_atomic(req.out / "iou_histograms.tsv", hist);

    std::string adjusted = "cutoff\tn_kept\taccuracy\n";
    for (const auto& p : adjusted_accuracy(outcome.samples, settings.size_cutoffs, settings.t_tol))
        adjusted += fmt::format("{:.6g}\t{}\t{}\n", p.cutoff, p.n_kept,
                                p.accuracy ? fmt::format("{:.6f}", *p.accuracy) : std::string("-"));
    io::write_text_atomic(req.out / "adjusted_accuracy.tsv", adjusted);

    std::vector<std::vector<float>> probs, binary, labels;
    for (const auto& s : scored) {
        probs.push_back(s.prediction.probs);
        const auto bits = binarize(s.prediction, settings.t_bin);
        binary.emplace_back(bits.begin(), bits.end());
        labels.push_back(label_tile(s.label16));
    }
    write_mosaics("mosaic_probability", probs, req.out);
    write_mosaics("mosaic_binary", binary, req.out);
    write_mosaics("mosaic_label", labels, req.out);
    return outcome;
}

}  // namespace lemwave::cli
