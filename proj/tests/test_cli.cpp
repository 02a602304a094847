#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "commands.hpp"
#include "lemwave/binary_io.hpp"
#include "lemwave/errors.hpp"
#include "lemwave/render.hpp"

using namespace lemwave;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTinyDataset =
    "seed = 5\nplate.n_particles = 300\nnewmark.dt = 2.5e-8\nnewmark.n_steps = 40\n"
    "dataset.train.N = 3\ndataset.train.R = 1\ndataset.train.S = 2\ndataset.train.C = 2\n"
    "dataset.test.N = 2\ndataset.test.R = 1\ndataset.test.S = 0\ndataset.test.C = 2\n"
    "dataset.type_c_group = 2\ndataset.type_s_group = 2\ndataset.special_cases = 1\n";

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("lemwave-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    fs::path write_config(const std::string& name, const std::string& text) {
        const auto p = root_ / name;
        std::ofstream(p) << text;
        return p;
    }
    std::string read_text(const fs::path& p) {
        std::ifstream in(p);
        return {std::istreambuf_iterator<char>(in), {}};
    }

    fs::path root_;
};

std::string config_error(auto&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_F(CliTest, RunConfigReadsEverySection) {
    const auto rc = cli::RunConfig::parse(KeyValueConfig::parse(
        "seed = 3\nsimulate.layout = c\nsimulate.crack = 0.001, 0.002, 0.003, 0.004\nsimulate.receivers = grid\n"
        "simulate.threshold = 0.1\nsimulate.frame_width = 64\neval.t_bin = 0.3\neval.t_tol = 0.6\n"
        "eval.t_bins = 0.5\neval.averaging = macro\neval.split = all\n"));
    EXPECT_EQ(rc.dataset.master_seed, 3u);
    EXPECT_EQ(rc.simulate.layout, Layout::c);
    ASSERT_TRUE(rc.simulate.crack);
    EXPECT_DOUBLE_EQ(rc.simulate.crack->b.y, 0.004);
    EXPECT_FALSE(rc.simulate.reference_receivers);
    EXPECT_EQ(rc.simulate.frame_width, 64u);
    EXPECT_DOUBLE_EQ(rc.eval.t_bin, 0.3);
    EXPECT_EQ(rc.eval.histogram_t_bins, std::vector<double>{0.5});
    EXPECT_EQ(rc.eval.averaging, Averaging::macro);
    EXPECT_NO_THROW(rc.validate_common());
}

TEST_F(CliTest, RunConfigRejectsUnknownAndInvalidSettings) {
    auto parse = [](const char* text) { return cli::RunConfig::parse(KeyValueConfig::parse(text, "r.cfg")); };
    EXPECT_NE(config_error([&] { parse("seed = 1\nsimulate.layuot = a\n"); }).find("r.cfg:2"), std::string::npos);
    EXPECT_FALSE(config_error([&] { parse("simulate.layout = d\n"); }).empty());
    EXPECT_FALSE(config_error([&] { parse("simulate.crack = 0, 0, 1\n"); }).empty());
    EXPECT_FALSE(config_error([&] { parse("simulate.receivers = some\n"); }).empty());
    EXPECT_FALSE(config_error([&] { parse("eval.averaging = median\n"); }).empty());
    EXPECT_FALSE(config_error([&] { parse("simulate.threshold = 1.5\n").validate_common(); }).empty());
    EXPECT_FALSE(config_error([&] { parse("simulate.crack = 1, 1, 2, 2\n").validate_common(); }).empty());
    EXPECT_FALSE(config_error([&] { parse("eval.t_tol = 1\n").validate_common(); }).empty());
    EXPECT_FALSE(config_error([&] { parse("plate.youngs_modulus = -5\n").validate_common(); }).empty());
}

TEST_F(CliTest, ExitCodesSeparateFailureClasses) {
    EXPECT_EQ(cli::exit_code_for(ConfigError("x")), cli::kConfigFailure);
    EXPECT_EQ(cli::exit_code_for(DivergenceError(3, "x")), cli::kNumericalFailure);
    EXPECT_EQ(cli::exit_code_for(FloatingComponentError("x")), cli::kNumericalFailure);
    EXPECT_EQ(cli::exit_code_for(CorruptionError("x")), cli::kIoFailure);
    EXPECT_EQ(cli::exit_code_for(std::logic_error("x")), cli::kInternalFailure);
    const std::set<int> codes{cli::kConfigFailure, cli::kNumericalFailure, cli::kIoFailure};
    EXPECT_EQ(codes.size(), 3u);
    EXPECT_EQ(codes.count(0), 0u);
}

TEST_F(CliTest, SimulateLeavesNothingBehindOnBadConfig) {
    const auto out = root_ / "out";
    EXPECT_THROW(cli::cmd_simulate({root_ / "missing.cfg", out}), IoError);
    EXPECT_FALSE(fs::exists(out));
    const auto bad = write_config("bad.cfg", "plate.n_particles = 300\nsimulate.frames = 3\n");
    EXPECT_THROW(cli::cmd_simulate({bad, out}), ConfigError);
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, SimulateWritesRecordAndOneFramePerInterval) {
    const auto cfg = write_config("s.cfg",
                                  "plate.n_particles = 300\nnewmark.dt = 1e-8\nnewmark.n_steps = 600\n"
                                  "simulate.frame_width = 40\n");
    cli::SimulateRequest req{cfg, root_ / "a"};
    req.frames_every = 100;
    const auto out = cli::cmd_simulate(req);
    EXPECT_EQ(out.frames_written, 6u);
    std::size_t frames = 0;
    for ([[maybe_unused]] const auto& f : fs::directory_iterator(root_ / "a" / "frames")) ++frames;
    EXPECT_EQ(frames, 6u);
    const auto frame = read_pgm(root_ / "a" / "frames" / "frame_00600.pgm");
    EXPECT_EQ(frame.width, 40u);
    EXPECT_EQ(frame.height, 40u);
    const auto rec = read_record(root_ / "a" / "record");
    EXPECT_EQ(rec.n_receivers, 9u);
    EXPECT_EQ(rec.n_steps, 600u);
    EXPECT_FALSE(fs::exists(root_ / "a" / "label100.pbm"));  // layout a has no crack

    req.out = root_ / "c";
    req.layout = Layout::c;
    req.frames_every = 0;
    cli::cmd_simulate(req);
    EXPECT_TRUE(fs::exists(root_ / "c" / "label100.pbm"));
    EXPECT_FALSE(fs::exists(root_ / "c" / "frames"));
    EXPECT_EQ(read_record(root_ / "c" / "record").load.unit_direction().y, -1.0);
}

TEST_F(CliTest, SimulateTwinRunTabulatesArrivals) {
    const auto cfg =
        write_config("t.cfg", "plate.n_particles = 300\nnewmark.dt = 2.5e-8\nnewmark.n_steps = 80\nsimulate.pad_cells = 4\n");
    cli::SimulateRequest req{cfg, root_ / "twin"};
    req.with_crack = true;
    const auto out = cli::cmd_simulate(req);
    ASSERT_TRUE(out.twins);
    EXPECT_EQ(out.twins->rows.size(), 9u);
    for (const char* base : {"intact", "cracked", "free_field"}) EXPECT_EQ(read_record(root_ / "twin" / base).n_steps, 80u);
    const auto table = read_text(root_ / "twin" / "arrivals.txt");
    EXPECT_NE(table.find("R1"), std::string::npos);
    EXPECT_NE(table.find("delay"), std::string::npos);
}

TEST_F(CliTest, GenDatasetIsDeterministicPerSeed) {
    const auto cfg = write_config("d.cfg", kTinyDataset);
    const auto a = cli::cmd_gen_dataset({cfg, root_ / "a"});
    const auto b = cli::cmd_gen_dataset({cfg, root_ / "b", {}, 2});
    const auto c = cli::cmd_gen_dataset({cfg, root_ / "c", 6u});
    EXPECT_EQ(a.train.total(), 8u);
    EXPECT_EQ(a.test.total(), 5u);
    EXPECT_EQ(a.dataset_checksum(), b.dataset_checksum());
    EXPECT_NE(a.dataset_checksum(), c.dataset_checksum());
    EXPECT_EQ(c.master_seed, 6u);
    EXPECT_THROW(cli::cmd_gen_dataset({cfg, root_ / "d", {}, 0}), ConfigError);
}

TEST_F(CliTest, EvalScoresWritesReportsAndNamesMissingPredictions) {
    const auto cfg = write_config("d.cfg", kTinyDataset);
    cli::cmd_gen_dataset({cfg, root_ / "ds"});
    const auto manifest = root_ / "ds" / kManifestName;
    DatasetReader reader(manifest);
    const auto preds = root_ / "pred";
    fs::create_directories(preds);
    std::string skipped;
    for (std::size_t i = 0; i < reader.size(); ++i) {
        const auto& e = reader.manifest().entries[i];
        if (e.split != Split::test) continue;
        const auto s = reader.read(i);
        write_prediction(preds / (e.id + ".wprd"), {e.id, 16, 16, {s.label16.bits.begin(), s.label16.bits.end()}});
        skipped = e.id;
    }
    std::ofstream(preds / "run.json") << R"({"alpha": 0.35, "gamma": 0.2})";

    const auto out = cli::cmd_eval({manifest, preds, root_ / "eval"});
    EXPECT_EQ(out.samples.size(), 5u);
    EXPECT_EQ(out.row.accuracy, 1.0);
    EXPECT_EQ(out.alpha, 0.35);
    const auto report = read_text(root_ / "eval" / "report.txt");
    EXPECT_NE(report.find("  0.20 |   0.35 |  1.000 |  1.000 |  1.000 |  1.000 |  1.000"), std::string::npos) << report;
    for (const char* f : {"per_sample.tsv", "iou_histograms.tsv", "adjusted_accuracy.tsv", "mosaic_probability_00.pgm",
                          "mosaic_binary_00.pgm", "mosaic_label_00.pgm"})
        EXPECT_TRUE(fs::exists(root_ / "eval" / f)) << f;
    // header plus one line per test sample
    const auto per_sample = read_text(root_ / "eval" / "per_sample.tsv");
    EXPECT_EQ(std::count(per_sample.begin(), per_sample.end(), '\n'), 6);

    // a grid filed under the wrong id
    auto grid = read_prediction(preds / (skipped + ".wprd"));
    grid.sample_id = "test-99999";
    write_prediction(preds / (skipped + ".wprd"), grid);
    EXPECT_THROW(cli::cmd_eval({manifest, preds, root_ / "eval2"}), CorruptionError);

    fs::remove(preds / (skipped + ".wprd"));
    try {
        cli::cmd_eval({manifest, preds, root_ / "eval3"});
        FAIL() << "expected a missing-prediction error";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find(skipped), std::string::npos) << e.what();
    }
    EXPECT_FALSE(fs::exists(root_ / "eval3"));

    cli::EvalRequest bad{manifest, preds, root_ / "eval4"};
    bad.t_bin = 1.5;
    EXPECT_THROW(cli::cmd_eval(bad), ConfigError);
}
