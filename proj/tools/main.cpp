#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>

#include "commands.hpp"
#include "lemwave/errors.hpp"

using namespace lemwave;

int main(int argc, char** argv) {
    CLI::App app{"Lattice wave simulation, dataset generation and crack-map scoring"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    cli::SimulateRequest sim;
    std::optional<std::uint64_t> sim_seed;
    std::string layout;
    auto* simulate = app.add_subcommand("simulate", "Run one scenario and write records, frames and arrival tables");
    simulate->add_option("--config", sim.config, "Run config file")->required();
    simulate->add_option("--out", sim.out, "Output directory")->required();
    simulate->add_option("--seed", sim_seed, "Plate seed (overrides the config)");
    simulate->add_option("--layout", layout, "Boundary layout a, b or c")->check(CLI::IsMember({"a", "b", "c"}));
    simulate->add_option("--frames", sim.frames_every, "Write a full-field frame every N steps");
    simulate->add_flag("--with-crack", sim.with_crack, "Run intact and cracked twins and tabulate arrivals");
    simulate->add_flag("--paper-literal-coefficients", sim.paper_literal,
                       "Use the printed Newmark constants instead of average acceleration");

    cli::GenDatasetRequest gen;
    std::optional<std::uint64_t> gen_seed;
    bool no_resume = false;
    auto* gen_dataset = app.add_subcommand("gen-dataset", "Generate the training and test samples");
    gen_dataset->add_option("--config", gen.config, "Run config file")->required();
    gen_dataset->add_option("--out", gen.out, "Dataset directory")->required();
    gen_dataset->add_option("--seed", gen_seed, "Master seed (overrides the config)");
    gen_dataset->add_option("--workers", gen.workers, "Parallel sample workers")->check(CLI::PositiveNumber);
    gen_dataset->add_flag("--no-resume", no_resume, "Ignore samples left by an interrupted build");

    cli::EvalRequest ev;
    std::string eval_config;
    std::optional<double> t_bin, t_tol;
    auto* eval = app.add_subcommand("eval", "Score prediction grids against a dataset");
    eval->add_option("--manifest", ev.manifest, "Dataset manifest.json")->required();
    eval->add_option("--predictions", ev.predictions, "Directory of <id>.wprd files")->required();
    eval->add_option("--out", ev.out, "Report directory")->required();
    eval->add_option("--config", eval_config, "Config file with eval.* settings");
    eval->add_option("--t-bin", t_bin, "Binarization threshold");
    eval->add_option("--t-tol", t_tol, "IoU needed to count a sample as correct");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kConfigFailure;
    }
    // logs go to stderr; stdout carries results only
    spdlog::set_default_logger(spdlog::stderr_color_mt("sim_cli"));
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*simulate) {
            sim.seed = sim_seed;
            if (!layout.empty()) sim.layout = parse_layout(layout);
            const auto out = cli::cmd_simulate(sim);
            fmt::print("{} particles, {} frames written to {}\n", out.n_particles, out.frames_written, sim.out.string());
            if (out.twins) fmt::print("{}", format_arrival_table(*out.twins));
        } else if (*gen_dataset) {
            gen.seed = gen_seed;
            gen.resume = !no_resume;
            const auto m = cli::cmd_gen_dataset(gen);
            fmt::print("train {}  test {}  samples {}  checksum {:016x}\n", m.train.total(), m.test.total(),
                       m.entries.size(), m.dataset_checksum());
        } else if (*eval) {
            if (!eval_config.empty()) ev.config = eval_config;
            ev.t_bin = t_bin;
            ev.t_tol = t_tol;
            const auto out = cli::cmd_eval(ev);
            fmt::print("{}{}", format_table_header(), format_table_row(out.alpha, out.gamma, out.row));
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return cli::exit_code_for(e);
    }
    return cli::kOk;
}
