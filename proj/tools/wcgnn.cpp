// Command-line front end for the experiment harness.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wcgnn/dataset_io.hpp"
#include "wcgnn/error.hpp"
#include "wcgnn/harness.hpp"
#include "wcgnn/mbdla.hpp"

namespace fs = std::filesystem;
using namespace wcgnn;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string checkpoint;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_checkpoint) {
    cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "master seed, overrides the config");
    cmd->add_option("--out", c.out, "output directory, overrides the config");
    auto* ck = cmd->add_option("--checkpoint", c.checkpoint, "trained model checkpoint");
    if (needs_checkpoint) ck->required();
    cmd->add_flag("-v,--verbose", c.verbose, "report training progress on stderr");
}

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = load_experiment_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (c.verbose) cfg.training.verbose = true;
    return cfg;
}

// Runs one stage and turns any failure into a tagged message.
int stage(const std::string& name, const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error [" << name << "]: " << e.what() << '\n';
        return 1;
    }
}

void print_rows(const std::vector<ResultRow>& rows, bool with_delta) { std::cout << rows_to_csv(rows, with_delta); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wireless channel graph networks: data, training, evaluation and benchmarks"};
    app.require_subcommand(1);

    Common gen, tr, ev, sw, be, eq;
    std::size_t equiv_instances = 50;
    std::vector<std::size_t> equiv_iters{1, 5, 20};
    double equiv_tol = 1e-9;

    auto* gen_cmd = app.add_subcommand("gen-data", "sample train and test datasets");
    add_common(gen_cmd, gen, false);
    auto* train_cmd = app.add_subcommand("train", "train WCGCN and evaluate it against the baselines");
    add_common(train_cmd, tr, false);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against the baselines");
    add_common(eval_cmd, ev, true);
    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate a checkpoint on the config's sweep points");
    add_common(sweep_cmd, sw, true);
    auto* bench_cmd = app.add_subcommand("bench", "inference time against WMMSE over growing K");
    add_common(bench_cmd, be, false);
    auto* equiv_cmd = app.add_subcommand("equiv-check", "compare WMMSE with its message-passing form");
    add_common(equiv_cmd, eq, false);
    equiv_cmd->add_option("--instances", equiv_instances, "number of instances")->check(CLI::PositiveNumber);
    equiv_cmd->add_option("--iterations", equiv_iters, "WMMSE iteration counts");
    equiv_cmd->add_option("--tol", equiv_tol, "largest accepted |dV|");

    CLI11_PARSE(app, argc, argv);

    if (gen_cmd->parsed()) {
        return stage("gen-data", [&] {
            const ExperimentConfig cfg = load(gen);
            const ExperimentSeeds seeds(cfg.seed);
            fs::create_directories(cfg.out_dir);
            save_dataset(make_dataset(cfg.system, cfg.training.samples, seeds.train_data), cfg.out_dir / "train.wcds");
            save_dataset(make_dataset(cfg.system, cfg.test_samples, seeds.test_data), cfg.out_dir / "test.wcds");
            std::cout << "wrote " << (cfg.out_dir / "train.wcds").string() << " and "
                      << (cfg.out_dir / "test.wcds").string() << '\n';
        });
    }
    if (train_cmd->parsed()) {
        return stage("train", [&] {
            ExperimentConfig cfg = load(tr);
            const ExperimentResult r = run_experiment(cfg);
            print_rows(r.rows, false);
        });
    }
    if (eval_cmd->parsed()) {
        return stage("eval", [&] {
            const ExperimentConfig cfg = load(ev);
            const WcgcnParams p = load_checkpoint(ev.checkpoint);
            const ExperimentResult r = run_experiment(cfg, &p);
            print_rows(r.rows, false);
        });
    }
    if (sweep_cmd->parsed()) {
        return stage("sweep", [&] {
            const ExperimentConfig cfg = load(sw);
            const WcgcnParams p = load_checkpoint(sw.checkpoint);
            const std::vector<ResultRow> rows = generalization_sweep(cfg, p);
            fs::create_directories(cfg.out_dir);
            write_text(cfg.out_dir / "sweep.csv", rows_to_csv(rows, true));
            print_rows(rows, true);
        });
    }
    if (bench_cmd->parsed()) {
        return stage("bench", [&] {
            const ExperimentConfig cfg = load(be);
            WcgcnParams p;
            if (!be.checkpoint.empty()) {
                p = load_checkpoint(be.checkpoint);
            } else {
                Rng rng(ExperimentSeeds(cfg.seed).init);
                p = init_params(cfg.model, rng);
            }
            const TimingReport rep = benchmark_timing(cfg, p);
            fs::create_directories(cfg.out_dir);
            write_text(cfg.out_dir / "timing.csv", timing_csv(rep));
            write_text(cfg.out_dir / "timing.json", timing_json(rep).dump(2) + "\n");
            std::cout << timing_csv(rep) << "wcgcn slope " << rep.wcgcn_slope << ", wmmse slope " << rep.wmmse_slope
                      << (rep.high_variance ? " (fewer than 20 reps: high variance)" : "") << '\n';
        });
    }
    if (equiv_cmd->parsed()) {
        return stage("equiv-check", [&] {
            const ExperimentConfig cfg = load(eq);
            const Dataset ds = make_dataset(cfg.system, equiv_instances, ExperimentSeeds(cfg.seed).test_data);
            const auto rows = equivalence_report(cfg.system, ds.instances, equiv_iters, cfg.seed);
            std::cout << "iterations,instances,max_abs_dv,max_abs_dobjective\n";
            bool ok = true;
            for (const EquivalenceRow& r : rows) {
                std::cout << r.iterations << ',' << r.instances << ',' << r.max_abs_dv << ',' << r.max_abs_dobjective
                          << '\n';
                ok = ok && r.max_abs_dv <= equiv_tol;
            }
            if (!ok) throw NumericalError("deviation above tolerance " + std::to_string(equiv_tol));
        });
    }
    return 0;
}
