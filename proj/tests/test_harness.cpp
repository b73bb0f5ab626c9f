#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "wcgnn/error.hpp"
#include "wcgnn/harness.hpp"

using namespace wcgnn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    c.system.num_pairs = 4;
    c.model = WcgcnConfig::power_control();
    c.training.samples = 40;
    c.training.epochs = 2;
    c.training.batch_size = 16;
    c.test_samples = 12;
    c.baselines = {"wmmse", "strongest", "wmmse-shared:3"};
    c.wmmse_iterations = 20;
    c.record_timing = false;
    c.seed = 5;
    c.out_dir = fs::temp_directory_path() / ("wcgnn_test_" + name);
    return c;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("experiment writes its artifacts and reruns identically") {
    const ExperimentConfig cfg = tiny("exp");
    fs::remove_all(cfg.out_dir);
    const ExperimentResult a = run_experiment(cfg);
    REQUIRE(a.rows.size() == 4);
    CHECK(a.rows[0].method == "wcgcn");
    CHECK(a.rows[1].method == "wmmse");
    CHECK(a.rows[1].ratio_to_wmmse == 1.0);
    for (const char* f : {"results.csv", "summary.json", "training_curve.csv", "model.ckpt", "model.ckpt.json"}) {
        CHECK(fs::exists(cfg.out_dir / f));
    }
    const std::string first = read_text(cfg.out_dir / "results.csv");
    CHECK(first.rfind(kResultCsvHeader, 0) == 0);
    run_experiment(cfg);
    CHECK(read_text(cfg.out_dir / "results.csv") == first);

    // The saved checkpoint evaluates to the same WCGCN row.
    const WcgcnParams p = load_checkpoint(cfg.out_dir / "model.ckpt");
    const ExperimentResult again = run_experiment(cfg, &p, false);
    CHECK(again.rows[0].mean_objective == a.rows[0].mean_objective);
}

TEST_CASE("empty baseline list gives only the network row") {
    ExperimentConfig cfg = tiny("nobase");
    cfg.baselines.clear();
    const ExperimentResult r = run_experiment(cfg, nullptr, false);
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].method == "wcgcn");
    CHECK(r.rows[0].ratio_to_wmmse > 0.0);
}

TEST_CASE("config json round trip") {
    ExperimentConfig cfg = tiny("json");
    cfg.sweep.push_back({"big", 8, 2000.0, std::nullopt});
    cfg.training.final_learning_rate = 1e-4;
    const ExperimentConfig back = nlohmann::json(cfg).get<ExperimentConfig>();
    CHECK(nlohmann::json(back) == nlohmann::json(cfg));
}

TEST_CASE("invalid configs") {
    ExperimentConfig cfg = tiny("bad");
    cfg.baselines = {"magic"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny("bad");
    cfg.model = WcgcnConfig::beamforming(2);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("sweep reports deltas against the training setting") {
    ExperimentConfig cfg = tiny("sweep");
    cfg.sweep.push_back({"same", std::nullopt, std::nullopt, std::nullopt});
    cfg.sweep.push_back({"bigger", 6, std::nullopt, std::nullopt});
    Rng rng(1);
    const WcgcnParams p = init_params(cfg.model, rng);
    const auto rows = generalization_sweep(cfg, p);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].delta == 0.0);
    CHECK(rows[1].delta == 0.0);
    CHECK(rows[2].num_pairs == 6);
    CHECK(rows[2].delta == doctest::Approx(rows[2].ratio_to_wmmse - rows[0].ratio_to_wmmse));
    const WcgcnParams wrong = init_params(WcgcnConfig::beamforming(2), rng);
    CHECK_THROWS_AS(generalization_sweep(cfg, wrong), ConfigError);
}

TEST_CASE("log-log slope") {
    const std::vector<double> x{1, 2, 4, 8};
    const std::vector<double> y{3, 12, 48, 192};
    CHECK(loglog_slope(x, y) == doctest::Approx(2.0));
}

TEST_CASE("timing with a single rep is flagged") {
    ExperimentConfig cfg = tiny("bench");
    cfg.bench.ks = {4, 8};
    cfg.bench.reps = 1;
    cfg.bench.wmmse_iterations = 5;
    Rng rng(2);
    const TimingReport r = benchmark_timing(cfg, init_params(cfg.model, rng));
    CHECK(r.high_variance);
    CHECK(r.rows.size() == 4);
    CHECK(r.wmmse_over_wcgcn.size() == 2);
}

TEST_CASE("csv layout") {
    ResultRow r;
    r.method = "wcgcn";
    r.num_pairs = 10;
    r.setting = "x";
    r.mean_objective = 2.5;
    r.ratio_to_wmmse = 0.5;
    const std::string csv = rows_to_csv(std::vector<ResultRow>{r});
    std::istringstream in(csv);
    std::string header, line;
    std::getline(in, header);
    std::getline(in, line);
    CHECK(header == "method,K,setting,mean_objective,ratio_to_wmmse,time_mean_s,time_std_s");
    CHECK(line == "wcgcn,10,x,2.5,0.5,0,0");
}
