// Acceptance suite. Prints one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,3,5] [--out DIR] [--strict]
//
// Without --strict the exit code is 0 whenever every selected criterion ran
// to completion, so a red criterion shows up in the report, not as a crash.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracle.hpp"
#include "wcgnn/harness.hpp"
#include "wcgnn/mbdla.hpp"
#include "wcgnn/wcgcn.hpp"
#include "wcgnn/wmmse.hpp"

using namespace wcgnn;
namespace fs = std::filesystem;

namespace {

// Tolerances pinned here, one per criterion.
constexpr double kEquivarianceTol = 1e-10;
constexpr double kInvarianceTol = 1e-12;
constexpr double kFdStep = 1e-6;
constexpr double kFdRelTol = 1e-5;
constexpr double kFdFloor = 1e-8;
constexpr double kMonotoneTol = 1e-9;
constexpr double kFullPowerFraction = 0.999;
constexpr double kMbdlaTol = 1e-9;
constexpr double kRatio0dB = 0.98;
constexpr double kRatio10dB = 0.99;
constexpr double kSameDensityPoints = 0.03;
constexpr double kDensityStressPoints = 0.06;
constexpr double kTimingSlope = 1.3;

fs::path g_out = "acceptance_out";

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(4);
    s << x;
    return s.str();
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg = load_experiment_config(fs::path(WCGNN_CONFIG_DIR) / (name + ".json"));
    cfg.out_dir = g_out / name;
    return cfg;
}

SystemConfig random_system(std::size_t k, std::size_t nt, double threshold) {
    SystemConfig cfg;
    cfg.num_pairs = k;
    cfg.num_tx_antennas = nt;
    cfg.channel_model = ChannelModel::pathloss_rayleigh;
    cfg.weighted = true;
    cfg.area_side = 200.0;
    cfg.dmin = 5.0;
    cfg.dmax = 30.0;
    cfg.edge_threshold = threshold;
    return cfg;
}

WcgcnConfig model_for(std::size_t nt) {
    return nt == 1 ? WcgcnConfig::power_control() : WcgcnConfig::beamforming(nt);
}

double max_abs_diff(const Allocation& a, const Allocation& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

Outcome equivariance() {
    const double thresholds[] = {std::numeric_limits<double>::infinity(), 80.0, 40.0};
    double worst = 0.0;
    std::size_t triples = 0;
    for (std::size_t nt : {1, 2}) {
        Rng rng(derive_seed(101, nt));
        for (std::size_t t = 0; t < 100; ++t) {
            const std::size_t k = 2 + rng.below(14);
            const SystemConfig sys = random_system(k, nt, thresholds[t % 3]);
            const Instance inst = sample_instance(sys, rng);
            const WirelessGraph g = build_graph(sys, inst, {1.0 / std::sqrt(sys.noise_power())});
            const WcgcnParams p = init_params(model_for(nt), rng);
            const Permutation pi = Permutation::random(k, rng);
            const Allocation moved = network_forward(p, permute(g, pi));
            worst = std::max(worst, max_abs_diff(moved, permute_alloc(network_forward(p, g), pi)));
            ++triples;
        }
    }
    return {worst <= kEquivarianceTol, std::to_string(triples) + " triples, max dev " + fmt(worst)};
}

Outcome objective_invariance() {
    Rng rng(202);
    double worst = 0.0;
    for (std::size_t t = 0; t < 100; ++t) {
        const std::size_t k = 1 + rng.below(15);
        const std::size_t nt = 1 + t % 2;
        const Instance inst = sample_instance(random_system(k, nt, INFINITY), rng);
        Allocation gamma = random_allocation(k, nt, 1.0, rng);
        for (double& v : gamma.values) v *= rng.uniform();
        const Permutation pi = Permutation::random(k, rng);
        const double base = sinr_and_rates(inst.channel, gamma).objective;
        const double moved = sinr_and_rates(permute(inst.channel, pi), permute_alloc(gamma, pi)).objective;
        worst = std::max(worst, std::abs(base - moved));
    }
    return {worst <= kInvarianceTol, "100 instances, max |d objective| " + fmt(worst)};
}

// Tape gradient against central differences of an independent quad
// precision implementation of the same loss. In long double the loss
// roundoff over 2h is ~1e-13, which is the whole tolerance at |g| ~ 1e-8.
Outcome gradient() {
    std::size_t entries = 0;
    std::size_t bad = 0;
    double worst_rel = 0.0;
    double worst_bad_abs = 0.0;
    double worst_bad_g = 0.0;
    for (std::uint64_t inst = 0; inst < 10; ++inst) {
        SystemConfig sys;
        sys.num_pairs = 4;
        const std::vector<TrainingSample> batch = make_samples(make_dataset(sys, 1, 300 + inst), {});
        Rng rng(derive_seed(303, inst));
        const WcgcnParams p = init_params(WcgcnConfig::power_control(), rng);
        const LossAndGrad lg = unsup_loss_and_grad(p, batch);
        auto m = oracle::convert<oracle::quad>(p);
        const auto slots = p.tensors();
        for (std::size_t t = 0; t < slots.size(); ++t) {
            for (std::size_t i = 0; i < slots[t]->size(); ++i) {
                auto& x = oracle::slot(m, t, i);
                const auto orig = x;
                const oracle::quad h = kFdStep;
                x = orig + h;
                const auto up = oracle::loss(m, std::span<const TrainingSample>(batch));
                x = orig - h;
                const auto down = oracle::loss(m, std::span<const TrainingSample>(batch));
                x = orig;
                const double fd = static_cast<double>((up - down) / (2 * h));
                const double g = lg.grads[t][i];
                const double rel = std::abs(fd - g) / std::max(std::abs(g), kFdFloor);
                worst_rel = std::max(worst_rel, rel);
                ++entries;
                if (rel > kFdRelTol) {
                    ++bad;
                    if (std::abs(fd - g) > worst_bad_abs) {
                        worst_bad_abs = std::abs(fd - g);
                        worst_bad_g = g;
                    }
                }
            }
        }
    }
    std::string detail = std::to_string(entries) + " entries, " + std::to_string(bad) + " above tol, max rel " +
                         fmt(worst_rel);
    if (bad > 0) detail += " (worst abs err " + fmt(worst_bad_abs) + " at |g| " + fmt(std::abs(worst_bad_g)) + ")";
    return {bad == 0, detail};
}

Outcome wmmse_monotone() {
    const std::size_t ks[] = {2, 5, 10};
    Rng rng(404);
    double worst_drop = 0.0;
    for (std::size_t t = 0; t < 100; ++t) {
        const std::size_t k = ks[t % 3];
        const std::size_t nt = 1 + (t / 3) % 2;
        SystemConfig sys;
        sys.num_pairs = k;
        sys.num_tx_antennas = nt;
        sys.weighted = true;
        sys.snr_db = (t % 2 == 0) ? 0.0 : 10.0;
        const Instance inst = sample_instance(sys, rng);
        const SolverReport r = wmmse_solve(inst.channel, 1.0, rng);
        for (std::size_t i = 1; i < r.objective_trajectory.size(); ++i) {
            worst_drop = std::max(worst_drop, r.objective_trajectory[i - 1] - r.objective_trajectory[i]);
        }
    }
    double min_power = INFINITY;
    for (std::size_t t = 0; t < 20; ++t) {
        SystemConfig sys;
        sys.num_pairs = 1;
        sys.num_tx_antennas = 1 + t % 2;
        const Instance inst = sample_instance(sys, rng);
        const SolverReport r = wmmse_solve(inst.channel, 1.0, rng, {50, false});
        min_power = std::min(min_power, r.allocation.power(0));
    }
    const bool pass = worst_drop <= kMonotoneTol && min_power >= kFullPowerFraction;
    return {pass, "100 instances, max drop " + fmt(worst_drop) + "; K=1 min power after 50 it " + fmt(min_power)};
}

Outcome mbdla_equivalence() {
    const std::size_t iters[] = {1, 5, 20};
    double worst_v = 0.0;
    double worst_obj = 0.0;
    for (std::size_t nt : {1, 2}) {
        SystemConfig sys;
        sys.num_pairs = 8;
        sys.num_tx_antennas = nt;
        sys.weighted = true;
        const Dataset ds = make_dataset(sys, 50, 505 + nt);
        for (const EquivalenceRow& row : equivalence_report(sys, ds.instances, iters, 55 + nt)) {
            worst_v = std::max(worst_v, row.max_abs_dv);
            worst_obj = std::max(worst_obj, row.max_abs_dobjective);
        }
    }
    return {worst_v <= kMbdlaTol,
            "50 instances x Nt {1,2} x T {1,5,20}, max |dV| " + fmt(worst_v) + ", max |d obj| " + fmt(worst_obj)};
}

Outcome rayleigh_k10() {
    const ExperimentResult low = run_experiment(preset("table1-small"));
    const ExperimentResult high = run_experiment(preset("table1-10db"));
    const double r0 = low.rows.front().ratio_to_wmmse;
    const double r10 = high.rows.front().ratio_to_wmmse;
    return {r0 >= kRatio0dB && r10 >= kRatio10dB,
            "ratio 0 dB " + fmt(r0) + " (need " + fmt(kRatio0dB) + "), 10 dB " + fmt(r10) + " (need " +
                fmt(kRatio10dB) + ")"};
}

Outcome shared_init() {
    const ExperimentResult r = run_experiment(preset("shared-init"));
    double shared10 = NAN;
    for (const ResultRow& row : r.rows) {
        if (row.method == "wmmse-shared:10") shared10 = row.mean_objective;
    }
    const double net = r.rows.front().mean_objective;
    return {net >= shared10, "2-layer WCGCN " + fmt(net) + " vs WMMSE 10 it " + fmt(shared10)};
}

Outcome generalization() {
    const ExperimentConfig cfg = preset("generalization");
    const ExperimentResult trained = run_experiment(cfg);
    const std::vector<ResultRow> rows = generalization_sweep(cfg, trained.model.params);
    write_text(cfg.out_dir / "sweep.csv", rows_to_csv(rows, true));
    const double same = rows.at(1).delta;
    const double dense = rows.at(2).delta;
    const bool pass = std::abs(same) <= kSameDensityPoints && dense >= -kDensityStressPoints;
    return {pass, "K=10 ratio " + fmt(rows[0].ratio_to_wmmse) + "; K=40/900m delta " + fmt(same) +
                      "; K=40/450m delta " + fmt(dense)};
}

Outcome duplicate_edges() {
    Rng rng(909);
    std::size_t checked = 0;
    bool exact = true;
    for (std::size_t t = 0; t < 50; ++t) {
        const std::size_t nt = 1 + t % 2;
        const std::size_t k = 2 + rng.below(8);
        const SystemConfig sys = random_system(k, nt, t % 2 == 0 ? INFINITY : 60.0);
        const Instance inst = sample_instance(sys, rng);
        const WirelessGraph g = build_graph(sys, inst, {1.0 / std::sqrt(sys.noise_power())});
        const WcgcnParams p = init_params(model_for(nt), rng);
        const Allocation base = network_forward(p, g);
        for (std::size_t e = 0; e < g.num_edges(); ++e) {
            WirelessGraph dup = g;
            const std::vector<double> f(g.edge_row(e).begin(), g.edge_row(e).end());
            dup.add_edge(g.edges[e], f);
            exact = exact && network_forward(p, dup) == base;
            ++checked;
        }
    }
    return {exact, "50 graphs, " + std::to_string(checked) + " single-edge duplications"};
}

Outcome timing() {
    const ExperimentConfig cfg = preset("bench");
    Rng rng(ExperimentSeeds(cfg.seed).init);
    const TimingReport r = benchmark_timing(cfg, init_params(cfg.model, rng));
    write_text(cfg.out_dir / "timing.csv", timing_csv(r));
    write_text(cfg.out_dir / "timing.json", timing_json(r).dump(2) + "\n");
    bool increasing = true;
    std::string ratios;
    for (std::size_t i = 0; i < r.wmmse_over_wcgcn.size(); ++i) {
        if (i > 0 && !(r.wmmse_over_wcgcn[i] > r.wmmse_over_wcgcn[i - 1])) increasing = false;
        ratios += (i ? " " : "") + fmt(r.wmmse_over_wcgcn[i]);
    }
    return {r.wcgcn_slope <= kTimingSlope && increasing,
            "WCGCN slope " + fmt(r.wcgcn_slope) + ", WMMSE slope " + fmt(r.wmmse_slope) + ", WMMSE/WCGCN " + ratios};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    bool strict = false;
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    app.add_option("--out", g_out, "directory for experiment artifacts");
    app.add_flag("--strict", strict, "exit non-zero when a criterion fails");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {1, "permutation equivariance", equivariance},
        {2, "objective permutation invariance", objective_invariance},
        {3, "gradient vs finite differences", gradient},
        {4, "WMMSE monotonicity", wmmse_monotone},
        {5, "MB-DLA equivalence", mbdla_equivalence},
        {6, "K=10 Rayleigh ratio to WMMSE", rayleigh_k10},
        {7, "2-layer WCGCN vs WMMSE 10 it", shared_init},
        {8, "generalization", generalization},
        {9, "duplicate in-edges", duplicate_edges},
        {10, "timing scaling", timing},
    };
    const std::set<int> selected(only.begin(), only.end());

    int failed = 0;
    int ran = 0;
    std::ostringstream report;
    auto emit = [&](const std::string& line) {
        std::cout << line << std::endl;
        report << line << '\n';
    };
    for (const Criterion& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            emit("ERROR " + std::to_string(c.id) + " " + c.name + ": " + e.what());
            write_text(g_out / "acceptance_report.txt", report.str());
            return 2;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        ++ran;
        if (!o.pass) ++failed;
        emit(std::string(o.pass ? "PASS " : "FAIL ") + std::to_string(c.id) + " " + c.name + ": " + o.detail + " [" +
             fmt(secs) + " s]");
    }
    emit("acceptance: " + std::to_string(ran - failed) + "/" + std::to_string(ran) + " passed");
    write_text(g_out / "acceptance_report.txt", report.str());
    return strict && failed > 0 ? 1 : 0;
}
