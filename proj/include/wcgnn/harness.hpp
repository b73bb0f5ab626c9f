#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wcgnn/scenario.hpp"
#include "wcgnn/wcgcn.hpp"

namespace wcgnn {

struct TrainingSettings {
    std::size_t samples = 10000;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::optional<double> final_learning_rate;  // geometric decay target
    std::size_t grad_chunks = 1;
    std::size_t threads = 1;
    bool verbose = false;  // one progress line per epoch on stderr
};

// One test setting of a generalization sweep. Unset fields keep the
// training scenario's values.
struct SweepPoint {
    std::string label;
    std::optional<std::size_t> num_pairs;
    std::optional<double> area_side;
    std::optional<double> snr_db;
};

struct BenchSettings {
    std::vector<std::size_t> ks{10, 20, 40, 80, 160};
    std::size_t reps = 20;
    std::size_t wmmse_iterations = 100;
    // Area grows with sqrt(K / ks.front()) so the link density stays fixed.
    bool fixed_density = true;
};

struct ExperimentConfig {
    std::string name = "experiment";
    SystemConfig system;
    WcgcnConfig model;
    TrainingSettings training;
    std::size_t test_samples = 500;
    // Method names: "wmmse" (random init, 100 iterations), "wmmse-best"
    // (best of wmmse_restarts), "strongest" (top strongest_rho fraction on),
    // "wmmse-shared:T" (T iterations from the network's initial state).
    std::vector<std::string> baselines{"wmmse"};
    std::size_t wmmse_iterations = 100;
    std::size_t wmmse_restarts = 10;
    double strongest_rho = 0.5;
    // Features scaled by 1/sqrt(noise) so that they are O(1) for every model.
    bool normalize_features = true;
    // Record wall times; with false every time column is 0 so reruns give
    // byte-identical CSVs.
    bool record_timing = true;
    std::vector<SweepPoint> sweep;
    BenchSettings bench;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "results";

    void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ResultRow {
    std::string method;
    std::size_t num_pairs = 0;
    std::string setting;
    double mean_objective = 0.0;
    double ratio_to_wmmse = 0.0;  // method mean / WMMSE(100 it) mean on the same instances
    double time_mean_s = 0.0;
    double time_std_s = 0.0;
    double delta = 0.0;           // sweeps: ratio minus the training-size ratio
};

inline constexpr const char* kResultCsvHeader =
    "method,K,setting,mean_objective,ratio_to_wmmse,time_mean_s,time_std_s";

// Header line plus one line per row. `with_delta` appends a delta column.
std::string rows_to_csv(std::span<const ResultRow> rows, bool with_delta = false);
nlohmann::json rows_to_json(std::span<const ResultRow> rows);

// Derived seeds of the independent random streams of an experiment.
struct ExperimentSeeds {
    std::uint64_t train_data, test_data, init, shuffle, baseline;
    explicit ExperimentSeeds(std::uint64_t master);
};

GraphOptions graph_options(const ExperimentConfig& cfg, const SystemConfig& sys);

struct TrainedModel {
    WcgcnParams params;
    TrainResult curve;
    std::vector<double> epoch_test_ratio;
};

// Trains on cfg.training.samples fresh instances. `reference` (test samples
// plus their WMMSE objective mean) adds a per-epoch test ratio to the curve.
TrainedModel train_model(const ExperimentConfig& cfg, const std::vector<TrainingSample>* test = nullptr,
                         double wmmse_mean = 0.0);

std::string training_curve_csv(const TrainedModel& m);

struct MethodEval {
    std::string method;
    std::vector<double> objectives;
    std::vector<double> times;
};

// Weighted sum rate of every test instance under each requested method.
MethodEval evaluate_wcgcn(const WcgcnParams& p, std::span<const TrainingSample> test, bool timing);
MethodEval evaluate_baseline(const ExperimentConfig& cfg, const std::string& method, std::span<const Instance> test,
                             bool timing);

ResultRow summarize(const MethodEval& e, std::size_t num_pairs, const std::string& setting, double wmmse_mean);

double mean(std::span<const double> xs);
double stddev(std::span<const double> xs);

struct ExperimentResult {
    std::vector<ResultRow> rows;
    TrainedModel model;
};

// Full pipeline: data, training (unless `pretrained`), evaluation of WCGCN and
// every baseline on the held-out test set. Writes results.csv, summary.json,
// training_curve.csv and model.ckpt into cfg.out_dir when write is true.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const WcgcnParams* pretrained = nullptr,
                                bool write = true);

// Evaluates `params` on the training setting and on every sweep point. The
// first row is the training setting (delta 0); later rows carry
// delta = ratio - first ratio. Throws ConfigError on an antenna mismatch.
std::vector<ResultRow> generalization_sweep(const ExperimentConfig& cfg, const WcgcnParams& params);

struct TimingRow {
    std::string method;
    std::size_t num_pairs = 0;
    std::size_t num_edges = 0;
    std::size_t reps = 0;
    double median_s = 0.0;
};

struct TimingReport {
    std::vector<TimingRow> rows;
    double wcgcn_slope = 0.0;                // least-squares exponent of median time vs K
    double wmmse_slope = 0.0;
    std::vector<double> wmmse_over_wcgcn;    // per K
    bool high_variance = false;              // reps < 20
};

TimingReport benchmark_timing(const ExperimentConfig& cfg, const WcgcnParams& params);

std::string timing_csv(const TimingReport& r);
nlohmann::json timing_json(const TimingReport& r);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace wcgnn
