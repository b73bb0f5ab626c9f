#include "wcgnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "wcgnn/error.hpp"
#include "wcgnn/wmmse.hpp"

namespace wcgnn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const std::string kSharedPrefix = "wmmse-shared:";

}  // namespace

void ExperimentConfig::validate() const {
    system.validate();
    model.validate();
    if (model.num_antennas != system.num_tx_antennas) {
        throw ConfigError("model.num_antennas (" + std::to_string(model.num_antennas) +
                          ") differs from system.num_tx_antennas (" + std::to_string(system.num_tx_antennas) + ")");
    }
    if (!(training.learning_rate >= 0.0)) throw ConfigError("training.learning_rate must be >= 0");
    if (training.final_learning_rate && !(*training.final_learning_rate > 0.0 && training.learning_rate > 0.0)) {
        throw ConfigError("training.final_learning_rate needs positive learning rates");
    }
    if (training.batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
    if (test_samples < 1) throw ConfigError("test_samples must be >= 1");
    if (strongest_rho <= 0.0 || strongest_rho > 1.0) throw ConfigError("strongest_rho must lie in (0, 1]");
    for (const std::string& b : baselines) {
        if (b == "wmmse" || b == "wmmse-best" || b == "strongest") continue;
        if (b.rfind(kSharedPrefix, 0) == 0 && b.size() > kSharedPrefix.size()) continue;
        throw ConfigError("unknown baseline '" + b + "'");
    }
    if (bench.ks.empty()) throw ConfigError("bench.ks must not be empty");
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    nlohmann::json sweep = nlohmann::json::array();
    for (const SweepPoint& p : c.sweep) {
        nlohmann::json s{{"label", p.label}};
        if (p.num_pairs) s["num_pairs"] = *p.num_pairs;
        if (p.area_side) s["area_side"] = *p.area_side;
        if (p.snr_db) s["snr_db"] = *p.snr_db;
        sweep.push_back(std::move(s));
    }
    j = nlohmann::json{
        {"name", c.name},
        {"system", c.system},
        {"model", c.model},
        {"training",
         {{"samples", c.training.samples},
          {"epochs", c.training.epochs},
          {"batch_size", c.training.batch_size},
          {"learning_rate", c.training.learning_rate},
          {"final_learning_rate", c.training.final_learning_rate ? nlohmann::json(*c.training.final_learning_rate)
                                                                 : nlohmann::json(nullptr)},
          {"grad_chunks", c.training.grad_chunks},
          {"threads", c.training.threads}}},
        {"test_samples", c.test_samples},
        {"baselines", c.baselines},
        {"wmmse_iterations", c.wmmse_iterations},
        {"wmmse_restarts", c.wmmse_restarts},
        {"strongest_rho", c.strongest_rho},
        {"normalize_features", c.normalize_features},
        {"record_timing", c.record_timing},
        {"sweep", std::move(sweep)},
        {"bench",
         {{"ks", c.bench.ks},
          {"reps", c.bench.reps},
          {"wmmse_iterations", c.bench.wmmse_iterations},
          {"fixed_density", c.bench.fixed_density}}},
        {"seed", c.seed},
        {"out_dir", c.out_dir.string()},
    };
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    c.name = j.value("name", c.name);
    if (j.contains("system")) j.at("system").get_to(c.system);
    nlohmann::json model = j.value("model", nlohmann::json::object());
    if (!model.contains("num_antennas")) model["num_antennas"] = c.system.num_tx_antennas;
    if (!model.contains("pmax")) model["pmax"] = c.system.pmax;
    model.get_to(c.model);
    if (j.contains("training")) {
        const auto& t = j.at("training");
        c.training.samples = t.value("samples", c.training.samples);
        c.training.epochs = t.value("epochs", c.training.epochs);
        c.training.batch_size = t.value("batch_size", c.training.batch_size);
        c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
        if (t.contains("final_learning_rate") && !t.at("final_learning_rate").is_null()) {
            c.training.final_learning_rate = t.at("final_learning_rate").get<double>();
        }
        c.training.grad_chunks = t.value("grad_chunks", c.training.grad_chunks);
        c.training.threads = t.value("threads", c.training.threads);
        c.training.verbose = t.value("verbose", c.training.verbose);
    }
    c.test_samples = j.value("test_samples", c.test_samples);
    if (j.contains("baselines")) j.at("baselines").get_to(c.baselines);
    c.wmmse_iterations = j.value("wmmse_iterations", c.wmmse_iterations);
    c.wmmse_restarts = j.value("wmmse_restarts", c.wmmse_restarts);
    c.strongest_rho = j.value("strongest_rho", c.strongest_rho);
    c.normalize_features = j.value("normalize_features", c.normalize_features);
    c.record_timing = j.value("record_timing", c.record_timing);
    if (j.contains("sweep")) {
        for (const auto& s : j.at("sweep")) {
            SweepPoint p;
            p.label = s.at("label").get<std::string>();
            if (s.contains("num_pairs")) p.num_pairs = s.at("num_pairs").get<std::size_t>();
            if (s.contains("area_side")) p.area_side = s.at("area_side").get<double>();
            if (s.contains("snr_db")) p.snr_db = s.at("snr_db").get<double>();
            c.sweep.push_back(std::move(p));
        }
    }
    if (j.contains("bench")) {
        const auto& b = j.at("bench");
        if (b.contains("ks")) b.at("ks").get_to(c.bench.ks);
        c.bench.reps = b.value("reps", c.bench.reps);
        c.bench.wmmse_iterations = b.value("wmmse_iterations", c.bench.wmmse_iterations);
        c.bench.fixed_density = b.value("fixed_density", c.bench.fixed_density);
    }
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir.string());
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    ExperimentConfig c = j.get<ExperimentConfig>();
    c.validate();
    return c;
}

std::string rows_to_csv(std::span<const ResultRow> rows, bool with_delta) {
    std::ostringstream out;
    out << kResultCsvHeader << (with_delta ? ",delta" : "") << '\n';
    out << std::setprecision(10);
    for (const ResultRow& r : rows) {
        out << r.method << ',' << r.num_pairs << ',' << r.setting << ',' << r.mean_objective << ','
            << r.ratio_to_wmmse << ',' << r.time_mean_s << ',' << r.time_std_s;
        if (with_delta) out << ',' << r.delta;
        out << '\n';
    }
    return out.str();
}

nlohmann::json rows_to_json(std::span<const ResultRow> rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const ResultRow& r : rows) {
        out.push_back({{"method", r.method},
                       {"K", r.num_pairs},
                       {"setting", r.setting},
                       {"mean_objective", r.mean_objective},
                       {"ratio_to_wmmse", r.ratio_to_wmmse},
                       {"time_mean_s", r.time_mean_s},
                       {"time_std_s", r.time_std_s},
                       {"delta", r.delta}});
    }
    return out;
}

ExperimentSeeds::ExperimentSeeds(std::uint64_t master)
    : train_data(derive_seed(master, 1)),
      test_data(derive_seed(master, 2)),
      init(derive_seed(master, 3)),
      shuffle(derive_seed(master, 4)),
      baseline(derive_seed(master, 5)) {}

GraphOptions graph_options(const ExperimentConfig& cfg, const SystemConfig& sys) {
    GraphOptions o;
    if (cfg.normalize_features) o.channel_scale = 1.0 / std::sqrt(sys.noise_power());
    return o;
}

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

MethodEval evaluate_wcgcn(const WcgcnParams& p, std::span<const TrainingSample> test, bool timing) {
    MethodEval e{"wcgcn", {}, {}};
    for (const TrainingSample& s : test) {
        const InferResult r = infer(p, s.graph);
        e.objectives.push_back(sinr_and_rates(s.channel, r.allocation).objective);
        e.times.push_back(timing ? r.wall_time_s : 0.0);
    }
    return e;
}

namespace {

// The allocation the network starts from: half power for sigmoid, MRT at
// full power for ball projection.
Allocation shared_init(const WcgcnConfig& model, const ChannelRealization& ch, double pmax) {
    const std::size_t k = ch.num_pairs();
    const std::size_t nt = ch.num_antennas();
    if (model.beta == Beta::sigmoid) return uniform_power_allocation(k, nt, pmax, 0.5);
    Allocation a(k, nt);
    for (std::size_t i = 0; i < k; ++i) {
        const std::complex<double>* h = ch.h(i, i);
        double norm = 0.0;
        for (std::size_t n = 0; n < nt; ++n) norm += std::norm(h[n]);
        norm = std::sqrt(norm);
        for (std::size_t n = 0; n < nt; ++n) {
            a.set(i, n, norm > 0.0 ? std::sqrt(pmax) * h[n] / norm : std::complex<double>{n == 0 ? std::sqrt(pmax) : 0.0, 0.0});
        }
    }
    return a;
}

}  // namespace

MethodEval evaluate_baseline(const ExperimentConfig& cfg, const std::string& method, std::span<const Instance> test,
                             bool timing) {
    const ExperimentSeeds seeds(cfg.seed);
    const double pmax = cfg.system.pmax;
    MethodEval e{method, {}, {}};
    std::size_t shared_iters = 0;
    if (method.rfind(kSharedPrefix, 0) == 0) shared_iters = std::stoul(method.substr(kSharedPrefix.size()));
    for (std::size_t i = 0; i < test.size(); ++i) {
        const ChannelRealization& ch = test[i].channel;
        Rng rng(derive_seed(seeds.baseline, i));
        const auto t0 = Clock::now();
        double obj = 0.0;
        if (method == "wmmse") {
            obj = wmmse_solve(ch, pmax, rng, {cfg.wmmse_iterations, false}).objective();
        } else if (method == "wmmse-best") {
            obj = best_of_restarts(ch, pmax, cfg.wmmse_restarts, cfg.wmmse_iterations, rng).objective();
        } else if (method == "strongest") {
            obj = sinr_and_rates(ch, strongest_baseline(ch, pmax, cfg.strongest_rho)).objective;
        } else if (shared_iters > 0) {
            obj = wmmse_solve(ch, pmax, shared_init(cfg.model, ch, pmax), {shared_iters, false}).objective();
        } else {
            throw ConfigError("unknown baseline '" + method + "'");
        }
        const double dt = seconds_since(t0);
        e.objectives.push_back(obj);
        e.times.push_back(timing ? dt : 0.0);
    }
    return e;
}

ResultRow summarize(const MethodEval& e, std::size_t num_pairs, const std::string& setting, double wmmse_mean) {
    ResultRow r;
    r.method = e.method;
    r.num_pairs = num_pairs;
    r.setting = setting;
    r.mean_objective = mean(e.objectives);
    r.ratio_to_wmmse = wmmse_mean > 0.0 ? r.mean_objective / wmmse_mean : 0.0;
    r.time_mean_s = mean(e.times);
    r.time_std_s = stddev(e.times);
    return r;
}

TrainedModel train_model(const ExperimentConfig& cfg, const std::vector<TrainingSample>* test, double wmmse_mean) {
    const ExperimentSeeds seeds(cfg.seed);
    const Dataset train_ds = make_dataset(cfg.system, cfg.training.samples, seeds.train_data);
    const std::vector<TrainingSample> data = make_samples(train_ds, graph_options(cfg, cfg.system));

    TrainedModel m;
    Rng init_rng(seeds.init);
    m.params = init_params(cfg.model, init_rng);

    TrainConfig tc;
    tc.epochs = cfg.training.epochs;
    tc.batch_size = cfg.training.batch_size;
    tc.adam.lr = cfg.training.learning_rate;
    tc.lr_final = cfg.training.final_learning_rate;
    tc.grad_chunks = cfg.training.grad_chunks;
    tc.threads = cfg.training.threads;
    WcgcnParams* live = &m.params;
    const bool verbose = cfg.training.verbose;
    const std::size_t epochs = cfg.training.epochs;
    tc.on_epoch = [&, live, verbose, epochs](std::size_t epoch, double loss) {
        if (test != nullptr && wmmse_mean > 0.0) {
            const MethodEval e = evaluate_wcgcn(*live, *test, false);
            m.epoch_test_ratio.push_back(mean(e.objectives) / wmmse_mean);
        }
        if (verbose) {
            std::clog << "epoch " << epoch + 1 << "/" << epochs << "  loss " << loss;
            if (!m.epoch_test_ratio.empty()) std::clog << "  test ratio " << m.epoch_test_ratio.back();
            std::clog << std::endl;
        }
    };
    Rng shuffle(seeds.shuffle);
    m.curve = train(m.params, data, tc, shuffle);
    return m;
}

std::string training_curve_csv(const TrainedModel& m) {
    std::ostringstream out;
    out << "epoch,mean_loss,test_ratio\n" << std::setprecision(10);
    for (std::size_t e = 0; e < m.curve.epoch_loss.size(); ++e) {
        out << e + 1 << ',' << m.curve.epoch_loss[e] << ',';
        if (e < m.epoch_test_ratio.size()) out << m.epoch_test_ratio[e];
        out << '\n';
    }
    return out.str();
}

namespace {

std::string setting_label(const SystemConfig& s) {
    std::ostringstream out;
    out << to_string(s.channel_model);
    if (s.channel_model == ChannelModel::rayleigh_iid) {
        out << '-' << s.snr_db << "dB";
    } else {
        out << '-' << s.area_side << 'm';
    }
    if (s.num_tx_antennas > 1) out << "-nt" << s.num_tx_antennas;
    return out.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const WcgcnParams* pretrained, bool write) {
    cfg.validate();
    const ExperimentSeeds seeds(cfg.seed);
    const Dataset test_ds = make_dataset(cfg.system, cfg.test_samples, seeds.test_data);
    const std::vector<TrainingSample> test = make_samples(test_ds, graph_options(cfg, cfg.system));

    const MethodEval reference = evaluate_baseline(cfg, "wmmse", test_ds.instances, cfg.record_timing);
    const double wmmse_mean = mean(reference.objectives);

    ExperimentResult result;
    if (pretrained != nullptr) {
        if (pretrained->config.num_antennas != cfg.system.num_tx_antennas) {
            throw ConfigError("checkpoint was trained for Nt=" + std::to_string(pretrained->config.num_antennas) +
                              " but the scenario has Nt=" + std::to_string(cfg.system.num_tx_antennas));
        }
        result.model.params = *pretrained;
    } else {
        result.model = train_model(cfg, &test, wmmse_mean);
    }

    const std::string label = setting_label(cfg.system);
    const std::size_t k = cfg.system.num_pairs;
    result.rows.push_back(summarize(evaluate_wcgcn(result.model.params, test, cfg.record_timing), k, label, wmmse_mean));
    for (const std::string& b : cfg.baselines) {
        const MethodEval e = b == "wmmse" ? reference : evaluate_baseline(cfg, b, test_ds.instances, cfg.record_timing);
        result.rows.push_back(summarize(e, k, label, wmmse_mean));
    }

    if (write) {
        std::filesystem::create_directories(cfg.out_dir);
        write_text(cfg.out_dir / "results.csv", rows_to_csv(result.rows));
        nlohmann::json summary{{"config", cfg}, {"rows", rows_to_json(result.rows)}};
        if (pretrained == nullptr) {
            summary["training"] = {{"epoch_loss", result.model.curve.epoch_loss},
                                   {"epoch_test_ratio", result.model.epoch_test_ratio},
                                   {"steps", result.model.curve.steps}};
            write_text(cfg.out_dir / "training_curve.csv", training_curve_csv(result.model));
            save_checkpoint(result.model.params, cfg.out_dir / "model.ckpt");
        }
        write_text(cfg.out_dir / "summary.json", summary.dump(2) + "\n");
    }
    return result;
}

std::vector<ResultRow> generalization_sweep(const ExperimentConfig& cfg, const WcgcnParams& params) {
    cfg.validate();
    if (params.config.num_antennas != cfg.system.num_tx_antennas) {
        throw ConfigError("checkpoint was trained for Nt=" + std::to_string(params.config.num_antennas) +
                          " but the sweep scenario has Nt=" + std::to_string(cfg.system.num_tx_antennas));
    }
    std::vector<SweepPoint> points{{"train-setting", {}, {}, {}}};
    points.insert(points.end(), cfg.sweep.begin(), cfg.sweep.end());

    const ExperimentSeeds seeds(cfg.seed);
    std::vector<ResultRow> rows;
    for (const SweepPoint& pt : points) {
        ExperimentConfig point_cfg = cfg;
        SystemConfig& sys = point_cfg.system;
        if (pt.num_pairs) sys.num_pairs = *pt.num_pairs;
        if (pt.area_side) sys.area_side = *pt.area_side;
        if (pt.snr_db) sys.snr_db = *pt.snr_db;
        sys.validate();
        const Dataset ds = make_dataset(sys, cfg.test_samples, seeds.test_data);
        const std::vector<TrainingSample> test = make_samples(ds, graph_options(cfg, sys));
        const double wmmse_mean = mean(evaluate_baseline(point_cfg, "wmmse", ds.instances, false).objectives);
        ResultRow row = summarize(evaluate_wcgcn(params, test, cfg.record_timing), sys.num_pairs,
                                  pt.label + ":" + setting_label(sys), wmmse_mean);
        if (!rows.empty()) row.delta = row.ratio_to_wmmse - rows.front().ratio_to_wmmse;
        rows.push_back(row);
    }
    return rows;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ShapeError("loglog_slope: need two or more matching points");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const double mx = mean(lx);
    const double my = mean(ly);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

namespace {

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

TimingReport benchmark_timing(const ExperimentConfig& cfg, const WcgcnParams& params) {
    cfg.validate();
    const std::size_t reps = std::max<std::size_t>(1, cfg.bench.reps);
    const ExperimentSeeds seeds(cfg.seed);
    TimingReport rep;
    rep.high_variance = reps < 20;
    std::vector<double> ks, t_gnn, t_wmmse;
    for (std::size_t idx = 0; idx < cfg.bench.ks.size(); ++idx) {
        SystemConfig sys = cfg.system;
        const std::size_t k = cfg.bench.ks[idx];
        sys.num_pairs = k;
        if (cfg.bench.fixed_density) {
            sys.area_side = cfg.system.area_side *
                            std::sqrt(static_cast<double>(k) / static_cast<double>(cfg.bench.ks.front()));
        }
        const Dataset ds = make_dataset(sys, reps, derive_seed(seeds.test_data, 1000 + idx));
        const std::vector<TrainingSample> samples = make_samples(ds, graph_options(cfg, sys));

        // Untimed warm-up so the first rep does not pay for cold caches.
        (void)infer(params, samples.front().graph);
        {
            Rng rng(derive_seed(seeds.baseline, reps));
            (void)wmmse_solve(ds.instances.front().channel, sys.pmax, rng, {cfg.bench.wmmse_iterations, false});
        }

        std::vector<double> gnn, wm;
        std::size_t edges = 0;
        for (std::size_t r = 0; r < reps; ++r) {
            edges += samples[r].graph.num_edges();
            gnn.push_back(infer(params, samples[r].graph).wall_time_s);
            Rng rng(derive_seed(seeds.baseline, r));
            const auto t0 = Clock::now();
            (void)wmmse_solve(ds.instances[r].channel, sys.pmax, rng, {cfg.bench.wmmse_iterations, false});
            wm.push_back(seconds_since(t0));
        }
        const double mg = median(gnn);
        const double mw = median(wm);
        rep.rows.push_back({"wcgcn", k, edges / reps, reps, mg});
        rep.rows.push_back({"wmmse", k, edges / reps, reps, mw});
        ks.push_back(static_cast<double>(k));
        t_gnn.push_back(mg);
        t_wmmse.push_back(mw);
        rep.wmmse_over_wcgcn.push_back(mw / mg);
    }
    if (ks.size() >= 2) {
        rep.wcgcn_slope = loglog_slope(ks, t_gnn);
        rep.wmmse_slope = loglog_slope(ks, t_wmmse);
    }
    return rep;
}

std::string timing_csv(const TimingReport& r) {
    std::ostringstream out;
    out << "method,K,mean_edges,reps,median_s\n" << std::setprecision(10);
    for (const TimingRow& t : r.rows) {
        out << t.method << ',' << t.num_pairs << ',' << t.num_edges << ',' << t.reps << ',' << t.median_s << '\n';
    }
    return out.str();
}

nlohmann::json timing_json(const TimingReport& r) {
    return {{"wcgcn_slope", r.wcgcn_slope},
            {"wmmse_slope", r.wmmse_slope},
            {"wmmse_over_wcgcn", r.wmmse_over_wcgcn},
            {"high_variance", r.high_variance}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace wcgnn
