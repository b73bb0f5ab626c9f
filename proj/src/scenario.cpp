#include "wcgnn/scenario.hpp"

#include <cmath>
#include <sstream>

#include "wcgnn/error.hpp"

namespace wcgnn {

std::string to_string(ChannelModel m) {
    switch (m) {
        case ChannelModel::rayleigh_iid: return "rayleigh-iid";
        case ChannelModel::pathloss_rayleigh: return "pathloss-rayleigh";
    }
    return "unknown";
}

ChannelModel channel_model_from_string(const std::string& s) {
    if (s == "rayleigh-iid") return ChannelModel::rayleigh_iid;
    if (s == "pathloss-rayleigh") return ChannelModel::pathloss_rayleigh;
    throw ConfigError("unknown channel model '" + s + "'");
}

double SystemConfig::noise_power() const {
    if (channel_model == ChannelModel::rayleigh_iid) {
        return pmax * std::pow(10.0, -snr_db / 10.0);
    }
    return pmax * std::pow(10.0, (pathloss.noise_dbm - pathloss.tx_power_dbm) / 10.0);
}

void SystemConfig::validate() const {
    std::ostringstream err;
    if (num_pairs < 1) err << "num_pairs must be >= 1; ";
    if (num_tx_antennas < 1) err << "num_tx_antennas must be >= 1; ";
    if (!(area_side > 0.0)) err << "area_side must be > 0; ";
    if (!(dmin >= 0.0 && dmin <= dmax)) err << "need 0 <= dmin <= dmax; ";
    if (!(dmax <= area_side)) err << "need dmax <= area_side; ";
    if (!(pmax > 0.0)) err << "pmax must be > 0; ";
    if (!(edge_threshold >= 0.0)) err << "edge_threshold must be >= 0; ";
    if (!std::isfinite(snr_db)) err << "snr_db must be finite; ";
    const double noise = noise_power();
    if (!(noise > 0.0) || !std::isfinite(noise)) err << "noise power must be positive and finite; ";
    // No receiver position inside the square can be farther than the diagonal.
    if (dmin > area_side * std::sqrt(2.0)) err << "annulus [dmin, dmax] does not intersect the area; ";
    const std::string msg = err.str();
    if (!msg.empty()) throw ConfigError("invalid SystemConfig: " + msg.substr(0, msg.size() - 2));
}

void to_json(nlohmann::json& j, const SystemConfig& c) {
    j = nlohmann::json{
        {"num_pairs", c.num_pairs},
        {"num_tx_antennas", c.num_tx_antennas},
        {"area_side", c.area_side},
        {"dmin", c.dmin},
        {"dmax", c.dmax},
        {"pmax", c.pmax},
        {"snr_db", c.snr_db},
        {"channel_model", to_string(c.channel_model)},
        {"edge_threshold", std::isinf(c.edge_threshold) ? nlohmann::json("inf")
                                                          : nlohmann::json(c.edge_threshold)},
        {"weighted", c.weighted},
        {"pathloss",
         {{"intercept_db", c.pathloss.intercept_db},
          {"slope_db", c.pathloss.slope_db},
          {"shadowing_db", c.pathloss.shadowing_db},
          {"tx_power_dbm", c.pathloss.tx_power_dbm},
          {"noise_dbm", c.pathloss.noise_dbm},
          {"min_distance_m", c.pathloss.min_distance_m}}},
        {"rng_seed", c.rng_seed},
    };
}

void from_json(const nlohmann::json& j, SystemConfig& c) {
    c = SystemConfig{};
    if (j.contains("num_pairs")) j.at("num_pairs").get_to(c.num_pairs);
    if (j.contains("num_tx_antennas")) j.at("num_tx_antennas").get_to(c.num_tx_antennas);
    if (j.contains("area_side")) j.at("area_side").get_to(c.area_side);
    if (j.contains("dmin")) j.at("dmin").get_to(c.dmin);
    if (j.contains("dmax")) j.at("dmax").get_to(c.dmax);
    if (j.contains("pmax")) j.at("pmax").get_to(c.pmax);
    if (j.contains("snr_db")) j.at("snr_db").get_to(c.snr_db);
    if (j.contains("channel_model")) {
        c.channel_model = channel_model_from_string(j.at("channel_model").get<std::string>());
    }
    if (j.contains("edge_threshold")) {
        const auto& d = j.at("edge_threshold");
        if (d.is_string()) {
            if (d.get<std::string>() != "inf") throw ConfigError("edge_threshold must be a number or \"inf\"");
            c.edge_threshold = std::numeric_limits<double>::infinity();
        } else {
            d.get_to(c.edge_threshold);
        }
    }
    if (j.contains("weighted")) j.at("weighted").get_to(c.weighted);
    if (j.contains("pathloss")) {
        const auto& p = j.at("pathloss");
        c.pathloss.intercept_db = p.value("intercept_db", c.pathloss.intercept_db);
        c.pathloss.slope_db = p.value("slope_db", c.pathloss.slope_db);
        c.pathloss.shadowing_db = p.value("shadowing_db", c.pathloss.shadowing_db);
        c.pathloss.tx_power_dbm = p.value("tx_power_dbm", c.pathloss.tx_power_dbm);
        c.pathloss.noise_dbm = p.value("noise_dbm", c.pathloss.noise_dbm);
        c.pathloss.min_distance_m = p.value("min_distance_m", c.pathloss.min_distance_m);
    }
    if (j.contains("rng_seed")) j.at("rng_seed").get_to(c.rng_seed);
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

ChannelRealization::ChannelRealization(std::size_t num_pairs, std::size_t num_antennas)
    : weights(num_pairs, 1.0),
      noise(num_pairs, 1.0),
      k_(num_pairs),
      nt_(num_antennas),
      coeffs_(num_pairs * num_pairs * num_antennas) {}

double path_loss_db(const PathLossParams& p, double distance_m) {
    const double d = std::max(distance_m, p.min_distance_m);
    return p.intercept_db + p.slope_db * std::log10(d / 1000.0);
}

double path_loss_gain(const PathLossParams& p, double distance_m) {
    return std::pow(10.0, -path_loss_db(p, distance_m) / 10.0);
}

Scenario generate_layout(const SystemConfig& cfg, Rng& rng) {
    cfg.validate();
    constexpr int kMaxAttempts = 1000;
    const double side = cfg.area_side;
    const double r2_lo = cfg.dmin * cfg.dmin;
    const double r2_hi = cfg.dmax * cfg.dmax;

    Scenario s;
    s.tx.resize(cfg.num_pairs);
    s.rx.resize(cfg.num_pairs);
    for (std::size_t k = 0; k < cfg.num_pairs; ++k) {
        const Point t{rng.uniform(0.0, side), rng.uniform(0.0, side)};
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            // Radius density proportional to r: area-uniform over the annulus.
            const double r = std::sqrt(rng.uniform(r2_lo, r2_hi));
            const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const Point p{t.x + r * std::cos(theta), t.y + r * std::sin(theta)};
            if (p.x >= 0.0 && p.x <= side && p.y >= 0.0 && p.y <= side) {
                s.tx[k] = t;
                s.rx[k] = p;
                placed = true;
            }
        }
        if (!placed) {
            throw ConfigError("could not place receiver " + std::to_string(k) + " inside the area after " +
                              std::to_string(kMaxAttempts) + " attempts");
        }
    }
    return s;
}

ChannelRealization sample_channels(const SystemConfig& cfg, const Scenario& scen, Rng& rng) {
    cfg.validate();
    if (scen.size() != cfg.num_pairs || scen.rx.size() != cfg.num_pairs) {
        throw ConfigError("scenario size does not match num_pairs");
    }
    const std::size_t k = cfg.num_pairs;
    const std::size_t nt = cfg.num_tx_antennas;
    ChannelRealization ch(k, nt);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t r = 0; r < k; ++r) {
            double amplitude = 1.0;
            if (cfg.channel_model == ChannelModel::pathloss_rayleigh) {
                const double shadow_db = cfg.pathloss.shadowing_db * rng.normal();
                const double loss_db = path_loss_db(cfg.pathloss, distance(scen.tx[j], scen.rx[r])) + shadow_db;
                amplitude = std::sqrt(std::pow(10.0, -loss_db / 10.0));
            }
            std::complex<double>* h = ch.h(j, r);
            for (std::size_t n = 0; n < nt; ++n) h[n] = amplitude * rng.cnormal();
        }
    }
    const double noise = cfg.noise_power();
    for (std::size_t r = 0; r < k; ++r) {
        ch.noise[r] = noise;
        ch.weights[r] = cfg.weighted ? rng.uniform() : 1.0;
    }
    return ch;
}

Instance sample_instance(const SystemConfig& cfg, Rng& rng) {
    Instance inst;
    inst.layout = generate_layout(cfg, rng);
    inst.channel = sample_channels(cfg, inst.layout, rng);
    return inst;
}

Dataset make_dataset(const SystemConfig& cfg, std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw ConfigError("make_dataset: n_samples must be >= 1");
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.config.rng_seed = seed;
    ds.instances.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        Rng rng(derive_seed(seed, i));
        ds.instances.push_back(sample_instance(cfg, rng));
    }
    return ds;
}

}  // namespace wcgnn
