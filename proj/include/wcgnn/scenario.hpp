#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wcgnn/rng.hpp"

namespace wcgnn {

enum class ChannelModel { rayleigh_iid, pathloss_rayleigh };

std::string to_string(ChannelModel m);
ChannelModel channel_model_from_string(const std::string& s);

// Large-scale propagation constants for the path-loss model. Gains are
// expressed relative to the transmit power, so pmax stays 1 in linear units.
struct PathLossParams {
    double intercept_db = 148.1;   // L_dB(d) = intercept + slope * log10(d / 1 km)
    double slope_db = 37.6;
    double shadowing_db = 8.0;     // std-dev of log-normal shadowing
    double tx_power_dbm = 10.0;    // power that pmax = 1 corresponds to
    double noise_dbm = -100.0;
    double min_distance_m = 1.0;   // distances are clamped below this
};

struct SystemConfig {
    std::size_t num_pairs = 10;
    std::size_t num_tx_antennas = 1;
    double area_side = 1000.0;
    double dmin = 2.0;
    double dmax = 65.0;
    double pmax = 1.0;
    double snr_db = 0.0;  // rayleigh_iid only: noise = pmax / 10^(snr/10)
    ChannelModel channel_model = ChannelModel::rayleigh_iid;
    double edge_threshold = std::numeric_limits<double>::infinity();
    bool weighted = false;  // false: w_k = 1 (sum rate), true: w_k ~ U[0,1]
    PathLossParams pathloss{};
    std::uint64_t rng_seed = 1;

    // Per-receiver noise power implied by the config.
    double noise_power() const;

    // Throws ConfigError when an invariant does not hold.
    void validate() const;
};

void to_json(nlohmann::json& j, const SystemConfig& c);
void from_json(const nlohmann::json& j, SystemConfig& c);

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

double distance(Point a, Point b);

struct Scenario {
    std::vector<Point> tx;
    std::vector<Point> rx;

    std::size_t size() const { return tx.size(); }
    bool operator==(const Scenario&) const = default;
};

/// Channel realization for K single-antenna receivers and Nt-antenna
/// transmitters. h(j, k) is the Nt-vector from transmitter j to receiver k;
/// the received amplitude of stream j at k is h(j, k)^H v_j.
class ChannelRealization {
public:
    ChannelRealization() = default;
    ChannelRealization(std::size_t num_pairs, std::size_t num_antennas);

    std::size_t num_pairs() const { return k_; }
    std::size_t num_antennas() const { return nt_; }

    std::complex<double>* h(std::size_t j, std::size_t k) { return &coeffs_[(j * k_ + k) * nt_]; }
    const std::complex<double>* h(std::size_t j, std::size_t k) const {
        return &coeffs_[(j * k_ + k) * nt_];
    }

    std::vector<std::complex<double>>& coefficients() { return coeffs_; }
    const std::vector<std::complex<double>>& coefficients() const { return coeffs_; }

    std::vector<double> weights;
    std::vector<double> noise;

    bool operator==(const ChannelRealization&) const = default;

private:
    std::size_t k_ = 0;
    std::size_t nt_ = 0;
    std::vector<std::complex<double>> coeffs_;
};

struct Instance {
    Scenario layout;
    ChannelRealization channel;

    std::size_t size() const { return layout.size(); }
    bool operator==(const Instance&) const = default;
};

struct Dataset {
    SystemConfig config;
    std::vector<Instance> instances;

    std::size_t size() const { return instances.size(); }
};

// Path loss in dB at distance d (meters), without shadowing.
double path_loss_db(const PathLossParams& p, double distance_m);

// Linear power gain 10^(-L_dB(d)/10).
double path_loss_gain(const PathLossParams& p, double distance_m);

Scenario generate_layout(const SystemConfig& cfg, Rng& rng);

ChannelRealization sample_channels(const SystemConfig& cfg, const Scenario& scen, Rng& rng);

// One full instance (layout, channel, weights, noise) from a single stream.
Instance sample_instance(const SystemConfig& cfg, Rng& rng);

// n instances; instance i draws from Rng(derive_seed(seed, i)).
Dataset make_dataset(const SystemConfig& cfg, std::size_t n_samples, std::uint64_t seed);

}  // namespace wcgnn
