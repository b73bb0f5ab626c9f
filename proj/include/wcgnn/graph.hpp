#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "wcgnn/scenario.hpp"

namespace wcgnn {

/// Bijection on node labels: node i of the input becomes node map[i].
class Permutation {
public:
    explicit Permutation(std::vector<std::size_t> map);  // throws ConfigError if not bijective

    static Permutation identity(std::size_t n);
    static Permutation random(std::size_t n, Rng& rng);

    std::size_t size() const { return map_.size(); }
    std::size_t operator()(std::size_t i) const { return map_[i]; }
    Permutation inverse() const;
    const std::vector<std::size_t>& map() const { return map_; }

private:
    std::vector<std::size_t> map_;
};

struct Edge {
    std::size_t src = 0;
    std::size_t dst = 0;
    auto operator<=>(const Edge&) const = default;
};

struct GraphOptions {
    // Multiplies every channel coefficient in the features (noise feature by
    // its square). 1/sqrt(noise) gives noise-normalized features.
    double channel_scale = 1.0;
};

/// Wireless channel graph: one node per transceiver pair, one directed edge
/// (j, i) per interference link from transmitter j to receiver i.
///
/// Node row k:  [re h_kk (Nt), im h_kk (Nt), w_k, sigma2_k]        (2Nt + 2)
/// Edge (j, i): [re h_ji (Nt), im h_ji (Nt), re h_ij (Nt), im h_ij (Nt)]  (4Nt)
///
/// Edges are kept sorted by (dst, src). Duplicate edges are allowed so that
/// aggregation robustness can be exercised; build_graph never emits them.
struct WirelessGraph {
    std::size_t num_nodes = 0;
    std::size_t num_antennas = 1;
    std::vector<double> node_features;
    std::vector<Edge> edges;
    std::vector<double> edge_features;

    std::size_t node_dim() const { return 2 * num_antennas + 2; }
    std::size_t edge_dim() const { return 4 * num_antennas; }
    std::size_t num_edges() const { return edges.size(); }

    std::span<const double> node_row(std::size_t k) const {
        return {node_features.data() + k * node_dim(), node_dim()};
    }
    std::span<const double> edge_row(std::size_t e) const {
        return {edge_features.data() + e * edge_dim(), edge_dim()};
    }

    // Feature vector of the first (j, i) edge, if present.
    std::optional<std::span<const double>> edge_feature(std::size_t j, std::size_t i) const;

    // Appends an edge and re-sorts. Rejects self-edges.
    void add_edge(Edge e, std::span<const double> feature);

    // Stable sort of edges (and their features) by (dst, src).
    void canonicalize();

    // Throws ShapeError/ConfigError when an invariant is broken.
    void validate() const;

    bool operator==(const WirelessGraph&) const = default;
};

nlohmann::json graph_to_json(const WirelessGraph& g);

WirelessGraph build_graph(const SystemConfig& cfg, const Instance& inst, const GraphOptions& opts = {});

WirelessGraph permute(const WirelessGraph& g, const Permutation& pi);
Scenario permute(const Scenario& s, const Permutation& pi);
ChannelRealization permute(const ChannelRealization& ch, const Permutation& pi);
Instance permute(const Instance& inst, const Permutation& pi);

/// Per-node optimization variable: beamformer v_k stored as
/// [re v_k (Nt), im v_k (Nt)]. Power control (Nt = 1) stores sqrt(p).
struct Allocation {
    std::size_t num_nodes = 0;
    std::size_t num_antennas = 1;
    std::vector<double> values;

    Allocation() = default;
    Allocation(std::size_t k, std::size_t nt) : num_nodes(k), num_antennas(nt), values(k * 2 * nt, 0.0) {}

    std::size_t row_width() const { return 2 * num_antennas; }
    std::complex<double> v(std::size_t k, std::size_t n) const {
        return {values[k * row_width() + n], values[k * row_width() + num_antennas + n]};
    }
    void set(std::size_t k, std::size_t n, std::complex<double> c) {
        values[k * row_width() + n] = c.real();
        values[k * row_width() + num_antennas + n] = c.imag();
    }
    double power(std::size_t k) const;

    bool operator==(const Allocation&) const = default;
};

Allocation permute_alloc(const Allocation& a, const Permutation& pi);

struct RateReport {
    std::vector<double> sinr;
    std::vector<double> rates;  // log2(1 + sinr), unweighted
    double objective = 0.0;     // sum_k w_k rates_k
};

/// SINR and weighted sum rate on the full channel.
RateReport sinr_and_rates(const ChannelRealization& ch, const Allocation& alloc);

// Same, additionally checking that the graph matches the allocation. The
// objective always uses the full channel, never the (possibly thresholded)
// graph.
RateReport sinr_and_rates(const WirelessGraph& g, const Allocation& alloc, const ChannelRealization& ch);

inline constexpr double kFeasibilityTolerance = 1e-9;

bool check_feasible(const Allocation& alloc, double pmax);

}  // namespace wcgnn
