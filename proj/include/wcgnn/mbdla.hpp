#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "wcgnn/graph.hpp"
#include "wcgnn/scenario.hpp"

namespace wcgnn {

using NodeVec = std::vector<double>;

/// The four functions of one synchronous round:
///   payload_j   = broadcast(x_j)                         (h1)
///   m_{j,i}     = message(payload_j, e_{j,i})            (h2, per in-edge of i)
///   agg_i       = aggregate({m_{j,i} : j in N(i)})       (g1, must ignore order)
///   x_i'        = update(x_i, agg_i)                     (g2)
struct MbDlaRound {
    std::function<NodeVec(std::span<const double> state)> broadcast;
    std::function<NodeVec(std::span<const double> payload, std::span<const double> edge)> message;
    std::function<NodeVec(std::span<const NodeVec> messages)> aggregate;
    std::function<NodeVec(std::span<const double> state, std::span<const double> aggregate)> update;
};

struct MbDlaSpec {
    std::size_t state_width = 0;
    std::vector<MbDlaRound> rounds;  // executed in order; T = rounds.size()
};

struct MbDlaOptions {
    // Deliver each node's messages in a seeded random order instead of edge
    // order. A valid spec produces identical results either way.
    std::optional<std::uint64_t> shuffle_seed;
    bool record_trace = false;
};

struct MbDlaResult {
    std::vector<NodeVec> states;
    std::vector<std::vector<NodeVec>> trace;  // states after each round, when recorded
};

// Synchronous rounds: all nodes broadcast from the previous states, then
// all nodes update. Throws ShapeError on width mismatches.
MbDlaResult run_mbdla(const MbDlaSpec& spec, const WirelessGraph& g, std::vector<NodeVec> init,
                      const MbDlaOptions& opts = {});

nlohmann::json trace_to_json(const MbDlaResult& r);

// Elementwise sum of the messages taken in lexicographic order, so the
// result is bit-identical for every ordering of the same multiset.
NodeVec canonical_sum(std::span<const NodeVec> messages);

/// WMMSE written as an MB-DLA over the channel graph. Node state layout:
///   [re u, im u, W, re v (Nt), im v (Nt), w, sigma2, re h_kk (Nt), im h_kk (Nt)]
/// Odd rounds update (u, W) from the interference power sum; even rounds
/// update v from the summed transmit-side covariance. `iterations` WMMSE
/// iterations become 2 * iterations rounds.
MbDlaSpec wmmse_mbdla_spec(std::size_t num_antennas, double pmax, std::size_t iterations);

std::size_t wmmse_state_width(std::size_t num_antennas);

// Initial states from the graph's node features (built with channel_scale 1)
// and initial beamformers.
std::vector<NodeVec> wmmse_initial_states(const WirelessGraph& g, const Allocation& init);

Allocation beamformers_from_states(std::span<const NodeVec> states, std::size_t num_antennas);

// WMMSE using only the channels carried by g's edges ("local CSI"). With a
// complete graph this is ordinary full-CSI WMMSE.
Allocation wmmse_via_mbdla(const WirelessGraph& g, const Allocation& init, std::size_t iterations, double pmax,
                           const MbDlaOptions& opts = {});

struct EquivalenceRow {
    std::size_t iterations = 0;
    std::size_t instances = 0;
    double max_abs_dv = 0.0;
    double max_abs_dobjective = 0.0;
};

// Runs wmmse_solve and the MB-DLA form from the same random initialization
// on each instance (complete graph) and reports the largest deviations.
std::vector<EquivalenceRow> equivalence_report(const SystemConfig& cfg, std::span<const Instance> instances,
                                               std::span<const std::size_t> iteration_counts, std::uint64_t seed);

}  // namespace wcgnn
