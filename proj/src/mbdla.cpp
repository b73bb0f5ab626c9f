#include "wcgnn/mbdla.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "wcgnn/error.hpp"
#include "wcgnn/rng.hpp"
#include "wcgnn/wmmse.hpp"

namespace wcgnn {

MbDlaResult run_mbdla(const MbDlaSpec& spec, const WirelessGraph& g, std::vector<NodeVec> init,
                      const MbDlaOptions& opts) {
    if (spec.rounds.empty()) throw ConfigError("run_mbdla: spec has no rounds");
    if (init.size() != g.num_nodes) throw ShapeError("run_mbdla: one initial state per node required");
    for (const NodeVec& s : init) {
        if (s.size() != spec.state_width) throw ShapeError("run_mbdla: initial state width mismatch");
    }
    g.validate();

    // In-edge lists per node, in edge order.
    std::vector<std::vector<std::size_t>> in_edges(g.num_nodes);
    for (std::size_t e = 0; e < g.num_edges(); ++e) in_edges[g.edges[e].dst].push_back(e);
    if (opts.shuffle_seed) {
        Rng rng(*opts.shuffle_seed);
        for (auto& list : in_edges) {
            for (std::size_t i = list.size(); i > 1; --i) std::swap(list[i - 1], list[rng.below(i)]);
        }
    }

    MbDlaResult out;
    std::vector<NodeVec> states = std::move(init);
    std::vector<NodeVec> payload(g.num_nodes);
    std::vector<NodeVec> inbox;
    for (const MbDlaRound& round : spec.rounds) {
        for (std::size_t k = 0; k < g.num_nodes; ++k) payload[k] = round.broadcast(states[k]);
        std::vector<NodeVec> next(g.num_nodes);
        for (std::size_t i = 0; i < g.num_nodes; ++i) {
            inbox.clear();
            for (std::size_t e : in_edges[i]) inbox.push_back(round.message(payload[g.edges[e].src], g.edge_row(e)));
            const NodeVec agg = round.aggregate(inbox);
            next[i] = round.update(states[i], agg);
            if (next[i].size() != spec.state_width) throw ShapeError("run_mbdla: update changed the state width");
        }
        states = std::move(next);
        if (opts.record_trace) out.trace.push_back(states);
    }
    out.states = std::move(states);
    return out;
}

nlohmann::json trace_to_json(const MbDlaResult& r) {
    nlohmann::json rounds = nlohmann::json::array();
    for (std::size_t t = 0; t < r.trace.size(); ++t) rounds.push_back({{"round", t + 1}, {"states", r.trace[t]}});
    return {{"final_states", r.states}, {"rounds", std::move(rounds)}};
}

NodeVec canonical_sum(std::span<const NodeVec> messages) {
    if (messages.empty()) return {};
    std::vector<const NodeVec*> sorted;
    sorted.reserve(messages.size());
    for (const NodeVec& m : messages) sorted.push_back(&m);
    std::sort(sorted.begin(), sorted.end(), [](const NodeVec* a, const NodeVec* b) { return *a < *b; });
    NodeVec total(sorted.front()->size(), 0.0);
    for (const NodeVec* m : sorted) {
        if (m->size() != total.size()) throw ShapeError("canonical_sum: message widths differ");
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += (*m)[i];
    }
    return total;
}

namespace {

using cd = std::complex<double>;

// Offsets into the WMMSE node state.
struct Layout {
    std::size_t nt;
    std::size_t u_re() const { return 0; }
    std::size_t u_im() const { return 1; }
    std::size_t mse_w() const { return 2; }
    std::size_t v() const { return 3; }
    std::size_t weight() const { return 3 + 2 * nt; }
    std::size_t noise() const { return 4 + 2 * nt; }
    std::size_t h() const { return 5 + 2 * nt; }
    std::size_t width() const { return 5 + 4 * nt; }
};

cd complex_at(std::span<const double> s, std::size_t base, std::size_t nt, std::size_t n) {
    return {s[base + n], s[base + nt + n]};
}

// h^H v for two complex Nt-vectors stored as [re (Nt), im (Nt)].
cd inner(std::span<const double> s_h, std::size_t h_at, std::span<const double> s_v, std::size_t v_at, std::size_t nt) {
    cd acc{0.0, 0.0};
    for (std::size_t n = 0; n < nt; ++n) acc += std::conj(complex_at(s_h, h_at, nt, n)) * complex_at(s_v, v_at, nt, n);
    return acc;
}

NodeVec identity_broadcast(std::span<const double> s) { return {s.begin(), s.end()}; }

MbDlaRound receiver_round(Layout lay) {
    const std::size_t nt = lay.nt;
    MbDlaRound r;
    r.broadcast = identity_broadcast;
    // Interference power |h_ji^H v_j|^2 seen at receiver i; h_ji leads the edge feature.
    r.message = [lay, nt](std::span<const double> payload, std::span<const double> edge) {
        const cd amp = inner(edge, 0, payload, lay.v(), nt);
        return NodeVec{std::norm(amp)};
    };
    r.aggregate = [](std::span<const NodeVec> msgs) {
        NodeVec s = canonical_sum(msgs);
        return s.empty() ? NodeVec{0.0} : s;
    };
    r.update = [lay, nt](std::span<const double> x, std::span<const double> agg) {
        NodeVec out(x.begin(), x.end());
        const cd a = inner(x, lay.h(), x, lay.v(), nt);
        const double total = agg[0] + std::norm(a) + x[lay.noise()];
        const cd u = a / total;
        out[lay.u_re()] = u.real();
        out[lay.u_im()] = u.imag();
        out[lay.mse_w()] = 1.0 / (1.0 - (std::conj(u) * a).real());
        return out;
    };
    return r;
}

MbDlaRound transmitter_round(Layout lay, double pmax) {
    const std::size_t nt = lay.nt;
    // Hermitian Nt x Nt matrix stored as re (row-major) then im.
    auto outer = [nt](double coef, std::span<const double> s, std::size_t at) {
        NodeVec m(2 * nt * nt);
        for (std::size_t a = 0; a < nt; ++a) {
            for (std::size_t b = 0; b < nt; ++b) {
                const cd v = coef * complex_at(s, at, nt, a) * std::conj(complex_at(s, at, nt, b));
                m[a * nt + b] = v.real();
                m[nt * nt + a * nt + b] = v.imag();
            }
        }
        return m;
    };
    auto coef_of = [lay](std::span<const double> x) {
        const cd u{x[lay.u_re()], x[lay.u_im()]};
        return x[lay.weight()] * x[lay.mse_w()] * std::norm(u);
    };

    MbDlaRound r;
    r.broadcast = identity_broadcast;
    // w_j W_j |u_j|^2 h_ij h_ij^H; h_ij is the second half of edge (j, i).
    r.message = [outer, coef_of, nt](std::span<const double> payload, std::span<const double> edge) {
        return outer(coef_of(payload), edge, 2 * nt);
    };
    r.aggregate = [nt](std::span<const NodeVec> msgs) {
        NodeVec s = canonical_sum(msgs);
        return s.empty() ? NodeVec(2 * nt * nt, 0.0) : s;
    };
    r.update = [lay, nt, pmax, outer, coef_of](std::span<const double> x, std::span<const double> agg) {
        const NodeVec own = outer(coef_of(x), x, lay.h());
        Eigen::MatrixXcd m(nt, nt);
        for (std::size_t a = 0; a < nt; ++a) {
            for (std::size_t b = 0; b < nt; ++b) {
                const std::size_t re = a * nt + b;
                const std::size_t im = nt * nt + a * nt + b;
                m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = cd{agg[re] + own[re], agg[im] + own[im]};
            }
        }
        const cd u{x[lay.u_re()], x[lay.u_im()]};
        const cd scale = x[lay.weight()] * x[lay.mse_w()] * u;
        Eigen::VectorXcd b(nt);
        for (std::size_t n = 0; n < nt; ++n) b(static_cast<Eigen::Index>(n)) = scale * complex_at(x, lay.h(), nt, n);
        const MuSolution sol = bisect_mu(m, b, pmax);
        NodeVec out(x.begin(), x.end());
        for (std::size_t n = 0; n < nt; ++n) {
            out[lay.v() + n] = sol.v(static_cast<Eigen::Index>(n)).real();
            out[lay.v() + nt + n] = sol.v(static_cast<Eigen::Index>(n)).imag();
        }
        return out;
    };
    return r;
}

}  // namespace

std::size_t wmmse_state_width(std::size_t num_antennas) { return Layout{num_antennas}.width(); }

MbDlaSpec wmmse_mbdla_spec(std::size_t num_antennas, double pmax, std::size_t iterations) {
    if (num_antennas < 1) throw ConfigError("wmmse_mbdla_spec: num_antennas must be >= 1");
    if (iterations < 1) throw ConfigError("wmmse_mbdla_spec: iterations must be >= 1");
    const Layout lay{num_antennas};
    MbDlaSpec spec;
    spec.state_width = lay.width();
    const MbDlaRound odd = receiver_round(lay);
    const MbDlaRound even = transmitter_round(lay, pmax);
    for (std::size_t t = 0; t < iterations; ++t) {
        spec.rounds.push_back(odd);
        spec.rounds.push_back(even);
    }
    return spec;
}

std::vector<NodeVec> wmmse_initial_states(const WirelessGraph& g, const Allocation& init) {
    const std::size_t nt = g.num_antennas;
    if (init.num_nodes != g.num_nodes || init.num_antennas != nt) {
        throw ShapeError("wmmse_initial_states: initialization does not match the graph");
    }
    const Layout lay{nt};
    std::vector<NodeVec> states(g.num_nodes, NodeVec(lay.width(), 0.0));
    for (std::size_t k = 0; k < g.num_nodes; ++k) {
        NodeVec& s = states[k];
        const auto row = g.node_row(k);
        std::copy_n(init.values.begin() + static_cast<std::ptrdiff_t>(k * 2 * nt), 2 * nt,
                    s.begin() + static_cast<std::ptrdiff_t>(lay.v()));
        s[lay.weight()] = row[2 * nt];
        s[lay.noise()] = row[2 * nt + 1];
        std::copy_n(row.begin(), 2 * nt, s.begin() + static_cast<std::ptrdiff_t>(lay.h()));
    }
    return states;
}

Allocation beamformers_from_states(std::span<const NodeVec> states, std::size_t num_antennas) {
    const Layout lay{num_antennas};
    Allocation a(states.size(), num_antennas);
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (states[k].size() != lay.width()) throw ShapeError("beamformers_from_states: state width mismatch");
        std::copy_n(states[k].begin() + static_cast<std::ptrdiff_t>(lay.v()), 2 * num_antennas,
                    a.values.begin() + static_cast<std::ptrdiff_t>(k * 2 * num_antennas));
    }
    return a;
}

Allocation wmmse_via_mbdla(const WirelessGraph& g, const Allocation& init, std::size_t iterations, double pmax,
                           const MbDlaOptions& opts) {
    const MbDlaSpec spec = wmmse_mbdla_spec(g.num_antennas, pmax, iterations);
    const MbDlaResult r = run_mbdla(spec, g, wmmse_initial_states(g, init), opts);
    return beamformers_from_states(r.states, g.num_antennas);
}

std::vector<EquivalenceRow> equivalence_report(const SystemConfig& cfg, std::span<const Instance> instances,
                                               std::span<const std::size_t> iteration_counts, std::uint64_t seed) {
    SystemConfig full = cfg;
    full.edge_threshold = std::numeric_limits<double>::infinity();
    std::vector<EquivalenceRow> rows;
    for (std::size_t iters : iteration_counts) {
        EquivalenceRow row;
        row.iterations = iters;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const Instance& inst = instances[i];
            Rng rng(derive_seed(seed, i));
            const Allocation init =
                random_allocation(inst.size(), inst.channel.num_antennas(), cfg.pmax, rng);
            const SolverReport direct = wmmse_solve(inst.channel, cfg.pmax, init, {iters, false});
            const WirelessGraph g = build_graph(full, inst);
            const Allocation dla = wmmse_via_mbdla(g, init, iters, cfg.pmax);
            for (std::size_t n = 0; n < dla.values.size(); ++n) {
                row.max_abs_dv = std::max(row.max_abs_dv, std::abs(dla.values[n] - direct.allocation.values[n]));
            }
            const double obj = sinr_and_rates(inst.channel, dla).objective;
            row.max_abs_dobjective = std::max(row.max_abs_dobjective, std::abs(obj - direct.objective()));
            ++row.instances;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace wcgnn
