#include "wcgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wcgnn/error.hpp"

namespace wcgnn {

Permutation::Permutation(std::vector<std::size_t> map) : map_(std::move(map)) {
    std::vector<bool> seen(map_.size(), false);
    for (std::size_t v : map_) {
        if (v >= map_.size() || seen[v]) throw ConfigError("permutation is not a bijection");
        seen[v] = true;
    }
}

Permutation Permutation::identity(std::size_t n) {
    std::vector<std::size_t> m(n);
    std::iota(m.begin(), m.end(), 0);
    return Permutation(std::move(m));
}

Permutation Permutation::random(std::size_t n, Rng& rng) {
    std::vector<std::size_t> m(n);
    std::iota(m.begin(), m.end(), 0);
    // Fisher-Yates with the portable stream.
    for (std::size_t i = n; i > 1; --i) {
        std::swap(m[i - 1], m[rng.below(i)]);
    }
    return Permutation(std::move(m));
}

Permutation Permutation::inverse() const {
    std::vector<std::size_t> inv(map_.size());
    for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = i;
    return Permutation(std::move(inv));
}

std::optional<std::span<const double>> WirelessGraph::edge_feature(std::size_t j, std::size_t i) const {
    const Edge key{j, i};
    const auto it = std::lower_bound(edges.begin(), edges.end(), key, [](const Edge& a, const Edge& b) {
        return std::tie(a.dst, a.src) < std::tie(b.dst, b.src);
    });
    if (it == edges.end() || *it != key) return std::nullopt;
    return edge_row(static_cast<std::size_t>(it - edges.begin()));
}

void WirelessGraph::add_edge(Edge e, std::span<const double> feature) {
    if (e.src == e.dst) throw ConfigError("self-edges are not allowed");
    if (e.src >= num_nodes || e.dst >= num_nodes) throw ShapeError("edge endpoint out of range");
    if (feature.size() != edge_dim()) throw ShapeError("edge feature width mismatch");
    edges.push_back(e);
    edge_features.insert(edge_features.end(), feature.begin(), feature.end());
    canonicalize();
}

void WirelessGraph::canonicalize() {
    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(edges[a].dst, edges[a].src) < std::tie(edges[b].dst, edges[b].src);
    });
    std::vector<Edge> sorted_edges(edges.size());
    std::vector<double> sorted_features(edge_features.size());
    const std::size_t d = edge_dim();
    for (std::size_t n = 0; n < order.size(); ++n) {
        sorted_edges[n] = edges[order[n]];
        std::copy_n(edge_features.begin() + static_cast<std::ptrdiff_t>(order[n] * d), d,
                    sorted_features.begin() + static_cast<std::ptrdiff_t>(n * d));
    }
    edges = std::move(sorted_edges);
    edge_features = std::move(sorted_features);
}

void WirelessGraph::validate() const {
    if (node_features.size() != num_nodes * node_dim()) throw ShapeError("node feature matrix has wrong size");
    if (edge_features.size() != edges.size() * edge_dim()) throw ShapeError("edge feature tensor has wrong size");
    for (const Edge& e : edges) {
        if (e.src == e.dst) throw ConfigError("graph contains a self-edge");
        if (e.src >= num_nodes || e.dst >= num_nodes) throw ShapeError("edge endpoint out of range");
    }
}

nlohmann::json graph_to_json(const WirelessGraph& g) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t k = 0; k < g.num_nodes; ++k) {
        const auto row = g.node_row(k);
        nodes.push_back(std::vector<double>(row.begin(), row.end()));
    }
    nlohmann::json edges = nlohmann::json::array();
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
        const auto row = g.edge_row(e);
        edges.push_back({{"src", g.edges[e].src},
                         {"dst", g.edges[e].dst},
                         {"features", std::vector<double>(row.begin(), row.end())}});
    }
    return {{"num_nodes", g.num_nodes},
            {"num_antennas", g.num_antennas},
            {"node_layout", "re(h_kk)[Nt], im(h_kk)[Nt], w_k, sigma2_k"},
            {"edge_layout", "re(h_ji)[Nt], im(h_ji)[Nt], re(h_ij)[Nt], im(h_ij)[Nt]"},
            {"node_features", std::move(nodes)},
            {"edges", std::move(edges)}};
}

namespace {

void append_channel(std::vector<double>& out, const std::complex<double>* h, std::size_t nt, double scale) {
    for (std::size_t n = 0; n < nt; ++n) out.push_back(scale * h[n].real());
    for (std::size_t n = 0; n < nt; ++n) out.push_back(scale * h[n].imag());
}

}  // namespace

WirelessGraph build_graph(const SystemConfig& cfg, const Instance& inst, const GraphOptions& opts) {
    const ChannelRealization& ch = inst.channel;
    const std::size_t k = ch.num_pairs();
    const std::size_t nt = ch.num_antennas();
    if (inst.layout.size() != k) throw ShapeError("layout and channel sizes differ");
    const double c = opts.channel_scale;

    WirelessGraph g;
    g.num_nodes = k;
    g.num_antennas = nt;
    g.node_features.reserve(k * g.node_dim());
    for (std::size_t i = 0; i < k; ++i) {
        append_channel(g.node_features, ch.h(i, i), nt, c);
        g.node_features.push_back(ch.weights[i]);
        g.node_features.push_back(c * c * ch.noise[i]);
    }
    // Iterating dst-major yields the canonical (dst, src) order directly.
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (j == i) continue;
            if (!(distance(inst.layout.tx[j], inst.layout.rx[i]) <= cfg.edge_threshold)) continue;
            g.edges.push_back({j, i});
            append_channel(g.edge_features, ch.h(j, i), nt, c);
            append_channel(g.edge_features, ch.h(i, j), nt, c);
        }
    }
    return g;
}

WirelessGraph permute(const WirelessGraph& g, const Permutation& pi) {
    if (pi.size() != g.num_nodes) throw ShapeError("permutation size differs from node count");
    WirelessGraph out;
    out.num_nodes = g.num_nodes;
    out.num_antennas = g.num_antennas;
    out.node_features.resize(g.node_features.size());
    const std::size_t d1 = g.node_dim();
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        const auto row = g.node_row(i);
        std::copy(row.begin(), row.end(), out.node_features.begin() + static_cast<std::ptrdiff_t>(pi(i) * d1));
    }
    out.edges.reserve(g.num_edges());
    for (const Edge& e : g.edges) out.edges.push_back({pi(e.src), pi(e.dst)});
    out.edge_features = g.edge_features;
    out.canonicalize();
    return out;
}

Scenario permute(const Scenario& s, const Permutation& pi) {
    if (pi.size() != s.size()) throw ShapeError("permutation size differs from scenario size");
    Scenario out;
    out.tx.resize(s.size());
    out.rx.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out.tx[pi(i)] = s.tx[i];
        out.rx[pi(i)] = s.rx[i];
    }
    return out;
}

ChannelRealization permute(const ChannelRealization& ch, const Permutation& pi) {
    const std::size_t k = ch.num_pairs();
    const std::size_t nt = ch.num_antennas();
    if (pi.size() != k) throw ShapeError("permutation size differs from channel size");
    ChannelRealization out(k, nt);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t r = 0; r < k; ++r) std::copy_n(ch.h(j, r), nt, out.h(pi(j), pi(r)));
        out.weights[pi(j)] = ch.weights[j];
        out.noise[pi(j)] = ch.noise[j];
    }
    return out;
}

Instance permute(const Instance& inst, const Permutation& pi) {
    return {permute(inst.layout, pi), permute(inst.channel, pi)};
}

double Allocation::power(std::size_t k) const {
    double p = 0.0;
    for (std::size_t n = 0; n < row_width(); ++n) {
        const double x = values[k * row_width() + n];
        p += x * x;
    }
    return p;
}

Allocation permute_alloc(const Allocation& a, const Permutation& pi) {
    if (pi.size() != a.num_nodes) throw ShapeError("permutation size differs from allocation size");
    Allocation out(a.num_nodes, a.num_antennas);
    const std::size_t w = a.row_width();
    for (std::size_t i = 0; i < a.num_nodes; ++i) {
        std::copy_n(a.values.begin() + static_cast<std::ptrdiff_t>(i * w), w,
                    out.values.begin() + static_cast<std::ptrdiff_t>(pi(i) * w));
    }
    return out;
}

RateReport sinr_and_rates(const ChannelRealization& ch, const Allocation& alloc) {
    const std::size_t k = ch.num_pairs();
    const std::size_t nt = ch.num_antennas();
    if (alloc.num_nodes != k || alloc.num_antennas != nt || alloc.values.size() != k * 2 * nt) {
        throw ShapeError("allocation dimensions do not match the channel");
    }
    // gain(j, r) = |h_jr^H v_j|^2
    auto gain = [&](std::size_t j, std::size_t r) {
        const std::complex<double>* h = ch.h(j, r);
        std::complex<double> amp{0.0, 0.0};
        for (std::size_t n = 0; n < nt; ++n) amp += std::conj(h[n]) * alloc.v(j, n);
        return std::norm(amp);
    };
    RateReport rep;
    rep.sinr.resize(k);
    rep.rates.resize(k);
    for (std::size_t r = 0; r < k; ++r) {
        double interference = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j != r) interference += gain(j, r);
        }
        rep.sinr[r] = gain(r, r) / (interference + ch.noise[r]);
        rep.rates[r] = std::log2(1.0 + rep.sinr[r]);
        rep.objective += ch.weights[r] * rep.rates[r];
    }
    return rep;
}

RateReport sinr_and_rates(const WirelessGraph& g, const Allocation& alloc, const ChannelRealization& ch) {
    if (g.num_nodes != alloc.num_nodes || g.num_antennas != alloc.num_antennas) {
        throw ShapeError("allocation dimensions do not match the graph");
    }
    return sinr_and_rates(ch, alloc);
}

bool check_feasible(const Allocation& alloc, double pmax) {
    for (std::size_t k = 0; k < alloc.num_nodes; ++k) {
        if (!(alloc.power(k) <= pmax + kFeasibilityTolerance)) return false;
    }
    return true;
}

}  // namespace wcgnn
