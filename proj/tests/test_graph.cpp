#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>

#include "wcgnn/error.hpp"
#include "wcgnn/graph.hpp"

using namespace wcgnn;
using cd = std::complex<double>;

namespace {

Instance rayleigh_instance(std::size_t k, std::size_t nt, std::uint64_t seed) {
    SystemConfig cfg;
    cfg.num_pairs = k;
    cfg.num_tx_antennas = nt;
    Rng rng(seed);
    return sample_instance(cfg, rng);
}

Allocation random_feasible(std::size_t k, std::size_t nt, Rng& rng) {
    Allocation a(k, nt);
    for (double& x : a.values) x = rng.uniform(-0.5, 0.5);
    return a;
}

// Direct transcription of the SINR formula on the raw coefficients.
double oracle_objective(const ChannelRealization& ch, const Allocation& a) {
    const std::size_t k = ch.num_pairs();
    const std::size_t nt = ch.num_antennas();
    auto amp = [&](std::size_t j, std::size_t r) {
        cd s = 0.0;
        for (std::size_t n = 0; n < nt; ++n) s += std::conj(ch.h(j, r)[n]) * a.v(j, n);
        return std::norm(s);
    };
    double total = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
        double interf = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j != r) interf += amp(j, r);
        }
        total += ch.weights[r] * std::log2(1.0 + amp(r, r) / (interf + ch.noise[r]));
    }
    return total;
}

}  // namespace

TEST_CASE("complete graph edge count") {
    SystemConfig cfg;
    cfg.num_pairs = 5;
    Rng rng(1);
    const WirelessGraph g = build_graph(cfg, sample_instance(cfg, rng));
    CHECK(g.num_edges() == 20);
    CHECK(g.node_dim() == 4);
    CHECK(g.edge_dim() == 4);
}

TEST_CASE("zero threshold gives no edges") {
    SystemConfig cfg;
    cfg.num_pairs = 8;
    cfg.edge_threshold = 0.0;
    Rng rng(2);
    CHECK(build_graph(cfg, sample_instance(cfg, rng)).num_edges() == 0);
}

TEST_CASE("thresholded edges match a brute-force distance count") {
    SystemConfig cfg;
    cfg.num_pairs = 50;
    cfg.channel_model = ChannelModel::pathloss_rayleigh;
    cfg.edge_threshold = 500.0;
    Rng rng(3);
    const Instance inst = sample_instance(cfg, rng);
    const WirelessGraph g = build_graph(cfg, inst);
    std::size_t expected = 0;
    for (std::size_t j = 0; j < 50; ++j) {
        for (std::size_t i = 0; i < 50; ++i) {
            const double dx = inst.layout.tx[j].x - inst.layout.rx[i].x;
            const double dy = inst.layout.tx[j].y - inst.layout.rx[i].y;
            if (j != i && dx * dx + dy * dy <= 500.0 * 500.0) ++expected;
        }
    }
    CHECK(g.num_edges() == expected);
    CHECK(expected > 0);
    CHECK(expected < 50 * 49);
}

TEST_CASE("features follow the documented layout") {
    SystemConfig cfg;
    cfg.num_pairs = 3;
    cfg.num_tx_antennas = 2;
    Rng rng(4);
    const Instance inst = sample_instance(cfg, rng);
    const WirelessGraph g = build_graph(cfg, inst, {2.0});
    const auto node = g.node_row(1);
    CHECK(node[0] == 2.0 * inst.channel.h(1, 1)[0].real());
    CHECK(node[1] == 2.0 * inst.channel.h(1, 1)[1].real());
    CHECK(node[2] == 2.0 * inst.channel.h(1, 1)[0].imag());
    CHECK(node[4] == inst.channel.weights[1]);
    CHECK(node[5] == doctest::Approx(4.0 * inst.channel.noise[1]));
    const auto e = *g.edge_feature(2, 0);
    CHECK(e[0] == 2.0 * inst.channel.h(2, 0)[0].real());
    CHECK(e[3] == 2.0 * inst.channel.h(2, 0)[1].imag());
    CHECK(e[4] == 2.0 * inst.channel.h(0, 2)[0].real());
    CHECK(e[7] == 2.0 * inst.channel.h(0, 2)[1].imag());
}

TEST_CASE("edges are sorted by destination then source") {
    SystemConfig cfg;
    cfg.num_pairs = 6;
    Rng rng(5);
    const WirelessGraph g = build_graph(cfg, sample_instance(cfg, rng));
    for (std::size_t e = 1; e < g.num_edges(); ++e) {
        const Edge a = g.edges[e - 1], b = g.edges[e];
        CHECK((a.dst < b.dst || (a.dst == b.dst && a.src < b.src)));
    }
}

TEST_CASE("self edges are rejected") {
    WirelessGraph g;
    g.num_nodes = 2;
    g.node_features.assign(8, 0.0);
    const std::vector<double> f(4, 1.0);
    CHECK_THROWS_AS(g.add_edge({1, 1}, f), ConfigError);
    g.add_edge({0, 1}, f);
    CHECK(g.num_edges() == 1);
}

TEST_CASE("permutations") {
    Rng rng(6);
    const Permutation pi = Permutation::random(12, rng);
    const Permutation id = Permutation::identity(12);
    CHECK_THROWS_AS(Permutation({0, 0, 1}), ConfigError);
    CHECK_THROWS_AS(Permutation({0, 3}), ConfigError);

    SystemConfig cfg;
    cfg.num_pairs = 12;
    cfg.num_tx_antennas = 2;
    const Instance inst = rayleigh_instance(12, 2, 7);
    const WirelessGraph g = build_graph(cfg, inst);
    CHECK(permute(g, id) == g);
    CHECK(permute(permute(g, pi), pi.inverse()) == g);
    CHECK(permute(permute(inst, pi), pi.inverse()) == inst);
    // Permuting the instance then building equals building then permuting.
    CHECK(build_graph(cfg, permute(inst, pi)) == permute(g, pi));
}

TEST_CASE("objective is invariant under relabeling") {
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const std::size_t k = 2 + rng.below(10);
        const std::size_t nt = 1 + rng.below(3);
        const Instance inst = rayleigh_instance(k, nt, 100 + t);
        const Allocation a = random_feasible(k, nt, rng);
        const Permutation pi = Permutation::random(k, rng);
        const double base = sinr_and_rates(inst.channel, a).objective;
        const double moved = sinr_and_rates(permute(inst.channel, pi), permute_alloc(a, pi)).objective;
        CHECK(std::abs(base - moved) <= 1e-12);
    }
}

TEST_CASE("single link sinr") {
    ChannelRealization ch(1, 1);
    ch.h(0, 0)[0] = {2.0, 0.0};
    ch.noise = {1.0};
    Allocation a(1, 1);
    a.set(0, 0, {1.0, 0.0});
    const RateReport r = sinr_and_rates(ch, a);
    CHECK(r.sinr[0] == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(r.objective == doctest::Approx(std::log2(5.0)).epsilon(1e-15));
}

TEST_CASE("zero allocation has zero rate") {
    const Instance inst = rayleigh_instance(4, 2, 9);
    const RateReport r = sinr_and_rates(inst.channel, Allocation(4, 2));
    CHECK(r.objective == 0.0);
    for (double s : r.sinr) CHECK(s == 0.0);
}

TEST_CASE("objective matches the direct formula") {
    Rng rng(10);
    for (std::size_t nt : {1, 2, 3}) {
        SystemConfig cfg;
        cfg.num_pairs = 3;
        cfg.num_tx_antennas = nt;
        cfg.weighted = true;
        Rng irng(20 + nt);
        const Instance inst = sample_instance(cfg, irng);
        const Allocation a = random_feasible(3, nt, rng);
        CHECK(std::abs(sinr_and_rates(inst.channel, a).objective - oracle_objective(inst.channel, a)) <= 1e-12);
    }
}

TEST_CASE("graph overload checks shapes and scores on the full channel") {
    SystemConfig cfg;
    cfg.num_pairs = 4;
    cfg.edge_threshold = 0.0;
    const Instance inst = rayleigh_instance(4, 1, 11);
    const WirelessGraph g = build_graph(cfg, inst);
    Allocation a(4, 1);
    for (std::size_t k = 0; k < 4; ++k) a.set(k, 0, {0.7, 0.0});
    CHECK(sinr_and_rates(g, a, inst.channel).objective == sinr_and_rates(inst.channel, a).objective);
    CHECK_THROWS_AS(sinr_and_rates(g, Allocation(3, 1), inst.channel), ShapeError);
}

TEST_CASE("feasibility boundary") {
    Allocation a(3, 2);
    CHECK(check_feasible(a, 1.0));
    a.set(1, 0, {0.6, 0.0});
    a.set(1, 1, {0.0, 0.8});
    CHECK(check_feasible(a, 1.0));  // exactly pmax
    for (double& x : a.values) x *= std::sqrt(1.01);
    CHECK_FALSE(check_feasible(a, 1.0));
}
