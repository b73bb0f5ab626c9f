#include <doctest.h>

#include <cmath>

#include "wcgnn/error.hpp"
#include "wcgnn/mbdla.hpp"
#include "wcgnn/wmmse.hpp"

using namespace wcgnn;

namespace {

struct Case {
    SystemConfig cfg;
    Instance inst;
};

Case make_case(std::size_t k, std::size_t nt, std::uint64_t seed, double threshold = INFINITY) {
    Case c;
    c.cfg.num_pairs = k;
    c.cfg.num_tx_antennas = nt;
    c.cfg.weighted = true;
    c.cfg.snr_db = 5.0;
    c.cfg.edge_threshold = threshold;
    Rng rng(seed);
    c.inst = sample_instance(c.cfg, rng);
    return c;
}

// Sums neighbor states; a toy spec for framework-level checks.
MbDlaSpec neighbor_sum_spec(std::size_t rounds) {
    MbDlaRound r;
    r.broadcast = [](std::span<const double> s) { return NodeVec(s.begin(), s.end()); };
    r.message = [](std::span<const double> payload, std::span<const double> edge) {
        return NodeVec{payload[0] * edge[0]};
    };
    r.aggregate = [](std::span<const NodeVec> msgs) {
        NodeVec s = canonical_sum(msgs);
        return s.empty() ? NodeVec{0.0} : s;
    };
    r.update = [](std::span<const double> x, std::span<const double> agg) {
        return NodeVec{0.5 * x[0] + std::sin(agg[0])};
    };
    return {1, std::vector<MbDlaRound>(rounds, r)};
}

std::vector<NodeVec> scalar_states(std::size_t n) {
    std::vector<NodeVec> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back({0.1 * static_cast<double>(i) - 0.3});
    return s;
}

}  // namespace

TEST_CASE("identity update leaves states unchanged") {
    const Case c = make_case(5, 1, 1);
    const WirelessGraph g = build_graph(c.cfg, c.inst);
    MbDlaRound r;
    r.broadcast = [](std::span<const double>) { return NodeVec{}; };
    r.message = [](std::span<const double>, std::span<const double>) { return NodeVec{0.0}; };
    r.aggregate = [](std::span<const NodeVec>) { return NodeVec{}; };
    r.update = [](std::span<const double> x, std::span<const double>) { return NodeVec(x.begin(), x.end()); };
    const auto init = scalar_states(5);
    CHECK(run_mbdla({1, {r}}, g, init).states == init);
}

TEST_CASE("canonical sum ignores message order exactly") {
    Rng rng(2);
    std::vector<NodeVec> msgs;
    for (int i = 0; i < 40; ++i) msgs.push_back({rng.uniform(-1e3, 1e3), rng.uniform(-1e-3, 1e-3)});
    const NodeVec base = canonical_sum(msgs);
    for (int t = 0; t < 20; ++t) {
        for (std::size_t i = msgs.size(); i > 1; --i) std::swap(msgs[i - 1], msgs[rng.below(i)]);
        CHECK(canonical_sum(msgs) == base);
    }
    CHECK_THROWS_AS(canonical_sum(std::vector<NodeVec>{{1.0}, {1.0, 2.0}}), ShapeError);
}

TEST_CASE("shuffled delivery gives identical final states") {
    for (std::size_t nt : {1, 2}) {
        const Case c = make_case(8, nt, 3);
        const WirelessGraph g = build_graph(c.cfg, c.inst);
        Rng rng(4);
        const Allocation init = random_allocation(8, nt, 1.0, rng);
        const Allocation base = wmmse_via_mbdla(g, init, 5, 1.0);
        for (std::uint64_t s = 0; s < 5; ++s) {
            MbDlaOptions opts;
            opts.shuffle_seed = s;
            CHECK(wmmse_via_mbdla(g, init, 5, 1.0, opts) == base);
        }
    }
}

TEST_CASE("relabeling nodes relabels the final states") {
    const Case c = make_case(9, 2, 5);
    const WirelessGraph g = build_graph(c.cfg, c.inst);
    Rng rng(6);
    const Allocation init = random_allocation(9, 2, 1.0, rng);
    const Permutation pi = Permutation::random(9, rng);
    const Allocation a = permute_alloc(wmmse_via_mbdla(g, init, 4, 1.0), pi);
    const Allocation b = wmmse_via_mbdla(permute(g, pi), permute_alloc(init, pi), 4, 1.0);
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-12);

    const auto spec = neighbor_sum_spec(3);
    const auto s0 = scalar_states(9);
    std::vector<NodeVec> moved(9);
    for (std::size_t i = 0; i < 9; ++i) moved[pi(i)] = s0[i];
    const auto x = run_mbdla(spec, g, s0).states;
    const auto y = run_mbdla(spec, permute(g, pi), moved).states;
    for (std::size_t i = 0; i < 9; ++i) CHECK(y[pi(i)][0] == doctest::Approx(x[i][0]).epsilon(1e-14));
}

TEST_CASE("width mismatches are rejected") {
    const Case c = make_case(4, 1, 7);
    const WirelessGraph g = build_graph(c.cfg, c.inst);
    MbDlaSpec spec = neighbor_sum_spec(1);
    CHECK_THROWS_AS(run_mbdla(spec, g, {{0.0}, {0.0}}), ShapeError);
    CHECK_THROWS_AS(run_mbdla(spec, g, std::vector<NodeVec>(4, NodeVec{0.0, 1.0})), ShapeError);
    spec.rounds[0].update = [](std::span<const double>, std::span<const double>) { return NodeVec{1.0, 2.0}; };
    CHECK_THROWS_AS(run_mbdla(spec, g, scalar_states(4)), ShapeError);
    CHECK_THROWS_AS(run_mbdla(MbDlaSpec{1, {}}, g, scalar_states(4)), ConfigError);
}

TEST_CASE("wmmse spec uses two rounds per iteration") {
    const MbDlaSpec spec = wmmse_mbdla_spec(2, 1.0, 7);
    CHECK(spec.rounds.size() == 14);
    CHECK(spec.state_width == wmmse_state_width(2));
    CHECK(wmmse_state_width(2) == 13);
}

TEST_CASE("message passing WMMSE equals direct WMMSE on complete graphs") {
    for (std::size_t k : {2, 5, 10}) {
        for (std::size_t nt : {1, 2}) {
            const Case c = make_case(k, nt, 100 * k + nt);
            const WirelessGraph g = build_graph(c.cfg, c.inst);
            Rng rng(k + nt);
            const Allocation init = random_allocation(k, nt, 1.0, rng);
            for (std::size_t t : {1, 5, 20}) {
                const Allocation direct = wmmse_solve(c.inst.channel, 1.0, init, {t, false}).allocation;
                const Allocation dla = wmmse_via_mbdla(g, init, t, 1.0);
                for (std::size_t i = 0; i < dla.values.size(); ++i) {
                    CHECK(std::abs(dla.values[i] - direct.values[i]) <= 1e-9);
                }
            }
        }
    }
}

TEST_CASE("every round boundary matches the direct iterates") {
    const Case c = make_case(6, 2, 8);
    const WirelessGraph g = build_graph(c.cfg, c.inst);
    Rng rng(9);
    const Allocation init = random_allocation(6, 2, 1.0, rng);
    const SolverReport direct = wmmse_solve(c.inst.channel, 1.0, init, {10, true});
    MbDlaOptions opts;
    opts.record_trace = true;
    const MbDlaResult r = run_mbdla(wmmse_mbdla_spec(2, 1.0, 10), g, wmmse_initial_states(g, init), opts);
    REQUIRE(r.trace.size() == 20);
    for (std::size_t t = 1; t <= 10; ++t) {
        const Allocation a = beamformers_from_states(r.trace[2 * t - 1], 2);
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            CHECK(std::abs(a.values[i] - direct.iterates[t].values[i]) <= 1e-9);
        }
    }
    const nlohmann::json j = trace_to_json(r);
    CHECK(j.at("rounds").size() == 20);
}

TEST_CASE("single pair reaches full power") {
    const Case c = make_case(1, 2, 10);
    const WirelessGraph g = build_graph(c.cfg, c.inst);
    Rng rng(11);
    Allocation init = random_allocation(1, 2, 1.0, rng);
    for (double& v : init.values) v *= 0.1;
    const Allocation a = wmmse_via_mbdla(g, init, 30, 1.0);
    CHECK(a.power(0) == doctest::Approx(1.0).epsilon(1e-9));
    const Allocation direct = wmmse_solve(c.inst.channel, 1.0, init, {30, false}).allocation;
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - direct.values[i]) <= 1e-12);
}

TEST_CASE("thresholded graphs restrict messages to existing edges") {
    const Case c = make_case(6, 1, 12, 0.0);
    const WirelessGraph g = build_graph(c.cfg, c.inst);
    REQUIRE(g.num_edges() == 0);
    Rng rng(13);
    const Allocation init = random_allocation(6, 1, 1.0, rng);
    // Without neighbors every pair believes it is alone and goes to full power.
    const Allocation a = wmmse_via_mbdla(g, init, 40, 1.0);
    for (std::size_t k = 0; k < 6; ++k) CHECK(a.power(k) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("equivalence report") {
    SystemConfig cfg;
    cfg.num_pairs = 5;
    cfg.num_tx_antennas = 2;
    const Dataset ds = make_dataset(cfg, 6, 14);
    const std::vector<std::size_t> iters{1, 5};
    const auto rows = equivalence_report(cfg, ds.instances, iters, 3);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.instances == 6);
        CHECK(r.max_abs_dv <= 1e-9);
        CHECK(r.max_abs_dobjective <= 1e-9);
    }
}
