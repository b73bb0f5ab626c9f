#include "wcgnn/wmmse.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "wcgnn/error.hpp"

namespace wcgnn {

nlohmann::json report_to_json(const SolverReport& r) {
    return {{"iterations", r.iterations},
            {"wall_time_s", r.wall_time_s},
            {"objective_trajectory", r.objective_trajectory},
            {"num_nodes", r.allocation.num_nodes},
            {"num_antennas", r.allocation.num_antennas},
            {"allocation", r.allocation.values}};
}

MuSolution bisect_mu(const Eigen::MatrixXcd& m, const Eigen::VectorXcd& b, double pmax) {
    const Eigen::Index n = b.size();
    if (m.rows() != n || m.cols() != n) throw ShapeError("bisect_mu: M must be Nt x Nt");
    if (!(pmax > 0.0)) throw ConfigError("bisect_mu: pmax must be positive");
    MuSolution out;
    if (b.squaredNorm() == 0.0) {
        out.v = Eigen::VectorXcd::Zero(n);
        return out;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(m);
    const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::VectorXcd c = eig.eigenvectors().adjoint() * b;
    const Eigen::VectorXd c2 = c.cwiseAbs2();

    const double lambda_tol = 1e-12 * std::max(lambda.maxCoeff(), 1e-300);
    const double c2_tol = 1e-24 * b.squaredNorm();

    auto solution = [&](double mu) {
        Eigen::VectorXcd coef(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = lambda(i) + mu;
            coef(i) = (mu == 0.0 && lambda(i) <= lambda_tol) ? std::complex<double>{} : c(i) / d;
        }
        return Eigen::VectorXcd(eig.eigenvectors() * coef);
    };
    auto power = [&](double mu) {
        double p = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = lambda(i) + mu;
            if (mu == 0.0 && lambda(i) <= lambda_tol) {
                if (c2(i) > c2_tol) return std::numeric_limits<double>::infinity();
                continue;
            }
            p += c2(i) / (d * d);
        }
        return p;
    };

    if (power(0.0) <= pmax) {
        out.v = solution(0.0);
        return out;
    }
    double hi = 1.0;
    for (int i = 0; i < 2000 && power(hi) >= pmax; ++i) hi *= 2.0;
    double lo = 0.0;
    for (int step = 0; step < 100; ++step) {
        const double mid = 0.5 * (lo + hi);
        if (power(mid) > pmax) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-14 * hi) break;
    }
    out.mu = hi;
    out.v = solution(hi);
    return out;
}

Allocation random_allocation(std::size_t k, std::size_t nt, double pmax, Rng& rng) {
    Allocation a(k, nt);
    std::vector<std::complex<double>> u(nt);
    for (std::size_t i = 0; i < k; ++i) {
        double norm2 = 0.0;
        do {
            norm2 = 0.0;
            for (auto& x : u) {
                x = rng.cnormal();
                norm2 += std::norm(x);
            }
        } while (norm2 == 0.0);
        const double s = std::sqrt(pmax / norm2);
        for (std::size_t n = 0; n < nt; ++n) a.set(i, n, s * u[n]);
    }
    return a;
}

Allocation random_ball_allocation(std::size_t k, std::size_t nt, double pmax, Rng& rng) {
    Allocation a = random_allocation(k, nt, pmax, rng);
    const double dim = 2.0 * static_cast<double>(nt);
    for (std::size_t i = 0; i < k; ++i) {
        const double r = std::pow(rng.uniform(), 1.0 / dim);
        for (std::size_t n = 0; n < a.row_width(); ++n) a.values[i * a.row_width() + n] *= r;
    }
    return a;
}

Allocation uniform_power_allocation(std::size_t k, std::size_t nt, double pmax, double fraction) {
    Allocation a(k, nt);
    for (std::size_t i = 0; i < k; ++i) a.set(i, 0, std::sqrt(fraction * pmax));
    return a;
}

namespace {

std::complex<double> inner(const std::complex<double>* h, const Allocation& v, std::size_t j) {
    std::complex<double> s{0.0, 0.0};
    for (std::size_t n = 0; n < v.num_antennas; ++n) s += std::conj(h[n]) * v.v(j, n);
    return s;
}

void check_finite(const WmmseState& st) {
    for (double x : st.v.values) {
        if (!std::isfinite(x)) throw NumericalError("WMMSE diverged: non-finite beamformer");
    }
    for (double x : st.w) {
        if (!std::isfinite(x)) throw NumericalError("WMMSE diverged: non-finite MSE weight");
    }
}

// One sweep of the (U, W) and V block updates.
void wmmse_iteration(const ChannelRealization& ch, double pmax, WmmseState& st) {
    const std::size_t k = ch.num_pairs();
    const std::size_t nt = ch.num_antennas();

    for (std::size_t r = 0; r < k; ++r) {
        double total = ch.noise[r];
        for (std::size_t j = 0; j < k; ++j) total += std::norm(inner(ch.h(j, r), st.v, j));
        const std::complex<double> a = inner(ch.h(r, r), st.v, r);
        st.u[r] = a / total;
        st.w[r] = 1.0 / (1.0 - (std::conj(st.u[r]) * a).real());
    }

    Eigen::MatrixXcd m(nt, nt);
    Eigen::VectorXcd b(nt);
    for (std::size_t t = 0; t < k; ++t) {
        m.setZero();
        for (std::size_t r = 0; r < k; ++r) {
            const double coef = ch.weights[r] * st.w[r] * std::norm(st.u[r]);
            const Eigen::Map<const Eigen::VectorXcd> h(ch.h(t, r), static_cast<Eigen::Index>(nt));
            m.noalias() += coef * h * h.adjoint();
        }
        const Eigen::Map<const Eigen::VectorXcd> h_tt(ch.h(t, t), static_cast<Eigen::Index>(nt));
        b = (ch.weights[t] * st.w[t] * st.u[t]) * h_tt;
        const MuSolution sol = bisect_mu(m, b, pmax);
        for (std::size_t n = 0; n < nt; ++n) st.v.set(t, n, sol.v(static_cast<Eigen::Index>(n)));
    }
    ++st.iterations;
}

}  // namespace

SolverReport wmmse_solve(const ChannelRealization& ch, double pmax, const Allocation& init,
                         const WmmseOptions& opts) {
    const std::size_t k = ch.num_pairs();
    if (opts.iterations < 1) throw ConfigError("wmmse_solve: iterations must be >= 1");
    if (init.num_nodes != k || init.num_antennas != ch.num_antennas()) {
        throw ShapeError("wmmse_solve: initialization dimensions do not match the channel");
    }
    if (!check_feasible(init, pmax)) throw ConfigError("wmmse_solve: initialization is infeasible");

    const auto start = std::chrono::steady_clock::now();
    WmmseState st{std::vector<std::complex<double>>(k), std::vector<double>(k, 0.0), init, 0};
    SolverReport rep;
    rep.objective_trajectory.reserve(opts.iterations + 1);
    rep.objective_trajectory.push_back(sinr_and_rates(ch, st.v).objective);
    if (opts.record_iterates) rep.iterates.push_back(st.v);
    for (std::size_t t = 0; t < opts.iterations; ++t) {
        wmmse_iteration(ch, pmax, st);
        check_finite(st);
        rep.objective_trajectory.push_back(sinr_and_rates(ch, st.v).objective);
        if (opts.record_iterates) rep.iterates.push_back(st.v);
    }
    rep.allocation = std::move(st.v);
    rep.iterations = st.iterations;
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

SolverReport wmmse_solve(const ChannelRealization& ch, double pmax, Rng& rng, const WmmseOptions& opts) {
    const Allocation init = random_allocation(ch.num_pairs(), ch.num_antennas(), pmax, rng);
    return wmmse_solve(ch, pmax, init, opts);
}

Allocation strongest_baseline(const ChannelRealization& ch, double pmax, double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("strongest_baseline: rho must be in (0, 1]");
    const std::size_t k = ch.num_pairs();
    const std::size_t nt = ch.num_antennas();
    std::vector<double> gain(k);
    for (std::size_t i = 0; i < k; ++i) {
        double g = 0.0;
        for (std::size_t n = 0; n < nt; ++n) g += std::norm(ch.h(i, i)[n]);
        gain[i] = std::sqrt(g);
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gain[a] > gain[b]; });
    // Guard against rho * K landing a hair above an integer.
    const auto active = std::min<std::size_t>(
        k, static_cast<std::size_t>(std::ceil(rho * static_cast<double>(k) - 1e-9)));

    Allocation a(k, nt);
    for (std::size_t n = 0; n < active; ++n) {
        const std::size_t i = order[n];
        if (gain[i] == 0.0) {
            a.set(i, 0, std::sqrt(pmax));
            continue;
        }
        for (std::size_t t = 0; t < nt; ++t) a.set(i, t, std::sqrt(pmax) * ch.h(i, i)[t] / gain[i]);
    }
    return a;
}

SolverReport best_of_restarts(const ChannelRealization& ch, double pmax, std::size_t n_restarts,
                              std::size_t iterations, Rng& rng) {
    if (n_restarts < 1) throw ConfigError("best_of_restarts: n_restarts must be >= 1");
    const auto start = std::chrono::steady_clock::now();
    SolverReport best;
    for (std::size_t r = 0; r < n_restarts; ++r) {
        SolverReport cur = r == 0 ? wmmse_solve(ch, pmax, rng, {iterations, false})
                                  : wmmse_solve(ch, pmax, random_ball_allocation(ch.num_pairs(), ch.num_antennas(), pmax, rng),
                                                {iterations, false});
        if (r == 0 || cur.objective() > best.objective()) best = std::move(cur);
    }
    best.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return best;
}

}  // namespace wcgnn
