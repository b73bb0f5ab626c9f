#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wcgnn/graph.hpp"
#include "wcgnn/rng.hpp"
#include "wcgnn/scenario.hpp"

namespace wcgnn {

inline constexpr std::size_t kWmmseDefaultIterations = 100;

// Receive coefficients, MSE weights and beamformers of the K-pair WMMSE.
struct WmmseState {
    std::vector<std::complex<double>> u;
    std::vector<double> w;
    Allocation v;
    std::size_t iterations = 0;
};

struct SolverReport {
    Allocation allocation;
    std::vector<double> objective_trajectory;  // initial point + one entry per iteration
    std::vector<Allocation> iterates;          // filled only when requested
    double wall_time_s = 0.0;
    std::size_t iterations = 0;

    double objective() const { return objective_trajectory.back(); }
};

nlohmann::json report_to_json(const SolverReport& r);

struct MuSolution {
    double mu = 0.0;
    Eigen::VectorXcd v;
};

/// Solves min_mu >= 0 subject to ||(M + mu I)^{-1} b||^2 <= pmax for
/// Hermitian PSD M. Returns mu = 0 when the unconstrained solution is already
/// feasible (pseudo-inverse on the null space of M); otherwise bisects on
/// [0, mu_hi] with mu_hi doubled from 1, and returns the upper end so the
/// result is always feasible.
MuSolution bisect_mu(const Eigen::MatrixXcd& m, const Eigen::VectorXcd& b, double pmax);

// v_k = sqrt(pmax) * u with u uniform on the complex unit sphere.
Allocation random_allocation(std::size_t k, std::size_t nt, double pmax, Rng& rng);

// v_k uniform in the ball ||v_k||^2 <= pmax. For Nt = 1 the power is uniform
// on [0, pmax]; unit-sphere draws differ only in phase there, which WMMSE
// ignores.
Allocation random_ball_allocation(std::size_t k, std::size_t nt, double pmax, Rng& rng);

// Every v_k real, equal to sqrt(fraction * pmax) on each antenna direction e_1.
Allocation uniform_power_allocation(std::size_t k, std::size_t nt, double pmax, double fraction);

struct WmmseOptions {
    std::size_t iterations = kWmmseDefaultIterations;
    bool record_iterates = false;
};

// WMMSE for K transmitters with Nt antennas and single-antenna receivers,
// using the full channel. Throws NumericalError if an update goes non-finite.
SolverReport wmmse_solve(const ChannelRealization& ch, double pmax, const Allocation& init,
                         const WmmseOptions& opts = {});
SolverReport wmmse_solve(const ChannelRealization& ch, double pmax, Rng& rng, const WmmseOptions& opts = {});

// Top ceil(rho K) pairs by ||h_kk|| transmit matched-filter beams at pmax.
Allocation strongest_baseline(const ChannelRealization& ch, double pmax, double rho);

// Best final objective over n_restarts random initializations. The first
// restart is exactly wmmse_solve(ch, pmax, rng); later ones start from
// random_ball_allocation so that restarts also vary the powers.
SolverReport best_of_restarts(const ChannelRealization& ch, double pmax, std::size_t n_restarts,
                              std::size_t iterations, Rng& rng);

}  // namespace wcgnn
