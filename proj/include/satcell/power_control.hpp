// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef SATCELL_POWER_CONTROL_HPP
#define SATCELL_POWER_CONTROL_HPP

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "satcell/throughput.hpp"

namespace satcell {

/// Per-user data powers with the solver's convergence trace.
struct PowerAllocation {
    Eigen::VectorXd rho; // watts, 0 <= rho_k <= P_max,k
    bool converged = false;
    int iterations_outer = 0;
    int iterations_inner = 0;

    struct TracePoint {
        double total_power_w = 0.0;
        double min_sinr = 0.0;
    };
    std::vector<TracePoint> trace;
};

/// Max-min fairness solution: allocation, achieved SINR floor, and the final
/// bisection bracket (xi_min feasible, xi_max infeasible or the upper bound).
struct FairnessResult {
    PowerAllocation allocation;
    double xi_star = 0.0;
    double xi_min = 0.0;
    double xi_max = 0.0;
    double xi_upper_bound = 0.0;
};

/// Satisfied/unsatisfied split and Jain's fairness index for one drop.
struct CongestionReport {
    std::vector<int> satisfied;   // K_s
    std::vector<int> unsatisfied; // K_u
    double jain = 1.0;            // in [1/K, 1]
    Eigen::VectorXd rate_mbps;
    Eigen::VectorXd target_rate_mbps;
};

struct SolverOptions {
    double delta = 0.01;    // outer bisection tolerance on xi
    double epsilon = 1.0e-4;   // inner power-ratio tolerance
    int max_inner_iters = 500;
    int max_outer_iters = 64;
    bool warm_start = false; // reuse the accepted powers as the next inner start
};

// Standard interference function of user k at SINR target xi:
//   I_k(rho) = xi * (MI_k(rho) + NO_k) / a_k^2.
// Positive, monotone, and scalable in rho.
double interference_function(const SinrDecomposition &d, const Eigen::VectorXd &rho,
                             int k, double xi);
double interference_function(const ChannelStatistics &stats, const Eigen::VectorXd &rho,
                             int k, double xi);

// Interference-free SINR cap min_k P_max,k a_k^2 / NO_k; upper end of the
// bisection range.
double sinr_upper_bound(const SinrDecomposition &d, const Eigen::VectorXd &p_max);
double sinr_upper_bound(const ChannelStatistics &stats, const Eigen::VectorXd &p_max);

// Max-min fairness by bisection over the SINR floor with the
// fixed-point power update rho_k <- min(I_k(rho), P_max,k) per candidate
// floor, starting from full power.
FairnessResult solve_maxmin(const SinrDecomposition &d, const RadioConstants &radio,
                            const Eigen::VectorXd &p_max, const SolverOptions &opts = {});
FairnessResult solve_maxmin(const ChannelStatistics &stats, const Eigen::VectorXd &p_max,
                            const SolverOptions &opts = {});

// Power minimization under individual SINR targets; users whose
// interference price exceeds the budget are pinned at P_max,k.
std::pair<PowerAllocation, CongestionReport>
solve_fullpower_congestion(const SinrDecomposition &d, const RadioConstants &radio,
                           const Eigen::VectorXd &targets_xi, const Eigen::VectorXd &p_max,
                           const SolverOptions &opts = {});
std::pair<PowerAllocation, CongestionReport>
solve_fullpower_congestion(const ChannelStatistics &stats, const Eigen::VectorXd &targets_xi,
                           const Eigen::VectorXd &p_max, const SolverOptions &opts = {});

// Same problem, but unsatisfied users are softly removed:
//   rho_k <- P_max,k^2 / (mu_k I_k(rho)) with mu_k = max(1, xi_k / SINR_k(rho)).
std::pair<PowerAllocation, CongestionReport>
solve_soft_removal(const SinrDecomposition &d, const RadioConstants &radio,
                   const Eigen::VectorXd &targets_xi, const Eigen::VectorXd &p_max,
                   const SolverOptions &opts = {});
std::pair<PowerAllocation, CongestionReport>
solve_soft_removal(const ChannelStatistics &stats, const Eigen::VectorXd &targets_xi,
                   const Eigen::VectorXd &p_max, const SolverOptions &opts = {});

// Splits users into satisfied (rate >= target - tol) and unsatisfied sets and
// computes Jain's index
//   J = (|K_s| + sum_{K_u} r_k)^2 / (K |K_s| + K sum_{K_u} r_k^2),
// with r_k = rate_k / target_k.
CongestionReport classify_and_score(const Eigen::VectorXd &rates,
                                    const Eigen::VectorXd &target_rates, double tol);

} // namespace satcell

#endif
