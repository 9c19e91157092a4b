// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include "satcell/power_control.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "satcell/summation.hpp"

namespace satcell {

namespace {

void check_rho(const Eigen::VectorXd &rho, int k_users, const char *who) {
    if (rho.size() != k_users)
        throw std::invalid_argument(std::string(who) + ": power vector must have K entries");
    if ((rho.array() < 0.0).any())
        throw std::invalid_argument(std::string(who) + ": negative power");
}

double total_power(const Eigen::VectorXd &rho) {
    KahanSumD acc;
    for (int k = 0; k < rho.size(); ++k)
        acc.add(rho(k));
    return acc.value();
}

double min_sinr(const SinrDecomposition &d, const Eigen::VectorXd &rho) {
    double lo = std::numeric_limits<double>::infinity();
    for (int k = 0; k < d.num_users(); ++k)
        lo = std::min(lo, d.sinr_user(rho, k));
    return lo;
}

} // namespace

double interference_function(const SinrDecomposition &d, const Eigen::VectorXd &rho,
                             int k, double xi) {
    check_rho(rho, d.num_users(), "interference_function");
    if (!(xi > 0.0))
        throw std::invalid_argument("interference_function: xi must be positive");
    if (k < 0 || k >= d.num_users())
        throw std::out_of_range("interference_function: user index out of range");
    const double a = d.signal_coeff(k);
    return xi * (d.mutual_interference(rho, k) + d.noise(k)) / (a * a);
}

double interference_function(const ChannelStatistics &stats, const Eigen::VectorXd &rho,
                             int k, double xi) {
    return interference_function(make_sinr_decomposition(stats, SystemMode::Hybrid), rho,
                                 k, xi);
}

double sinr_upper_bound(const SinrDecomposition &d, const Eigen::VectorXd &p_max) {
    check_rho(p_max, d.num_users(), "sinr_upper_bound");
    double bound = std::numeric_limits<double>::infinity();
    for (int k = 0; k < d.num_users(); ++k) {
        const double a = d.signal_coeff(k);
        bound = std::min(bound, p_max(k) * a * a / d.noise(k));
    }
    return bound;
}

double sinr_upper_bound(const ChannelStatistics &stats, const Eigen::VectorXd &p_max) {
    return sinr_upper_bound(make_sinr_decomposition(stats, SystemMode::Hybrid), p_max);
}

namespace {

struct InnerResult {
    Eigen::VectorXd rho;
    bool converged = false;
    int iterations = 0;
    std::vector<PowerAllocation::TracePoint> trace;
};

// Fixed-point loop rho_k <- min(I_k(rho), P_max,k) from rho(0) = P_max.
// Iterates are componentwise non-increasing, so the sequence converges from
// above; stops when the total-power ratio falls below epsilon.
InnerResult constrained_fixed_point(const SinrDecomposition &d, double xi,
                                    const Eigen::VectorXd &p_max,
                                    const Eigen::VectorXd &start,
                                    const SolverOptions &opts) {
    const int k_users = d.num_users();
    InnerResult res;
    res.rho = start;
    double ptot_prev = total_power(res.rho);
    Eigen::VectorXd next(k_users);
    for (int m = 1; m <= opts.max_inner_iters; ++m) {
        for (int k = 0; k < k_users; ++k)
            next(k) = std::min(interference_function(d, res.rho, k, xi), p_max(k));
        const double ptot = total_power(next);
        const double ratio = std::abs(ptot - ptot_prev) / ptot_prev;
        res.rho = next;
        res.iterations = m;
        res.trace.push_back({ptot, min_sinr(d, res.rho)});
        ptot_prev = ptot;
        if (ratio <= opts.epsilon) {
            res.converged = true;
            break;
        }
    }
    return res;
}

bool all_rates_meet_floor(const SinrDecomposition &d, const RadioConstants &radio,
                          const Eigen::VectorXd &rho, double xi) {
    const int k_users = d.num_users();
    const double rate_floor = ergodic_rate(xi, radio, k_users);
    for (int k = 0; k < k_users; ++k) {
        const double rate = ergodic_rate(d.sinr_user(rho, k), radio, k_users);
        if (rate < rate_floor)
            return false;
    }
    return true;
}

} // namespace

FairnessResult solve_maxmin(const SinrDecomposition &d, const RadioConstants &radio,
                            const Eigen::VectorXd &p_max, const SolverOptions &opts) {
    const int k_users = d.num_users();
    check_rho(p_max, k_users, "solve_maxmin");
    if (!(opts.delta > 0.0) || !(opts.epsilon > 0.0))
        throw std::invalid_argument("solve_maxmin: tolerances must be positive");

    FairnessResult res;
    res.xi_upper_bound = sinr_upper_bound(d, p_max);
    res.xi_min = 0.0;
    res.xi_max = res.xi_upper_bound;

    Eigen::VectorXd warm = p_max;
    bool have_feasible = false;
    Eigen::VectorXd best_rho = p_max;
    std::vector<PowerAllocation::TracePoint> best_trace;
    int outer = 0;
    int inner_total = 0;

    while (res.xi_max - res.xi_min > opts.delta && outer < opts.max_outer_iters) {
        ++outer;
        const double xi = 0.5 * (res.xi_min + res.xi_max);
        const Eigen::VectorXd start = opts.warm_start ? warm : p_max;
        const InnerResult inner = constrained_fixed_point(d, xi, p_max, start, opts);
        inner_total += inner.iterations;
        const bool feasible =
            inner.converged && all_rates_meet_floor(d, radio, inner.rho, xi);
        if (feasible) {
            res.xi_min = xi;
            best_rho = inner.rho;
            best_trace = inner.trace;
            warm = inner.rho;
            have_feasible = true;
        } else {
            res.xi_max = xi;
        }
    }

    res.allocation.rho = best_rho;
    res.allocation.iterations_outer = outer;
    res.allocation.iterations_inner = inner_total;
    res.allocation.trace = std::move(best_trace);
    res.allocation.converged =
        have_feasible && (res.xi_max - res.xi_min <= opts.delta);
    res.xi_star = min_sinr(d, res.allocation.rho);
    return res;
}

FairnessResult solve_maxmin(const ChannelStatistics &stats, const Eigen::VectorXd &p_max,
                            const SolverOptions &opts) {
    return solve_maxmin(make_sinr_decomposition(stats, SystemMode::Hybrid), stats.radio,
                        p_max, opts);
}

namespace {

enum class CongestionPolicy { PinAtMax, SoftRemoval };

std::pair<PowerAllocation, CongestionReport>
run_congestion_solver(const SinrDecomposition &d, const RadioConstants &radio,
                      const Eigen::VectorXd &targets_xi, const Eigen::VectorXd &p_max,
                      const SolverOptions &opts, CongestionPolicy policy) {
    const int k_users = d.num_users();
    check_rho(p_max, k_users, "congestion solver");
    if (targets_xi.size() != k_users || (targets_xi.array() <= 0.0).any())
        throw std::invalid_argument("congestion solver: targets must be positive");

    auto apply_update = [&](const Eigen::VectorXd &rho, int k) {
        const double price = interference_function(d, rho, k, targets_xi(k));
        if (price <= p_max(k))
            return price;
        if (policy == CongestionPolicy::PinAtMax)
            return p_max(k);
        // Soft removal: scale below the budget by the target-to-actual
        // SINR ratio, clamped to >= 1.
        const double mu = std::max(1.0, targets_xi(k) / d.sinr_user(rho, k));
        return p_max(k) * p_max(k) / (mu * price);
    };

    PowerAllocation alloc;
    alloc.rho = p_max;
    double ptot_prev = total_power(alloc.rho);
    Eigen::VectorXd next(k_users);
    bool ratio_ok = false;
    for (int n = 1; n <= opts.max_inner_iters; ++n) {
        for (int k = 0; k < k_users; ++k)
            next(k) = apply_update(alloc.rho, k);
        const double ptot = total_power(next);
        const double ratio = std::abs(ptot - ptot_prev) / ptot_prev;
        alloc.rho = next;
        alloc.iterations_inner = n;
        alloc.trace.push_back({ptot, min_sinr(d, alloc.rho)});
        ptot_prev = ptot;
        if (ratio <= opts.epsilon) {
            // Terminate only once the fixed-point residual is consistent
            // with the stopping tolerance.
            double residual = 0.0;
            for (int k = 0; k < k_users; ++k)
                residual = std::max(
                    residual, std::abs(alloc.rho(k) - apply_update(alloc.rho, k)) / p_max(k));
            if (residual <= 10.0 * opts.epsilon) {
                ratio_ok = true;
                break;
            }
        }
    }
    alloc.converged = ratio_ok;

    Eigen::VectorXd rates(k_users), target_rates(k_users);
    for (int k = 0; k < k_users; ++k) {
        rates(k) = ergodic_rate(d.sinr_user(alloc.rho, k), radio, k_users);
        target_rates(k) = ergodic_rate(targets_xi(k), radio, k_users);
    }
    CongestionReport report =
        classify_and_score(rates, target_rates, 1.0e-6 * target_rates.minCoeff());
    return {std::move(alloc), std::move(report)};
}

} // namespace

std::pair<PowerAllocation, CongestionReport>
solve_fullpower_congestion(const SinrDecomposition &d, const RadioConstants &radio,
                           const Eigen::VectorXd &targets_xi, const Eigen::VectorXd &p_max,
                           const SolverOptions &opts) {
    return run_congestion_solver(d, radio, targets_xi, p_max, opts,
                                 CongestionPolicy::PinAtMax);
}

std::pair<PowerAllocation, CongestionReport>
solve_fullpower_congestion(const ChannelStatistics &stats, const Eigen::VectorXd &targets_xi,
                           const Eigen::VectorXd &p_max, const SolverOptions &opts) {
    return solve_fullpower_congestion(make_sinr_decomposition(stats, SystemMode::Hybrid),
                                      stats.radio, targets_xi, p_max, opts);
}

std::pair<PowerAllocation, CongestionReport>
solve_soft_removal(const SinrDecomposition &d, const RadioConstants &radio,
                   const Eigen::VectorXd &targets_xi, const Eigen::VectorXd &p_max,
                   const SolverOptions &opts) {
    return run_congestion_solver(d, radio, targets_xi, p_max, opts,
                                 CongestionPolicy::SoftRemoval);
}

std::pair<PowerAllocation, CongestionReport>
solve_soft_removal(const ChannelStatistics &stats, const Eigen::VectorXd &targets_xi,
                   const Eigen::VectorXd &p_max, const SolverOptions &opts) {
    return solve_soft_removal(make_sinr_decomposition(stats, SystemMode::Hybrid),
                              stats.radio, targets_xi, p_max, opts);
}

CongestionReport classify_and_score(const Eigen::VectorXd &rates,
                                    const Eigen::VectorXd &target_rates, double tol) {
    const int k_users = static_cast<int>(rates.size());
    if (target_rates.size() != k_users)
        throw std::invalid_argument("classify_and_score: size mismatch");
    if ((target_rates.array() <= 0.0).any())
        throw std::invalid_argument("classify_and_score: targets must be positive");

    CongestionReport rep;
    rep.rate_mbps = rates;
    rep.target_rate_mbps = target_rates;
    KahanSumD ratio_sum, ratio_sq_sum;
    for (int k = 0; k < k_users; ++k) {
        if (rates(k) >= target_rates(k) - tol) {
            rep.satisfied.push_back(k);
        } else {
            rep.unsatisfied.push_back(k);
            const double r = rates(k) / target_rates(k);
            ratio_sum.add(r);
            ratio_sq_sum.add(r * r);
        }
    }
    const double ns = static_cast<double>(rep.satisfied.size());
    const double num = ns + ratio_sum.value();
    const double den = k_users * (ns + ratio_sq_sum.value());
    // den vanishes only if no user is satisfied and every unsatisfied rate is
    // zero; that is the one-winner-free extreme, scored at the lower bound.
    rep.jain = den > 0.0 ? num * num / den : 1.0 / k_users;
    return rep;
}

} // namespace satcell
