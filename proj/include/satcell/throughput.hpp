// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef SATCELL_THROUGHPUT_HPP
#define SATCELL_THROUGHPUT_HPP

#include <complex>
#include <cstdint>

#include <Eigen/Dense>

#include "satcell/channel.hpp"

namespace satcell {

enum class SystemMode { Hybrid, TerrestrialOnly, SatelliteOnly };

const char *to_string(SystemMode mode);

enum class CombinerRule { Mrc, MmseStyle };

/// Receive combiner: one vector per user on the satellite side, one scalar
/// per (AP, user) pair on the terrestrial side.
struct Combiner {
    std::vector<Eigen::VectorXcd> sat; // u_k, K vectors of length N
    Eigen::MatrixXcd ap;               // u_mk, M x K
    CombinerRule rule = CombinerRule::Mrc;
};

// MRC: the combiner is the channel estimate itself.
Combiner make_mrc_combiner(const ChannelRealization &rz);

// MMSE-style combiner, regularized Gram inverse on both links:
//   U = Ghat (Ghat^H Ghat + K sigma_s^2 I / P_max)^-1.
Combiner make_mmse_combiner(const ChannelRealization &rz, double p_max_w,
                            double sat_noise_power_w);

// Overall post-combining channel z_kk' = u_k^H g_k' + sum_m conj(u_mk) g_mk';
// the mode drops the absent link's term.
std::complex<double> overall_channel(const Combiner &comb, const ChannelRealization &rz,
                                     int k, int k_prime,
                                     SystemMode mode = SystemMode::Hybrid);

/// SINR_k(rho) = rho_k * signal_coeff_k^2 / (sum_k' interference(k,k') rho_k'
/// + noise_k). The three system modes differ only in which statistics enter
/// each entry, so power control and the closed forms share this one object.
struct SinrDecomposition {
    SystemMode mode = SystemMode::Hybrid;
    Eigen::VectorXd signal_coeff; // a_k
    Eigen::MatrixXd interference; // C(k, k'), coefficient of rho_k' in MI_k
    Eigen::VectorXd noise;        // NO_k

    int num_users() const { return static_cast<int>(signal_coeff.size()); }
    double mutual_interference(const Eigen::VectorXd &rho, int k) const;
    double sinr_user(const Eigen::VectorXd &rho, int k) const;
    Eigen::VectorXd sinr(const Eigen::VectorXd &rho) const;
};

SinrDecomposition make_sinr_decomposition(const ChannelStatistics &stats,
                                          SystemMode mode);

/// Per-user SINR, rate, and the signal/interference/noise split.
struct ThroughputReport {
    SystemMode mode = SystemMode::Hybrid;
    Eigen::VectorXd sinr;
    Eigen::VectorXd rate_mbps;
    Eigen::VectorXd signal;       // rho_k a_k^2
    Eigen::VectorXd interference; // MI_k(rho)
    Eigen::VectorXd noise;        // NO_k
};

ThroughputReport sinr_closed_form(const ChannelStatistics &stats,
                                  const Eigen::VectorXd &rho, SystemMode mode);

// Ergodic net throughput R = (1 - K/tau_c) * B * log2(1 + SINR) in Mbps
// (B in MHz). Throws when tau_c <= K.
double ergodic_rate(double sinr, const RadioConstants &radio, int k_users);

// Inverse of ergodic_rate: SINR target for a given rate target.
double target_sinr_for_rate(double rate_mbps, const RadioConstants &radio, int k_users);

struct MonteCarloOptions {
    int trials = 10000;
    std::uint64_t seed = 0;
    CombinerRule rule = CombinerRule::Mrc;
    double p_max_w = 100.0; // MMSE regularizer reference power
    int threads = 1;
    int block_size = 500; // fixed reduction granularity; output never depends
                          // on the thread count
};

/// Sample-mean estimate of the generic SINR. The channel expectations are
/// averaged over fresh realizations; the two noise expectations are computed
/// from the combiner norms times the noise powers, which has the identical
/// expectation with lower variance.
struct MonteCarloSinr {
    Eigen::VectorXd sinr;
    Eigen::VectorXd standard_error; // from fixed-size block means
    int trials = 0;
};

MonteCarloSinr sinr_monte_carlo(const ChannelStatistics &stats,
                                const Eigen::VectorXd &rho, SystemMode mode,
                                const MonteCarloOptions &opts);

/// Closed-form intermediate moments of z_kk = a + atilde + b + btilde with
/// a = ||ghat_k||^2, atilde = ghat_k^H e_k, b = sum_m |ghat_mk|^2,
/// btilde = sum_m conj(ghat_mk) e_mk. Exposed for targeted testing.
struct MomentOracles {
    double e_a_sq;          // E{|a_kk|^2}
    double e_atilde_sq;     // E{|atilde_kk|^2}
    double e_b_sq;          // E{|b_kk|^2}
    double e_btilde_sq;     // E{|btilde_kk|^2}
    double e_a_b;           // E{a_kk b_kk}
    double e_z_sq;          // E{|z_kk|^2}, the sum composition
    double mean_z;          // E{z_kk}, real for MRC
};

MomentOracles moment_oracles(const ChannelStatistics &stats, int k);

// E{|z_kk'|^2} for k' != k; the summand of the cross-user interference D2.
double cross_gain_moment(const ChannelStatistics &stats, int k, int k_prime);

} // namespace satcell

#endif
