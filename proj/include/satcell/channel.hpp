// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef SATCELL_CHANNEL_HPP
#define SATCELL_CHANNEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "satcell/geometry.hpp"

namespace satcell {

/// One immutable network drop: node placement, radio constants, and the
/// per-link large-scale parameters. M = 0 encodes a satellite-only system.
struct Scenario {
    std::vector<Position3D> ap_positions;   // M entries
    std::vector<Position3D> user_positions; // K entries
    Position3D satellite_position;
    RadioConstants radio;
    ArrayGeometry array;
    LinkGains gains;
    Eigen::MatrixXd beta_terrestrial; // M x K, linear gains
    Eigen::VectorXd beta_sat;         // K, linear gains
    Eigen::VectorXd kappa;            // K Rician factors
    Eigen::VectorXd max_power_w;      // K per-user budgets P_max,k
    double corr_h = 0.5;              // exponential correlation coefficients
    double corr_v = 0.5;

    int num_aps() const { return static_cast<int>(ap_positions.size()); }
    int num_users() const { return static_cast<int>(user_positions.size()); }
    void validate() const;
};

/// Channel statistics of one drop: LoS components, correlation matrices and
/// the MMSE estimation quantities
///   gamma_mk = pK beta_mk^2 / (pK beta_mk + sigma_a^2),
///   Phi_k    = (pK R_k + sigma_s^2 I)^-1,
///   Theta_k  = R_k Phi_k R_k.
/// Radio constants and large-scale gains are copied in, so every closed form
/// downstream needs only this object.
struct ChannelStatistics {
    RadioConstants radio;
    std::vector<Eigen::VectorXcd> los;   // g-bar_k
    std::vector<Eigen::MatrixXcd> corr;  // R_k
    std::vector<Eigen::MatrixXcd> phi;   // Phi_k
    std::vector<Eigen::MatrixXcd> theta; // Theta_k
    Eigen::MatrixXd gamma;               // M x K
    Eigen::MatrixXd beta_terrestrial;    // M x K
    Eigen::VectorXd beta_sat;            // K
    Eigen::VectorXd trace_theta;         // tr(Theta_k), real
    Eigen::VectorXd los_norm_sq;         // ||g-bar_k||^2
    Eigen::VectorXd condition_bound;     // upper bound on cond(pK R_k + sigma_s^2 I)

    int num_users() const { return static_cast<int>(los.size()); }
    int num_aps() const { return static_cast<int>(gamma.rows()); }
    int num_antennas() const {
        return los.empty() ? 0 : static_cast<int>(los.front().size());
    }
};

ChannelStatistics build_statistics(const Scenario &scenario);

// Lower-level entry point used when the LoS/correlation inputs come from
// somewhere other than scenario geometry (tests, synthetic instances).
ChannelStatistics build_statistics(std::vector<Eigen::VectorXcd> los,
                                   std::vector<Eigen::MatrixXcd> corr,
                                   Eigen::MatrixXd beta_terrestrial,
                                   Eigen::VectorXd beta_sat,
                                   const RadioConstants &radio);

/// One small-scale draw of all channels together with their MMSE estimates.
struct ChannelRealization {
    Eigen::MatrixXcd g_terrestrial;         // M x K
    std::vector<Eigen::VectorXcd> g_sat;    // K vectors of length N
    Eigen::MatrixXcd ghat_terrestrial;      // M x K
    std::vector<Eigen::VectorXcd> ghat_sat; // K vectors of length N
};

/// Draws seeded realizations. Precomputes the Hermitian square roots of the
/// R_k (eigenvalue floor at zero) and the estimation operators once, so the
/// per-draw cost is matrix-vector work only. Estimates are produced by
/// simulating the despread pilot observations and applying the MMSE
/// formulas, which preserves the exact joint law of (g, ghat). Safe to share
/// across threads; sample(seed) is a pure function of the seed.
class ChannelSampler {
  public:
    explicit ChannelSampler(const ChannelStatistics &stats);

    ChannelRealization sample(std::uint64_t seed) const;

    const std::vector<std::string> &warnings() const { return warnings_; }

  private:
    const ChannelStatistics &stats_;
    std::vector<Eigen::MatrixXcd> sqrt_corr_;  // L_k with L_k L_k^H = R_k
    std::vector<Eigen::MatrixXcd> estimator_;  // sqrt(pK) R_k Phi_k
    Eigen::MatrixXd terrestrial_coeff_;        // sqrt(pK) beta / (pK beta + sigma_a^2)
    std::vector<std::string> warnings_;
};

// One-off convenience wrapper around ChannelSampler.
ChannelRealization sample_realization(const ChannelStatistics &stats,
                                      std::uint64_t seed);

/// Empirical moments of the estimation errors e = g - ghat, for validating
/// Lemma-1 distributions by Monte Carlo.
struct EstimationErrorMoments {
    std::vector<Eigen::MatrixXcd> error_cov; // per user, empirical cov of e_k
    std::vector<Eigen::MatrixXcd> cross_cov; // per user, empirical E{(ghat_k - mean)(e_k)^H}
    std::vector<Eigen::MatrixXd> cross_se;   // entrywise standard error of cross_cov
    Eigen::MatrixXd terrestrial_error_var;   // M x K, empirical var of e_mk
    int trials = 0;
};

EstimationErrorMoments estimation_error_moments(const ChannelStatistics &stats,
                                                int trials, std::uint64_t seed);

} // namespace satcell

#endif
