// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include "satcell/channel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "satcell/rng.hpp"

namespace satcell {

namespace {

// Stream tags for seed derivation inside one realization.
enum : std::uint64_t {
    kStreamTerrestrialChannel = 1,
    kStreamTerrestrialPilot = 2,
    kStreamSatChannel = 3,
    kStreamSatPilot = 4,
};

Eigen::VectorXcd draw_cn(Rng &rng, int n) {
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i)
        v(i) = rng.cgaussian();
    return v;
}

// Largest eigenvalue estimate by power iteration with a fixed start;
// enough for the reported condition bound, no full eigensolve needed.
double spectral_norm_estimate(const Eigen::MatrixXcd &h) {
    const int n = static_cast<int>(h.rows());
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(n) / std::sqrt(double(n));
    double lambda = 0.0;
    for (int it = 0; it < 30; ++it) {
        Eigen::VectorXcd w = h * v;
        const double nw = w.norm();
        if (!(nw > 0.0))
            return 0.0;
        v = w / nw;
        lambda = nw;
    }
    return lambda;
}

} // namespace

void Scenario::validate() const {
    radio.validate();
    array.validate();
    gains.validate();
    const int m = num_aps();
    const int k = num_users();
    if (k < 1)
        throw std::invalid_argument("Scenario: need at least one user");
    if (radio.num_pilots != k)
        throw std::invalid_argument("Scenario: num_pilots must equal the user count");
    if (beta_terrestrial.rows() != m || beta_terrestrial.cols() != k)
        throw std::invalid_argument("Scenario: beta_terrestrial must be M x K");
    if (beta_sat.size() != k || kappa.size() != k || max_power_w.size() != k)
        throw std::invalid_argument("Scenario: per-user vectors must have length K");
    if ((beta_terrestrial.array() <= 0.0).any() || (beta_sat.array() <= 0.0).any())
        throw std::invalid_argument("Scenario: all large-scale gains must be positive");
    if ((kappa.array() < 0.0).any())
        throw std::invalid_argument("Scenario: kappa must be >= 0");
    if ((max_power_w.array() <= 0.0).any())
        throw std::invalid_argument("Scenario: power budgets must be positive");
    if (!satellite_position.finite())
        throw std::invalid_argument("Scenario: satellite position must be finite");
    for (const auto &p : ap_positions)
        if (!p.finite())
            throw std::invalid_argument("Scenario: AP positions must be finite");
    for (const auto &p : user_positions)
        if (!p.finite())
            throw std::invalid_argument("Scenario: user positions must be finite");
}

ChannelStatistics build_statistics(std::vector<Eigen::VectorXcd> los,
                                   std::vector<Eigen::MatrixXcd> corr,
                                   Eigen::MatrixXd beta_terrestrial,
                                   Eigen::VectorXd beta_sat,
                                   const RadioConstants &radio) {
    radio.validate();
    const int k_users = static_cast<int>(los.size());
    if (static_cast<int>(corr.size()) != k_users || beta_sat.size() != k_users)
        throw std::invalid_argument("build_statistics: per-user inputs disagree on K");
    if (beta_terrestrial.cols() != k_users)
        throw std::invalid_argument("build_statistics: beta_terrestrial must have K columns");

    ChannelStatistics st;
    st.radio = radio;
    st.los = std::move(los);
    st.corr = std::move(corr);
    st.beta_terrestrial = std::move(beta_terrestrial);
    st.beta_sat = std::move(beta_sat);

    const double pk = radio.pilot_energy();
    const double sigma_a2 = radio.ap_noise_power_w;
    const double sigma_s2 = radio.sat_noise_power_w;

    const int m_aps = static_cast<int>(st.beta_terrestrial.rows());
    st.gamma.resize(m_aps, k_users);
    for (int m = 0; m < m_aps; ++m)
        for (int k = 0; k < k_users; ++k) {
            const double b = st.beta_terrestrial(m, k);
            st.gamma(m, k) = pk * b * b / (pk * b + sigma_a2);
        }

    st.phi.resize(k_users);
    st.theta.resize(k_users);
    st.trace_theta.resize(k_users);
    st.los_norm_sq.resize(k_users);
    st.condition_bound.resize(k_users);

    for (int k = 0; k < k_users; ++k) {
        const Eigen::MatrixXcd &r = st.corr[k];
        const int n = static_cast<int>(r.rows());
        if (r.cols() != n || st.los[k].size() != n)
            throw std::invalid_argument("build_statistics: inconsistent antenna dimensions");
        Eigen::MatrixXcd a = pk * r;
        a.diagonal().array() += sigma_s2;
        // Hermitian solve; pK R + sigma_s^2 I is positive definite for
        // sigma_s^2 > 0, which RadioConstants::validate guarantees.
        Eigen::LDLT<Eigen::MatrixXcd> ldlt(a.selfadjointView<Eigen::Lower>());
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("build_statistics: Hermitian factorization failed");
        st.phi[k] = ldlt.solve(Eigen::MatrixXcd::Identity(n, n));
        // Hermitize to wash out factorization asymmetry.
        st.phi[k] = 0.5 * (st.phi[k] + st.phi[k].adjoint()).eval();
        Eigen::MatrixXcd theta = r * st.phi[k] * r;
        st.theta[k] = 0.5 * (theta + theta.adjoint()).eval();
        st.trace_theta(k) = st.theta[k].trace().real();
        st.los_norm_sq(k) = st.los[k].squaredNorm();
        st.condition_bound(k) = (pk * spectral_norm_estimate(r) + sigma_s2) / sigma_s2;
    }
    return st;
}

ChannelStatistics build_statistics(const Scenario &scenario) {
    scenario.validate();
    const int k_users = scenario.num_users();
    std::vector<Eigen::VectorXcd> los(k_users);
    std::vector<Eigen::MatrixXcd> corr(k_users);
    for (int k = 0; k < k_users; ++k) {
        const ElevationAzimuth ea =
            elevation_azimuth(scenario.user_positions[k], scenario.satellite_position);
        los[k] = los_vector(ea.elevation_rad, ea.azimuth_rad, scenario.kappa(k),
                            scenario.beta_sat(k), scenario.array,
                            scenario.radio.wavelength_m);
        corr[k] = correlation_matrix(scenario.beta_sat(k), scenario.kappa(k),
                                     scenario.corr_h, scenario.corr_v, scenario.array);
    }
    return build_statistics(std::move(los), std::move(corr), scenario.beta_terrestrial,
                            scenario.beta_sat, scenario.radio);
}

ChannelSampler::ChannelSampler(const ChannelStatistics &stats) : stats_(stats) {
    const int k_users = stats.num_users();
    const double pk = stats.radio.pilot_energy();
    const double sigma_a2 = stats.radio.ap_noise_power_w;

    sqrt_corr_.resize(k_users);
    estimator_.resize(k_users);
    for (int k = 0; k < k_users; ++k) {
        const Eigen::MatrixXcd &r = stats.corr[k];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(r);
        if (eig.info() != Eigen::Success)
            throw std::runtime_error("ChannelSampler: eigendecomposition failed");
        Eigen::VectorXd ev = eig.eigenvalues();
        const double trace = ev.sum();
        const double floor_warn = -1.0e-9 * trace;
        for (int i = 0; i < ev.size(); ++i) {
            if (ev(i) < floor_warn) {
                std::ostringstream os;
                os << "R_" << k << " eigenvalue " << ev(i) << " clamped to zero (trace "
                   << trace << ")";
                warnings_.push_back(os.str());
            }
            if (ev(i) < 0.0)
                ev(i) = 0.0;
        }
        sqrt_corr_[k] = eig.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
                        eig.eigenvectors().adjoint();
        estimator_[k] = std::sqrt(pk) * r * stats.phi[k];
    }

    const int m_aps = stats.num_aps();
    terrestrial_coeff_.resize(m_aps, k_users);
    for (int m = 0; m < m_aps; ++m)
        for (int k = 0; k < k_users; ++k) {
            const double b = stats.beta_terrestrial(m, k);
            terrestrial_coeff_(m, k) = std::sqrt(pk) * b / (pk * b + sigma_a2);
        }
}

ChannelRealization ChannelSampler::sample(std::uint64_t seed) const {
    const int m_aps = stats_.num_aps();
    const int k_users = stats_.num_users();
    const int n_ant = stats_.num_antennas();
    const double sqrt_pk = std::sqrt(stats_.radio.pilot_energy());
    const double sigma_a = std::sqrt(stats_.radio.ap_noise_power_w);
    const double sigma_s = std::sqrt(stats_.radio.sat_noise_power_w);

    ChannelRealization rz;
    rz.g_terrestrial.resize(m_aps, k_users);
    rz.ghat_terrestrial.resize(m_aps, k_users);
    rz.g_sat.resize(k_users);
    rz.ghat_sat.resize(k_users);

    // Terrestrial links: g_mk ~ CN(0, beta_mk); despread pilot observation
    // y = sqrt(pK) g + w with w ~ CN(0, sigma_a^2); ghat = coeff * y.
    {
        Rng rng_g(derive_seed(seed, kStreamTerrestrialChannel));
        Rng rng_w(derive_seed(seed, kStreamTerrestrialPilot));
        for (int m = 0; m < m_aps; ++m)
            for (int k = 0; k < k_users; ++k) {
                const std::complex<double> g =
                    std::sqrt(stats_.beta_terrestrial(m, k)) * rng_g.cgaussian();
                const std::complex<double> y = sqrt_pk * g + sigma_a * rng_w.cgaussian();
                rz.g_terrestrial(m, k) = g;
                rz.ghat_terrestrial(m, k) = terrestrial_coeff_(m, k) * y;
            }
    }

    // Satellite links: g_k = gbar_k + L_k w; despread observation
    // Y phi_k = sqrt(pK) g_k + W phi_k; ghat = gbar + sqrt(pK) R Phi (obs - sqrt(pK) gbar).
    for (int k = 0; k < k_users; ++k) {
        Rng rng_g(derive_seed(seed, kStreamSatChannel, static_cast<std::uint64_t>(k)));
        Rng rng_w(derive_seed(seed, kStreamSatPilot, static_cast<std::uint64_t>(k)));
        const Eigen::VectorXcd g = stats_.los[k] + sqrt_corr_[k] * draw_cn(rng_g, n_ant);
        const Eigen::VectorXcd obs = sqrt_pk * g + sigma_s * draw_cn(rng_w, n_ant);
        rz.g_sat[k] = g;
        rz.ghat_sat[k] =
            stats_.los[k] + estimator_[k] * (obs - sqrt_pk * stats_.los[k]);
    }
    return rz;
}

ChannelRealization sample_realization(const ChannelStatistics &stats, std::uint64_t seed) {
    return ChannelSampler(stats).sample(seed);
}

EstimationErrorMoments estimation_error_moments(const ChannelStatistics &stats,
                                                int trials, std::uint64_t seed) {
    if (trials < 10000)
        throw std::invalid_argument("estimation_error_moments: need at least 1e4 trials");
    const int m_aps = stats.num_aps();
    const int k_users = stats.num_users();
    const int n_ant = stats.num_antennas();
    const ChannelSampler sampler(stats);

    std::vector<Eigen::MatrixXcd> err_acc(k_users, Eigen::MatrixXcd::Zero(n_ant, n_ant));
    std::vector<Eigen::MatrixXcd> cross_acc(k_users, Eigen::MatrixXcd::Zero(n_ant, n_ant));
    std::vector<Eigen::MatrixXd> cross_sq(k_users, Eigen::MatrixXd::Zero(n_ant, n_ant));
    Eigen::MatrixXd terr_acc = Eigen::MatrixXd::Zero(m_aps, k_users);

    // The exact mean of ghat_k is gbar_k (Lemma-1 distribution), so the
    // cross covariance is centered on gbar directly instead of a sample mean.
    for (int t = 0; t < trials; ++t) {
        const ChannelRealization rz = sampler.sample(derive_seed(seed, t));
        for (int k = 0; k < k_users; ++k) {
            const Eigen::VectorXcd e = rz.g_sat[k] - rz.ghat_sat[k];
            const Eigen::VectorXcd gc = rz.ghat_sat[k] - stats.los[k];
            err_acc[k] += e * e.adjoint();
            const Eigen::MatrixXcd c = gc * e.adjoint();
            cross_acc[k] += c;
            cross_sq[k] += c.cwiseAbs2();
        }
        for (int m = 0; m < m_aps; ++m)
            for (int k = 0; k < k_users; ++k) {
                const std::complex<double> e =
                    rz.g_terrestrial(m, k) - rz.ghat_terrestrial(m, k);
                terr_acc(m, k) += std::norm(e);
            }
    }

    EstimationErrorMoments out;
    out.trials = trials;
    out.error_cov.resize(k_users);
    out.cross_cov.resize(k_users);
    out.cross_se.resize(k_users);
    const double inv = 1.0 / trials;
    for (int k = 0; k < k_users; ++k) {
        out.error_cov[k] = err_acc[k] * inv;
        out.cross_cov[k] = cross_acc[k] * inv;
        // Entrywise standard error of the sample mean of gc * conj(e).
        Eigen::MatrixXd var =
            cross_sq[k] * inv - out.cross_cov[k].cwiseAbs2();
        out.cross_se[k] = (var.cwiseMax(0.0) / trials).cwiseSqrt();
    }
    out.terrestrial_error_var = terr_acc * inv;
    return out;
}

} // namespace satcell
