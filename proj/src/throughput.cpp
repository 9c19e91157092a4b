// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include "satcell/throughput.hpp"

#include <cmath>
#include <stdexcept>

#include "satcell/parallel.hpp"
#include "satcell/rng.hpp"
#include "satcell/summation.hpp"

namespace satcell {

const char *to_string(SystemMode mode) {
    switch (mode) {
    case SystemMode::Hybrid:
        return "hybrid";
    case SystemMode::TerrestrialOnly:
        return "terrestrial";
    case SystemMode::SatelliteOnly:
        return "satellite";
    }
    return "unknown";
}

Combiner make_mrc_combiner(const ChannelRealization &rz) {
    Combiner c;
    c.rule = CombinerRule::Mrc;
    c.sat = rz.ghat_sat;
    c.ap = rz.ghat_terrestrial;
    return c;
}

Combiner make_mmse_combiner(const ChannelRealization &rz, double p_max_w,
                            double sat_noise_power_w) {
    if (!(p_max_w > 0.0))
        throw std::invalid_argument("make_mmse_combiner: P_max must be positive");
    const int k_users = static_cast<int>(rz.ghat_sat.size());
    const double reg = k_users * sat_noise_power_w / p_max_w;

    Combiner c;
    c.rule = CombinerRule::MmseStyle;
    c.sat.resize(k_users);

    const int n_ant = k_users > 0 ? static_cast<int>(rz.ghat_sat[0].size()) : 0;
    if (n_ant > 0) {
        Eigen::MatrixXcd ghat(n_ant, k_users);
        for (int k = 0; k < k_users; ++k)
            ghat.col(k) = rz.ghat_sat[k];
        Eigen::MatrixXcd gram = ghat.adjoint() * ghat;
        gram.diagonal().array() += reg;
        // U = Ghat A^-1 with A Hermitian positive definite.
        const Eigen::MatrixXcd u =
            Eigen::LDLT<Eigen::MatrixXcd>(gram).solve(ghat.adjoint()).adjoint();
        for (int k = 0; k < k_users; ++k)
            c.sat[k] = u.col(k);
    }

    const int m_aps = static_cast<int>(rz.ghat_terrestrial.rows());
    if (m_aps > 0) {
        Eigen::MatrixXcd gram = rz.ghat_terrestrial.adjoint() * rz.ghat_terrestrial;
        gram.diagonal().array() += reg;
        c.ap = Eigen::LDLT<Eigen::MatrixXcd>(gram)
                   .solve(rz.ghat_terrestrial.adjoint())
                   .adjoint();
    } else {
        c.ap.resize(0, k_users);
    }
    return c;
}

std::complex<double> overall_channel(const Combiner &comb, const ChannelRealization &rz,
                                     int k, int k_prime, SystemMode mode) {
    const int k_users = static_cast<int>(rz.g_sat.size());
    if (k < 0 || k >= k_users || k_prime < 0 || k_prime >= k_users)
        throw std::out_of_range("overall_channel: user index out of range");
    std::complex<double> z = 0.0;
    if (mode != SystemMode::TerrestrialOnly)
        z += comb.sat[k].dot(rz.g_sat[k_prime]); // u_k^H g_k'
    if (mode != SystemMode::SatelliteOnly) {
        KahanSumC acc;
        const int m_aps = static_cast<int>(rz.g_terrestrial.rows());
        for (int m = 0; m < m_aps; ++m)
            acc.add(std::conj(comb.ap(m, k)) * rz.g_terrestrial(m, k_prime));
        z += acc.value();
    }
    return z;
}

double SinrDecomposition::mutual_interference(const Eigen::VectorXd &rho, int k) const {
    KahanSumD acc;
    for (int kp = 0; kp < num_users(); ++kp)
        acc.add(interference(k, kp) * rho(kp));
    return acc.value();
}

double SinrDecomposition::sinr_user(const Eigen::VectorXd &rho, int k) const {
    const double num = rho(k) * signal_coeff(k) * signal_coeff(k);
    if (num == 0.0)
        return 0.0;
    return num / (mutual_interference(rho, k) + noise(k));
}

Eigen::VectorXd SinrDecomposition::sinr(const Eigen::VectorXd &rho) const {
    Eigen::VectorXd out(num_users());
    for (int k = 0; k < num_users(); ++k)
        out(k) = sinr_user(rho, k);
    return out;
}

SinrDecomposition make_sinr_decomposition(const ChannelStatistics &stats,
                                          SystemMode mode) {
    const int k_users = stats.num_users();
    const int m_aps = stats.num_aps();
    const double pk = stats.radio.pilot_energy();
    const double sigma_a2 = stats.radio.ap_noise_power_w;
    const double sigma_s2 = stats.radio.sat_noise_power_w;
    const bool with_sat = mode != SystemMode::TerrestrialOnly;
    const bool with_terr = mode != SystemMode::SatelliteOnly;

    Eigen::VectorXd sat_signal = Eigen::VectorXd::Zero(k_users);
    Eigen::VectorXd terr_signal = Eigen::VectorXd::Zero(k_users);
    for (int k = 0; k < k_users; ++k) {
        sat_signal(k) = stats.los_norm_sq(k) + pk * stats.trace_theta(k);
        KahanSumD sum_gamma;
        for (int m = 0; m < m_aps; ++m)
            sum_gamma.add(stats.gamma(m, k));
        terr_signal(k) = sum_gamma.value();
    }

    SinrDecomposition d;
    d.mode = mode;
    d.signal_coeff = Eigen::VectorXd::Zero(k_users);
    d.interference = Eigen::MatrixXd::Zero(k_users, k_users);
    d.noise = Eigen::VectorXd::Zero(k_users);

    for (int k = 0; k < k_users; ++k) {
        d.signal_coeff(k) =
            (with_sat ? sat_signal(k) : 0.0) + (with_terr ? terr_signal(k) : 0.0);
        d.noise(k) = (with_sat ? sigma_s2 * sat_signal(k) : 0.0) +
                     (with_terr ? sigma_a2 * terr_signal(k) : 0.0);
        for (int kp = 0; kp < k_users; ++kp) {
            KahanSumD c;
            if (with_sat) {
                if (kp != k)
                    c.add(std::norm(stats.los[k].dot(stats.los[kp])));
                c.add(pk * (stats.los[kp].dot(stats.theta[k] * stats.los[kp])).real());
                c.add((stats.los[k].dot(stats.corr[kp] * stats.los[k])).real());
                // tr(R_k' Theta_k); both Hermitian so the product trace is real.
                c.add(pk * stats.corr[kp].cwiseProduct(stats.theta[k].conjugate()).sum().real());
            }
            if (with_terr) {
                KahanSumD t;
                for (int m = 0; m < m_aps; ++m)
                    t.add(stats.gamma(m, k) * stats.beta_terrestrial(m, kp));
                c.add(t.value());
            }
            d.interference(k, kp) = c.value();
        }
    }
    return d;
}

double ergodic_rate(double sinr, const RadioConstants &radio, int k_users) {
    if (radio.coherence_block_len <= k_users)
        throw std::invalid_argument("ergodic_rate: require tau_c > K");
    if (sinr < 0.0)
        throw std::invalid_argument("ergodic_rate: SINR must be >= 0");
    const double prelog = 1.0 - static_cast<double>(k_users) / radio.coherence_block_len;
    return prelog * radio.bandwidth_mhz * std::log2(1.0 + sinr);
}

double target_sinr_for_rate(double rate_mbps, const RadioConstants &radio, int k_users) {
    if (radio.coherence_block_len <= k_users)
        throw std::invalid_argument("target_sinr_for_rate: require tau_c > K");
    if (rate_mbps < 0.0)
        throw std::invalid_argument("target_sinr_for_rate: rate must be >= 0");
    const double prelog = 1.0 - static_cast<double>(k_users) / radio.coherence_block_len;
    return std::exp2(rate_mbps / (prelog * radio.bandwidth_mhz)) - 1.0;
}

ThroughputReport sinr_closed_form(const ChannelStatistics &stats,
                                  const Eigen::VectorXd &rho, SystemMode mode) {
    const int k_users = stats.num_users();
    if (rho.size() != k_users)
        throw std::invalid_argument("sinr_closed_form: rho must have K entries");
    if ((rho.array() < 0.0).any())
        throw std::invalid_argument("sinr_closed_form: negative power");

    const SinrDecomposition d = make_sinr_decomposition(stats, mode);
    ThroughputReport rep;
    rep.mode = mode;
    rep.sinr.resize(k_users);
    rep.rate_mbps.resize(k_users);
    rep.signal.resize(k_users);
    rep.interference.resize(k_users);
    rep.noise = d.noise;
    for (int k = 0; k < k_users; ++k) {
        rep.signal(k) = rho(k) * d.signal_coeff(k) * d.signal_coeff(k);
        rep.interference(k) = d.mutual_interference(rho, k);
        rep.sinr(k) = d.sinr_user(rho, k);
        rep.rate_mbps(k) = ergodic_rate(rep.sinr(k), stats.radio, k_users);
    }
    return rep;
}

namespace {

// Per-user running sums for one block of Monte Carlo trials.
struct BlockAccumulator {
    std::vector<KahanSumC> mean_z;       // z_kk
    std::vector<KahanSumD> interference; // sum_k' rho_k' E{|z_kk'|^2 | estimates}
    std::vector<KahanSumD> sat_norm;     // ||u_k||^2
    std::vector<KahanSumD> ap_norm;      // sum_m |u_mk|^2
    int count = 0;

    explicit BlockAccumulator(int k_users)
        : mean_z(k_users), interference(k_users), sat_norm(k_users), ap_norm(k_users) {}
};

// Second moments E{|z_kk'|^2} are averaged as conditional expectations given
// the estimate draw (the combiner is a deterministic function of the
// estimates, and the estimation errors and cross-user channels are
// independent of them by the Lemma-1 decomposition). Identical expectation to
// raw |z|^2 averaging, far lower variance. Under MRC, u_k depends only on
// user k's own estimates, so the k' != k terms can additionally be averaged
// over user k''s estimate distribution.
struct ConditionalMoments {
    const ChannelStatistics &stats;
    std::vector<Eigen::MatrixXcd> err_cov; // R_k - pK Theta_k
    SystemMode mode;
    bool deep; // MRC: condition on user k's estimates only

    ConditionalMoments(const ChannelStatistics &s, SystemMode m, CombinerRule rule)
        : stats(s), mode(m), deep(rule == CombinerRule::Mrc) {
        const double pk = stats.radio.pilot_energy();
        err_cov.reserve(stats.num_users());
        for (int k = 0; k < stats.num_users(); ++k)
            err_cov.push_back(stats.corr[k] - pk * stats.theta[k]);
    }

    bool with_sat() const { return mode != SystemMode::TerrestrialOnly; }
    bool with_terr() const { return mode != SystemMode::SatelliteOnly; }

    std::complex<double> conditional_mean(const Combiner &comb,
                                          const ChannelRealization &rz, int k,
                                          int kp) const {
        std::complex<double> z = 0.0;
        if (with_sat())
            z += comb.sat[k].dot(rz.ghat_sat[kp]);
        if (with_terr()) {
            KahanSumC acc;
            for (int m = 0; m < comb.ap.rows(); ++m)
                acc.add(std::conj(comb.ap(m, k)) * rz.ghat_terrestrial(m, kp));
            z += acc.value();
        }
        return z;
    }

    double conditional_second_moment(const Combiner &comb, const ChannelRealization &rz,
                                     int k, int kp) const {
        KahanSumD acc;
        if (deep && kp != k) {
            if (with_sat()) {
                acc.add(std::norm(comb.sat[k].dot(stats.los[kp])));
                acc.add((comb.sat[k].dot(stats.corr[kp] * comb.sat[k])).real());
            }
            if (with_terr())
                for (int m = 0; m < comb.ap.rows(); ++m)
                    acc.add(std::norm(comb.ap(m, k)) * stats.beta_terrestrial(m, kp));
            return acc.value();
        }
        acc.add(std::norm(conditional_mean(comb, rz, k, kp)));
        if (with_sat())
            acc.add((comb.sat[k].dot(err_cov[kp] * comb.sat[k])).real());
        if (with_terr())
            for (int m = 0; m < comb.ap.rows(); ++m)
                acc.add(std::norm(comb.ap(m, k)) *
                        (stats.beta_terrestrial(m, kp) - stats.gamma(m, kp)));
        return acc.value();
    }
};

struct MeanSet {
    std::vector<std::complex<double>> z;
    std::vector<double> inter, sat_norm, ap_norm;
};

MeanSet block_means(const BlockAccumulator &b, int k_users) {
    MeanSet m;
    m.z.resize(k_users);
    m.inter.resize(k_users);
    m.sat_norm.resize(k_users);
    m.ap_norm.resize(k_users);
    const double inv = 1.0 / b.count;
    for (int k = 0; k < k_users; ++k) {
        m.z[k] = b.mean_z[k].value() * inv;
        m.inter[k] = b.interference[k].value() * inv;
        m.sat_norm[k] = b.sat_norm[k].value() * inv;
        m.ap_norm[k] = b.ap_norm[k].value() * inv;
    }
    return m;
}

double assemble_sinr(const MeanSet &m, const Eigen::VectorXd &rho, SystemMode mode,
                     double sigma_a2, double sigma_s2, int k) {
    const double num = rho(k) * std::norm(m.z[k]);
    double den = m.inter[k] - num;
    if (mode != SystemMode::TerrestrialOnly)
        den += sigma_s2 * m.sat_norm[k];
    if (mode != SystemMode::SatelliteOnly)
        den += sigma_a2 * m.ap_norm[k];
    return den > 0.0 ? num / den : 0.0;
}

} // namespace

MonteCarloSinr sinr_monte_carlo(const ChannelStatistics &stats,
                                const Eigen::VectorXd &rho, SystemMode mode,
                                const MonteCarloOptions &opts) {
    const int k_users = stats.num_users();
    if (rho.size() != k_users)
        throw std::invalid_argument("sinr_monte_carlo: rho must have K entries");
    if (opts.trials < 1000)
        throw std::invalid_argument("sinr_monte_carlo: need at least 1e3 trials");
    const int block_size = std::max(1, opts.block_size);
    const int n_blocks = (opts.trials + block_size - 1) / block_size;

    const ChannelSampler sampler(stats);
    const double sigma_a2 = stats.radio.ap_noise_power_w;
    const double sigma_s2 = stats.radio.sat_noise_power_w;

    const ConditionalMoments cond(stats, mode, opts.rule);
    std::vector<BlockAccumulator> blocks(n_blocks, BlockAccumulator(k_users));
    parallel_for(n_blocks, opts.threads, [&](int b) {
        BlockAccumulator &acc = blocks[b];
        const int lo = b * block_size;
        const int hi = std::min(opts.trials, lo + block_size);
        for (int t = lo; t < hi; ++t) {
            const ChannelRealization rz =
                sampler.sample(derive_seed(opts.seed, static_cast<std::uint64_t>(t)));
            const Combiner comb =
                opts.rule == CombinerRule::Mrc
                    ? make_mrc_combiner(rz)
                    : make_mmse_combiner(rz, opts.p_max_w, sigma_s2);
            for (int k = 0; k < k_users; ++k) {
                KahanSumD inter;
                for (int kp = 0; kp < k_users; ++kp)
                    inter.add(rho(kp) * cond.conditional_second_moment(comb, rz, k, kp));
                acc.mean_z[k].add(cond.conditional_mean(comb, rz, k, k));
                acc.interference[k].add(inter.value());
                acc.sat_norm[k].add(comb.sat[k].squaredNorm());
                KahanSumD apn;
                for (int m = 0; m < comb.ap.rows(); ++m)
                    apn.add(std::norm(comb.ap(m, k)));
                acc.ap_norm[k].add(apn.value());
            }
            ++acc.count;
        }
    });

    // Deterministic reduction in fixed block order.
    BlockAccumulator total(k_users);
    for (const BlockAccumulator &b : blocks) {
        for (int k = 0; k < k_users; ++k) {
            total.mean_z[k].merge(b.mean_z[k]);
            total.interference[k].merge(b.interference[k]);
            total.sat_norm[k].merge(b.sat_norm[k]);
            total.ap_norm[k].merge(b.ap_norm[k]);
        }
        total.count += b.count;
    }

    MonteCarloSinr out;
    out.trials = opts.trials;
    out.sinr.resize(k_users);
    out.standard_error.resize(k_users);
    const MeanSet global = block_means(total, k_users);
    for (int k = 0; k < k_users; ++k)
        out.sinr(k) = assemble_sinr(global, rho, mode, sigma_a2, sigma_s2, k);

    // Standard error from the dispersion of per-block SINR estimates.
    std::vector<MeanSet> per_block;
    per_block.reserve(n_blocks);
    for (const BlockAccumulator &b : blocks)
        per_block.push_back(block_means(b, k_users));
    for (int k = 0; k < k_users; ++k) {
        KahanSumD sum, sum_sq;
        for (const MeanSet &m : per_block) {
            const double s = assemble_sinr(m, rho, mode, sigma_a2, sigma_s2, k);
            sum.add(s);
            sum_sq.add(s * s);
        }
        const double mean = sum.value() / n_blocks;
        const double var =
            n_blocks > 1
                ? std::max(0.0, (sum_sq.value() - n_blocks * mean * mean) / (n_blocks - 1))
                : 0.0;
        out.standard_error(k) = std::sqrt(var / n_blocks);
    }
    return out;
}

MomentOracles moment_oracles(const ChannelStatistics &stats, int k) {
    if (k < 0 || k >= stats.num_users())
        throw std::out_of_range("moment_oracles: user index out of range");
    const double pk = stats.radio.pilot_energy();
    const Eigen::MatrixXcd &r = stats.corr[k];
    const Eigen::MatrixXcd &theta = stats.theta[k];
    const Eigen::VectorXcd &gbar = stats.los[k];

    const double norm_sq = stats.los_norm_sq(k);
    const double tr_theta = stats.trace_theta(k);
    const double g_theta_g = (gbar.dot(theta * gbar)).real();
    const double g_r_g = (gbar.dot(r * gbar)).real();
    const double tr_r_theta = r.cwiseProduct(theta.conjugate()).sum().real();
    const double tr_theta_sq = theta.cwiseProduct(theta.conjugate()).sum().real();

    KahanSumD sum_gamma, sum_gamma_sq, sum_gb;
    for (int m = 0; m < stats.num_aps(); ++m) {
        const double g = stats.gamma(m, k);
        sum_gamma.add(g);
        sum_gamma_sq.add(g * g);
        sum_gb.add(g * (stats.beta_terrestrial(m, k) - g));
    }
    const double sg = sum_gamma.value();

    MomentOracles mo;
    const double s_sat = norm_sq + pk * tr_theta;
    mo.e_a_sq = s_sat * s_sat + 2.0 * pk * g_theta_g + pk * pk * tr_theta_sq;
    mo.e_atilde_sq = g_r_g - pk * g_theta_g + pk * tr_r_theta - pk * pk * tr_theta_sq;
    mo.e_b_sq = sum_gamma_sq.value() + sg * sg;
    mo.e_btilde_sq = sum_gb.value();
    mo.e_a_b = s_sat * sg;
    mo.e_z_sq = mo.e_a_sq + mo.e_atilde_sq + mo.e_b_sq + mo.e_btilde_sq + 2.0 * mo.e_a_b;
    mo.mean_z = s_sat + sg;
    return mo;
}

double cross_gain_moment(const ChannelStatistics &stats, int k, int k_prime) {
    const int k_users = stats.num_users();
    if (k < 0 || k >= k_users || k_prime < 0 || k_prime >= k_users || k == k_prime)
        throw std::out_of_range("cross_gain_moment: need two distinct user indices");
    const double pk = stats.radio.pilot_energy();
    KahanSumD acc;
    acc.add(std::norm(stats.los[k].dot(stats.los[k_prime])));
    acc.add(pk * (stats.los[k_prime].dot(stats.theta[k] * stats.los[k_prime])).real());
    acc.add((stats.los[k].dot(stats.corr[k_prime] * stats.los[k])).real());
    acc.add(pk * stats.corr[k_prime].cwiseProduct(stats.theta[k].conjugate()).sum().real());
    KahanSumD t;
    for (int m = 0; m < stats.num_aps(); ++m)
        t.add(stats.gamma(m, k) * stats.beta_terrestrial(m, k_prime));
    acc.add(t.value());
    return acc.value();
}

} // namespace satcell
