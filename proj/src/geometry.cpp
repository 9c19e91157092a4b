// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include "satcell/geometry.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace satcell {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

double noise_power_from_figure(double bandwidth_mhz, double noise_figure_db) {
    if (bandwidth_mhz <= 0.0)
        throw std::invalid_argument("noise_power_from_figure: bandwidth must be positive");
    return kBoltzmann * kReferenceTempK * bandwidth_mhz * 1.0e6 *
           db_to_linear(noise_figure_db);
}

bool Position3D::finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

Position3D operator-(const Position3D &a, const Position3D &b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
}

double norm(const Position3D &p) {
    return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
}

double distance(const Position3D &a, const Position3D &b) { return norm(a - b); }

void RadioConstants::validate() const {
    if (!(carrier_frequency_ghz > 0.0) || !(wavelength_m > 0.0))
        throw std::invalid_argument("RadioConstants: carrier and wavelength must be positive");
    const double expected = kSpeedOfLight / (carrier_frequency_ghz * 1.0e9);
    if (std::abs(wavelength_m - expected) > 1.0e-9 * expected)
        throw std::invalid_argument("RadioConstants: wavelength does not match carrier frequency");
    if (num_pilots <= 0 || coherence_block_len <= num_pilots)
        throw std::invalid_argument("RadioConstants: require tau_c > num_pilots > 0");
    if (!(bandwidth_mhz > 0.0) || !(pilot_power_w > 0.0) || !(ap_noise_power_w > 0.0) ||
        !(sat_noise_power_w > 0.0))
        throw std::invalid_argument("RadioConstants: powers must be positive");
    if (!(earth_radius_m > 0.0) || !(satellite_altitude_m > 0.0))
        throw std::invalid_argument("RadioConstants: radii must be positive");
}

RadioConstants RadioConstants::make(double carrier_frequency_ghz, double bandwidth_mhz,
                                    int coherence_block_len, int num_pilots,
                                    double pilot_power_w, double ap_noise_power_w,
                                    double sat_noise_power_w, double earth_radius_m,
                                    double satellite_altitude_m) {
    RadioConstants rc;
    rc.carrier_frequency_ghz = carrier_frequency_ghz;
    rc.wavelength_m = kSpeedOfLight / (carrier_frequency_ghz * 1.0e9);
    rc.bandwidth_mhz = bandwidth_mhz;
    rc.coherence_block_len = coherence_block_len;
    rc.num_pilots = num_pilots;
    rc.pilot_power_w = pilot_power_w;
    rc.ap_noise_power_w = ap_noise_power_w;
    rc.sat_noise_power_w = sat_noise_power_w;
    rc.earth_radius_m = earth_radius_m;
    rc.satellite_altitude_m = satellite_altitude_m;
    rc.validate();
    return rc;
}

void ArrayGeometry::validate() const {
    if (n_h < 1 || n_v < 1)
        throw std::invalid_argument("ArrayGeometry: antenna counts must be >= 1");
    if (!(d_h_m > 0.0) || !(d_v_m > 0.0))
        throw std::invalid_argument("ArrayGeometry: spacings must be positive");
    if (!(aperture_radius_m > 0.0))
        throw std::invalid_argument("ArrayGeometry: aperture radius must be positive");
}

void LinkGains::validate() const {
    if (shadow_std_terrestrial_db < 0.0 || shadow_std_sat_db < 0.0)
        throw std::invalid_argument("LinkGains: shadow standard deviations must be >= 0");
}

double slant_range(double elevation_rad, double earth_radius_m, double altitude_m) {
    if (elevation_rad < 0.0 || elevation_rad > M_PI_2)
        throw std::domain_error("slant_range: elevation outside [0, pi/2]");
    if (!(earth_radius_m > 0.0) || !(altitude_m > 0.0))
        throw std::domain_error("slant_range: radii must be positive");
    const double s = std::sin(elevation_rad);
    return std::sqrt(earth_radius_m * earth_radius_m * s * s + altitude_m * altitude_m +
                     2.0 * altitude_m * earth_radius_m) -
           earth_radius_m * s;
}

ElevationAzimuth elevation_azimuth(const Position3D &user, const Position3D &satellite) {
    const Position3D d = satellite - user;
    const double r = norm(d);
    if (!(r > 0.0))
        throw std::domain_error("elevation_azimuth: coincident points");
    ElevationAzimuth ea;
    ea.elevation_rad = std::asin(d.z / r);
    ea.azimuth_rad = std::atan2(d.y, d.x);
    return ea;
}

double terrestrial_pathloss_db(double g_m_dbi, double g_k_dbi, double f_c_ghz,
                               double distance_m, double shadow_db) {
    if (!(distance_m > 0.0))
        throw std::domain_error("terrestrial_pathloss_db: distance must be positive");
    if (!(f_c_ghz > 0.0))
        throw std::domain_error("terrestrial_pathloss_db: carrier must be positive");
    return g_m_dbi + g_k_dbi - 8.50 - 20.0 * std::log10(f_c_ghz) -
           38.63 * std::log10(distance_m) + shadow_db;
}

double beam_gain(double offset_angle_rad, double aperture_radius_m, double wavelength_m) {
    if (offset_angle_rad < 0.0 || offset_angle_rad > M_PI_2)
        throw std::domain_error("beam_gain: offset angle outside [0, pi/2]");
    if (!(aperture_radius_m > 0.0) || !(wavelength_m > 0.0))
        throw std::domain_error("beam_gain: radius and wavelength must be positive");
    const double u = 2.0 * M_PI / wavelength_m * aperture_radius_m * std::sin(offset_angle_rad);
    // J1(u)/u -> 1/2 as u -> 0; switch to the series head below the point
    // where the direct quotient loses accuracy.
    double ratio;
    if (u < 1.0e-6) {
        ratio = 0.5 - u * u / 16.0;
    } else {
        ratio = std::cyl_bessel_j(1.0, u) / u;
    }
    return 4.0 * ratio * ratio;
}

double satellite_pathloss_db(double g_dbi, double g_k_dbi, double beam_gain_db,
                             double f_c_ghz, double slant_range_m, double shadow_db) {
    if (!(slant_range_m > 0.0))
        throw std::domain_error("satellite_pathloss_db: distance must be positive");
    if (!(f_c_ghz > 0.0))
        throw std::domain_error("satellite_pathloss_db: carrier must be positive");
    return g_dbi + g_k_dbi + beam_gain_db - 32.45 - 20.0 * std::log10(f_c_ghz) -
           20.0 * std::log10(slant_range_m) + shadow_db;
}

Eigen::Vector3d wave_vector(double elevation_rad, double azimuth_rad, double wavelength_m) {
    if (!(wavelength_m > 0.0))
        throw std::domain_error("wave_vector: wavelength must be positive");
    const double c = 2.0 * M_PI / wavelength_m;
    const double ct = std::cos(elevation_rad);
    const double st = std::sin(elevation_rad);
    return {c * ct * std::cos(azimuth_rad), c * st * std::cos(azimuth_rad), c * st};
}

Eigen::Vector3d antenna_offset(int n, const ArrayGeometry &array) {
    if (n < 1 || n > array.size())
        throw std::out_of_range("antenna_offset: index outside 1..N");
    const int h = (n - 1) % array.n_h;
    const int v = (n - 1) / array.n_h;
    return {0.0, h * array.d_h_m, v * array.d_v_m};
}

Eigen::VectorXcd los_vector(double elevation_rad, double azimuth_rad, double kappa,
                            double beta_linear, const ArrayGeometry &array,
                            double wavelength_m) {
    if (!(beta_linear > 0.0))
        throw std::invalid_argument("los_vector: beta must be positive");
    if (kappa < 0.0)
        throw std::invalid_argument("los_vector: kappa must be >= 0");
    const int n_ant = array.size();
    const double amp = std::sqrt(kappa * beta_linear / (kappa + 1.0));
    const Eigen::Vector3d wv = wave_vector(elevation_rad, azimuth_rad, wavelength_m);
    Eigen::VectorXcd g(n_ant);
    for (int n = 1; n <= n_ant; ++n) {
        const double phase = wv.dot(antenna_offset(n, array));
        g(n - 1) = amp * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    return g;
}

namespace {

// One-axis exponential correlation factor, unit diagonal.
Eigen::MatrixXd exponential_factor(int n, double r) {
    if (!(std::abs(r) < 1.0))
        throw std::invalid_argument("correlation_matrix: require |r| < 1");
    Eigen::MatrixXd f(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            f(a, b) = std::pow(r, std::abs(a - b));
    return f;
}

} // namespace

Eigen::MatrixXcd correlation_matrix(double beta_linear, double kappa, double r_h,
                                    double r_v, const ArrayGeometry &array) {
    if (!(beta_linear > 0.0))
        throw std::invalid_argument("correlation_matrix: beta must be positive");
    if (kappa < 0.0)
        throw std::invalid_argument("correlation_matrix: kappa must be >= 0");
    const Eigen::MatrixXd fh = exponential_factor(array.n_h, r_h);
    const Eigen::MatrixXd fv = exponential_factor(array.n_v, r_v);
    const int n_ant = array.size();
    const double scale = beta_linear / (kappa + 1.0);
    // Element n-1 = v*N_H + h, so the horizontal factor lives on the fast
    // index: R = scale * kron(F_V, F_H).
    Eigen::MatrixXcd r(n_ant, n_ant);
    for (int v1 = 0; v1 < array.n_v; ++v1)
        for (int v2 = 0; v2 < array.n_v; ++v2)
            for (int h1 = 0; h1 < array.n_h; ++h1)
                for (int h2 = 0; h2 < array.n_h; ++h2)
                    r(v1 * array.n_h + h1, v2 * array.n_h + h2) =
                        scale * fv(v1, v2) * fh(h1, h2);
    return r;
}

} // namespace satcell
