// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef SATCELL_GEOMETRY_HPP
#define SATCELL_GEOMETRY_HPP

#include <Eigen/Dense>

namespace satcell {

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kBoltzmann = 1.380649e-23;   // J/K
inline constexpr double kReferenceTempK = 290.0;
inline constexpr double kEarthRadiusM = 6371000.0;

double db_to_linear(double db);
double linear_to_db(double linear);

// Thermal noise power in watts for a given bandwidth and noise figure,
// sigma^2 = k_B * T0 * B * NF.
double noise_power_from_figure(double bandwidth_mhz, double noise_figure_db);

/// Cartesian point, meters, right-handed frame with z up.
struct Position3D {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool finite() const;
};

Position3D operator-(const Position3D &a, const Position3D &b);
double norm(const Position3D &p);
double distance(const Position3D &a, const Position3D &b);

/// System-wide radio constants shared by every link of a scenario.
struct RadioConstants {
    double carrier_frequency_ghz = 20.0;
    double wavelength_m = kSpeedOfLight / 20.0e9;
    double bandwidth_mhz = 100.0;
    int coherence_block_len = 10000; // tau_c, subcarriers per block
    int num_pilots = 1;              // tau_p, equals the user count K
    double pilot_power_w = 100.0;    // p, per pilot symbol
    double ap_noise_power_w = 2.0066945934700004e-12; // sigma_a^2 (NF 7 dB, B 100 MHz)
    double sat_noise_power_w = 5.278144558706421e-13; // sigma_s^2 (NF 1.2 dB)
    double earth_radius_m = kEarthRadiusM;
    double satellite_altitude_m = 400.0e3; // z_0

    // Total despread pilot energy p*K; the "pK" of every closed form.
    double pilot_energy() const { return pilot_power_w * num_pilots; }

    // Throws std::invalid_argument when an invariant is broken
    // (wavelength/carrier mismatch, tau_c <= tau_p, nonpositive powers).
    void validate() const;

    static RadioConstants make(double carrier_frequency_ghz, double bandwidth_mhz,
                               int coherence_block_len, int num_pilots,
                               double pilot_power_w, double ap_noise_power_w,
                               double sat_noise_power_w,
                               double earth_radius_m = kEarthRadiusM,
                               double satellite_altitude_m = 400.0e3);
};

/// Rectangular N_H x N_V satellite array plus its aperture radius for the
/// circular-aperture beam pattern.
struct ArrayGeometry {
    int n_h = 1;
    int n_v = 1;
    double d_h_m = 0.0075;
    double d_v_m = 0.0075;
    double aperture_radius_m = 0.15;

    int size() const { return n_h * n_v; }
    void validate() const;
};

/// Antenna gains and shadow-fading spreads, all in dB domain.
struct LinkGains {
    double ap_gain_dbi = 10.0;
    double user_gain_dbi = 10.0;
    double sat_gain_dbi = 26.9;
    double shadow_std_terrestrial_db = 8.0;
    double shadow_std_sat_db = 4.0;

    void validate() const;
};

// Satellite-to-user distance from the elevation angle:
//   d = sqrt(R_E^2 sin^2(theta) + z0^2 + 2 z0 R_E) - R_E sin(theta).
// Collapses to z0 at zenith. Throws std::domain_error outside
// 0 <= theta <= pi/2 or for nonpositive radii.
double slant_range(double elevation_rad, double earth_radius_m, double altitude_m);

struct ElevationAzimuth {
    double elevation_rad = 0.0; // in [-pi/2, pi/2]
    double azimuth_rad = 0.0;   // in (-pi, pi]
};

// Elevation/azimuth of `satellite` as seen from `user` in the global frame.
ElevationAzimuth elevation_azimuth(const Position3D &user, const Position3D &satellite);

// Terrestrial large-scale gain in dB (3GPP rural, f_c in GHz, d in m):
//   beta = G_m + G_k - 8.50 - 20 log10(f_c) - 38.63 log10(d) + shadow.
double terrestrial_pathloss_db(double g_m_dbi, double g_k_dbi, double f_c_ghz,
                               double distance_m, double shadow_db);

// Normalized circular-aperture pattern 4 |J1(u)/u|^2 with
// u = (2 pi / lambda) * a * sin(phi); continuous limit 1 at phi = 0.
double beam_gain(double offset_angle_rad, double aperture_radius_m,
                 double wavelength_m);

// Satellite large-scale gain in dB (f_c in GHz, d in m):
//   beta = G + G_k + Gtilde - 32.45 - 20 log10(f_c) - 20 log10(d) + shadow.
double satellite_pathloss_db(double g_dbi, double g_k_dbi, double beam_gain_db,
                             double f_c_ghz, double slant_range_m, double shadow_db);

// Wave vector (2 pi / lambda) [cos(th)cos(om), sin(th)cos(om), sin(th)]^T.
Eigen::Vector3d wave_vector(double elevation_rad, double azimuth_rad,
                            double wavelength_m);

// Position of array element n (1-based):
//   c_n = [0, mod(n-1, N_H) d_H, floor((n-1)/N_H) d_V]^T.
Eigen::Vector3d antenna_offset(int n, const ArrayGeometry &array);

// Rician LoS component: every entry has magnitude sqrt(kappa beta / (kappa+1))
// and phase exp(j l^T c_n).
Eigen::VectorXcd los_vector(double elevation_rad, double azimuth_rad, double kappa,
                            double beta_linear, const ArrayGeometry &array,
                            double wavelength_m);

// Spatial correlation matrix (beta / (kappa+1)) * kron over the two array
// axes of exponential factors [R]_{ab} = r^|a-b|; r = 0 gives identity
// factors. Hermitian PSD with trace N beta / (kappa+1).
Eigen::MatrixXcd correlation_matrix(double beta_linear, double kappa, double r_h,
                                    double r_v, const ArrayGeometry &array);

} // namespace satcell

#endif
