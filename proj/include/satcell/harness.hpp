// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef SATCELL_HARNESS_HPP
#define SATCELL_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "satcell/power_control.hpp"

namespace satcell {

enum class ExperimentKind { Validate, Cdf, MaxMin, Congestion };

ExperimentKind experiment_kind_from_string(const std::string &name);
const char *to_string(ExperimentKind kind);

/// Raised on malformed or inconsistent configuration input; the CLI maps it
/// to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything needed to reproduce an experiment: network sizes, radio
/// constants, channel defaults, seeds, and per-experiment parameters.
/// Units are fixed per field: GHz, MHz, m, km, dB, dBi, dBW, W.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Cdf;
    int drops = 100;
    int users_per_drop = 4; // K
    int aps = 8;            // M; 0 encodes satellite-only
    int n_h = 4;
    int n_v = 4;
    double area_km2 = 20.0;
    Position3D satellite_position_m{300.0e3, 300.0e3, 400.0e3};
    Position3D beam_center_m{0.0, 0.0, 0.0};

    double carrier_frequency_ghz = 20.0;
    double bandwidth_mhz = 100.0;
    int coherence_block_len = 10000;
    double pilot_power_w = 100.0;
    double ap_noise_figure_db = 7.0;
    double sat_noise_figure_db = 1.2;
    std::optional<double> ap_noise_power_w;  // direct overrides of the figures
    std::optional<double> sat_noise_power_w;
    double sat_noise_multiplier = 1.0; // imperfect feeder/sync noise-floor scale
    double earth_radius_m = kEarthRadiusM;

    LinkGains gains;
    double kappa = 10.0;
    double corr_h = 0.5;
    double corr_v = 0.5;
    std::optional<double> spacing_h_m;       // default lambda / 2
    std::optional<double> spacing_v_m;       // default lambda / 2
    std::optional<double> aperture_radius_m; // default 10 lambda
    double ap_height_m = 10.0;
    double user_height_m = 1.5;
    double max_power_dbw = 20.0;

    std::uint64_t master_seed = 1;
    int threads = 1;

    int mc_trials = 10000;
    int mc_drops = 4; // leading drops that also get the Monte Carlo estimator

    SolverOptions solver;
    std::vector<double> target_rates_mbps{35.0, 40.0, 45.0, 50.0};

    // Sweeps for the antenna-gain/noise-floor experiment; active only when
    // the gain list is non-empty.
    std::vector<double> terrestrial_gain_sweep_dbi;
    std::vector<double> sat_noise_multipliers{1.0};

    static ExperimentConfig desk_profile();
    static ExperimentConfig paper_profile();

    // Applies the fields present in a JSON document on top of *this.
    // Unknown keys raise ConfigError.
    void apply_json_text(const std::string &text);
    std::string to_json_text() const;

    RadioConstants make_radio() const;
    ArrayGeometry make_array() const;
    void validate() const;
};

// Deterministic drop generator: AP and user positions i.i.d. uniform over
// the square, per-link log-normal shadow fading, large-scale gains from the
// geometry module. Pure function of (config, drop_index).
Scenario generate_drop(const ExperimentConfig &config, int drop_index);

struct CsvTable {
    std::string filename;
    std::string header;
    std::vector<std::string> rows;
};

/// Outcome of a batch experiment: per-drop metric arrays (NaN for failed
/// drops), summary scalars, and the CSV payloads to be written.
struct AggregateResult {
    int drops = 0;
    int failed = 0;
    std::vector<std::string> drop_errors; // size drops, empty = succeeded
    std::map<std::string, std::vector<double>> metrics;
    std::map<std::string, double> scalars;
    std::vector<CsvTable> tables;
    std::string headline;
    double wall_seconds = 0.0;
};

AggregateResult run_cdf_experiment(const ExperimentConfig &config);
AggregateResult run_maxmin_experiment(const ExperimentConfig &config);
AggregateResult run_congestion_experiment(const ExperimentConfig &config);
AggregateResult run_validation(const ExperimentConfig &config);
AggregateResult run_stats_dump(const ExperimentConfig &config, int drop_index = 0);

// Dispatch on config.kind.
AggregateResult run_experiment(const ExperimentConfig &config);

void write_outputs(const AggregateResult &result, const std::filesystem::path &out_dir);

// Empirical CDF over the successful entries of `values`: sample i of the
// sorted list gets probability (i + 1) / n.
std::vector<std::pair<double, double>> empirical_cdf(const std::vector<double> &values);

// Serializes a double with 9 significant digits, the CSV contract.
std::string format_value(double v);

} // namespace satcell

#endif
