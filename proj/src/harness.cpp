// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include "satcell/harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "satcell/parallel.hpp"
#include "satcell/rng.hpp"
#include "satcell/summation.hpp"

namespace satcell {

using nlohmann::json;

namespace {

// Seed-stream tags inside one drop.
enum : std::uint64_t {
    kTagDrop = 0xd209,
    kTagUserPositions = 1,
    kTagApPositions = 2,
    kTagShadowTerrestrial = 3,
    kTagShadowSat = 4,
    kTagMonteCarlo = 5,
};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

constexpr std::array<SystemMode, 3> kModes = {
    SystemMode::Hybrid, SystemMode::TerrestrialOnly, SystemMode::SatelliteOnly};

} // namespace

ExperimentKind experiment_kind_from_string(const std::string &name) {
    if (name == "validate")
        return ExperimentKind::Validate;
    if (name == "cdf")
        return ExperimentKind::Cdf;
    if (name == "maxmin")
        return ExperimentKind::MaxMin;
    if (name == "congestion")
        return ExperimentKind::Congestion;
    throw ConfigError("unknown experiment kind: " + name);
}

const char *to_string(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::Validate:
        return "validate";
    case ExperimentKind::Cdf:
        return "cdf";
    case ExperimentKind::MaxMin:
        return "maxmin";
    case ExperimentKind::Congestion:
        return "congestion";
    }
    return "unknown";
}

ExperimentConfig ExperimentConfig::desk_profile() {
    ExperimentConfig c;
    c.drops = 100;
    c.users_per_drop = 4;
    c.aps = 8;
    c.n_h = 4;
    c.n_v = 4;
    c.mc_trials = 10000;
    c.mc_drops = 4;
    return c;
}

ExperimentConfig ExperimentConfig::paper_profile() {
    ExperimentConfig c;
    c.drops = 1000;
    c.users_per_drop = 20;
    c.aps = 40;
    c.n_h = 10;
    c.n_v = 10;
    c.mc_trials = 10000;
    c.mc_drops = 0; // Monte Carlo subset off by default at paper scale
    return c;
}

RadioConstants ExperimentConfig::make_radio() const {
    const double ap_noise = ap_noise_power_w
                                ? *ap_noise_power_w
                                : noise_power_from_figure(bandwidth_mhz, ap_noise_figure_db);
    const double sat_noise = (sat_noise_power_w
                                  ? *sat_noise_power_w
                                  : noise_power_from_figure(bandwidth_mhz, sat_noise_figure_db)) *
                             sat_noise_multiplier;
    return RadioConstants::make(carrier_frequency_ghz, bandwidth_mhz, coherence_block_len,
                                users_per_drop, pilot_power_w, ap_noise, sat_noise,
                                earth_radius_m, satellite_position_m.z);
}

ArrayGeometry ExperimentConfig::make_array() const {
    const double lambda = kSpeedOfLight / (carrier_frequency_ghz * 1.0e9);
    ArrayGeometry a;
    a.n_h = n_h;
    a.n_v = n_v;
    a.d_h_m = spacing_h_m ? *spacing_h_m : 0.5 * lambda;
    a.d_v_m = spacing_v_m ? *spacing_v_m : 0.5 * lambda;
    a.aperture_radius_m = aperture_radius_m ? *aperture_radius_m : 10.0 * lambda;
    a.validate();
    return a;
}

void ExperimentConfig::validate() const {
    if (drops < 1)
        throw ConfigError("config: drops must be >= 1");
    if (users_per_drop < 1)
        throw ConfigError("config: users_per_drop must be >= 1");
    if (aps < 0)
        throw ConfigError("config: aps must be >= 0");
    if (!(area_km2 > 0.0))
        throw ConfigError("config: area_km2 must be positive");
    if (threads < 0)
        throw ConfigError("config: threads must be >= 0");
    if (mc_drops < 0)
        throw ConfigError("config: mc_drops must be >= 0");
    if (mc_drops > 0 && mc_trials < 1000)
        throw ConfigError("config: mc_trials must be >= 1000");
    if (!(sat_noise_multiplier > 0.0))
        throw ConfigError("config: sat_noise_multiplier must be positive");
    for (double t : target_rates_mbps)
        if (!(t > 0.0))
            throw ConfigError("config: target rates must be positive");
    if (!(max_power_dbw == max_power_dbw))
        throw ConfigError("config: max_power_dbw must be a number");
    try {
        make_radio();
        make_array();
        gains.validate();
    } catch (const std::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(std::abs(corr_h) < 1.0) || !(std::abs(corr_v) < 1.0))
        throw ConfigError("config: correlation coefficients must satisfy |r| < 1");
    if (kappa < 0.0)
        throw ConfigError("config: kappa must be >= 0");
}

namespace {

void expect_keys(const json &j, std::initializer_list<const char *> known,
                 const char *section) {
    for (const auto &item : j.items()) {
        bool found = false;
        for (const char *k : known)
            if (item.key() == k) {
                found = true;
                break;
            }
        if (!found)
            throw ConfigError(std::string("config: unknown key '") + item.key() + "' in " +
                              section);
    }
}

template <typename T>
void maybe(const json &j, const char *key, T &out) {
    if (j.contains(key) && !j.at(key).is_null())
        j.at(key).get_to(out);
}

void maybe_opt(const json &j, const char *key, std::optional<double> &out) {
    if (j.contains(key)) {
        if (j.at(key).is_null())
            out.reset();
        else
            out = j.at(key).get<double>();
    }
}

Position3D position_from_km(const json &j) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("config: positions must be [x, y, z] in km");
    return {j[0].get<double>() * 1.0e3, j[1].get<double>() * 1.0e3,
            j[2].get<double>() * 1.0e3};
}

json position_to_km(const Position3D &p) {
    return json::array({p.x / 1.0e3, p.y / 1.0e3, p.z / 1.0e3});
}

} // namespace

void ExperimentConfig::apply_json_text(const std::string &text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    expect_keys(j,
                {"kind", "drops", "users_per_drop", "aps", "area_km2", "master_seed",
                 "threads", "mc_trials", "mc_drops", "max_power_dbw", "array", "satellite",
                 "radio", "gains", "channel", "heights", "solver", "congestion", "sweeps",
                 "schema_version"},
                "top level");
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != 1)
        throw ConfigError("config: unsupported schema_version");
    if (j.contains("kind"))
        kind = experiment_kind_from_string(j.at("kind").get<std::string>());
    maybe(j, "drops", drops);
    maybe(j, "users_per_drop", users_per_drop);
    maybe(j, "aps", aps);
    maybe(j, "area_km2", area_km2);
    maybe(j, "master_seed", master_seed);
    maybe(j, "threads", threads);
    maybe(j, "mc_trials", mc_trials);
    maybe(j, "mc_drops", mc_drops);
    maybe(j, "max_power_dbw", max_power_dbw);
    if (j.contains("array")) {
        const json &a = j.at("array");
        expect_keys(a, {"n_h", "n_v", "spacing_h_m", "spacing_v_m", "aperture_radius_m"},
                    "array");
        maybe(a, "n_h", n_h);
        maybe(a, "n_v", n_v);
        maybe_opt(a, "spacing_h_m", spacing_h_m);
        maybe_opt(a, "spacing_v_m", spacing_v_m);
        maybe_opt(a, "aperture_radius_m", aperture_radius_m);
    }
    if (j.contains("satellite")) {
        const json &s = j.at("satellite");
        expect_keys(s, {"position_km", "beam_center_km"}, "satellite");
        if (s.contains("position_km"))
            satellite_position_m = position_from_km(s.at("position_km"));
        if (s.contains("beam_center_km"))
            beam_center_m = position_from_km(s.at("beam_center_km"));
    }
    if (j.contains("radio")) {
        const json &r = j.at("radio");
        expect_keys(r,
                    {"carrier_frequency_ghz", "bandwidth_mhz", "coherence_block_len",
                     "pilot_power_w", "ap_noise_figure_db", "sat_noise_figure_db",
                     "ap_noise_power_w", "sat_noise_power_w", "sat_noise_multiplier",
                     "earth_radius_m"},
                    "radio");
        maybe(r, "carrier_frequency_ghz", carrier_frequency_ghz);
        maybe(r, "bandwidth_mhz", bandwidth_mhz);
        maybe(r, "coherence_block_len", coherence_block_len);
        maybe(r, "pilot_power_w", pilot_power_w);
        maybe(r, "ap_noise_figure_db", ap_noise_figure_db);
        maybe(r, "sat_noise_figure_db", sat_noise_figure_db);
        maybe_opt(r, "ap_noise_power_w", ap_noise_power_w);
        maybe_opt(r, "sat_noise_power_w", sat_noise_power_w);
        maybe(r, "sat_noise_multiplier", sat_noise_multiplier);
        maybe(r, "earth_radius_m", earth_radius_m);
    }
    if (j.contains("gains")) {
        const json &g = j.at("gains");
        expect_keys(g,
                    {"ap_gain_dbi", "user_gain_dbi", "sat_gain_dbi",
                     "shadow_std_terrestrial_db", "shadow_std_sat_db"},
                    "gains");
        maybe(g, "ap_gain_dbi", gains.ap_gain_dbi);
        maybe(g, "user_gain_dbi", gains.user_gain_dbi);
        maybe(g, "sat_gain_dbi", gains.sat_gain_dbi);
        maybe(g, "shadow_std_terrestrial_db", gains.shadow_std_terrestrial_db);
        maybe(g, "shadow_std_sat_db", gains.shadow_std_sat_db);
    }
    if (j.contains("channel")) {
        const json &c = j.at("channel");
        expect_keys(c, {"kappa", "corr_h", "corr_v"}, "channel");
        maybe(c, "kappa", kappa);
        maybe(c, "corr_h", corr_h);
        maybe(c, "corr_v", corr_v);
    }
    if (j.contains("heights")) {
        const json &h = j.at("heights");
        expect_keys(h, {"ap_m", "user_m"}, "heights");
        maybe(h, "ap_m", ap_height_m);
        maybe(h, "user_m", user_height_m);
    }
    if (j.contains("solver")) {
        const json &s = j.at("solver");
        expect_keys(s, {"delta", "epsilon", "max_inner_iters", "max_outer_iters", "warm_start"},
                    "solver");
        maybe(s, "delta", solver.delta);
        maybe(s, "epsilon", solver.epsilon);
        maybe(s, "max_inner_iters", solver.max_inner_iters);
        maybe(s, "max_outer_iters", solver.max_outer_iters);
        maybe(s, "warm_start", solver.warm_start);
    }
    if (j.contains("congestion")) {
        const json &c = j.at("congestion");
        expect_keys(c, {"target_rates_mbps"}, "congestion");
        maybe(c, "target_rates_mbps", target_rates_mbps);
    }
    if (j.contains("sweeps")) {
        const json &s = j.at("sweeps");
        expect_keys(s, {"terrestrial_gain_dbi", "sat_noise_multipliers"}, "sweeps");
        maybe(s, "terrestrial_gain_dbi", terrestrial_gain_sweep_dbi);
        maybe(s, "sat_noise_multipliers", sat_noise_multipliers);
    }
    validate();
}

std::string ExperimentConfig::to_json_text() const {
    const ArrayGeometry arr = make_array();
    json j;
    j["schema_version"] = 1;
    j["kind"] = to_string(kind);
    j["drops"] = drops;
    j["users_per_drop"] = users_per_drop;
    j["aps"] = aps;
    j["area_km2"] = area_km2;
    j["master_seed"] = master_seed;
    j["threads"] = threads;
    j["mc_trials"] = mc_trials;
    j["mc_drops"] = mc_drops;
    j["max_power_dbw"] = max_power_dbw;
    j["array"] = {{"n_h", n_h},
                  {"n_v", n_v},
                  {"spacing_h_m", arr.d_h_m},
                  {"spacing_v_m", arr.d_v_m},
                  {"aperture_radius_m", arr.aperture_radius_m}};
    j["satellite"] = {{"position_km", position_to_km(satellite_position_m)},
                      {"beam_center_km", position_to_km(beam_center_m)}};
    const RadioConstants radio = make_radio();
    j["radio"] = {{"carrier_frequency_ghz", carrier_frequency_ghz},
                  {"bandwidth_mhz", bandwidth_mhz},
                  {"coherence_block_len", coherence_block_len},
                  {"pilot_power_w", pilot_power_w},
                  {"ap_noise_figure_db", ap_noise_figure_db},
                  {"sat_noise_figure_db", sat_noise_figure_db},
                  {"ap_noise_power_w", radio.ap_noise_power_w},
                  {"sat_noise_power_w", radio.sat_noise_power_w},
                  {"sat_noise_multiplier", sat_noise_multiplier},
                  {"earth_radius_m", earth_radius_m}};
    j["gains"] = {{"ap_gain_dbi", gains.ap_gain_dbi},
                  {"user_gain_dbi", gains.user_gain_dbi},
                  {"sat_gain_dbi", gains.sat_gain_dbi},
                  {"shadow_std_terrestrial_db", gains.shadow_std_terrestrial_db},
                  {"shadow_std_sat_db", gains.shadow_std_sat_db}};
    j["channel"] = {{"kappa", kappa}, {"corr_h", corr_h}, {"corr_v", corr_v}};
    j["heights"] = {{"ap_m", ap_height_m}, {"user_m", user_height_m}};
    j["solver"] = {{"delta", solver.delta},
                   {"epsilon", solver.epsilon},
                   {"max_inner_iters", solver.max_inner_iters},
                   {"max_outer_iters", solver.max_outer_iters},
                   {"warm_start", solver.warm_start}};
    j["congestion"] = {{"target_rates_mbps", target_rates_mbps}};
    j["sweeps"] = {{"terrestrial_gain_dbi", terrestrial_gain_sweep_dbi},
                   {"sat_noise_multipliers", sat_noise_multipliers}};
    return j.dump(2) + "\n";
}

Scenario generate_drop(const ExperimentConfig &config, int drop_index) {
    config.validate();
    if (drop_index < 0)
        throw std::invalid_argument("generate_drop: drop_index must be >= 0");

    const std::uint64_t drop_seed =
        derive_seed(config.master_seed, kTagDrop, static_cast<std::uint64_t>(drop_index));
    const double side_m = std::sqrt(config.area_km2) * 1.0e3;

    Scenario sc;
    sc.radio = config.make_radio();
    sc.array = config.make_array();
    sc.gains = config.gains;
    sc.satellite_position = config.satellite_position_m;
    sc.corr_h = config.corr_h;
    sc.corr_v = config.corr_v;

    const int k_users = config.users_per_drop;
    const int m_aps = config.aps;

    Rng rng_users(derive_seed(drop_seed, kTagUserPositions));
    sc.user_positions.reserve(k_users);
    for (int k = 0; k < k_users; ++k)
        sc.user_positions.push_back({(rng_users.uniform() - 0.5) * side_m,
                                     (rng_users.uniform() - 0.5) * side_m,
                                     config.user_height_m});

    Rng rng_aps(derive_seed(drop_seed, kTagApPositions));
    sc.ap_positions.reserve(m_aps);
    for (int m = 0; m < m_aps; ++m)
        sc.ap_positions.push_back({(rng_aps.uniform() - 0.5) * side_m,
                                   (rng_aps.uniform() - 0.5) * side_m,
                                   config.ap_height_m});

    Rng rng_shadow_t(derive_seed(drop_seed, kTagShadowTerrestrial));
    sc.beta_terrestrial.resize(m_aps, k_users);
    for (int m = 0; m < m_aps; ++m)
        for (int k = 0; k < k_users; ++k) {
            const double shadow =
                config.gains.shadow_std_terrestrial_db * rng_shadow_t.gaussian();
            const double beta_db = terrestrial_pathloss_db(
                config.gains.ap_gain_dbi, config.gains.user_gain_dbi,
                config.carrier_frequency_ghz,
                distance(sc.ap_positions[m], sc.user_positions[k]), shadow);
            sc.beta_terrestrial(m, k) = db_to_linear(beta_db);
        }

    Rng rng_shadow_s(derive_seed(drop_seed, kTagShadowSat));
    sc.beta_sat.resize(k_users);
    for (int k = 0; k < k_users; ++k) {
        const ElevationAzimuth ea =
            elevation_azimuth(sc.user_positions[k], sc.satellite_position);
        const double range = slant_range(ea.elevation_rad, config.earth_radius_m,
                                         sc.radio.satellite_altitude_m);
        // Boresight offset: angle at the satellite between the user and the
        // beam center directions.
        const Position3D to_user = sc.user_positions[k] - sc.satellite_position;
        const Position3D to_center = config.beam_center_m - sc.satellite_position;
        const double cosang = (to_user.x * to_center.x + to_user.y * to_center.y +
                               to_user.z * to_center.z) /
                              (norm(to_user) * norm(to_center));
        const double offset = std::acos(std::clamp(cosang, -1.0, 1.0));
        const double gain_db = linear_to_db(
            beam_gain(offset, sc.array.aperture_radius_m, sc.radio.wavelength_m));
        const double shadow = config.gains.shadow_std_sat_db * rng_shadow_s.gaussian();
        const double beta_db = satellite_pathloss_db(
            config.gains.sat_gain_dbi, config.gains.user_gain_dbi, gain_db,
            config.carrier_frequency_ghz, range, shadow);
        sc.beta_sat(k) = db_to_linear(beta_db);
    }

    sc.kappa = Eigen::VectorXd::Constant(k_users, config.kappa);
    sc.max_power_w = Eigen::VectorXd::Constant(k_users, db_to_linear(config.max_power_dbw));
    sc.validate();
    return sc;
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<std::pair<double, double>> empirical_cdf(const std::vector<double> &values) {
    std::vector<double> good;
    good.reserve(values.size());
    for (double v : values)
        if (std::isfinite(v))
            good.push_back(v);
    std::sort(good.begin(), good.end());
    std::vector<std::pair<double, double>> cdf;
    cdf.reserve(good.size());
    const double n = static_cast<double>(good.size());
    for (std::size_t i = 0; i < good.size(); ++i)
        cdf.emplace_back(good[i], (static_cast<double>(i) + 1.0) / n);
    return cdf;
}

namespace {

double mean_of(const std::vector<double> &values) {
    KahanSumD acc;
    int n = 0;
    for (double v : values)
        if (std::isfinite(v)) {
            acc.add(v);
            ++n;
        }
    return n > 0 ? acc.value() / n : std::numeric_limits<double>::quiet_NaN();
}

// 95%-likely point: the 5th percentile under the (i+1)/n CDF convention.
double percentile5(const std::vector<double> &values) {
    std::vector<double> good;
    for (double v : values)
        if (std::isfinite(v))
            good.push_back(v);
    if (good.empty())
        return std::numeric_limits<double>::quiet_NaN();
    std::sort(good.begin(), good.end());
    const auto n = static_cast<double>(good.size());
    const auto idx = static_cast<std::size_t>(std::max(0.0, std::ceil(0.05 * n) - 1.0));
    return good[std::min(idx, good.size() - 1)];
}

CsvTable cdf_table(const std::string &metric, const std::string &mode,
                   const std::vector<double> &values) {
    CsvTable t;
    t.filename = "cdf_" + metric + "_" + mode + ".csv";
    t.header = "value_mbps,cdf";
    for (const auto &[v, p] : empirical_cdf(values))
        t.rows.push_back(format_value(v) + "," + format_value(p));
    return t;
}

std::string make_headline(const char *kind, const AggregateResult &res,
                          const std::string &metric_text) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s: %d drops (%d failed), %.2f s, %s", kind, res.drops,
                  res.failed, res.wall_seconds, metric_text.c_str());
    return buf;
}

// Runs `work(drop)` over all drops, catching per-drop failures.
template <typename Outcome, typename Work>
std::vector<Outcome> for_each_drop(const ExperimentConfig &config, Work &&work,
                                   AggregateResult &res) {
    std::vector<Outcome> outcomes(config.drops);
    res.drops = config.drops;
    res.drop_errors.assign(config.drops, "");
    parallel_for(config.drops, config.threads, [&](int d) {
        try {
            outcomes[d] = work(d);
        } catch (const std::exception &e) {
            outcomes[d].failed = true;
            res.drop_errors[d] = e.what();
        }
    });
    for (int d = 0; d < config.drops; ++d)
        if (outcomes[d].failed) {
            ++res.failed;
            if (res.drop_errors[d].empty())
                res.drop_errors[d] = "failed";
        }
    return outcomes;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

AggregateResult run_cdf_experiment(const ExperimentConfig &config) {
    config.validate();
    const double t0 = now_seconds();
    AggregateResult res;

    struct Outcome {
        bool failed = false;
        std::array<double, 3> sum{kNaN, kNaN, kNaN};
        std::array<double, 3> min{kNaN, kNaN, kNaN};
        bool has_mc = false;
        std::array<double, 3> mc_sum{kNaN, kNaN, kNaN};
        std::array<double, 3> mc_min{kNaN, kNaN, kNaN};
        double max_gap = kNaN;
    };

    auto outcomes = for_each_drop<Outcome>(
        config,
        [&](int d) {
            Outcome out;
            const Scenario sc = generate_drop(config, d);
            const ChannelStatistics stats = build_statistics(sc);
            const Eigen::VectorXd rho = sc.max_power_w;
            std::array<ThroughputReport, 3> reports;
            for (std::size_t i = 0; i < kModes.size(); ++i) {
                reports[i] = sinr_closed_form(stats, rho, kModes[i]);
                KahanSumD sum;
                for (int k = 0; k < stats.num_users(); ++k)
                    sum.add(reports[i].rate_mbps(k));
                out.sum[i] = sum.value();
                out.min[i] = reports[i].rate_mbps.minCoeff();
            }
            if (d < config.mc_drops) {
                out.has_mc = true;
                double gap = 0.0;
                MonteCarloOptions mc;
                mc.trials = config.mc_trials;
                mc.threads = 1; // drops already run in parallel
                for (std::size_t i = 0; i < kModes.size(); ++i) {
                    mc.seed = derive_seed(
                        derive_seed(config.master_seed, kTagDrop,
                                    static_cast<std::uint64_t>(d)),
                        kTagMonteCarlo, static_cast<std::uint64_t>(i));
                    const MonteCarloSinr est = sinr_monte_carlo(stats, rho, kModes[i], mc);
                    KahanSumD sum;
                    double min_rate = std::numeric_limits<double>::infinity();
                    for (int k = 0; k < stats.num_users(); ++k) {
                        const double rate =
                            ergodic_rate(est.sinr(k), stats.radio, stats.num_users());
                        sum.add(rate);
                        min_rate = std::min(min_rate, rate);
                        gap = std::max(gap, std::abs(est.sinr(k) - reports[i].sinr(k)) /
                                                reports[i].sinr(k));
                    }
                    out.mc_sum[i] = sum.value();
                    out.mc_min[i] = min_rate;
                }
                out.max_gap = gap;
            }
            return out;
        },
        res);

    for (std::size_t i = 0; i < kModes.size(); ++i) {
        const std::string mode = to_string(kModes[i]);
        auto &sum = res.metrics["sum_" + mode];
        auto &min = res.metrics["min_" + mode];
        for (const Outcome &o : outcomes) {
            sum.push_back(o.sum[i]);
            min.push_back(o.min[i]);
        }
        res.tables.push_back(cdf_table("sum", mode, sum));
        res.tables.push_back(cdf_table("min", mode, min));
        res.scalars["mean_sum_" + mode] = mean_of(sum);
        res.scalars["mean_min_" + mode] = mean_of(min);
        res.scalars["p5_sum_" + mode] = percentile5(sum);
    }
    if (config.mc_drops > 0) {
        double max_gap = 0.0;
        for (std::size_t i = 0; i < kModes.size(); ++i) {
            const std::string mode = to_string(kModes[i]);
            std::vector<double> mc_sum, mc_min;
            for (const Outcome &o : outcomes)
                if (o.has_mc) {
                    mc_sum.push_back(o.mc_sum[i]);
                    mc_min.push_back(o.mc_min[i]);
                }
            res.tables.push_back(cdf_table("sum_mc", mode, mc_sum));
            res.tables.push_back(cdf_table("min_mc", mode, mc_min));
        }
        for (const Outcome &o : outcomes)
            if (o.has_mc && std::isfinite(o.max_gap))
                max_gap = std::max(max_gap, o.max_gap);
        res.scalars["cf_mc_max_rel_gap"] = max_gap;
    }

    // Antenna-gain / noise-floor sweep, closed form, hybrid sum throughput.
    if (!config.terrestrial_gain_sweep_dbi.empty()) {
        CsvTable t;
        t.filename = "gain_sweep.csv";
        t.header = "gain_dbi,sat_noise_multiplier,mean_sum_mbps";
        for (double mult : config.sat_noise_multipliers)
            for (double gain : config.terrestrial_gain_sweep_dbi) {
                ExperimentConfig swept = config;
                swept.gains.ap_gain_dbi = gain;
                swept.gains.user_gain_dbi = gain;
                swept.sat_noise_multiplier = config.sat_noise_multiplier * mult;
                swept.terrestrial_gain_sweep_dbi.clear();
                KahanSumD acc;
                int ok = 0;
                for (int d = 0; d < config.drops; ++d) {
                    const Scenario sc = generate_drop(swept, d);
                    const ChannelStatistics stats = build_statistics(sc);
                    const ThroughputReport rep =
                        sinr_closed_form(stats, sc.max_power_w, SystemMode::Hybrid);
                    acc.add(rep.rate_mbps.sum());
                    ++ok;
                }
                t.rows.push_back(format_value(gain) + "," + format_value(mult) + "," +
                                 format_value(acc.value() / ok));
            }
        res.tables.push_back(t);
    }

    res.wall_seconds = now_seconds() - t0;
    char metric[128];
    std::snprintf(metric, sizeof(metric), "mean hybrid sum rate %.2f Mbps",
                  res.scalars["mean_sum_hybrid"]);
    res.headline = make_headline("cdf", res, metric);
    return res;
}

AggregateResult run_maxmin_experiment(const ExperimentConfig &config) {
    config.validate();
    const double t0 = now_seconds();
    AggregateResult res;

    struct Outcome {
        bool failed = false;
        double min_fullpower = kNaN;
        double min_maxmin = kNaN;
        double seconds_fullpower = kNaN;
        double seconds_maxmin = kNaN;
        bool converged = false;
    };

    auto outcomes = for_each_drop<Outcome>(
        config,
        [&](int d) {
            Outcome out;
            const Scenario sc = generate_drop(config, d);
            const ChannelStatistics stats = build_statistics(sc);
            const SinrDecomposition decomp =
                make_sinr_decomposition(stats, SystemMode::Hybrid);

            double t = now_seconds();
            Eigen::VectorXd full_sinr = decomp.sinr(sc.max_power_w);
            out.seconds_fullpower = now_seconds() - t;
            double lo = std::numeric_limits<double>::infinity();
            for (int k = 0; k < stats.num_users(); ++k)
                lo = std::min(lo, ergodic_rate(full_sinr(k), stats.radio,
                                               stats.num_users()));
            out.min_fullpower = lo;

            t = now_seconds();
            const FairnessResult fr =
                solve_maxmin(decomp, stats.radio, sc.max_power_w, config.solver);
            out.seconds_maxmin = now_seconds() - t;
            out.converged = fr.allocation.converged;
            out.min_maxmin =
                ergodic_rate(fr.xi_star, stats.radio, stats.num_users());
            return out;
        },
        res);

    auto &mf = res.metrics["min_fullpower"];
    auto &mm = res.metrics["min_maxmin"];
    int nonconverged = 0;
    CsvTable timing;
    timing.filename = "timing.csv";
    timing.header = "drop,solver,seconds";
    for (int d = 0; d < config.drops; ++d) {
        const Outcome &o = outcomes[d];
        mf.push_back(o.min_fullpower);
        mm.push_back(o.min_maxmin);
        if (!o.failed) {
            timing.rows.push_back(std::to_string(d) + ",fullpower," +
                                  format_value(o.seconds_fullpower));
            timing.rows.push_back(std::to_string(d) + ",maxmin," +
                                  format_value(o.seconds_maxmin));
            if (!o.converged)
                ++nonconverged;
        }
    }
    res.tables.push_back(cdf_table("min_fullpower", "hybrid", mf));
    res.tables.push_back(cdf_table("min_maxmin", "hybrid", mm));
    res.tables.push_back(timing);
    res.scalars["mean_min_fullpower"] = mean_of(mf);
    res.scalars["mean_min_maxmin"] = mean_of(mm);
    res.scalars["nonconverged"] = nonconverged;

    res.wall_seconds = now_seconds() - t0;
    char metric[160];
    std::snprintf(metric, sizeof(metric),
                  "mean min-rate %.4f Mbps (full power %.4f Mbps)",
                  res.scalars["mean_min_maxmin"], res.scalars["mean_min_fullpower"]);
    res.headline = make_headline("maxmin", res, metric);
    return res;
}

AggregateResult run_congestion_experiment(const ExperimentConfig &config) {
    config.validate();
    if (config.target_rates_mbps.empty())
        throw ConfigError("congestion experiment: target_rates_mbps must not be empty");
    const double t0 = now_seconds();
    AggregateResult res;

    static constexpr std::array<const char *, 3> kMethods = {"fullpower", "maxpower",
                                                             "softremoval"};
    struct PerMethod {
        int satisfied = 0;
        double jain = kNaN;
        double mean_power_w = kNaN;
    };
    struct Outcome {
        bool failed = false;
        std::vector<std::array<PerMethod, 3>> per_target;
    };

    const int n_targets = static_cast<int>(config.target_rates_mbps.size());
    auto outcomes = for_each_drop<Outcome>(
        config,
        [&](int d) {
            Outcome out;
            const Scenario sc = generate_drop(config, d);
            const ChannelStatistics stats = build_statistics(sc);
            const SinrDecomposition decomp =
                make_sinr_decomposition(stats, SystemMode::Hybrid);
            const int k_users = stats.num_users();
            out.per_target.resize(n_targets);
            for (int t = 0; t < n_targets; ++t) {
                const double target_rate = config.target_rates_mbps[t];
                const double xi =
                    target_sinr_for_rate(target_rate, stats.radio, k_users);
                const Eigen::VectorXd targets_xi =
                    Eigen::VectorXd::Constant(k_users, xi);
                const Eigen::VectorXd target_rates =
                    Eigen::VectorXd::Constant(k_users, target_rate);

                // Full power baseline.
                Eigen::VectorXd rates(k_users);
                for (int k = 0; k < k_users; ++k)
                    rates(k) = ergodic_rate(decomp.sinr_user(sc.max_power_w, k),
                                            stats.radio, k_users);
                const CongestionReport base = classify_and_score(
                    rates, target_rates, 1.0e-6 * target_rate);
                out.per_target[t][0] = {static_cast<int>(base.satisfied.size()),
                                        base.jain, sc.max_power_w.mean()};

                const auto [alloc2, rep2] = solve_fullpower_congestion(
                    decomp, stats.radio, targets_xi, sc.max_power_w, config.solver);
                out.per_target[t][1] = {static_cast<int>(rep2.satisfied.size()),
                                        rep2.jain, alloc2.rho.mean()};

                const auto [alloc3, rep3] = solve_soft_removal(
                    decomp, stats.radio, targets_xi, sc.max_power_w, config.solver);
                out.per_target[t][2] = {static_cast<int>(rep3.satisfied.size()),
                                        rep3.jain, alloc3.rho.mean()};
            }
            return out;
        },
        res);

    CsvTable table;
    table.filename = "congestion.csv";
    table.header = "target_mbps,method,unsatisfied_pct,satisfied_pct,jain,mean_power_dbw";
    const int k_users = config.users_per_drop;
    for (int t = 0; t < n_targets; ++t) {
        for (std::size_t m = 0; m < kMethods.size(); ++m) {
            KahanSumD sat_count, jain_sum, power_sum;
            int ok = 0;
            for (int d = 0; d < config.drops; ++d) {
                const Outcome &o = outcomes[d];
                if (o.failed)
                    continue;
                const PerMethod &pm = o.per_target[t][m];
                sat_count.add(pm.satisfied);
                jain_sum.add(pm.jain);
                power_sum.add(pm.mean_power_w);
                ++ok;
                const std::string suffix =
                    std::string("_") + kMethods[m] + "_t" + std::to_string(t);
                res.metrics["satcount" + suffix].push_back(pm.satisfied);
                res.metrics["jain" + suffix].push_back(pm.jain);
                res.metrics["meanpower" + suffix].push_back(pm.mean_power_w);
            }
            const double satisfied_pct =
                ok > 0 ? 100.0 * sat_count.value() / (ok * k_users) : kNaN;
            const double jain = ok > 0 ? jain_sum.value() / ok : kNaN;
            const double mean_power_dbw =
                ok > 0 ? linear_to_db(power_sum.value() / ok) : kNaN;
            table.rows.push_back(format_value(config.target_rates_mbps[t]) + "," +
                                 kMethods[m] + "," + format_value(100.0 - satisfied_pct) +
                                 "," + format_value(satisfied_pct) + "," +
                                 format_value(jain) + "," + format_value(mean_power_dbw));
            res.scalars[std::string("satisfied_pct_") + kMethods[m] + "_t" +
                        std::to_string(t)] = satisfied_pct;
        }
    }
    res.tables.push_back(table);

    res.wall_seconds = now_seconds() - t0;
    char metric[160];
    std::snprintf(metric, sizeof(metric), "%d targets x 3 methods", n_targets);
    res.headline = make_headline("congestion", res, metric);
    return res;
}

AggregateResult run_validation(const ExperimentConfig &config) {
    config.validate();
    if (config.mc_trials < 1000)
        throw ConfigError("validate: mc_trials must be >= 1000");
    const double t0 = now_seconds();
    AggregateResult res;

    struct Outcome {
        bool failed = false;
        double max_gap = kNaN;
        std::vector<std::string> rows;
    };

    auto outcomes = for_each_drop<Outcome>(
        config,
        [&](int d) {
            Outcome out;
            const Scenario sc = generate_drop(config, d);
            const ChannelStatistics stats = build_statistics(sc);
            const Eigen::VectorXd rho = sc.max_power_w;
            double max_gap = 0.0;
            for (std::size_t i = 0; i < kModes.size(); ++i) {
                const ThroughputReport cf = sinr_closed_form(stats, rho, kModes[i]);
                MonteCarloOptions mc;
                mc.trials = config.mc_trials;
                mc.threads = 1;
                mc.seed = derive_seed(
                    derive_seed(config.master_seed, kTagDrop,
                                static_cast<std::uint64_t>(d)),
                    kTagMonteCarlo, static_cast<std::uint64_t>(i));
                const MonteCarloSinr est = sinr_monte_carlo(stats, rho, kModes[i], mc);
                for (int k = 0; k < stats.num_users(); ++k) {
                    const double gap =
                        std::abs(est.sinr(k) - cf.sinr(k)) / cf.sinr(k);
                    max_gap = std::max(max_gap, gap);
                    out.rows.push_back(std::to_string(d) + "," +
                                       to_string(kModes[i]) + "," + std::to_string(k) +
                                       "," + format_value(cf.sinr(k)) + "," +
                                       format_value(est.sinr(k)) + "," +
                                       format_value(gap) + "," +
                                       format_value(est.standard_error(k)));
                }
            }
            out.max_gap = max_gap;
            return out;
        },
        res);

    CsvTable t;
    t.filename = "validate.csv";
    t.header = "drop,mode,user,closed_form_sinr,monte_carlo_sinr,rel_gap,std_err";
    double max_gap = 0.0;
    auto &gaps = res.metrics["max_gap"];
    for (const Outcome &o : outcomes) {
        gaps.push_back(o.max_gap);
        if (!o.failed) {
            max_gap = std::max(max_gap, o.max_gap);
            for (const std::string &row : o.rows)
                t.rows.push_back(row);
        }
    }
    res.tables.push_back(t);
    res.scalars["max_rel_gap"] = max_gap;

    res.wall_seconds = now_seconds() - t0;
    char metric[128];
    std::snprintf(metric, sizeof(metric), "max closed-form vs MC gap %.3f%%",
                  100.0 * max_gap);
    res.headline = make_headline("validate", res, metric);
    return res;
}

AggregateResult run_stats_dump(const ExperimentConfig &config, int drop_index) {
    config.validate();
    const double t0 = now_seconds();
    AggregateResult res;
    res.drops = 1;
    res.drop_errors.assign(1, "");

    const Scenario sc = generate_drop(config, drop_index);
    const ChannelStatistics stats = build_statistics(sc);

    CsvTable users;
    users.filename = "stats_users.csv";
    users.header = "user,beta_sat,kappa,norm_los_sq,trace_theta,gamma_sum,condition_bound";
    for (int k = 0; k < stats.num_users(); ++k) {
        KahanSumD gsum;
        for (int m = 0; m < stats.num_aps(); ++m)
            gsum.add(stats.gamma(m, k));
        users.rows.push_back(std::to_string(k) + "," + format_value(stats.beta_sat(k)) +
                             "," + format_value(sc.kappa(k)) + "," +
                             format_value(stats.los_norm_sq(k)) + "," +
                             format_value(stats.trace_theta(k)) + "," +
                             format_value(gsum.value()) + "," +
                             format_value(stats.condition_bound(k)));
    }
    res.tables.push_back(users);

    CsvTable gamma;
    gamma.filename = "stats_terrestrial.csv";
    gamma.header = "ap,user,beta,gamma";
    for (int m = 0; m < stats.num_aps(); ++m)
        for (int k = 0; k < stats.num_users(); ++k)
            gamma.rows.push_back(std::to_string(m) + "," + std::to_string(k) + "," +
                                 format_value(stats.beta_terrestrial(m, k)) + "," +
                                 format_value(stats.gamma(m, k)));
    res.tables.push_back(gamma);

    res.wall_seconds = now_seconds() - t0;
    char metric[128];
    std::snprintf(metric, sizeof(metric), "drop %d, %d users, %d APs", drop_index,
                  stats.num_users(), stats.num_aps());
    res.headline = make_headline("stats-dump", res, metric);
    return res;
}

AggregateResult run_experiment(const ExperimentConfig &config) {
    switch (config.kind) {
    case ExperimentKind::Validate:
        return run_validation(config);
    case ExperimentKind::Cdf:
        return run_cdf_experiment(config);
    case ExperimentKind::MaxMin:
        return run_maxmin_experiment(config);
    case ExperimentKind::Congestion:
        return run_congestion_experiment(config);
    }
    throw ConfigError("run_experiment: unknown kind");
}

void write_outputs(const AggregateResult &result, const std::filesystem::path &out_dir) {
    std::filesystem::create_directories(out_dir);
    for (const CsvTable &t : result.tables) {
        std::ofstream os(out_dir / t.filename, std::ios::binary);
        if (!os)
            throw std::runtime_error("write_outputs: cannot open " +
                                     (out_dir / t.filename).string());
        os << t.header << '\n';
        for (const std::string &row : t.rows)
            os << row << '\n';
    }
}

} // namespace satcell
