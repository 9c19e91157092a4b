// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "satcell/harness.hpp"

namespace {

constexpr const char *kVersion = "satcell 1.0.0 (config schema 1)";

struct CommonOptions {
    std::string config_path;
    std::string out_dir = "satcell_out";
    std::string profile = "desk";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

void add_common(CLI::App *cmd, CommonOptions &opts, bool config_required) {
    auto *config = cmd->add_option("--config", opts.config_path,
                                   "JSON experiment configuration");
    if (config_required)
        config->required();
    cmd->add_option("--out", opts.out_dir, "Output directory for CSV files");
    cmd->add_option("--profile", opts.profile, "Baseline profile before config overrides")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", opts.seed, "Master seed override");
    cmd->add_option("--threads", opts.threads,
                    "Worker threads (0 = hardware concurrency)");
}

satcell::ExperimentConfig build_config(const CommonOptions &opts,
                                       satcell::ExperimentKind kind) {
    satcell::ExperimentConfig config = opts.profile == "paper"
                                           ? satcell::ExperimentConfig::paper_profile()
                                           : satcell::ExperimentConfig::desk_profile();
    if (!opts.config_path.empty()) {
        std::ifstream is(opts.config_path);
        if (!is)
            throw satcell::ConfigError("cannot open config file: " + opts.config_path);
        std::ostringstream buffer;
        buffer << is.rdbuf();
        config.apply_json_text(buffer.str());
    }
    // The subcommand decides the action regardless of the config's kind.
    config.kind = kind;
    if (opts.seed)
        config.master_seed = *opts.seed;
    if (opts.threads)
        config.threads = *opts.threads;
    config.validate();
    return config;
}

int finish(const satcell::ExperimentConfig &config, const satcell::AggregateResult &result,
           const CommonOptions &opts) {
    satcell::write_outputs(result, opts.out_dir);
    std::ofstream os(std::filesystem::path(opts.out_dir) / "config_used.json",
                     std::ios::binary);
    os << config.to_json_text();
    std::cout << result.headline << std::endl;
    for (int d = 0; d < result.drops; ++d)
        if (!result.drop_errors[d].empty())
            std::cerr << "drop " << d << " failed: " << result.drop_errors[d] << std::endl;
    return result.failed > 0 ? 3 : 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Uplink throughput simulator and power-control toolkit for an "
                 "integrated satellite + distributed-AP network"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonOptions validate_opts, cdf_opts, maxmin_opts, congestion_opts, stats_opts;
    int stats_drop = 0;

    CLI::App *cmd_validate =
        app.add_subcommand("validate", "Closed-form vs Monte Carlo SINR agreement suite");
    add_common(cmd_validate, validate_opts, false);

    CLI::App *cmd_cdf =
        app.add_subcommand("cdf", "Throughput CDFs for the three system modes");
    add_common(cmd_cdf, cdf_opts, true);

    CLI::App *cmd_maxmin =
        app.add_subcommand("maxmin", "Max-min fairness power allocation vs full power");
    add_common(cmd_maxmin, maxmin_opts, true);

    CLI::App *cmd_congestion = app.add_subcommand(
        "congestion", "Power minimization under individual targets with congestion");
    add_common(cmd_congestion, congestion_opts, true);

    CLI::App *cmd_stats =
        app.add_subcommand("stats-dump", "Dump per-user channel statistics for one drop");
    add_common(cmd_stats, stats_opts, true);
    cmd_stats->add_option("--drop", stats_drop, "Drop index to dump");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // usage errors exit 2
    }

    try {
        if (cmd_validate->parsed()) {
            const auto config =
                build_config(validate_opts, satcell::ExperimentKind::Validate);
            const auto result = satcell::run_validation(config);
            const int code = finish(config, result, validate_opts);
            if (code != 0)
                return code;
            return result.scalars.at("max_rel_gap") <= 0.03 ? 0 : 1;
        }
        if (cmd_cdf->parsed()) {
            const auto config = build_config(cdf_opts, satcell::ExperimentKind::Cdf);
            return finish(config, satcell::run_cdf_experiment(config), cdf_opts);
        }
        if (cmd_maxmin->parsed()) {
            const auto config = build_config(maxmin_opts, satcell::ExperimentKind::MaxMin);
            return finish(config, satcell::run_maxmin_experiment(config), maxmin_opts);
        }
        if (cmd_congestion->parsed()) {
            const auto config =
                build_config(congestion_opts, satcell::ExperimentKind::Congestion);
            return finish(config, satcell::run_congestion_experiment(config),
                          congestion_opts);
        }
        if (cmd_stats->parsed()) {
            const auto config = build_config(stats_opts, satcell::ExperimentKind::Cdf);
            return finish(config, satcell::run_stats_dump(config, stats_drop), stats_opts);
        }
    } catch (const satcell::ConfigError &e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}
