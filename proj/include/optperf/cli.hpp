// Copyright 2026 The optperf-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command implementations for the optperf-sim executable. Each returns the
// process exit code: 0 success, 1 usage or config error, 2 infeasible.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "optperf/adaptive_loop.hpp"
#include "optperf/config.hpp"
#include "optperf/gns_check.hpp"
#include "optperf/report.hpp"
#include "optperf/solver.hpp"

namespace optperf {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitInfeasible = 2 };

inline nlohmann::json solution_to_json(const ClusterSpec& spec, const OptPerfSolution& sol) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < sol.labels.size(); ++i)
        nodes.push_back({{"id", i},
                         {"b_real", json9(sol.alloc_real.locals[i])},
                         {"b_int", sol.alloc_int.locals[i]},
                         {"label", to_string(sol.labels[i])},
                         {"clamped", static_cast<bool>(sol.clamped[i])}});
    return {{"total", sol.alloc_int.total},
            {"batch_time", json9(sol.batch_time)},
            {"batch_time_int", json9(cluster_batch_time(spec, sol.alloc_int))},
            {"scenario", to_string(sol.scenario)},
            {"nodes", nodes}};
}

inline int cmd_solve(const RunConfig& cfg, std::int64_t total, bool as_json, std::ostream& out, std::ostream& err) {
    OptPerfSolution sol;
    try {
        sol = find_optperf(cfg.cluster, total);
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    if (as_json) {
        out << solution_to_json(cfg.cluster, sol).dump(2) << '\n';
        return kExitOk;
    }
    out << "total_batch     " << total << '\n'
        << "batch_time      " << fmt9(sol.batch_time) << '\n'
        << "batch_time_int  " << fmt9(cluster_batch_time(cfg.cluster, sol.alloc_int)) << '\n'
        << "scenario        " << to_string(sol.scenario) << '\n'
        << "node  name              b_real        b_int  label\n";
    for (std::size_t i = 0; i < sol.labels.size(); ++i) {
        const std::string name = i < cfg.node_names.size() ? cfg.node_names[i] : "node" + std::to_string(i);
        out << std::left << std::setw(6) << i << std::setw(18) << name << std::setw(14) << fmt9(sol.alloc_real.locals[i]) << std::setw(7)
            << sol.alloc_int.locals[i] << to_string(sol.labels[i]) << (sol.clamped[i] ? " (clamped)" : "") << '\n';
    }
    return kExitOk;
}

inline int cmd_run(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err) {
    std::vector<EpochReport> reports;
    try {
        reports = run_training(cfg);
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        err << "error: cannot create output directory " << out_dir.string() << ": " << ec.message() << '\n';
        return kExitConfig;
    }
    {
        std::ofstream csv(out_dir / "epochs.csv", std::ios::binary);
        write_csv(csv, reports, cfg.cluster.size());
        std::ofstream js(out_dir / "epochs.json", std::ios::binary);
        js << reports_to_json(reports).dump(2) << '\n';
        if (!csv || !js) {
            err << "error: failed writing reports to " << out_dir.string() << '\n';
            return kExitConfig;
        }
    }
    out << std::left << std::setw(7) << "epoch" << std::setw(10) << "B" << std::setw(14) << "predicted_T" << std::setw(14) << "realized_T"
        << std::setw(14) << "b_noise" << std::setw(14) << "goodput"
        << "scenario\n";
    for (const auto& r : reports)
        out << std::setw(7) << r.epoch << std::setw(10) << r.chosen_B << std::setw(14) << fmt9(r.predicted_T) << std::setw(14)
            << fmt9(r.realized_T_mean) << std::setw(14) << fmt9(r.b_noise) << std::setw(14) << fmt9(r.goodput) << r.scenario << '\n';
    out << "wrote " << (out_dir / "epochs.csv").string() << " and " << (out_dir / "epochs.json").string() << '\n';
    return kExitOk;
}

inline void print_gns_report(const GnsCheckReport& rep, std::ostream& out) {
    const auto& c = rep.config;
    const std::size_t n = rep.n();
    const auto& m = rep.moments;
    out << "locals";
    for (auto b : c.locals) out << ' ' << b;
    out << "  B " << rep.total << "  |G|^2 " << fmt9(c.g_sq) << "  tr(Sigma) " << fmt9(c.tr_sigma) << "  dim " << c.dim << "  trials "
        << c.trials << "  seed " << c.seed << '\n';
    if (c.trials < 30) out << "warning: only " << c.trials << " trial(s); empirical moments have very wide intervals\n";
    out << "weights_G";
    for (double w : rep.weights_g) out << ' ' << fmt9(w);
    out << "\nweights_S";
    for (double w : rep.weights_s) out << ' ' << fmt9(w);
    out << (rep.degraded ? "\nwarning: weight system near-singular, batch-proportional fallback\n" : "\n");

    auto row = [&](const std::string& name, double emp, double pred, double exact) {
        const double rel = pred != 0.0 ? (emp - pred) / pred : std::numeric_limits<double>::quiet_NaN();
        out << std::left << std::setw(16) << name << std::setw(16) << fmt9(emp) << std::setw(16) << fmt9(pred) << std::setw(16)
            << fmt9(exact) << fmt9(rel) << '\n';
    };
    out << std::left << std::setw(16) << "quantity" << std::setw(16) << "empirical" << std::setw(16) << "predicted" << std::setw(16)
        << "exact_gaussian" << "rel_err_vs_predicted\n";
    for (std::size_t i = 0; i < n; ++i) {
        row("mean G_" + std::to_string(i), m.mean[rep.g_index(i)], c.g_sq, c.g_sq);
        row("mean S_" + std::to_string(i), m.mean[rep.s_index(i)], c.tr_sigma, c.tr_sigma);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const std::string tag = i == j ? "Var " : "Cov ";
            const std::string ij = i == j ? std::to_string(i) : std::to_string(i) + "," + std::to_string(j);
            row(tag + "G_" + ij, m.cov(rep.g_index(i), rep.g_index(j)), rep.predicted.cov_g(i, j), rep.exact.cov_g(i, j));
            row(tag + "S_" + ij, m.cov(rep.s_index(i), rep.s_index(j)), rep.predicted.cov_s(i, j), rep.exact.cov_s(i, j));
        }
    out << "mean G weighted " << fmt9(m.mean[rep.weighted_g()]) << "  uniform " << fmt9(m.mean[rep.uniform_g()]) << '\n';
    out << "mean S weighted " << fmt9(m.mean[rep.weighted_s()]) << "  uniform " << fmt9(m.mean[rep.uniform_s()]) << '\n';
    out << "Var G weighted " << fmt9(m.cov(rep.weighted_g(), rep.weighted_g())) << "  uniform "
        << fmt9(m.cov(rep.uniform_g(), rep.uniform_g())) << "  ratio " << fmt9(rep.ratio_g()) << '\n';
    out << "Var S weighted " << fmt9(m.cov(rep.weighted_s(), rep.weighted_s())) << "  uniform "
        << fmt9(m.cov(rep.uniform_s(), rep.uniform_s())) << "  ratio " << fmt9(rep.ratio_s()) << '\n';
}

inline int cmd_gns_check(const RunConfig& cfg, std::int64_t trials, std::ostream& out, std::ostream& err) {
    if (trials < 1) {
        err << "error: --trials must be at least 1\n";
        return kExitConfig;
    }
    GnsCheckConfig gc;
    gc.locals = cfg.gradients.locals;
    gc.g_sq = cfg.gradients.g_sq;
    gc.tr_sigma = cfg.gradients.tr_sigma;
    gc.dim = cfg.gradients.dim;
    gc.trials = static_cast<std::size_t>(trials);
    gc.seed = cfg.simulation.seed;
    print_gns_report(run_gns_check(gc), out);
    return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Heterogeneous data-parallel batch allocation simulator", "optperf-sim"};
    app.require_subcommand(1);
    std::string config_path;
    std::int64_t batch = 0;
    bool as_json = false;
    std::string out_dir;
    std::int64_t trials = 0;

    auto* solve = app.add_subcommand("solve", "optimal local batches for one total batch size");
    solve->add_option("--config", config_path, "JSON config")->required();
    solve->add_option("--batch", batch, "total batch size")->required();
    solve->add_flag("--json", as_json, "emit JSON");
    auto* run = app.add_subcommand("run", "simulate adaptive training and write epoch reports");
    run->add_option("--config", config_path, "JSON config")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    auto* gns = app.add_subcommand("gns-check", "Monte-Carlo check of the noise-scale estimators");
    gns->add_option("--config", config_path, "JSON config")->required();
    gns->add_option("--trials", trials, "number of trials")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << app.help();
        return kExitConfig;
    }
    try {
        const auto cfg = load_config(config_path);
        if (*solve) return cmd_solve(cfg, batch, as_json, out, err);
        if (*run) return cmd_run(cfg, out_dir, out, err);
        return cmd_gns_check(cfg, trials, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace optperf
