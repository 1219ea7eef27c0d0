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

// Epoch driver: even split, then warmup from per-sample times, then model-based
// allocation with goodput-driven choice of the total batch size.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "optperf/config.hpp"
#include "optperf/errors.hpp"
#include "optperf/gns.hpp"
#include "optperf/learner.hpp"
#include "optperf/simulator.hpp"
#include "optperf/solver.hpp"

namespace optperf {

inline std::vector<std::int64_t> enumerate_candidates(std::int64_t b_min, std::int64_t b_max, int count) {
    if (b_min < 1 || b_max < b_min || count < 1) throw DomainError("invalid candidate range");
    std::vector<std::int64_t> out;
    if (count == 1 || b_min == b_max) return {b_min};
    if (b_max - b_min + 1 <= count) {
        for (auto b = b_min; b <= b_max; ++b) out.push_back(b);
        return out;
    }
    const double ratio = static_cast<double>(b_max) / static_cast<double>(b_min);
    for (int i = 0; i < count; ++i) {
        const double x = static_cast<double>(b_min) * std::pow(ratio, static_cast<double>(i) / (count - 1));
        out.push_back(std::clamp<std::int64_t>(std::llround(x), b_min, b_max));
    }
    out.back() = b_max;
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct TableEntry {
    std::int64_t total = 0;
    std::optional<OptPerfSolution> solution;  // empty when infeasible
    std::string error;

    [[nodiscard]] bool feasible() const { return solution.has_value(); }
};

struct CandidateTable {
    std::vector<std::int64_t> candidates;
    std::vector<TableEntry> entries;
    bool stale = false;  // models were refit after the table was built
    std::size_t solver_calls = 0;

    [[nodiscard]] std::size_t index_of(std::int64_t B) const {
        const auto it = std::lower_bound(candidates.begin(), candidates.end(), B);
        if (it == candidates.end() || *it != B) throw DomainError("batch size " + std::to_string(B) + " is not a candidate");
        return static_cast<std::size_t>(it - candidates.begin());
    }
};

// Ascending solve chained through warm starts: each candidate starts its
// boundary search where the previous one ended.
inline CandidateTable init_table(const ClusterSpec& spec, std::span<const std::int64_t> candidates, bool warm = true) {
    CandidateTable t;
    t.candidates.assign(candidates.begin(), candidates.end());
    if (!std::is_sorted(t.candidates.begin(), t.candidates.end()) ||
        std::adjacent_find(t.candidates.begin(), t.candidates.end()) != t.candidates.end())
        throw DomainError("candidates must be strictly ascending");
    std::optional<Scenario> hint;
    for (auto B : t.candidates) {
        TableEntry e{B, std::nullopt, {}};
        try {
            ++t.solver_calls;
            e.solution = find_optperf(spec, B, warm ? hint : std::nullopt);
            hint = e.solution->scenario;
        } catch (const InfeasibleError& err) {
            e.error = err.what();
        }
        t.entries.push_back(std::move(e));
    }
    return t;
}

inline double statistical_efficiency(double B, double b_noise, double b_ref) { return (b_ref + b_noise) / (B + b_noise); }

struct Selection {
    std::int64_t total = 0;
    double goodput = 0.0;
    std::size_t index = 0;
};

inline Selection select_batch_size(const CandidateTable& table, double b_noise, double b_ref) {
    if (!(b_noise >= 0.0)) throw DomainError("b_noise must be non-negative");
    std::optional<Selection> best;
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
        const auto& e = table.entries[i];
        if (!e.feasible()) continue;
        const double B = static_cast<double>(e.total);
        const double gp = B / e.solution->batch_time * statistical_efficiency(B, b_noise, b_ref);
        if (!best || gp > best->goodput) best = Selection{e.total, gp, i};
    }
    if (!best) throw InfeasibleError("no feasible batch-size candidate");
    return *best;
}

struct EpochReport {
    int epoch = 0;
    std::int64_t chosen_B = 0;
    std::vector<std::int64_t> alloc;
    double predicted_T = std::numeric_limits<double>::quiet_NaN();
    double predicted_even_T = std::numeric_limits<double>::quiet_NaN();  // learned model, even split, same B
    double realized_T_mean = 0.0;
    double b_noise = std::numeric_limits<double>::quiet_NaN();
    double efficiency = 0.0;
    double goodput = 0.0;
    bool model_ready = false;
    std::string scenario;  // "even", "warmup", "probe" or the solver's scenario
    std::size_t solver_calls = 0;
};

inline TruthWorld world_from_config(const RunConfig& c) {
    TruthWorld w;
    w.true_spec = c.cluster;
    w.noise_cv = c.simulation.noise_cv;
    w.gamma_noise_cv = c.simulation.gamma_cv();
    w.n_buckets = c.simulation.n_buckets;
    w.gradients = {c.gradients.dim, c.gradients.g_sq, c.gradients.tr_sigma};
    w.rng_seed = c.simulation.seed;
    return w;
}

inline std::vector<std::int64_t> run_candidates(const RunConfig& c) {
    if (c.adaptive.fixed_batch) return {*c.adaptive.fixed_batch};
    return enumerate_candidates(c.adaptive.b_min, c.adaptive.b_max, c.adaptive.candidates);
}

struct TrainingRun {
    std::vector<EpochReport> reports;
    LearnedModel learned;
};

inline TrainingRun run_training_detailed(const RunConfig& config) {
    validate(config);
    const std::size_t n = config.cluster.size();
    Simulator sim(world_from_config(config));
    TrainingRun run{{}, LearnedModel(n)};
    GnsSmoother smoother;
    const auto candidates = run_candidates(config);
    const double b_ref = config.adaptive.reference_batch();
    std::optional<CandidateTable> table;
    std::int64_t B = config.adaptive.start_batch();
    IntAllocation alloc = round_allocation(even_split(B, n));

    for (int epoch = 0; epoch < config.simulation.epochs; ++epoch) {
        EpochReport rep;
        rep.epoch = epoch;
        const double b_noise_now = smoother.has_value() ? std::max(0.0, smoother.b_noise()) : 0.0;
        std::optional<ClusterSpec> learned_spec;
        if (epoch == 0) {
            rep.scenario = "even";
        } else if (!run.learned.ready()) {
            // A node whose warmup share equals its even share has seen only one
            // local batch size. Adaptive runs then probe a neighbouring candidate;
            // fixed-B runs keep the warmup split.
            rep.scenario = "warmup";
            if (epoch >= 2 && !config.adaptive.fixed_batch) {
                const auto up = std::upper_bound(candidates.begin(), candidates.end(), B);
                if (up != candidates.end()) {
                    B = *up;
                } else {
                    const auto down = std::lower_bound(candidates.begin(), candidates.end(), B);
                    if (down != candidates.begin()) B = *std::prev(down);
                }
                rep.scenario = "probe";
            }
            std::vector<double> t_sample(n);
            for (std::size_t i = 0; i < n; ++i) t_sample[i] = run.learned.mean_sample_time(i);
            alloc = warmup_allocation(t_sample, B);
        } else {
            learned_spec = run.learned.to_spec(config.cluster.max_local_batch);
            if (!table) {
                table = init_table(*learned_spec, candidates);
                rep.solver_calls += table->solver_calls;
            }
            auto pick = select_batch_size(*table, b_noise_now, b_ref);
            const auto& cached = *table->entries[pick.index].solution;
            auto sol = find_optperf(*learned_spec, pick.total, cached.scenario);
            ++rep.solver_calls;
            if (sol.labels != cached.labels) {
                table = init_table(*learned_spec, candidates);
                rep.solver_calls += table->solver_calls;
                pick = select_batch_size(*table, b_noise_now, b_ref);
                sol = *table->entries[pick.index].solution;
            } else {
                table->entries[pick.index].solution = sol;
            }
            B = pick.total;
            alloc = sol.alloc_int;
            rep.scenario = to_string(sol.scenario);
            rep.model_ready = true;
            rep.predicted_T = cluster_batch_time(*learned_spec, alloc);
            rep.predicted_even_T = cluster_batch_time(*learned_spec, even_split(B, n));
        }
        rep.chosen_B = B;
        rep.alloc = alloc.locals;

        const double tr_sigma = config.gradients.tr_sigma_at(epoch);
        std::vector<TimingObservation> obs;
        double realized = 0.0;
        for (int batch = 0; batch < config.simulation.batches_per_epoch; ++batch) {
            const auto trace = sim.simulate_batch(alloc, epoch);
            realized += trace.batch_time;
            obs.insert(obs.end(), trace.nodes.begin(), trace.nodes.end());

            const auto grads = sim.sample_gradients(alloc, tr_sigma);
            std::vector<LocalGradientStat> stats;
            for (std::size_t i = 0; i < n; ++i)
                if (alloc.locals[i] >= 1) stats.push_back({static_cast<int>(i), static_cast<double>(alloc.locals[i]), grads.local_sq[i]});
            if (stats.size() >= 2) smoother.add(gns_estimate(stats, grads.global_sq, static_cast<double>(B)));
        }
        rep.realized_T_mean = realized / config.simulation.batches_per_epoch;
        run.learned = update(std::move(run.learned), obs);
        if (table) table->stale = true;

        rep.b_noise = smoother.has_value() ? smoother.b_noise() : std::numeric_limits<double>::quiet_NaN();
        rep.efficiency = statistical_efficiency(static_cast<double>(B), smoother.has_value() ? std::max(0.0, rep.b_noise) : 0.0, b_ref);
        rep.goodput = static_cast<double>(B) / rep.realized_T_mean * rep.efficiency;
        run.reports.push_back(std::move(rep));
    }
    return run;
}

inline std::vector<EpochReport> run_training(const RunConfig& config) { return run_training_detailed(config).reports; }

}  // namespace optperf
