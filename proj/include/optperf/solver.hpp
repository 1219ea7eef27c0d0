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

// OptPerf: the minimum cluster batch time over all splits of a total batch B,
// and the split that achieves it.
//
// Every node's batch time is max(compute + T_u, syncStart + T_comm), an
// increasing convex function of its local batch. At the optimum all nodes
// that carry samples finish together; what remains unknown is which of the
// two pieces binds on each node (its bottleneck label). Once the labels are
// fixed the equal-time conditions are linear in b and solve in closed form.
//
// Labels are found as follows: Check 1 assumes every node compute-bound,
// Check 2 assumes every node communication-bound; if either hypothesis is
// self-consistent it is optimal. Otherwise a node is compute-bound exactly
// when the common finish level reaches its crossover level (compute time at
// the batch where (1-gamma)P = T_o), so the compute-bound set is a prefix of
// the nodes sorted by crossover level and its length is binary searched.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "optperf/errors.hpp"
#include "optperf/perf_model.hpp"

namespace optperf {

enum class ScenarioKind { AllCompute, AllComm, Mixed };

struct Scenario {
    ScenarioKind kind = ScenarioKind::AllCompute;
    /// Mixed only: number of compute-bound nodes, i.e. the boundary position
    /// in crossover order among nodes that are not clamped.
    std::size_t boundary = 0;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline std::string to_string(const Scenario& s) {
    switch (s.kind) {
        case ScenarioKind::AllCompute: return "AllCompute";
        case ScenarioKind::AllComm: return "AllComm";
        case ScenarioKind::Mixed: return "Mixed(" + std::to_string(s.boundary) + ")";
    }
    return "?";
}

/// Result of one equal-time linear solve.
struct LevelSolution {
    Seconds level = 0.0;  // common t_compute, syncStart or T_comb
    RealAllocation alloc;
    bool infeasible = false;  // some b_i < 0
};

struct OptPerfSolution {
    Seconds batch_time = 0.0;  // OptPerf
    RealAllocation alloc_real;
    IntAllocation alloc_int;
    std::vector<Bottleneck> labels;
    Scenario scenario;
    std::vector<bool> clamped;  // held at 0 or at its cap instead of the equal-time level
    std::size_t linear_solves = 0;

    [[nodiscard]] bool any_clamped() const {
        return std::any_of(clamped.begin(), clamped.end(), [](bool c) { return c; });
    }
};

/// Common finish level (in compute-time units) at which node i becomes
/// compute-bound. +inf if it never does, -inf if it always is.
inline double crossover_level(const NodeComputeModel& n, const CommModel& c) {
    const double backprop_gap = (1.0 - c.gamma) * n.k;
    if (!(backprop_gap > 0.0))
        return (1.0 - c.gamma) * n.m >= c.t_o ? -std::numeric_limits<double>::infinity()
                                              : std::numeric_limits<double>::infinity();
    return (n.q + n.k) * c.t_o / backprop_gap + n.s - n.q * n.m / n.k;
}

inline RealAllocation even_split(std::int64_t total, std::size_t n) {
    return RealAllocation{total, std::vector<double>(n, static_cast<double>(total) / static_cast<double>(n))};
}

/// Largest-remainder rounding; ties go to the lower node index.
inline IntAllocation round_allocation(const RealAllocation& real) {
    const std::size_t n = real.size();
    IntAllocation out{real.total, std::vector<std::int64_t>(n, 0)};
    std::vector<double> remainder(n, 0.0);
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double b = std::max(0.0, real.locals[i]);
        const double fl = std::floor(b);
        out.locals[i] = static_cast<std::int64_t>(fl);
        remainder[i] = b - fl;
        assigned += out.locals[i];
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    std::int64_t deficit = real.total - assigned;
    for (std::size_t j = 0; deficit > 0 && n > 0; j = (j + 1) % n, --deficit) ++out.locals[order[j]];
    // Only reachable when the input overshoots B; trim from the smallest remainders.
    for (std::size_t j = n; deficit < 0 && n > 0; --deficit) {
        j = (j == 0 ? n : j) - 1;
        while (out.locals[order[j]] == 0) j = (j == 0 ? n : j) - 1;
        --out.locals[order[j]];
    }
    return out;
}

/// Model-free split for the first epochs: b_i proportional to the inverse of
/// node i's per-sample time, normalized to B, then rounded.
inline IntAllocation warmup_allocation(std::span<const double> t_sample, std::int64_t total) {
    if (t_sample.empty()) throw DomainError("warmup allocation needs at least one node");
    if (total < 1) throw DomainError("total batch must be >= 1");
    double sum_t = 0.0;
    for (double t : t_sample) {
        if (!(t > 0.0)) throw DomainError("per-sample times must be positive");
        sum_t += t;
    }
    std::vector<double> weight(t_sample.size());
    double sum_w = 0.0;
    for (std::size_t i = 0; i < t_sample.size(); ++i) {
        weight[i] = sum_t / t_sample[i];
        sum_w += weight[i];
    }
    RealAllocation real{total, std::vector<double>(t_sample.size())};
    for (std::size_t i = 0; i < t_sample.size(); ++i)
        real.locals[i] = weight[i] / sum_w * static_cast<double>(total);
    return round_allocation(real);
}

namespace detail {

struct Line {
    double slope;
    double intercept;
};

/// Solves slope_i * b_i + intercept_i = level for every line with sum b_i = total.
inline double common_level(std::span<const Line> lines, double total, std::vector<double>& b) {
    double inv_slope = 0.0;
    double weighted = 0.0;
    for (const auto& l : lines) {
        if (!(l.slope > 0.0)) throw SingularModelError("node time does not depend on its batch size");
        inv_slope += 1.0 / l.slope;
        weighted += l.intercept / l.slope;
    }
    const double level = (total + weighted) / inv_slope;
    b.resize(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) b[i] = (level - lines[i].intercept) / lines[i].slope;
    return level;
}

inline Line compute_line(const NodeComputeModel& n) { return {n.compute_slope(), n.compute_intercept()}; }
inline Line sync_line(const NodeComputeModel& n, const CommModel& c) {
    return {n.sync_slope(c.gamma), n.sync_intercept(c.gamma)};
}
/// Comm-bound node expressed in compute-level units: syncStart + T_o = level.
inline Line comm_line(const NodeComputeModel& n, const CommModel& c) {
    return {n.sync_slope(c.gamma), n.sync_intercept(c.gamma) + c.t_o};
}

/// Solves the equal-time system over a subset of nodes, one line per node.
template <typename LineFn>
LevelSolution solve_subset(const ClusterSpec& spec, std::span<const std::size_t> idx, double total,
                           LineFn&& line_for) {
    std::vector<Line> lines;
    lines.reserve(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) lines.push_back(line_for(j, spec.nodes[idx[j]]));
    LevelSolution out;
    out.alloc.total = static_cast<std::int64_t>(std::llround(total));
    out.level = common_level(lines, total, out.alloc.locals);
    out.infeasible = std::any_of(out.alloc.locals.begin(), out.alloc.locals.end(), [](double b) { return b < 0.0; });
    return out;
}

inline double rel_tol(double level) { return 1e-12 * std::max(1.0, std::abs(level)); }

struct CoreResult {
    double level = 0.0;  // finish level in compute units; batch time = level + T_u
    std::vector<double> b;
    std::vector<Bottleneck> labels;
    Scenario scenario;
    std::size_t solves = 0;
};

inline bool all_labeled(const ClusterSpec& spec, std::span<const std::size_t> idx, std::span<const double> b,
                        Bottleneck want) {
    for (std::size_t j = 0; j < idx.size(); ++j)
        if (classify_bottleneck(spec.nodes[idx[j]], spec.comm, std::max(0.0, b[j])) != want) return false;
    return true;
}

inline std::size_t count_compute(const ClusterSpec& spec, std::span<const std::size_t> idx,
                                 std::span<const double> b) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < idx.size(); ++j)
        if (classify_bottleneck(spec.nodes[idx[j]], spec.comm, std::max(0.0, b[j])) == Bottleneck::Compute) ++c;
    return c;
}

/// Algorithm core over the active (unclamped) nodes `idx` with residual total.
inline CoreResult solve_core(const ClusterSpec& spec, std::span<const std::size_t> idx, double total,
                             const std::optional<Scenario>& warm) {
    const CommModel& comm = spec.comm;
    const std::size_t n = idx.size();
    CoreResult out;

    // Check 1: equal compute time.
    auto check1 = solve_subset(spec, idx, total, [](std::size_t, const NodeComputeModel& m) { return compute_line(m); });
    ++out.solves;
    if (all_labeled(spec, idx, check1.alloc.locals, Bottleneck::Compute)) {
        out.level = check1.level;
        out.b = std::move(check1.alloc.locals);
        out.labels.assign(n, Bottleneck::Compute);
        out.scenario = {ScenarioKind::AllCompute, n};
        return out;
    }

    // Check 2: equal sync start.
    auto check2 = solve_subset(spec, idx, total, [&](std::size_t, const NodeComputeModel& m) { return sync_line(m, comm); });
    ++out.solves;
    if (all_labeled(spec, idx, check2.alloc.locals, Bottleneck::Communication)) {
        out.level = check2.level + comm.t_o;
        out.b = std::move(check2.alloc.locals);
        out.labels.assign(n, Bottleneck::Communication);
        out.scenario = {ScenarioKind::AllComm, 0};
        return out;
    }

    // Mixed. Nodes compute-bound in either check are compute-bound at the
    // optimum (its level is at least both check levels), so they bound the
    // boundary from below.
    std::vector<std::size_t> order(n);  // positions into idx, by crossover level
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> cross(n);
    for (std::size_t j = 0; j < n; ++j) cross[j] = crossover_level(spec.nodes[idx[j]], comm);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cross[a] < cross[b]; });

    const std::size_t fixed_compute =
        std::max(count_compute(spec, idx, check1.alloc.locals), count_compute(spec, idx, check2.alloc.locals));

    std::vector<Bottleneck> labels(n);
    auto try_boundary = [&](std::size_t c, LevelSolution& sol) {
        for (std::size_t r = 0; r < n; ++r)
            labels[order[r]] = r < c ? Bottleneck::Compute : Bottleneck::Communication;
        sol = solve_subset(spec, idx, total, [&](std::size_t j, const NodeComputeModel& m) {
            return labels[j] == Bottleneck::Compute ? compute_line(m) : comm_line(m, comm);
        });
        ++out.solves;
        // Verification: no compute node starts syncing later than syncStart',
        // no comm node finishes computing later than t'_compute.
        const double tol = rel_tol(sol.level);
        bool too_many = false;
        bool too_few = false;
        for (std::size_t j = 0; j < n; ++j) {
            const auto& m = spec.nodes[idx[j]];
            const double b = sol.alloc.locals[j];
            if (labels[j] == Bottleneck::Compute) {
                if (m.sync_slope(comm.gamma) * b + m.sync_intercept(comm.gamma) + comm.t_o > sol.level + tol)
                    too_many = true;
            } else if (m.compute_slope() * b + m.compute_intercept() > sol.level + tol) {
                too_few = true;
            }
        }
        return std::pair{too_many, too_few};
    };

    std::size_t lo = std::max<std::size_t>(1, fixed_compute);
    std::size_t hi = n - 1;
    std::size_t probe = lo + (hi >= lo ? (hi - lo) / 2 : 0);
    if (warm) {
        std::size_t w = warm->kind == ScenarioKind::AllCompute ? hi
                        : warm->kind == ScenarioKind::AllComm  ? lo
                                                               : warm->boundary;
        probe = std::clamp(w, lo, std::max(lo, hi));
    }

    LevelSolution sol;
    auto accept = [&](std::size_t c) {
        out.level = sol.level;
        out.b = std::move(sol.alloc.locals);
        out.labels = labels;
        out.scenario = {ScenarioKind::Mixed, c};
        return out;
    };
    while (lo <= hi) {
        auto [too_many, too_few] = try_boundary(probe, sol);
        if (!too_many && !too_few) return accept(probe);
        if (too_many && too_few) break;
        if (too_many) {
            if (probe == 0) break;
            hi = probe - 1;
        } else {
            lo = probe + 1;
        }
        probe = lo + (hi >= lo ? (hi - lo) / 2 : 0);
    }
    // Rounding at near-ties can defeat the bracket; scan every boundary.
    for (std::size_t c = 0; c <= n; ++c) {
        auto [too_many, too_few] = try_boundary(c, sol);
        if (!too_many && !too_few) return accept(c);
    }
    throw std::logic_error("no self-consistent overlap state found");
}

inline Seconds node_eq7_time(const NodeComputeModel& n, const CommModel& c, double b) {
    return std::max(compute_time(n, b) + c.t_u, sync_start(n, c, b) + c.t_comm());
}

inline std::vector<std::size_t> all_nodes(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

inline void require_total(std::int64_t total) {
    if (total < 1) throw DomainError("total batch must be >= 1");
}

}  // namespace detail

/// Check 1: all nodes share one compute time t.
inline LevelSolution solve_equal_compute(const ClusterSpec& spec, std::int64_t total) {
    detail::require_total(total);
    const auto idx = detail::all_nodes(spec.size());
    return detail::solve_subset(spec, idx, static_cast<double>(total),
                                [](std::size_t, const NodeComputeModel& m) { return detail::compute_line(m); });
}

/// Check 2: all nodes share one sync start.
inline LevelSolution solve_equal_syncstart(const ClusterSpec& spec, std::int64_t total) {
    detail::require_total(total);
    const auto idx = detail::all_nodes(spec.size());
    return detail::solve_subset(spec, idx, static_cast<double>(total), [&](std::size_t, const NodeComputeModel& m) {
        return detail::sync_line(m, spec.comm);
    });
}

/// Compute-labeled nodes share t'_compute = T_comb, comm-labeled nodes share
/// syncStart' = T_comb - T_o. The returned level is T_comb; OptPerf for this
/// hypothesis is T_comb + T_u.
inline LevelSolution solve_mixed(const ClusterSpec& spec, std::int64_t total, std::span<const Bottleneck> labels) {
    detail::require_total(total);
    if (labels.size() != spec.size()) throw DomainError("one label per node required");
    const auto idx = detail::all_nodes(spec.size());
    return detail::solve_subset(spec, idx, static_cast<double>(total), [&](std::size_t j, const NodeComputeModel& m) {
        return labels[j] == Bottleneck::Compute ? detail::compute_line(m) : detail::comm_line(m, spec.comm);
    });
}

/// OptPerf and the optimal split of `total`. Nodes whose equal-time share
/// would be negative are held at 0, nodes over their memory cap at the cap,
/// and the rest re-solved. `warm_start` only changes where the boundary
/// search begins.
inline OptPerfSolution find_optperf(const ClusterSpec& spec, std::int64_t total,
                                    const std::optional<Scenario>& warm_start = std::nullopt) {
    validate(spec);
    detail::require_total(total);
    const std::size_t n = spec.size();
    if (total < static_cast<std::int64_t>(n))
        throw InfeasibleError("total batch " + std::to_string(total) + " is smaller than the node count " +
                              std::to_string(n) + "; every node needs at least one sample");
    if (spec.max_local_batch) {
        std::int64_t cap_sum = 0;
        for (auto c : *spec.max_local_batch) cap_sum += c;
        if (cap_sum < total)
            throw InfeasibleError("per-node max_local_batch caps sum to " + std::to_string(cap_sum) +
                                  ", below the total batch " + std::to_string(total));
    }

    const CommModel& comm = spec.comm;
    std::vector<std::optional<double>> fixed(n);
    OptPerfSolution out;
    detail::CoreResult core;
    std::vector<std::size_t> active;
    const std::size_t max_rounds = 4 * n + 8;
    bool settled = false;

    for (std::size_t round = 0; round < max_rounds && !settled; ++round) {
        active.clear();
        double residual = static_cast<double>(total);
        for (std::size_t i = 0; i < n; ++i) {
            if (fixed[i]) residual -= *fixed[i];
            else active.push_back(i);
        }
        if (active.empty()) {
            core = {};
            settled = true;
            break;
        }
        core = detail::solve_core(spec, active, residual, warm_start);
        out.linear_solves += core.solves;
        const double finish = core.level + comm.t_u;
        const double tol = detail::rel_tol(finish);

        bool changed = false;
        for (std::size_t j = 0; j < active.size(); ++j) {
            const auto c = spec.cap(active[j]);
            if (c && core.b[j] > static_cast<double>(*c)) {
                fixed[active[j]] = static_cast<double>(*c);
                changed = true;
            }
        }
        if (!changed) {
            for (std::size_t j = 0; j < active.size(); ++j) {
                if (core.b[j] < 0.0) {
                    fixed[active[j]] = 0.0;
                    changed = true;
                }
            }
        }
        if (!changed) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!fixed[i]) continue;
                const double t = detail::node_eq7_time(spec.nodes[i], comm, *fixed[i]);
                const bool at_zero = *fixed[i] == 0.0;
                if ((at_zero && t < finish - tol) || (!at_zero && t > finish + tol)) {
                    fixed[i].reset();
                    changed = true;
                }
            }
        }
        settled = !changed;
    }
    if (!settled) throw std::logic_error("clamping did not converge");

    out.alloc_real.total = total;
    out.alloc_real.locals.assign(n, 0.0);
    out.labels.assign(n, Bottleneck::Compute);
    out.clamped.assign(n, false);
    double batch_time = active.empty() ? -INFINITY : core.level + comm.t_u;
    for (std::size_t j = 0; j < active.size(); ++j) {
        out.alloc_real.locals[active[j]] = core.b[j];
        out.labels[active[j]] = core.labels[j];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!fixed[i]) continue;
        out.clamped[i] = true;
        out.alloc_real.locals[i] = *fixed[i];
        out.labels[i] = classify_bottleneck(spec.nodes[i], comm, *fixed[i]);
        batch_time = std::max(batch_time, detail::node_eq7_time(spec.nodes[i], comm, *fixed[i]));
    }
    out.batch_time = batch_time;
    if (!active.empty()) {
        out.scenario = core.scenario;
    } else {
        const auto c = static_cast<std::size_t>(std::count(out.labels.begin(), out.labels.end(), Bottleneck::Compute));
        out.scenario = c == n ? Scenario{ScenarioKind::AllCompute, n}
                       : c == 0 ? Scenario{ScenarioKind::AllComm, 0}
                                : Scenario{ScenarioKind::Mixed, c};
    }
    out.alloc_int = round_allocation(out.alloc_real);
    return out;
}

}  // namespace optperf
