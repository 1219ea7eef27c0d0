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

// Grid-search reference for OptPerf, used to check the solver. Every local
// batch is restricted to multiples of the grid step; the returned time is the
// minimum cluster batch time over that grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "optperf/errors.hpp"
#include "optperf/perf_model.hpp"
#include "optperf/solver.hpp"

namespace optperf {

namespace detail {

inline OptPerfSolution finish_grid_solution(const ClusterSpec& spec, RealAllocation alloc) {
    OptPerfSolution out;
    out.batch_time = cluster_batch_time(spec, alloc);
    out.labels.resize(spec.size());
    std::size_t compute = 0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        out.labels[i] = classify_bottleneck(spec.nodes[i], spec.comm, alloc.locals[i]);
        if (out.labels[i] == Bottleneck::Compute) ++compute;
    }
    out.scenario = compute == spec.size() ? Scenario{ScenarioKind::AllCompute, compute}
                   : compute == 0         ? Scenario{ScenarioKind::AllComm, 0}
                                          : Scenario{ScenarioKind::Mixed, compute};
    out.clamped.assign(spec.size(), false);
    out.alloc_int = round_allocation(alloc);
    out.alloc_real = std::move(alloc);
    return out;
}

}  // namespace detail

/// Minimum of cluster_batch_time over all allocations on the grid
/// {0, h, 2h, ..., B}, h = B / round(B / grid_step).
///
/// Two nodes: every grid point is evaluated. Three or more: node times are
/// non-decreasing in b, so a grid allocation finishing by T exists iff each
/// node's largest grid batch with time <= T sums to at least B. The grid
/// optimum is one of the node times at a grid point; binary searching that
/// sorted candidate set for the smallest feasible T gives the same minimum
/// as full enumeration.
inline OptPerfSolution brute_force_optperf(const ClusterSpec& spec, std::int64_t total, double grid_step,
                                           std::size_t max_points = 50'000'000) {
    validate(spec);
    if (total < 1) throw DomainError("total batch must be >= 1");
    if (!(grid_step > 0.0)) throw DomainError("grid step must be positive");
    const std::size_t n = spec.size();
    const double B = static_cast<double>(total);
    const auto units = static_cast<std::int64_t>(std::max<long long>(1, std::llround(B / grid_step)));
    const double step = B / static_cast<double>(units);
    const std::size_t points = static_cast<std::size_t>(units + 1) * (n == 2 ? 1 : n);
    if (n > 1 && points > max_points)
        throw DomainError("grid too fine: " + std::to_string(points) + " evaluations exceed the guard of " +
                          std::to_string(max_points));

    std::vector<std::int64_t> cap_units(n, units);
    for (std::size_t i = 0; i < n; ++i)
        if (auto c = spec.cap(i))
            cap_units[i] = std::min<std::int64_t>(units, static_cast<std::int64_t>(std::floor(static_cast<double>(*c) / step + 1e-9)));

    auto node_time = [&](std::size_t i, std::int64_t u) {
        return detail::node_eq7_time(spec.nodes[i], spec.comm, static_cast<double>(u) * step);
    };

    if (n == 1) {
        if (cap_units[0] < units) throw InfeasibleError("cap below total batch");
        return detail::finish_grid_solution(spec, RealAllocation{total, {B}});
    }

    if (n == 2) {
        double best = INFINITY;
        std::int64_t best_u = -1;
        for (std::int64_t u = 0; u <= cap_units[0]; ++u) {
            const std::int64_t rest = units - u;
            if (rest < 0 || rest > cap_units[1]) continue;
            const double t = std::max(node_time(0, u), node_time(1, rest));
            if (t < best) {
                best = t;
                best_u = u;
            }
        }
        if (best_u < 0) throw InfeasibleError("no grid allocation respects the caps");
        const double b0 = static_cast<double>(best_u) * step;
        return detail::finish_grid_solution(spec, RealAllocation{total, {b0, std::max(0.0, B - b0)}});
    }

    std::vector<double> candidates;
    candidates.reserve(points);
    for (std::size_t i = 0; i < n; ++i)
        for (std::int64_t u = 0; u <= cap_units[i]; ++u) candidates.push_back(node_time(i, u));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // Largest grid batch for node i finishing by t, or -1.
    auto max_units = [&](std::size_t i, double t) -> std::int64_t {
        if (node_time(i, 0) > t) return -1;
        std::int64_t lo = 0, hi = cap_units[i];
        while (lo < hi) {
            const std::int64_t mid = lo + (hi - lo + 1) / 2;
            if (node_time(i, mid) <= t) lo = mid;
            else hi = mid - 1;
        }
        return lo;
    };
    auto feasible = [&](double t, std::vector<std::int64_t>* take) {
        std::int64_t sum = 0;
        std::vector<std::int64_t> u(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = max_units(i, t);
            if (u[i] < 0) return false;
            sum += u[i];
        }
        if (take) *take = std::move(u);
        return sum >= units;
    };

    std::size_t lo = 0, hi = candidates.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (feasible(candidates[mid], nullptr)) hi = mid;
        else lo = mid + 1;
    }
    if (lo == candidates.size()) throw InfeasibleError("no grid allocation respects the caps");
    std::vector<std::int64_t> take;
    feasible(candidates[lo], &take);
    std::int64_t excess = -units;
    for (auto u : take) excess += u;
    for (std::size_t i = 0; i < n && excess > 0; ++i) {
        const std::int64_t cut = std::min(excess, take[i]);
        take[i] -= cut;
        excess -= cut;
    }
    RealAllocation alloc{total, std::vector<double>(n)};
    double assigned = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        alloc.locals[i] = static_cast<double>(take[i]) * step;
        assigned += alloc.locals[i];
    }
    alloc.locals[n - 1] = std::max(0.0, B - assigned);
    return detail::finish_grid_solution(spec, std::move(alloc));
}

}  // namespace optperf
