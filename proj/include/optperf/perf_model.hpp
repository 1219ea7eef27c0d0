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

// Per-node and cluster batch-time models for synchronous data-parallel
// training with bucketed ring all-reduce.
//
// A node with local batch b spends a(b) = q*b + s on data loading, forward
// pass and parameter update, then P(b) = k*b + m on backpropagation. The
// first gradient bucket is ready gamma*P into backprop; the remaining buckets
// (synchronized in T_o) and the last bucket (T_u) follow.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "optperf/errors.hpp"

namespace optperf {

using Seconds = double;

struct NodeComputeModel {
    int node_id = 0;
    double q = 0.0;  // s/sample, non-backprop slope
    double s = 0.0;  // s, non-backprop intercept
    double k = 0.0;  // s/sample, backprop slope
    double m = 0.0;  // s, backprop intercept

    [[nodiscard]] double compute_slope() const noexcept { return q + k; }
    [[nodiscard]] double compute_intercept() const noexcept { return s + m; }
    [[nodiscard]] double sync_slope(double gamma) const noexcept { return q + gamma * k; }
    [[nodiscard]] double sync_intercept(double gamma) const noexcept { return s + gamma * m; }

    friend bool operator==(const NodeComputeModel&, const NodeComputeModel&) = default;
};

struct CommModel {
    double gamma = 0.5;
    Seconds t_o = 0.0;
    Seconds t_u = 0.0;

    [[nodiscard]] Seconds t_comm() const noexcept { return t_o + t_u; }

    friend bool operator==(const CommModel&, const CommModel&) = default;
};

struct ClusterSpec {
    std::vector<NodeComputeModel> nodes;
    CommModel comm;
    std::optional<std::vector<std::int64_t>> max_local_batch;

    [[nodiscard]] std::size_t size() const noexcept { return nodes.size(); }

    [[nodiscard]] std::optional<std::int64_t> cap(std::size_t i) const {
        if (!max_local_batch) return std::nullopt;
        return (*max_local_batch)[i];
    }

    friend bool operator==(const ClusterSpec&, const ClusterSpec&) = default;
};

/// Total batch B split into per-node local batches. Real-valued in solver
/// output, integer once rounded.
template <typename T>
struct Allocation {
    std::int64_t total = 0;
    std::vector<T> locals;

    [[nodiscard]] std::size_t size() const noexcept { return locals.size(); }

    [[nodiscard]] std::vector<double> ratios() const {
        std::vector<double> r(locals.size());
        for (std::size_t i = 0; i < locals.size(); ++i)
            r[i] = static_cast<double>(locals[i]) / static_cast<double>(total);
        return r;
    }

    [[nodiscard]] double sum() const {
        double acc = 0.0;
        for (const auto& b : locals) acc += static_cast<double>(b);
        return acc;
    }

    friend bool operator==(const Allocation&, const Allocation&) = default;
};

using RealAllocation = Allocation<double>;
using IntAllocation = Allocation<std::int64_t>;

enum class Bottleneck { Compute, Communication };

inline const char* to_string(Bottleneck b) noexcept {
    return b == Bottleneck::Compute ? "compute" : "communication";
}

inline void validate(const NodeComputeModel& n) {
    if (!(n.q >= 0.0) || !(n.k >= 0.0) || !(n.s >= 0.0) || !(n.m >= 0.0))
        throw DomainError("node " + std::to_string(n.node_id) + ": coefficients must be non-negative");
    if (!(n.q + n.k > 0.0))
        throw SingularModelError("node " + std::to_string(n.node_id) +
                                 ": q + k must be positive (time must grow with batch size)");
}

inline void validate(const CommModel& c) {
    if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
    if (!(c.t_o >= 0.0) || !(c.t_u >= 0.0)) throw DomainError("communication times must be non-negative");
}

inline void validate(const ClusterSpec& spec) {
    if (spec.nodes.empty()) throw DomainError("cluster must have at least one node");
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
        if (spec.nodes[i].node_id != static_cast<int>(i))
            throw DomainError("node ids must be 0..n-1 in order");
        validate(spec.nodes[i]);
    }
    validate(spec.comm);
    if (spec.max_local_batch) {
        if (spec.max_local_batch->size() != spec.nodes.size())
            throw DomainError("max_local_batch must have one entry per node");
        for (auto c : *spec.max_local_batch)
            if (c < 1) throw DomainError("max_local_batch entries must be >= 1");
    }
}

namespace detail {
inline void require_batch(double b) {
    if (!(b >= 0.0)) throw DomainError("local batch size must be non-negative");
}
}  // namespace detail

/// a(b) + P(b).
inline Seconds compute_time(const NodeComputeModel& n, double b) {
    detail::require_batch(b);
    return (n.q * b + n.s) + (n.k * b + n.m);
}

/// Moment the node's first bucket becomes ready: a(b) + gamma * P(b).
inline Seconds sync_start(const NodeComputeModel& n, const CommModel& c, double b) {
    detail::require_batch(b);
    return (n.q * b + n.s) + c.gamma * (n.k * b + n.m);
}

/// Compute iff (1 - gamma) * P(b) >= T_o; ties go to Compute.
inline Bottleneck classify_bottleneck(const NodeComputeModel& n, const CommModel& c, double b) {
    detail::require_batch(b);
    return (1.0 - c.gamma) * (n.k * b + n.m) >= c.t_o ? Bottleneck::Compute : Bottleneck::Communication;
}

inline Seconds node_batch_time(const NodeComputeModel& n, const CommModel& c, double b) {
    if (classify_bottleneck(n, c, b) == Bottleneck::Compute) return compute_time(n, b) + c.t_u;
    return sync_start(n, c, b) + c.t_comm();
}

/// max( max_i t_compute_i + T_u, max_i syncStart_i + T_comm ).
template <typename T>
Seconds cluster_batch_time(const ClusterSpec& spec, const Allocation<T>& alloc) {
    if (alloc.size() != spec.size())
        throw DomainError("allocation has " + std::to_string(alloc.size()) + " entries, cluster has " +
                          std::to_string(spec.size()));
    Seconds worst_compute = -INFINITY;
    Seconds worst_sync = -INFINITY;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const double b = static_cast<double>(alloc.locals[i]);
        worst_compute = std::max(worst_compute, compute_time(spec.nodes[i], b));
        worst_sync = std::max(worst_sync, sync_start(spec.nodes[i], spec.comm, b));
    }
    return std::max(worst_compute + spec.comm.t_u, worst_sync + spec.comm.t_comm());
}

}  // namespace optperf
