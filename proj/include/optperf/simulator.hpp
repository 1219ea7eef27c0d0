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

// Ground-truth world: noisy per-node timings, an event-driven bucket pipeline
// for the all-reduce overlap, and Gaussian gradients with known moments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "optperf/errors.hpp"
#include "optperf/gns.hpp"
#include "optperf/learner.hpp"
#include "optperf/perf_model.hpp"
#include "optperf/random.hpp"

namespace optperf {

struct GradientTruth {
    std::size_t dim = 256;
    double g_sq = 1.0;
    double tr_sigma = 100.0;
};

struct TruthWorld {
    ClusterSpec true_spec;
    double noise_cv = 0.05;
    double gamma_noise_cv = 0.05;  // measurement noise on the reported overlap ratio
    int n_buckets = 8;
    GradientTruth gradients;
    std::uint64_t rng_seed = 0;
};

inline void validate(const TruthWorld& w) {
    validate(w.true_spec);
    if (!(w.noise_cv >= 0.0) || !(w.gamma_noise_cv >= 0.0)) throw DomainError("noise cv must be non-negative");
    if (w.n_buckets < 2) throw DomainError("n_buckets must be at least 2");
    if (w.gradients.dim == 0) throw DomainError("gradient dimension must be positive");
    if (!(w.gradients.g_sq >= 0.0) || !(w.gradients.tr_sigma >= 0.0)) throw DomainError("gradient moments must be non-negative");
}

struct PipelineTrace {
    std::vector<std::vector<Seconds>> ready;  // [node][bucket]
    std::vector<Seconds> sync_begin;          // [bucket]
    std::vector<Seconds> sync_end;            // [bucket]
    Seconds batch_time = 0.0;
};

inline PipelineTrace run_pipeline(std::span<const Seconds> a, std::span<const Seconds> p, double gamma, Seconds t_o, Seconds t_u,
                                  int n_buckets) {
    if (n_buckets < 2) throw DomainError("n_buckets must be at least 2");
    if (a.empty() || a.size() != p.size()) throw DomainError("need matching non-empty a and P vectors");
    const std::size_t nb = static_cast<std::size_t>(n_buckets);
    const double spans = static_cast<double>(nb - 1);
    PipelineTrace tr;
    tr.ready.assign(a.size(), std::vector<Seconds>(nb));
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Seconds first = a[i] + gamma * p[i];
        const Seconds step = (1.0 - gamma) * p[i] / spans;
        for (std::size_t j = 0; j < nb; ++j) tr.ready[i][j] = j + 1 == nb ? a[i] + p[i] : first + static_cast<double>(j) * step;
    }
    tr.sync_begin.resize(nb);
    tr.sync_end.resize(nb);
    Seconds prev_end = -INFINITY;
    for (std::size_t j = 0; j < nb; ++j) {
        Seconds all_ready = -INFINITY;
        for (const auto& node : tr.ready) all_ready = std::max(all_ready, node[j]);
        tr.sync_begin[j] = std::max(all_ready, prev_end);
        tr.sync_end[j] = tr.sync_begin[j] + (j + 1 == nb ? t_u : t_o / spans);
        prev_end = tr.sync_end[j];
    }
    tr.batch_time = prev_end;
    return tr;
}

inline Seconds simulate_pipeline(std::span<const Seconds> a, std::span<const Seconds> p, double gamma, Seconds t_o, Seconds t_u,
                                 int n_buckets) {
    return run_pipeline(a, p, gamma, t_o, t_u, n_buckets).batch_time;
}

struct BatchTrace {
    std::vector<TimingObservation> nodes;
    Seconds batch_time = 0.0;
    PipelineTrace events;
};

struct GradientSample {
    std::vector<double> local_sq;  // NaN for nodes holding no samples
    double global_sq = 0.0;
    std::vector<std::vector<double>> locals;
};

enum class GradientMode {
    NodeMean,   // draw each node's mean gradient directly from Normal(G, Sigma/b_i)
    PerSample,  // draw b_i per-sample gradients and average them
};

class Simulator {
public:
    explicit Simulator(TruthWorld world) : world_(std::move(world)) {
        validate(world_);
        const auto n = world_.true_spec.size();
        for (std::size_t i = 0; i < n; ++i) {
            const auto idx = static_cast<std::uint32_t>(i);
            timing_.emplace_back(world_.rng_seed, stream_id(StreamPurpose::Timing, idx));
            gamma_.emplace_back(world_.rng_seed, stream_id(StreamPurpose::GammaMeasurement, idx));
            grads_.emplace_back(world_.rng_seed, stream_id(StreamPurpose::Gradients, idx));
        }
    }

    [[nodiscard]] const TruthWorld& world() const { return world_; }

    template <typename T>
    BatchTrace simulate_batch(const Allocation<T>& alloc, int epoch = 0) {
        const auto& spec = world_.true_spec;
        if (alloc.size() != spec.size()) throw DomainError("allocation does not match the cluster");
        const std::size_t n = spec.size();
        std::vector<Seconds> a(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double b = static_cast<double>(alloc.locals[i]);
            if (!(b >= 0.0)) throw DomainError("local batch size must be non-negative");
            const auto& nd = spec.nodes[i];
            a[i] = (nd.q * b + nd.s) * timing_[i].lognormal_unit_mean(world_.noise_cv);
            p[i] = (nd.k * b + nd.m) * timing_[i].lognormal_unit_mean(world_.noise_cv);
        }
        const auto& c = spec.comm;
        BatchTrace out;
        out.events = run_pipeline(a, p, c.gamma, c.t_o, c.t_u, world_.n_buckets);
        out.batch_time = out.events.batch_time;
        for (std::size_t i = 0; i < n; ++i) {
            TimingObservation o;
            o.epoch = epoch;
            o.node_id = static_cast<int>(i);
            o.b = static_cast<double>(alloc.locals[i]);
            o.a_time = a[i];
            o.p_time = p[i];
            o.gamma_obs = c.gamma * gamma_[i].lognormal_unit_mean(world_.gamma_noise_cv);
            o.sync_start_obs = a[i] + o.gamma_obs * p[i];
            o.batch_time_obs = out.batch_time;
            // A node that finished its first bucket early waits for the others
            // and sees that wait as part of its synchronisation.
            o.t_o_obs = c.t_o + (out.events.sync_begin[0] - out.events.ready[i][0]);
            o.t_u_obs = c.t_u;
            out.nodes.push_back(o);
        }
        return out;
    }

    // Local and global gradients under allocation `alloc`; tr_sigma overrides
    // the world's value when non-negative.
    template <typename T>
    GradientSample sample_gradients(const Allocation<T>& alloc, double tr_sigma = -1.0, GradientMode mode = GradientMode::NodeMean) {
        const auto& gt = world_.gradients;
        const double tr = tr_sigma >= 0.0 ? tr_sigma : gt.tr_sigma;
        const std::size_t d = gt.dim;
        const double mean = std::sqrt(gt.g_sq / static_cast<double>(d));
        const double sd = std::sqrt(tr / static_cast<double>(d));
        const std::size_t n = alloc.size();
        if (n != world_.true_spec.size()) throw DomainError("allocation does not match the cluster");
        GradientSample out;
        out.local_sq.assign(n, std::numeric_limits<double>::quiet_NaN());
        out.locals.assign(n, std::vector<double>(d, 0.0));
        std::vector<double> ratios(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double b = static_cast<double>(alloc.locals[i]);
            if (b < 1.0) continue;
            ratios[i] = b / static_cast<double>(alloc.total);
            auto& g = out.locals[i];
            if (mode == GradientMode::NodeMean) {
                const double scale = sd / std::sqrt(b);
                for (auto& x : g) x = mean + scale * grads_[i].normal();
            } else {
                const auto count = static_cast<std::int64_t>(alloc.locals[i]);
                for (std::int64_t k = 0; k < count; ++k)
                    for (auto& x : g) x += mean + sd * grads_[i].normal();
                for (auto& x : g) x /= b;
            }
            out.local_sq[i] = squared_norm(g);
        }
        out.global_sq = squared_norm(aggregate_gradients(out.locals, ratios));
        return out;
    }

private:
    TruthWorld world_;
    std::vector<RandomStream> timing_;
    std::vector<RandomStream> gamma_;
    std::vector<RandomStream> grads_;
};

}  // namespace optperf
