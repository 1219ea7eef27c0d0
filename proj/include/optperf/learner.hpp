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

// Online estimation of the node compute models, the overlap ratio and the
// communication times from per-batch timing telemetry.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "optperf/errors.hpp"
#include "optperf/perf_model.hpp"

namespace optperf {

struct TimingObservation {
    int epoch = 0;
    int node_id = 0;
    double b = 0.0;
    Seconds a_time = 0.0;
    Seconds p_time = 0.0;
    Seconds sync_start_obs = 0.0;
    Seconds batch_time_obs = 0.0;
    double gamma_obs = 0.0;
    Seconds t_o_obs = 0.0;
    Seconds t_u_obs = 0.0;

    friend bool operator==(const TimingObservation&, const TimingObservation&) = default;
};

struct ComputeFit {
    NodeComputeModel model;
    bool slope_clamped = false;
};

inline constexpr double kGammaFloor = 0.01;
inline constexpr double kGammaCeil = 0.99;

namespace detail {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    bool clamped = false;
};

// Ordinary least squares on centred data; exact interpolation for two points.
inline LineFit ols(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit fit{sxy / sxx, 0.0, false};
    if (fit.slope < 0.0) {
        fit.slope = 0.0;
        fit.clamped = true;
    }
    fit.intercept = my - fit.slope * mx;
    return fit;
}

inline std::size_t distinct_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

inline double mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

inline double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mu = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return acc / static_cast<double>(v.size() - 1);
}

}  // namespace detail

inline ComputeFit fit_compute_model(std::span<const TimingObservation> obs) {
    if (obs.size() < 2) throw InsufficientDataError("need at least two observations to fit a compute model");
    std::vector<double> b, a, p;
    for (const auto& o : obs) {
        b.push_back(o.b);
        a.push_back(o.a_time);
        p.push_back(o.p_time);
    }
    if (detail::distinct_count(b) < 2)
        throw InsufficientDataError("node " + std::to_string(obs.front().node_id) +
                                    ": all observations share one local batch size");
    const auto fa = detail::ols(b, a);
    const auto fp = detail::ols(b, p);
    ComputeFit out;
    out.model = {obs.front().node_id, fa.slope, std::max(0.0, fa.intercept), fp.slope, std::max(0.0, fp.intercept)};
    out.slope_clamped = fa.clamped || fp.clamped;
    return out;
}

// Inverse-variance pooling. A zero-variance node gets the largest finite weight
// among its peers; if every node has zero variance the weights are equal.
inline double estimate_gamma(std::span<const double> gamma_means, std::span<const double> gamma_variances) {
    if (gamma_means.empty() || gamma_means.size() != gamma_variances.size())
        throw DomainError("estimate_gamma needs one variance per node mean");
    std::vector<double> w(gamma_means.size(), 0.0);
    double max_finite = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!(gamma_variances[i] >= 0.0)) throw DomainError("gamma variances must be non-negative");
        if (gamma_variances[i] > 0.0) {
            w[i] = 1.0 / gamma_variances[i];
            max_finite = std::max(max_finite, w[i]);
        }
    }
    for (std::size_t i = 0; i < w.size(); ++i)
        if (gamma_variances[i] == 0.0) w[i] = max_finite > 0.0 ? max_finite : 1.0;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        num += w[i] * gamma_means[i];
        den += w[i];
    }
    return num / den;
}

// Waiting inflates a node's observed communication time, so the straggler's
// (smallest) mean is the estimate.
inline Seconds estimate_comm_time(std::span<const double> per_node_mean) {
    if (per_node_mean.empty()) throw DomainError("estimate_comm_time needs at least one observation");
    return *std::min_element(per_node_mean.begin(), per_node_mean.end());
}

struct LearnedNode {
    std::vector<TimingObservation> observations;
    NodeComputeModel model;
    bool fitted = false;
    bool slope_clamped = false;
    double gamma_mean = std::numeric_limits<double>::quiet_NaN();
    double gamma_variance = std::numeric_limits<double>::quiet_NaN();
    Seconds t_o_mean = std::numeric_limits<double>::quiet_NaN();
    Seconds t_u_mean = std::numeric_limits<double>::quiet_NaN();

    [[nodiscard]] std::size_t observation_count() const { return observations.size(); }
    friend bool operator==(const LearnedNode&, const LearnedNode&) = default;
};

struct LearnedModel {
    std::vector<LearnedNode> nodes;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    Seconds t_o = std::numeric_limits<double>::quiet_NaN();
    Seconds t_u = std::numeric_limits<double>::quiet_NaN();

    explicit LearnedModel(std::size_t n = 0) : nodes(n) {
        for (std::size_t i = 0; i < n; ++i) nodes[i].model.node_id = static_cast<int>(i);
    }

    [[nodiscard]] std::size_t size() const { return nodes.size(); }

    [[nodiscard]] bool ready() const {
        return !nodes.empty() && std::all_of(nodes.begin(), nodes.end(), [](const LearnedNode& n) { return n.fitted; }) &&
               gamma > 0.0 && gamma < 1.0;
    }

    [[nodiscard]] ClusterSpec to_spec(std::optional<std::vector<std::int64_t>> caps = std::nullopt) const {
        if (!ready()) throw InsufficientDataError("learned model is not ready");
        ClusterSpec spec;
        for (const auto& n : nodes) spec.nodes.push_back(n.model);
        spec.comm = {gamma, t_o, t_u};
        spec.max_local_batch = std::move(caps);
        return spec;
    }

    // Mean per-sample time (a + P)/b over all observations of a node.
    [[nodiscard]] double mean_sample_time(std::size_t i) const {
        double acc = 0.0;
        std::size_t count = 0;
        for (const auto& o : nodes.at(i).observations) {
            if (o.b <= 0.0) continue;
            acc += (o.a_time + o.p_time) / o.b;
            ++count;
        }
        return count ? acc / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
    }

    friend bool operator==(const LearnedModel&, const LearnedModel&) = default;
};

namespace detail {

inline void refit_node(LearnedNode& node) {
    // Communication means use only the latest epoch: the straggler, which is the
    // only node observing the true T, can change when the allocation changes.
    std::vector<double> b, g, to, tu;
    const int latest = node.observations.back().epoch;
    for (const auto& o : node.observations) {
        b.push_back(o.b);
        g.push_back(std::clamp(o.gamma_obs, kGammaFloor, kGammaCeil));
        if (o.epoch != latest) continue;
        to.push_back(o.t_o_obs);
        tu.push_back(o.t_u_obs);
    }
    node.t_o_mean = mean(to);
    node.t_u_mean = mean(tu);
    node.gamma_mean = mean(g);
    node.gamma_variance = sample_variance(g);
    if (node.observations.size() >= 2 && distinct_count(b) >= 2) {
        const auto fit = fit_compute_model(node.observations);
        node.model = fit.model;
        node.slope_clamped = fit.slope_clamped;
        node.fitted = true;
    }
}

}  // namespace detail

inline LearnedModel update(LearnedModel learned, std::span<const TimingObservation> fresh) {
    if (fresh.empty()) return learned;
    std::vector<bool> touched(learned.size(), false);
    for (const auto& o : fresh) {
        if (o.node_id < 0 || static_cast<std::size_t>(o.node_id) >= learned.size())
            throw DomainError("observation for unknown node " + std::to_string(o.node_id));
        learned.nodes[o.node_id].observations.push_back(o);
        touched[o.node_id] = true;
    }
    for (std::size_t i = 0; i < learned.size(); ++i)
        if (touched[i]) detail::refit_node(learned.nodes[i]);

    std::vector<double> gm, gv, to, tu;
    for (const auto& n : learned.nodes) {
        if (n.observation_count() >= 2) {
            gm.push_back(n.gamma_mean);
            gv.push_back(n.gamma_variance);
        }
        if (n.observation_count() >= 1) {
            to.push_back(n.t_o_mean);
            tu.push_back(n.t_u_mean);
        }
    }
    if (!gm.empty()) learned.gamma = std::clamp(estimate_gamma(gm, gv), kGammaFloor, kGammaCeil);
    if (!to.empty()) {
        learned.t_o = estimate_comm_time(to);
        learned.t_u = estimate_comm_time(tu);
    }
    return learned;
}

}  // namespace optperf
