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

// Monte-Carlo validation of the local GNS estimators against their closed-form
// moments and of the optimal weights against uniform averaging.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "optperf/gns.hpp"
#include "optperf/simulator.hpp"

namespace optperf {

struct GnsCheckConfig {
    std::vector<std::int64_t> locals{25, 75};
    double g_sq = 1.0;
    double tr_sigma = 100.0;
    std::size_t dim = 256;
    std::size_t trials = 100000;
    std::uint64_t seed = 42;
};

struct RunningMoments {
    std::size_t count = 0;
    std::vector<double> mean;
    Matrix comoment;  // sum of centred cross products

    explicit RunningMoments(std::size_t n = 0) : mean(n, 0.0), comoment(n) {}

    void add(const std::vector<double>& x) {
        ++count;
        std::vector<double> delta(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            delta[i] = x[i] - mean[i];
            mean[i] += delta[i] / static_cast<double>(count);
        }
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < x.size(); ++j) comoment(i, j) += delta[i] * (x[j] - mean[j]);
    }

    [[nodiscard]] double cov(std::size_t i, std::size_t j) const {
        return count > 1 ? comoment(i, j) / static_cast<double>(count - 1) : std::numeric_limits<double>::quiet_NaN();
    }
    [[nodiscard]] double std_error(std::size_t i) const { return std::sqrt(cov(i, i) / static_cast<double>(count)); }
};

struct GnsCheckReport {
    GnsCheckConfig config;
    std::int64_t total = 0;
    // Per-node estimators, then the weighted and uniform combinations:
    // layout [G_0..G_{n-1}, S_0..S_{n-1}, G_w, S_w, G_u, S_u].
    RunningMoments moments;
    std::vector<double> weights_g;
    std::vector<double> weights_s;
    MomentTable predicted;
    MomentTable exact;
    bool degraded = false;

    [[nodiscard]] std::size_t n() const { return config.locals.size(); }
    [[nodiscard]] std::size_t g_index(std::size_t i) const { return i; }
    [[nodiscard]] std::size_t s_index(std::size_t i) const { return n() + i; }
    [[nodiscard]] std::size_t weighted_g() const { return 2 * n(); }
    [[nodiscard]] std::size_t weighted_s() const { return 2 * n() + 1; }
    [[nodiscard]] std::size_t uniform_g() const { return 2 * n() + 2; }
    [[nodiscard]] std::size_t uniform_s() const { return 2 * n() + 3; }
    [[nodiscard]] double ratio_g() const { return moments.cov(weighted_g(), weighted_g()) / moments.cov(uniform_g(), uniform_g()); }
    [[nodiscard]] double ratio_s() const { return moments.cov(weighted_s(), weighted_s()) / moments.cov(uniform_s(), uniform_s()); }
};

inline GnsCheckReport run_gns_check(const GnsCheckConfig& cfg) {
    const std::size_t n = cfg.locals.size();
    if (n < 2) throw DomainError("gns check needs at least two nodes");
    if (cfg.trials < 1) throw DomainError("gns check needs at least one trial");
    TruthWorld world;
    world.gradients = {cfg.dim, cfg.g_sq, cfg.tr_sigma};
    world.rng_seed = cfg.seed;
    IntAllocation alloc{0, cfg.locals};
    for (auto b : cfg.locals) {
        if (b < 1) throw DomainError("every node needs at least one sample");
        alloc.total += b;
    }
    // Only the gradient streams are used, timing coefficients are placeholders.
    for (std::size_t i = 0; i < n; ++i) world.true_spec.nodes.push_back({static_cast<int>(i), 1e-3, 0.0, 1e-3, 0.0});
    Simulator sim(world);

    GnsCheckReport rep{cfg, alloc.total, RunningMoments(2 * n + 4), {}, {}, {}, {}, false};
    std::vector<double> b(cfg.locals.begin(), cfg.locals.end());
    const double B = static_cast<double>(alloc.total);
    const auto mats = weight_matrices(b, B);
    const auto wg = optimal_weights(mats.a_g, b);
    const auto ws = optimal_weights(mats.a_s, b);
    rep.weights_g = wg.weights;
    rep.weights_s = ws.weights;
    rep.degraded = wg.degraded || ws.degraded;
    rep.predicted = predicted_moments(b, B, cfg.g_sq, cfg.tr_sigma);
    rep.exact = exact_gaussian_moments(b, B, cfg.g_sq, cfg.tr_sigma, cfg.dim);

    std::vector<double> row(2 * n + 4);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const auto draw = sim.sample_gradients(alloc);
        double gw = 0.0, sw = 0.0, gu = 0.0, su = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto e = local_estimates({static_cast<int>(i), b[i], draw.local_sq[i]}, draw.global_sq, B);
            row[i] = e.g_est;
            row[n + i] = e.s_est;
            gw += rep.weights_g[i] * e.g_est;
            sw += rep.weights_s[i] * e.s_est;
            gu += e.g_est / static_cast<double>(n);
            su += e.s_est / static_cast<double>(n);
        }
        row[2 * n] = gw;
        row[2 * n + 1] = sw;
        row[2 * n + 2] = gu;
        row[2 * n + 3] = su;
        rep.moments.add(row);
    }
    return rep;
}

}  // namespace optperf
