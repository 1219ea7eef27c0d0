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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "optperf/simulator.hpp"
#include "optperf/solver.hpp"
#include "support/fixtures.hpp"

namespace optperf {
namespace {

TruthWorld three_node_world(double cv) {
    TruthWorld w;
    w.true_spec.nodes = {{0, 0.0004, 0.010, 0.0008, 0.012}, {1, 0.0006, 0.012, 0.0012, 0.014}, {2, 0.0018, 0.015, 0.0036, 0.020}};
    w.true_spec.comm = {0.3, 0.06, 0.015};
    w.noise_cv = cv;
    w.gamma_noise_cv = cv;
    w.rng_seed = 31;
    return w;
}

TEST(SimulatePipeline, HandTraces) {
    const std::vector<double> a{0.1}, p{0.2};
    EXPECT_NEAR(simulate_pipeline(a, p, 0.5, 0.05, 0.02, 2), 0.32, 1e-15);
    EXPECT_NEAR(simulate_pipeline(a, p, 0.5, 0.5, 0.02, 2), 0.72, 1e-15);
    const auto tr = run_pipeline(a, p, 0.5, 0.05, 0.02, 2);
    EXPECT_NEAR(tr.ready[0][0], 0.2, 1e-15);
    EXPECT_NEAR(tr.sync_end[0], 0.25, 1e-15);
    EXPECT_NEAR(tr.ready[0][1], 0.3, 1e-15);
    EXPECT_THROW(simulate_pipeline(a, p, 0.5, 0.05, 0.02, 1), DomainError);
}

TEST(SimulatePipeline, MatchesClosedFormOnRandomClusters) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> nodes(1, 8), buckets(2, 32);
    for (int t = 0; t < 1000; ++t) {
        const auto spec = testing::random_cluster(rng, static_cast<std::size_t>(nodes(rng)));
        std::vector<double> a, p;
        RealAllocation alloc{0, {}};
        for (const auto& nd : spec.nodes) {
            const double b = testing::log_uniform(rng, 1.0, 512.0);
            alloc.locals.push_back(b);
            a.push_back(nd.q * b + nd.s);
            p.push_back(nd.k * b + nd.m);
        }
        const double sim = simulate_pipeline(a, p, spec.comm.gamma, spec.comm.t_o, spec.comm.t_u, buckets(rng));
        EXPECT_NEAR(sim, cluster_batch_time(spec, alloc), 1e-9);
    }
}

TEST(SimulateBatch, NoiselessEqualsClosedForm) {
    Simulator sim(three_node_world(0.0));
    const IntAllocation alloc{256, {138, 90, 28}};
    const auto tr = sim.simulate_batch(alloc);
    EXPECT_NEAR(tr.batch_time, cluster_batch_time(sim.world().true_spec, alloc), 1e-9);
    for (const auto& o : tr.nodes) EXPECT_NEAR(o.gamma_obs, 0.3, 1e-15);
}

TEST(SimulateBatch, EventLogOrdered) {
    Simulator sim(three_node_world(0.05));
    const auto tr = sim.simulate_batch(IntAllocation{96, {40, 40, 16}});
    for (const auto& node : tr.events.ready)
        for (std::size_t j = 1; j < node.size(); ++j) EXPECT_LE(node[j - 1], node[j]);
    for (std::size_t j = 0; j < tr.events.sync_end.size(); ++j) {
        EXPECT_LE(tr.events.sync_begin[j], tr.events.sync_end[j]);
        if (j) {
            EXPECT_LE(tr.events.sync_end[j - 1], tr.events.sync_begin[j]);
        }
    }
    EXPECT_EQ(tr.batch_time, tr.events.sync_end.back());
}

std::string serialize(const std::vector<BatchTrace>& traces) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& t : traces) {
        os << t.batch_time;
        for (const auto& o : t.nodes) os << ' ' << o.a_time << ' ' << o.p_time << ' ' << o.gamma_obs << ' ' << o.t_o_obs;
        os << '\n';
    }
    return os.str();
}

TEST(SimulateBatch, DeterministicForFixedSeed) {
    std::vector<BatchTrace> x, y;
    Simulator s1(three_node_world(0.05)), s2(three_node_world(0.05));
    for (int i = 0; i < 20; ++i) {
        x.push_back(s1.simulate_batch(IntAllocation{96, {40, 40, 16}}));
        y.push_back(s2.simulate_batch(IntAllocation{96, {40, 40, 16}}));
    }
    EXPECT_EQ(serialize(x), serialize(y));
}

TEST(SimulateBatch, AddingANodeKeepsExistingStreams) {
    auto w = three_node_world(0.05);
    Simulator small(w);
    w.true_spec.nodes.push_back({3, 0.001, 0.01, 0.002, 0.02});
    Simulator big(w);
    const auto a = small.simulate_batch(IntAllocation{96, {40, 40, 16}});
    const auto b = big.simulate_batch(IntAllocation{106, {40, 40, 16, 10}});
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(a.nodes[i].a_time, b.nodes[i].a_time);
        EXPECT_EQ(a.nodes[i].p_time, b.nodes[i].p_time);
    }
}

double mean_of_batches(Simulator& sim, const IntAllocation& alloc, int batches) {
    double acc = 0.0;
    for (int i = 0; i < batches; ++i) acc += sim.simulate_batch(alloc).batch_time;
    return acc / batches;
}

// Expected realized times from a 2e6-draw numpy oracle of the max over noisy
// node times: balanced split mean 0.208199 (sd 0.00538), even split 0.509011.
TEST(SimulateBatch, NoisyMeanMatchesOracle) {
    Simulator sim(three_node_world(0.05));
    EXPECT_NEAR(mean_of_batches(sim, IntAllocation{256, {138, 90, 28}}, 100), 0.208199, 3 * 0.00538 / 10);
}

TEST(SimulateBatch, NoisyMeanNearClosedFormWhenOneNodeDominates) {
    Simulator sim(three_node_world(0.05));
    const IntAllocation alloc{256, {86, 85, 85}};
    const double closed = cluster_batch_time(sim.world().true_spec, alloc);
    EXPECT_NEAR(mean_of_batches(sim, alloc, 100), closed, 0.02 * closed);
}

TEST(SimulateBatch, StragglerObservesTrueCommTime) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 50; ++t) {
        TruthWorld w;
        w.true_spec = testing::random_cluster(rng, 4);
        w.noise_cv = 0.0;
        w.gamma_noise_cv = 0.0;
        Simulator sim(w);
        const auto tr = sim.simulate_batch(IntAllocation{100, {10, 20, 30, 40}});
        double best = INFINITY;
        for (const auto& o : tr.nodes) best = std::min(best, o.t_o_obs + o.t_u_obs);
        EXPECT_NEAR(best, w.true_spec.comm.t_comm(), 1e-15);
    }
}

TEST(SampleGradients, ZeroNoiseIsExact) {
    TruthWorld w = three_node_world(0.0);
    w.gradients = {256, 1.5, 0.0};
    Simulator sim(w);
    const auto g = sim.sample_gradients(IntAllocation{60, {10, 20, 30}});
    for (double x : g.local_sq) EXPECT_NEAR(x, 1.5, 1e-12);
    EXPECT_NEAR(g.global_sq, 1.5, 1e-12);
}

TEST(SampleGradients, NormIdentities) {
    TruthWorld w = three_node_world(0.0);
    w.gradients = {256, 1.0, 100.0};
    Simulator sim(w);
    const IntAllocation alloc{100, {25, 75, 0}};
    const int n = 100000;
    double s_g = 0, s_g2 = 0, s_l = 0, s_l2 = 0;
    for (int t = 0; t < n; ++t) {
        const auto g = sim.sample_gradients(alloc);
        s_g += g.global_sq;
        s_g2 += g.global_sq * g.global_sq;
        s_l += g.local_sq[0];
        s_l2 += g.local_sq[0] * g.local_sq[0];
        ASSERT_TRUE(std::isnan(g.local_sq[2]));
    }
    const double mg = s_g / n, ml = s_l / n;
    const double se_g = std::sqrt((s_g2 / n - mg * mg) / n), se_l = std::sqrt((s_l2 / n - ml * ml) / n);
    EXPECT_NEAR(mg, 1.0 + 100.0 / 100, 3 * se_g);
    EXPECT_NEAR(ml, 1.0 + 100.0 / 25, 3 * se_l);
}

TEST(SampleGradients, PerSampleModeHasSameFirstMoment) {
    TruthWorld w = three_node_world(0.0);
    w.gradients = {32, 1.0, 10.0};
    Simulator sim(w);
    const IntAllocation alloc{12, {2, 4, 6}};
    const int n = 20000;
    double s = 0, s2 = 0;
    for (int t = 0; t < n; ++t) {
        const double x = sim.sample_gradients(alloc, -1.0, GradientMode::PerSample).global_sq;
        s += x;
        s2 += x * x;
    }
    const double m = s / n;
    EXPECT_NEAR(m, 1.0 + 10.0 / 12, 3 * std::sqrt((s2 / n - m * m) / n));
}

}  // namespace
}  // namespace optperf
