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

#include "optperf/adaptive_loop.hpp"
#include "support/fixtures.hpp"

namespace optperf {
namespace {

RunConfig base_config() {
    RunConfig c;
    c.cluster.nodes = {{0, 0.0004, 0.010, 0.0008, 0.012}, {1, 0.0006, 0.012, 0.0012, 0.014}, {2, 0.0018, 0.015, 0.0036, 0.020}};
    c.cluster.comm = {0.3, 0.06, 0.015};
    c.simulation.noise_cv = 0.0;
    c.simulation.gamma_noise_cv = 0.0;
    c.simulation.batches_per_epoch = 10;
    c.simulation.epochs = 6;
    c.simulation.seed = 9;
    c.adaptive.b_min = 32;
    c.adaptive.b_max = 512;
    c.adaptive.candidates = 5;
    return c;
}

TEST(EnumerateCandidates, GeometricSpacing) {
    EXPECT_EQ(enumerate_candidates(64, 1024, 5), (std::vector<std::int64_t>{64, 128, 256, 512, 1024}));
    EXPECT_EQ(enumerate_candidates(100, 100, 4), (std::vector<std::int64_t>{100}));
    EXPECT_EQ(enumerate_candidates(10, 13, 10), (std::vector<std::int64_t>{10, 11, 12, 13}));
    const auto c = enumerate_candidates(3, 1000, 12);
    EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
    EXPECT_EQ(std::adjacent_find(c.begin(), c.end()), c.end());
    EXPECT_EQ(c.front(), 3);
    EXPECT_EQ(c.back(), 1000);
    EXPECT_THROW(enumerate_candidates(10, 5, 3), DomainError);
    EXPECT_THROW(enumerate_candidates(10, 50, 0), DomainError);
}

TEST(InitTable, LargeOverlappableCommGivesAllComm) {
    auto spec = base_config().cluster;
    spec.comm.t_o = 50.0;
    const auto cands = enumerate_candidates(32, 1024, 6);
    for (const auto& e : init_table(spec, cands).entries) EXPECT_EQ(e.solution->scenario.kind, ScenarioKind::AllComm);
}

TEST(InitTable, TinyOverlappableCommGivesAllCompute) {
    auto spec = base_config().cluster;
    spec.comm.t_o = 1e-4;
    const auto cands = enumerate_candidates(32, 1024, 6);
    const auto t = init_table(spec, cands);
    EXPECT_EQ(t.solver_calls, cands.size());
    for (const auto& e : t.entries) EXPECT_EQ(e.solution->scenario.kind, ScenarioKind::AllCompute);
}

TEST(InitTable, WarmEqualsCold) {
    std::mt19937_64 rng(40);
    const auto cands = enumerate_candidates(16, 4096, 12);
    for (int t = 0; t < 50; ++t) {
        const auto spec = testing::random_cluster(rng, 6);
        const auto warm = init_table(spec, cands, true), cold = init_table(spec, cands, false);
        for (std::size_t i = 0; i < cands.size(); ++i) {
            ASSERT_EQ(warm.entries[i].feasible(), cold.entries[i].feasible());
            if (!warm.entries[i].feasible()) continue;
            EXPECT_EQ(warm.entries[i].solution->labels, cold.entries[i].solution->labels);
            EXPECT_EQ(warm.entries[i].solution->alloc_int, cold.entries[i].solution->alloc_int);
            EXPECT_DOUBLE_EQ(warm.entries[i].solution->batch_time, cold.entries[i].solution->batch_time);
        }
    }
}

CandidateTable synthetic_table(const std::vector<std::pair<std::int64_t, double>>& rows) {
    CandidateTable t;
    for (auto [B, T] : rows) {
        t.candidates.push_back(B);
        OptPerfSolution s;
        s.batch_time = T;
        t.entries.push_back({B, s, {}});
    }
    return t;
}

TEST(SelectBatchSize, ZeroNoisePrefersSmallBatches) {
    const auto t = synthetic_table({{64, 0.1}, {128, 0.1}, {256, 0.1}});
    EXPECT_EQ(select_batch_size(t, 0.0, 64).total, 64);
}

TEST(SelectBatchSize, HugeNoisePrefersThroughput) {
    const auto t = synthetic_table({{64, 0.1}, {128, 0.15}, {256, 0.4}});
    EXPECT_EQ(select_batch_size(t, 1e12, 64).total, 128);
}

TEST(SelectBatchSize, TiesGoToSmallerBatch) {
    // Throughput doubles with B and efficiency is 1 when b_noise is infinite-like;
    // equal goodput at 64 and 128 because OptPerf doubles too.
    const auto t = synthetic_table({{64, 0.1}, {128, 0.2}});
    EXPECT_EQ(select_batch_size(t, 0.0, 64).total, 64);
}

TEST(SelectBatchSize, ChosenBatchNonDecreasingInNoiseScale) {
    const auto spec = base_config().cluster;
    const auto t = init_table(spec, enumerate_candidates(32, 4096, 10));
    std::int64_t prev = 0;
    for (double bn = 0.0; bn < 1e5; bn = bn * 1.5 + 1.0) {
        const auto B = select_batch_size(t, bn, 32).total;
        EXPECT_GE(B, prev);
        prev = B;
    }
    EXPECT_GT(prev, 32);
}

TEST(SelectBatchSize, NoFeasibleCandidate) {
    CandidateTable t;
    t.candidates = {8};
    t.entries = {{8, std::nullopt, "caps"}};
    EXPECT_THROW(select_batch_size(t, 1.0, 8), InfeasibleError);
}

TEST(RunTraining, NoiselessFixedBatchPredictsExactlyFromThirdEpoch) {
    auto c = base_config();
    c.adaptive.fixed_batch = 256;
    const auto reports = run_training(c);
    const auto truth = find_optperf(c.cluster, 256);
    for (const auto& r : reports) {
        if (r.epoch < 2) {
            EXPECT_FALSE(r.model_ready);
            continue;
        }
        EXPECT_TRUE(r.model_ready);
        EXPECT_EQ(r.alloc, truth.alloc_int.locals);
        EXPECT_NEAR(r.predicted_T, r.realized_T_mean, 1e-9);
        EXPECT_EQ(r.solver_calls, r.epoch == 2 ? 2U : 1U);
    }
}

TEST(RunTraining, WarmupEpochFollowsPerSampleTimes) {
    auto c = base_config();
    c.adaptive.fixed_batch = 120;
    const auto reports = run_training(c);
    std::vector<double> t;
    for (const auto& nd : c.cluster.nodes) t.push_back(compute_time(nd, 40) / 40);
    EXPECT_EQ(reports[0].alloc, (std::vector<std::int64_t>{40, 40, 40}));
    EXPECT_EQ(reports[1].alloc, warmup_allocation(t, 120).locals);
}

TEST(RunTraining, HomogeneousStaysEven) {
    auto c = base_config();
    c.cluster.nodes = {{0, 0.001, 0.02, 0.002, 0.05}, {1, 0.001, 0.02, 0.002, 0.05}, {2, 0.001, 0.02, 0.002, 0.05}, {3, 0.001, 0.02, 0.002, 0.05}};
    c.adaptive.fixed_batch = 128;
    c.adaptive.b_min = 128;
    c.adaptive.b_max = 128;
    for (const auto& r : run_training(c)) {
        EXPECT_EQ(r.alloc, (std::vector<std::int64_t>{32, 32, 32, 32}));
        EXPECT_DOUBLE_EQ(r.realized_T_mean, node_batch_time(c.cluster.nodes[0], c.cluster.comm, 32));
    }
}

TEST(RunTraining, AdaptiveRunNeverWorseThanEvenSplitAndStable) {
    auto c = base_config();
    c.simulation.noise_cv = 0.05;
    c.simulation.gamma_noise_cv = 0.05;
    c.simulation.epochs = 12;
    c.gradients.tr_sigma_decay = 1.2;
    const auto reports = run_training(c);
    bool saw_model = false;
    for (const auto& r : reports) {
        if (!r.model_ready) continue;
        saw_model = true;
        EXPECT_LE(r.predicted_T, r.predicted_even_T + 1e-12);
        EXPECT_GE(r.solver_calls, 1U);
        std::int64_t sum = 0;
        for (auto b : r.alloc) sum += b;
        EXPECT_EQ(sum, r.chosen_B);
        EXPECT_NEAR(r.goodput, r.chosen_B / r.realized_T_mean * r.efficiency, 1e-12 * r.goodput);
    }
    EXPECT_TRUE(saw_model);
}

TEST(RunTraining, ProbesAnotherCandidateWhenWarmupRepeatsASplit) {
    auto c = base_config();
    // Node 1 is the median node: at B = 33 its warmup share rounds to its even share.
    c.cluster.nodes = {{0, 0.0005, 0.01, 0.001, 0.01}, {1, 0.001, 0.01, 0.002, 0.01}, {2, 0.002, 0.01, 0.004, 0.01}};
    c.adaptive.b_min = 33;
    c.adaptive.b_max = 528;
    const auto reports = run_training(c);
    ASSERT_EQ(reports[1].scenario, "warmup");
    EXPECT_EQ(reports[0].alloc[1], reports[1].alloc[1]);
    EXPECT_EQ(reports[2].scenario, "probe");
    EXPECT_GT(reports[2].chosen_B, 33);
    EXPECT_TRUE(reports[3].model_ready);
}

TEST(RunTraining, DeterministicForSeed) {
    auto c = base_config();
    c.simulation.noise_cv = 0.05;
    const auto a = run_training(c), b = run_training(c);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].alloc, b[i].alloc);
        EXPECT_EQ(a[i].realized_T_mean, b[i].realized_T_mean);
        EXPECT_EQ(std::isnan(a[i].predicted_T), std::isnan(b[i].predicted_T));
        if (!std::isnan(a[i].predicted_T)) {
            EXPECT_EQ(a[i].predicted_T, b[i].predicted_T);
        }
        EXPECT_EQ(a[i].b_noise, b[i].b_noise);
    }
}

}  // namespace
}  // namespace optperf
