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

// Randomized cluster fixtures shared by unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>

#include "optperf/perf_model.hpp"

namespace optperf::testing {

/// Log-uniform draw over [lo, hi].
inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

/// Coefficients spanning two decades each; gamma uniform in [0.1, 0.9].
inline ClusterSpec random_cluster(std::mt19937_64& rng, std::size_t n) {
    ClusterSpec spec;
    for (std::size_t i = 0; i < n; ++i) {
        NodeComputeModel m;
        m.node_id = static_cast<int>(i);
        m.q = log_uniform(rng, 1e-4, 1e-2);
        m.s = log_uniform(rng, 1e-3, 1e-1);
        m.k = log_uniform(rng, 1e-4, 1e-2);
        m.m = log_uniform(rng, 1e-3, 1e-1);
        spec.nodes.push_back(m);
    }
    std::uniform_real_distribution<double> g(0.1, 0.9);
    spec.comm.gamma = g(rng);
    spec.comm.t_o = log_uniform(rng, 1e-2, 1.0);
    spec.comm.t_u = log_uniform(rng, 1e-3, 1e-1);
    return spec;
}

inline ClusterSpec two_node_fixture() {
    ClusterSpec spec;
    spec.nodes = {{0, 0.001, 0.05, 0.002, 0.10}, {1, 0.002, 0.02, 0.004, 0.08}};
    spec.comm = {0.5, 0.01, 0.05};
    return spec;
}

}  // namespace optperf::testing
