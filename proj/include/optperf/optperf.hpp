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

#include "optperf/adaptive_loop.hpp"
#include "optperf/brute_force.hpp"
#include "optperf/config.hpp"
#include "optperf/errors.hpp"
#include "optperf/gns.hpp"
#include "optperf/gns_check.hpp"
#include "optperf/learner.hpp"
#include "optperf/perf_model.hpp"
#include "optperf/random.hpp"
#include "optperf/report.hpp"
#include "optperf/simulator.hpp"
#include "optperf/solver.hpp"
