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

#include <stdexcept>
#include <string>

namespace optperf {

/// Argument outside the mathematical domain of an operation (negative batch, b_i = B, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// No allocation satisfies the constraints (caps too small, B smaller than the node count).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A node model whose batch time does not grow with batch size.
class SingularModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Too few distinct observations to fit a model.
class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or missing run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace optperf
