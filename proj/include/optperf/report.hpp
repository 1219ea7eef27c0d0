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

// Epoch reports as CSV and JSON. Every float is printed with 9 significant
// digits; JSON numbers are those same 9-digit values.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "optperf/adaptive_loop.hpp"

namespace optperf {

inline std::string fmt9(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

// JSON value of x rounded to 9 significant digits; null for NaN/inf.
inline nlohmann::json json9(double x) {
    if (!std::isfinite(x)) return nullptr;
    return std::stod(fmt9(x));
}

inline double from_json9(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline std::vector<std::string> csv_header(std::size_t nodes) {
    std::vector<std::string> h{"epoch", "chosen_B"};
    for (std::size_t i = 0; i < nodes; ++i) h.push_back("b_" + std::to_string(i));
    for (const char* c : {"predicted_T", "realized_T_mean", "b_noise", "efficiency", "goodput", "scenario"}) h.emplace_back(c);
    return h;
}

inline void write_csv(std::ostream& out, const std::vector<EpochReport>& reports, std::size_t nodes) {
    const auto header = csv_header(nodes);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << '\n';
    for (const auto& r : reports) {
        out << r.epoch << ',' << r.chosen_B;
        for (auto b : r.alloc) out << ',' << b;
        out << ',' << fmt9(r.predicted_T) << ',' << fmt9(r.realized_T_mean) << ',' << fmt9(r.b_noise) << ',' << fmt9(r.efficiency)
            << ',' << fmt9(r.goodput) << ',' << r.scenario << '\n';
    }
}

inline nlohmann::json report_to_json(const EpochReport& r) {
    return {{"epoch", r.epoch},
            {"chosen_B", r.chosen_B},
            {"alloc", r.alloc},
            {"predicted_T", json9(r.predicted_T)},
            {"predicted_even_T", json9(r.predicted_even_T)},
            {"realized_T_mean", json9(r.realized_T_mean)},
            {"b_noise", json9(r.b_noise)},
            {"efficiency", json9(r.efficiency)},
            {"goodput", json9(r.goodput)},
            {"model_ready", r.model_ready},
            {"scenario", r.scenario},
            {"solver_calls", r.solver_calls}};
}

inline EpochReport report_from_json(const nlohmann::json& j) {
    EpochReport r;
    r.epoch = j.at("epoch").get<int>();
    r.chosen_B = j.at("chosen_B").get<std::int64_t>();
    r.alloc = j.at("alloc").get<std::vector<std::int64_t>>();
    r.predicted_T = from_json9(j.at("predicted_T"));
    r.predicted_even_T = from_json9(j.at("predicted_even_T"));
    r.realized_T_mean = from_json9(j.at("realized_T_mean"));
    r.b_noise = from_json9(j.at("b_noise"));
    r.efficiency = from_json9(j.at("efficiency"));
    r.goodput = from_json9(j.at("goodput"));
    r.model_ready = j.at("model_ready").get<bool>();
    r.scenario = j.at("scenario").get<std::string>();
    r.solver_calls = j.at("solver_calls").get<std::size_t>();
    return r;
}

inline nlohmann::json reports_to_json(const std::vector<EpochReport>& reports) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(report_to_json(r));
    return {{"epochs", arr}};
}

inline std::vector<EpochReport> reports_from_json(const nlohmann::json& j) {
    std::vector<EpochReport> out;
    for (const auto& e : j.at("epochs")) out.push_back(report_from_json(e));
    return out;
}

}  // namespace optperf
