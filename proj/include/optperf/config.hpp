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

// Run configuration: a single JSON document with cluster, simulation,
// gradients and adaptive sections. See docs/schema.json.

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "optperf/errors.hpp"
#include "optperf/perf_model.hpp"

namespace optperf {

struct SimulationConfig {
    std::uint64_t seed = 0;
    double noise_cv = 0.05;
    std::optional<double> gamma_noise_cv;  // defaults to noise_cv
    int n_buckets = 8;
    int batches_per_epoch = 50;
    int epochs = 10;

    [[nodiscard]] double gamma_cv() const { return gamma_noise_cv.value_or(noise_cv); }
};

struct GradientConfig {
    std::size_t dim = 256;
    double g_sq = 1.0;
    double tr_sigma = 100.0;
    double tr_sigma_decay = 1.0;  // tr(Sigma) at epoch e is tr_sigma * decay^e
    std::vector<std::int64_t> locals{25, 75};  // gns-check split

    [[nodiscard]] double tr_sigma_at(int epoch) const { return tr_sigma * std::pow(tr_sigma_decay, epoch); }
};

struct AdaptiveConfig {
    std::int64_t b_min = 0;
    std::int64_t b_max = 0;
    int candidates = 8;
    std::optional<double> b_ref;
    std::optional<std::int64_t> fixed_batch;
    std::optional<std::int64_t> initial_batch;

    [[nodiscard]] std::int64_t start_batch() const { return fixed_batch ? *fixed_batch : initial_batch.value_or(b_min); }
    [[nodiscard]] double reference_batch() const { return b_ref.value_or(static_cast<double>(start_batch())); }
};

struct RunConfig {
    ClusterSpec cluster;
    std::vector<std::string> node_names;
    SimulationConfig simulation;
    GradientConfig gradients;
    AdaptiveConfig adaptive;
};

inline constexpr std::int64_t kUncapped = std::int64_t{1} << 40;

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_required(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <typename T>
void get_optional(const json& j, const std::string& where, const char* key, T& out) {
    if (j.contains(key)) out = get_required<T>(j, where, key);
}

template <typename T>
void get_optional(const json& j, const std::string& where, const char* key, std::optional<T>& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = get_required<T>(j, where, key);
}

}  // namespace detail

inline const std::set<std::string>& config_keys(const std::string& section) {
    static const std::map<std::string, std::set<std::string>> keys{
        {"", {"cluster", "simulation", "gradients", "adaptive"}},
        {"cluster", {"nodes", "gamma", "t_o", "t_u"}},
        {"node", {"name", "q", "s", "k", "m", "count", "max_local_batch"}},
        {"simulation", {"seed", "noise_cv", "gamma_noise_cv", "n_buckets", "batches_per_epoch", "epochs"}},
        {"gradients", {"dim", "g_sq", "tr_sigma", "tr_sigma_decay", "locals"}},
        {"adaptive", {"b_min", "b_max", "candidates", "b_ref", "fixed_batch", "initial_batch"}},
    };
    return keys.at(section);
}

inline void validate(const RunConfig& c) {
    try {
        validate(c.cluster);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("cluster: ") + e.what());
    }
    const auto n = static_cast<std::int64_t>(c.cluster.size());
    const auto& s = c.simulation;
    if (!(s.noise_cv >= 0.0) || !(s.gamma_cv() >= 0.0)) throw ConfigError("simulation: noise cv must be non-negative");
    if (s.n_buckets < 2) throw ConfigError("simulation.n_buckets must be at least 2");
    if (s.batches_per_epoch < 1) throw ConfigError("simulation.batches_per_epoch must be at least 1");
    if (s.epochs < 1) throw ConfigError("simulation.epochs must be at least 1");
    const auto& g = c.gradients;
    if (g.dim < 1) throw ConfigError("gradients.dim must be at least 1");
    if (!(g.g_sq >= 0.0) || !(g.tr_sigma >= 0.0)) throw ConfigError("gradients: g_sq and tr_sigma must be non-negative");
    if (!(g.tr_sigma_decay > 0.0)) throw ConfigError("gradients.tr_sigma_decay must be positive");
    if (g.locals.size() < 2) throw ConfigError("gradients.locals needs at least two entries");
    for (auto b : g.locals)
        if (b < 1) throw ConfigError("gradients.locals entries must be at least 1");
    const auto& a = c.adaptive;
    if (a.b_min < n) throw ConfigError("adaptive.b_min must be at least the node count (" + std::to_string(n) + ")");
    if (a.b_max < a.b_min) throw ConfigError("adaptive.b_max must be at least b_min");
    if (a.candidates < 1) throw ConfigError("adaptive.candidates must be at least 1");
    if (a.b_ref && !(*a.b_ref > 0.0)) throw ConfigError("adaptive.b_ref must be positive");
    if (a.fixed_batch && *a.fixed_batch < n) throw ConfigError("adaptive.fixed_batch must be at least the node count");
    if (a.initial_batch && (*a.initial_batch < a.b_min || *a.initial_batch > a.b_max))
        throw ConfigError("adaptive.initial_batch must lie in [b_min, b_max]");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::get_optional;
    using detail::get_required;
    detail::check_keys(j, "config", config_keys(""));
    RunConfig c;

    const auto& cl = get_required<nlohmann::json>(j, "config", "cluster");
    detail::check_keys(cl, "cluster", config_keys("cluster"));
    const auto nodes = get_required<nlohmann::json>(cl, "cluster", "nodes");
    if (!nodes.is_array() || nodes.empty()) throw ConfigError("cluster.nodes must be a non-empty array");
    std::vector<std::int64_t> caps;
    bool any_cap = false;
    for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
        const auto& nd = nodes[idx];
        const std::string where = "cluster.nodes[" + std::to_string(idx) + "]";
        detail::check_keys(nd, where, config_keys("node"));
        NodeComputeModel m;
        m.q = get_required<double>(nd, where, "q");
        m.s = get_required<double>(nd, where, "s");
        m.k = get_required<double>(nd, where, "k");
        m.m = get_required<double>(nd, where, "m");
        int count = 1;
        get_optional(nd, where, "count", count);
        if (count < 1) throw ConfigError(where + ".count must be at least 1");
        std::optional<std::int64_t> cap;
        get_optional(nd, where, "max_local_batch", cap);
        std::string name = "node" + std::to_string(idx);
        get_optional(nd, where, "name", name);
        for (int r = 0; r < count; ++r) {
            m.node_id = static_cast<int>(c.cluster.nodes.size());
            c.cluster.nodes.push_back(m);
            c.node_names.push_back(count > 1 ? name + "#" + std::to_string(r) : name);
            caps.push_back(cap.value_or(kUncapped));
            any_cap = any_cap || cap.has_value();
        }
    }
    if (any_cap) c.cluster.max_local_batch = caps;
    c.cluster.comm.gamma = get_required<double>(cl, "cluster", "gamma");
    c.cluster.comm.t_o = get_required<double>(cl, "cluster", "t_o");
    c.cluster.comm.t_u = get_required<double>(cl, "cluster", "t_u");

    if (j.contains("simulation")) {
        const auto& s = j.at("simulation");
        detail::check_keys(s, "simulation", config_keys("simulation"));
        get_optional(s, "simulation", "seed", c.simulation.seed);
        get_optional(s, "simulation", "noise_cv", c.simulation.noise_cv);
        get_optional(s, "simulation", "gamma_noise_cv", c.simulation.gamma_noise_cv);
        get_optional(s, "simulation", "n_buckets", c.simulation.n_buckets);
        get_optional(s, "simulation", "batches_per_epoch", c.simulation.batches_per_epoch);
        get_optional(s, "simulation", "epochs", c.simulation.epochs);
    }
    if (j.contains("gradients")) {
        const auto& g = j.at("gradients");
        detail::check_keys(g, "gradients", config_keys("gradients"));
        get_optional(g, "gradients", "dim", c.gradients.dim);
        get_optional(g, "gradients", "g_sq", c.gradients.g_sq);
        get_optional(g, "gradients", "tr_sigma", c.gradients.tr_sigma);
        get_optional(g, "gradients", "tr_sigma_decay", c.gradients.tr_sigma_decay);
        get_optional(g, "gradients", "locals", c.gradients.locals);
    }
    const auto& a = get_required<nlohmann::json>(j, "config", "adaptive");
    detail::check_keys(a, "adaptive", config_keys("adaptive"));
    c.adaptive.b_min = get_required<std::int64_t>(a, "adaptive", "b_min");
    c.adaptive.b_max = get_required<std::int64_t>(a, "adaptive", "b_max");
    get_optional(a, "adaptive", "candidates", c.adaptive.candidates);
    get_optional(a, "adaptive", "b_ref", c.adaptive.b_ref);
    get_optional(a, "adaptive", "fixed_batch", c.adaptive.fixed_batch);
    get_optional(a, "adaptive", "initial_batch", c.adaptive.initial_batch);

    validate(c);
    return c;
}

// Nodes are written out one per entry (no "count" folding).
inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < c.cluster.size(); ++i) {
        const auto& m = c.cluster.nodes[i];
        nlohmann::json nd{{"name", i < c.node_names.size() ? c.node_names[i] : "node" + std::to_string(i)},
                          {"q", m.q},
                          {"s", m.s},
                          {"k", m.k},
                          {"m", m.m}};
        if (c.cluster.max_local_batch && (*c.cluster.max_local_batch)[i] != kUncapped)
            nd["max_local_batch"] = (*c.cluster.max_local_batch)[i];
        nodes.push_back(nd);
    }
    nlohmann::json j;
    j["cluster"] = {{"nodes", nodes}, {"gamma", c.cluster.comm.gamma}, {"t_o", c.cluster.comm.t_o}, {"t_u", c.cluster.comm.t_u}};
    const auto& s = c.simulation;
    j["simulation"] = {{"seed", s.seed},
                       {"noise_cv", s.noise_cv},
                       {"n_buckets", s.n_buckets},
                       {"batches_per_epoch", s.batches_per_epoch},
                       {"epochs", s.epochs}};
    if (s.gamma_noise_cv) j["simulation"]["gamma_noise_cv"] = *s.gamma_noise_cv;
    const auto& g = c.gradients;
    j["gradients"] = {{"dim", g.dim}, {"g_sq", g.g_sq}, {"tr_sigma", g.tr_sigma}, {"tr_sigma_decay", g.tr_sigma_decay}, {"locals", g.locals}};
    const auto& a = c.adaptive;
    j["adaptive"] = {{"b_min", a.b_min}, {"b_max", a.b_max}, {"candidates", a.candidates}};
    if (a.b_ref) j["adaptive"]["b_ref"] = *a.b_ref;
    if (a.fixed_batch) j["adaptive"]["fixed_batch"] = *a.fixed_batch;
    if (a.initial_batch) j["adaptive"]["initial_batch"] = *a.initial_batch;
    return j;
}

inline void apply_env_overrides(RunConfig& c) {
    const char* env = std::getenv("OPTPERF_SEED");
    if (!env || !*env) return;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || *env == '-') throw ConfigError(std::string("OPTPERF_SEED is not an unsigned integer: ") + env);
    c.simulation.seed = v;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    auto c = config_from_json(j);
    apply_env_overrides(c);
    return c;
}

}  // namespace optperf
