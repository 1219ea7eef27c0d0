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

// Gradient noise scale from heterogeneous local batches: per-node unbiased
// estimates of |G|^2 and tr(Sigma), combined with minimum-variance weights.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "optperf/errors.hpp"

namespace optperf {

// Dense row-major square matrix; n stays small (one row per node).
struct Matrix {
    std::size_t n = 0;
    std::vector<double> v;

    Matrix() = default;
    explicit Matrix(std::size_t size, double fill = 0.0) : n(size), v(size * size, fill) {}
    double& operator()(std::size_t i, std::size_t j) { return v[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * n + j]; }
    friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct LocalGradientStat {
    int node_id = 0;
    double b = 0.0;
    double local_sq_norm = 0.0;
};

struct LocalEstimates {
    double g_est = 0.0;
    double s_est = 0.0;
};

struct WeightMatrices {
    Matrix a_g;
    Matrix a_s;
};

struct WeightResult {
    std::vector<double> weights;
    double condition = 1.0;
    bool degraded = false;  // singular system, batch-proportional fallback used
};

struct GnsEstimate {
    double g_agg = 0.0;
    double s_agg = 0.0;
    double b_noise = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> weights_g;
    std::vector<double> weights_s;
    bool usable = false;  // g_agg > 0
    bool degraded = false;
};

inline constexpr double kSingularCondition = 1e12;

inline std::vector<double> aggregate_gradients(std::span<const std::vector<double>> locals, std::span<const double> ratios) {
    if (locals.empty() || locals.size() != ratios.size()) throw DomainError("need one ratio per local gradient");
    double rsum = 0.0;
    for (double r : ratios) rsum += r;
    if (std::abs(rsum - 1.0) > 1e-9) throw DomainError("ratios must sum to 1");
    std::vector<double> g(locals.front().size(), 0.0);
    for (std::size_t i = 0; i < locals.size(); ++i) {
        if (locals[i].size() != g.size()) throw DomainError("local gradients differ in dimension");
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += ratios[i] * locals[i][j];
    }
    return g;
}

inline double squared_norm(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}

namespace detail {
inline void require_local(double b, double B) {
    if (!(b > 0.0 && b < B)) throw DomainError("local batch must satisfy 0 < b_i < B");
}
}  // namespace detail

inline LocalEstimates local_estimates(const LocalGradientStat& stat, double global_sq_norm, double B) {
    detail::require_local(stat.b, B);
    const double d = B - stat.b;
    return {(B * global_sq_norm - stat.b * stat.local_sq_norm) / d, stat.b * B / d * (stat.local_sq_norm - global_sq_norm)};
}

inline WeightMatrices weight_matrices(std::span<const double> b, double B) {
    const std::size_t n = b.size();
    for (double bi : b) detail::require_local(bi, B);
    WeightMatrices w{Matrix(n), Matrix(n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                w.a_g(i, i) = (B + 2.0 * b[i]) / (B * B - B * b[i]);
                w.a_s(i, i) = B * b[i] / (B - b[i]);
            } else {
                const double den = (B - b[i]) * (B - b[j]);
                w.a_g(i, j) = (B * B - b[i] * b[i] - b[j] * b[j]) / (B * den);
                w.a_s(i, j) = b[i] * b[j] * (B - b[i] - b[j]) / den;
            }
        }
    }
    return w;
}

// Gauss-Jordan with partial pivoting. Returns false if a pivot vanishes.
inline bool invert(const Matrix& a, Matrix& inv) {
    const std::size_t n = a.n;
    Matrix work = a;
    inv = Matrix(n);
    for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(work(r, col)) > std::abs(work(piv, col))) piv = r;
        if (work(piv, col) == 0.0 || !std::isfinite(work(piv, col))) return false;
        if (piv != col)
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(work(piv, c), work(col, c));
                std::swap(inv(piv, c), inv(col, c));
            }
        const double p = work(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            work(col, c) /= p;
            inv(col, c) /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = work(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                work(r, c) -= f * work(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return true;
}

inline double norm1(const Matrix& a) {
    double best = 0.0;
    for (std::size_t j = 0; j < a.n; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < a.n; ++i) col += std::abs(a(i, j));
        best = std::max(best, col);
    }
    return best;
}

// w = 1'A^-1 / (1'A^-1 1). `fallback` supplies the weights used when A is
// singular or its 1-norm condition number exceeds 1e12; uniform if empty.
inline WeightResult optimal_weights(const Matrix& a, std::span<const double> fallback = {}) {
    const std::size_t n = a.n;
    if (n == 0) throw DomainError("optimal_weights needs a non-empty matrix");
    WeightResult out;
    if (n == 1) {
        out.weights = {1.0};
        return out;
    }
    Matrix inv;
    const bool ok = invert(a, inv);
    out.condition = ok ? norm1(a) * norm1(inv) : INFINITY;
    if (ok && out.condition <= kSingularCondition) {
        out.weights.assign(n, 0.0);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) out.weights[j] += inv(i, j);
            total += out.weights[j];
        }
        if (total != 0.0 && std::isfinite(total)) {
            for (double& w : out.weights) w /= total;
            return out;
        }
    }
    out.degraded = true;
    if (fallback.size() == n) {
        double total = 0.0;
        for (double f : fallback) total += f;
        out.weights.assign(fallback.begin(), fallback.end());
        for (double& w : out.weights) w /= total;
    } else {
        out.weights.assign(n, 1.0 / static_cast<double>(n));
    }
    return out;
}

inline GnsEstimate gns_estimate(std::span<const LocalGradientStat> stats, double global_sq_norm, double B) {
    if (stats.size() < 2) throw DomainError("gns_estimate needs at least two nodes");
    std::vector<double> b;
    std::vector<LocalEstimates> est;
    for (const auto& s : stats) {
        b.push_back(s.b);
        est.push_back(local_estimates(s, global_sq_norm, B));
    }
    const auto mats = weight_matrices(b, B);
    const auto wg = optimal_weights(mats.a_g, b);
    const auto ws = optimal_weights(mats.a_s, b);
    GnsEstimate out;
    out.weights_g = wg.weights;
    out.weights_s = ws.weights;
    out.degraded = wg.degraded || ws.degraded;
    for (std::size_t i = 0; i < est.size(); ++i) {
        out.g_agg += wg.weights[i] * est[i].g_est;
        out.s_agg += ws.weights[i] * est[i].s_est;
    }
    out.usable = out.g_agg > 0.0;
    if (out.usable) out.b_noise = out.s_agg / out.g_agg;
    return out;
}

// Bias-corrected exponential moving averages of G and S kept separately;
// snapshots with G <= 0 are skipped rather than clamped.
class GnsSmoother {
public:
    explicit GnsSmoother(double decay = 0.9) : decay_(decay) {}

    bool add(const GnsEstimate& e) { return add(e.g_agg, e.s_agg); }

    bool add(double g, double s) {
        if (!(g > 0.0) || !std::isfinite(s)) return false;
        g_ = decay_ * g_ + (1.0 - decay_) * g;
        s_ = decay_ * s_ + (1.0 - decay_) * s;
        correction_ *= decay_;
        ++accepted_;
        return true;
    }

    [[nodiscard]] bool has_value() const { return accepted_ > 0; }
    [[nodiscard]] double g() const { return has_value() ? g_ / (1.0 - correction_) : std::numeric_limits<double>::quiet_NaN(); }
    [[nodiscard]] double s() const { return has_value() ? s_ / (1.0 - correction_) : std::numeric_limits<double>::quiet_NaN(); }
    [[nodiscard]] double b_noise() const { return has_value() ? s_ / g_ : std::numeric_limits<double>::quiet_NaN(); }
    [[nodiscard]] std::size_t accepted() const { return accepted_; }

private:
    double decay_;
    double g_ = 0.0;
    double s_ = 0.0;
    double correction_ = 1.0;
    std::size_t accepted_ = 0;
};

// Second moments of the local estimators, indexed by node. Diagonals of cov_g
// and cov_s are the variances.
struct MomentTable {
    Matrix cov_g;
    Matrix cov_s;
    double var_global_sq = 0.0;
    std::vector<double> var_local_sq;
    std::vector<double> cov_global_local;
};

namespace detail {
inline void require_moment_inputs(std::span<const double> b, double B, double g_sq, double tr_sigma) {
    for (double bi : b) require_local(bi, B);
    if (!(g_sq >= 0.0) || !(tr_sigma >= 0.0)) throw DomainError("|G|^2 and tr(Sigma) must be non-negative");
}
}  // namespace detail

// The closed forms used to derive the optimal weights: every entry carries the
// factor 4|G|^2 tr(Sigma).
inline MomentTable predicted_moments(std::span<const double> b, double B, double g_sq, double tr_sigma) {
    detail::require_moment_inputs(b, B, g_sq, tr_sigma);
    const std::size_t n = b.size();
    const double c = 4.0 * g_sq * tr_sigma;
    const auto w = weight_matrices(b, B);
    MomentTable t{Matrix(n), Matrix(n), c / B, std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            t.cov_g(i, j) = c * w.a_g(i, j);
            t.cov_s(i, j) = c * w.a_s(i, j);
        }
        t.var_local_sq[i] = c / b[i];
        t.cov_global_local[i] = c * b[i] / (B * B);
    }
    return t;
}

// Exact moments when per-sample gradients are Normal(G, (tr/d) I) in d dimensions.
// With M = G'Sigma G and Q = tr(Sigma^2): Var|x|^2 = 4 mu'C mu + 2 tr(C^2) for
// x ~ N(mu, C), and Cov(|g|^2, |g_i|^2) = Var|g|^2 because Cov(g, g_i) = Sigma/B.
inline MomentTable exact_gaussian_moments(std::span<const double> b, double B, double g_sq, double tr_sigma, std::size_t dim) {
    detail::require_moment_inputs(b, B, g_sq, tr_sigma);
    if (dim == 0) throw DomainError("dimension must be positive");
    const std::size_t n = b.size();
    const double d = static_cast<double>(dim);
    const double M = g_sq * tr_sigma / d;
    const double Q = tr_sigma * tr_sigma / d;
    const double vB = 4.0 * M / B + 2.0 * Q / (B * B);
    MomentTable t{Matrix(n), Matrix(n), vB, std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        t.var_local_sq[i] = 4.0 * M / b[i] + 2.0 * Q / (b[i] * b[i]);
        t.cov_global_local[i] = vB;
        const double ki = b[i] * B / (B - b[i]);
        for (std::size_t j = 0; j < n; ++j) {
            const double kj = b[j] * B / (B - b[j]);
            if (i == j) {
                t.cov_g(i, i) = (4.0 * M + 4.0 * Q / B) / (B - b[i]);
                t.cov_s(i, i) = 4.0 * M * b[i] * B / (B - b[i]) + 2.0 * Q * (B + b[i]) / (B - b[i]);
            } else {
                t.cov_g(i, j) = B * vB * (B - b[i] - b[j]) / ((B - b[i]) * (B - b[j]));
                t.cov_s(i, j) = -ki * kj * vB;
            }
        }
    }
    return t;
}

}  // namespace optperf
