#pragma once

// Brute-force reference solver for the same dual QP the SMO solver handles:
// projected gradient descent with exact projection onto the intersection of
// the box [0, C]^n and the hyperplane y^T a = 0. Slow but independent of the
// production code path; used to cross-check decision values on tiny problems.

#include <cmath>
#include <cstddef>
#include <vector>

namespace qp_oracle {

struct Solution {
    std::vector<double> alpha;
    double bias = 0.0;
};

// Projection of v onto {a : 0 <= a <= C, y^T a = 0} by bisection on the
// multiplier of the equality constraint.
inline std::vector<double> project(const std::vector<double>& v, const std::vector<double>& y,
                                   double C) {
    const std::size_t n = v.size();
    auto clipped = [&](double lambda, std::vector<double>* out) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double a = v[i] - lambda * y[i];
            if (a < 0.0) a = 0.0;
            if (a > C) a = C;
            if (out) (*out)[i] = a;
            dot += y[i] * a;
        }
        return dot;
    };
    // y^T clip(v - lambda y) is non-increasing in lambda; bracket and bisect.
    double lo = -1.0, hi = 1.0;
    for (double b : v) {
        const double m = std::fabs(b) + C + 1.0;
        lo = std::min(lo, -m);
        hi = std::max(hi, m);
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (clipped(mid, nullptr) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    std::vector<double> out(n);
    clipped(0.5 * (lo + hi), &out);
    return out;
}

// Minimize 1/2 a^T Q a + p^T a over the projected feasible set.
inline Solution solve(const std::vector<std::vector<double>>& Q, const std::vector<double>& p,
                      const std::vector<double>& y, double C, std::size_t iters = 200000) {
    const std::size_t n = p.size();
    // step size from a Gershgorin bound on the largest eigenvalue
    double L = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::fabs(Q[i][j]);
        L = std::max(L, s);
    }
    const double step = 1.0 / (L + 1e-9);

    std::vector<double> a(n, 0.0), g(n), next(n);
    for (std::size_t it = 0; it < iters; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = p[i];
            for (std::size_t j = 0; j < n; ++j) g[i] += Q[i][j] * a[j];
        }
        for (std::size_t i = 0; i < n; ++i) next[i] = a[i] - step * g[i];
        next = project(next, y, C);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::fabs(next[i] - a[i]));
        a = next;
        if (change < 1e-14) break;
    }

    Solution sol;
    sol.alpha = a;
    // bias by the same KKT rule the production solver uses
    for (std::size_t i = 0; i < n; ++i) {
        g[i] = p[i];
        for (std::size_t j = 0; j < n; ++j) g[i] += Q[i][j] * a[j];
    }
    double sum_b = 0.0;
    std::size_t free_count = 0;
    double m = -1e300, M = 1e300;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = -y[i] * g[i];
        const bool up = (y[i] > 0 && a[i] < C - 1e-9) || (y[i] < 0 && a[i] > 1e-9);
        const bool low = (y[i] > 0 && a[i] > 1e-9) || (y[i] < 0 && a[i] < C - 1e-9);
        if (a[i] > 1e-9 && a[i] < C - 1e-9) {
            sum_b += v;
            ++free_count;
        }
        if (up) m = std::max(m, v);
        if (low) M = std::min(M, v);
    }
    sol.bias = free_count ? sum_b / static_cast<double>(free_count) : 0.5 * (m + M);
    return sol;
}

} // namespace qp_oracle
