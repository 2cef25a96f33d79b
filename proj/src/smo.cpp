#include "bsense/smo.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bsense::smo {

void DenseQ::row(std::size_t i, double* out) const {
    std::memcpy(out, data_.data() + i * n_, n_ * sizeof(double));
}

void RegressionQ::row(std::size_t i, double* out) const {
    const double si = i < n_ ? 1.0 : -1.0;
    const double* krow = k_.data() + (i % n_) * n_;
    for (std::size_t j = 0; j < n_; ++j) {
        out[j] = si * krow[j];
        out[n_ + j] = -si * krow[j];
    }
}

namespace {

constexpr double kTau = 1e-12;

double dual_objective(const std::vector<double>& alpha, const std::vector<double>& grad,
                      const std::vector<double>& p) {
    // G = Q a + p, so 1/2 a^T Q a + p^T a = 1/2 (a.G + a.p)
    double ag = 0.0, ap = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        ag += alpha[i] * grad[i];
        ap += alpha[i] * p[i];
    }
    return 0.5 * (ag + ap);
}

} // namespace

Result solve(const QMatrix& Q, const std::vector<double>& p, const std::vector<double>& y,
             double C, double tol, std::size_t max_iter, bool trace) {
    const std::size_t n = Q.size();
    if (p.size() != n || y.size() != n)
        throw std::invalid_argument("smo: p and y must match the size of Q");
    if (!(C > 0.0) || !(tol > 0.0)) throw std::invalid_argument("smo: C and tol must be > 0");

    Result res;
    res.alpha.assign(n, 0.0);
    std::vector<double>& a = res.alpha;
    std::vector<double> grad(p); // G = Q*0 + p
    std::vector<double> qi(n), qj(n);

    const double inf = std::numeric_limits<double>::infinity();

    auto in_up = [&](std::size_t t) {
        return (y[t] > 0.0 && a[t] < C) || (y[t] < 0.0 && a[t] > 0.0);
    };
    auto in_low = [&](std::size_t t) {
        return (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < C);
    };

    double gap = inf;
    while (res.iterations < max_iter) {
        // maximal violating pair on -y_t G_t
        double m = -inf, M = inf;
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (in_up(t) && v > m) {
                m = v;
                i = t;
            }
            if (in_low(t) && v < M) {
                M = v;
                j = t;
            }
        }
        gap = m - M;
        if (!(gap > tol) || i == n || j == n) break;

        Q.row(i, qi.data());
        Q.row(j, qj.data());

        const double old_ai = a[i], old_aj = a[j];

        if (y[i] != y[j]) {
            double quad = qi[i] + qj[j] + 2.0 * qi[j];
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if (diff > 0.0) {
                if (a[j] < 0.0) {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else {
                if (a[i] < 0.0) {
                    a[i] = 0.0;
                    a[j] = -diff;
                }
            }
            if (diff > 0.0) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = C - diff;
                }
            } else {
                if (a[j] > C) {
                    a[j] = C;
                    a[i] = C + diff;
                }
            }
        } else {
            double quad = qi[i] + qj[j] - 2.0 * qi[j];
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if (sum > C) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = sum - C;
                }
                if (a[j] > C) {
                    a[j] = C;
                    a[i] = sum - C;
                }
            } else {
                if (a[j] < 0.0) {
                    a[j] = 0.0;
                    a[i] = sum;
                }
                if (a[i] < 0.0) {
                    a[i] = 0.0;
                    a[j] = sum;
                }
            }
        }

        const double di = a[i] - old_ai, dj = a[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t) grad[t] += qi[t] * di + qj[t] * dj;

        ++res.iterations;
        if (trace) {
            const double obj = dual_objective(a, grad, p);
            assert(res.objective_trace.empty() || obj <= res.objective_trace.back() + 1e-9);
            res.objective_trace.push_back(obj);
        }
    }

    res.final_gap = gap == inf ? 0.0 : gap;
    res.converged = !(res.final_gap > tol);

    // bias: for any free variable KKT gives b = -y_i G_i exactly; average those.
    // With none free, any b in [m, M] is feasible; take the midpoint.
    double sum_b = 0.0;
    std::size_t free_count = 0;
    double m = -inf, M = inf;
    for (std::size_t t = 0; t < n; ++t) {
        const double v = -y[t] * grad[t];
        if (a[t] > 0.0 && a[t] < C) {
            sum_b += v;
            ++free_count;
        }
        if (in_up(t)) m = std::max(m, v);
        if (in_low(t)) M = std::min(M, v);
    }
    if (free_count > 0)
        res.bias = sum_b / static_cast<double>(free_count);
    else if (std::isfinite(m) && std::isfinite(M))
        res.bias = 0.5 * (m + M);
    else
        res.bias = 0.0;

    return res;
}

} // namespace bsense::smo
