#pragma once

// Sequential minimal optimization for box-constrained QPs with a single
// equality constraint:
//
//   minimize    1/2 a^T Q a + p^T a
//   subject to  y^T a = 0,   0 <= a_i <= C
//
// with y_i in {+1, -1}. Both soft-margin classification and epsilon-tube
// regression reduce to this form. Pair selection is the maximal violating
// pair on the first-order optimality gap, which makes the solve fully
// deterministic.

#include <cstddef>
#include <vector>

namespace bsense::smo {

// Row access to Q. Implementations may materialize the matrix or synthesize
// rows on demand (e.g. the regression expansion [[K,-K],[-K,K]]).
class QMatrix {
public:
    virtual ~QMatrix() = default;
    virtual std::size_t size() const = 0;
    // Fill `out` (size() entries) with row i.
    virtual void row(std::size_t i, double* out) const = 0;
};

// Dense symmetric Q held in memory.
class DenseQ final : public QMatrix {
public:
    DenseQ(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {}
    std::size_t size() const override { return n_; }
    void row(std::size_t i, double* out) const override;
    double& at(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }

private:
    std::size_t n_;
    std::vector<double> data_;
};

// Extended matrix for the 2n-variable regression dual: block signs
// [[+K,-K],[-K,+K]] over a materialized kernel matrix K.
class RegressionQ final : public QMatrix {
public:
    RegressionQ(std::size_t n, std::vector<double> kernel) : n_(n), k_(std::move(kernel)) {}
    std::size_t size() const override { return 2 * n_; }
    void row(std::size_t i, double* out) const override;

private:
    std::size_t n_;
    std::vector<double> k_; // n x n
};

struct Result {
    std::vector<double> alpha;
    double bias = 0.0;                   // from KKT conditions on the final gradient
    std::size_t iterations = 0;
    bool converged = false;
    double final_gap = 0.0;              // m(a) - M(a) at exit
    std::vector<double> objective_trace; // dual objective per iteration when traced
};

// Runs SMO until the optimality gap drops below `tol` or `max_iter` pair
// updates have been made. When `trace` is set the (non-increasing) objective
// value is recorded after every update.
Result solve(const QMatrix& Q, const std::vector<double>& p, const std::vector<double>& y,
             double C, double tol, std::size_t max_iter, bool trace = false);

} // namespace bsense::smo
