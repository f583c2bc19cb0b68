#pragma once

#include <memory>
#include <stdexcept>

#include <Eigen/Sparse>

namespace pff {

using SpMat = Eigen::SparseMatrix<double>;  // column-major, full symmetric storage

class LinearSolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Systems above this size go to preconditioned CG instead of Cholesky.
inline constexpr Eigen::Index kDirectSolveLimit = 200000;

/// Sparse SPD solver that keeps the symbolic factorization while the sparsity
/// pattern stays the same (Newton loops reuse one pattern).
class SpdSolver {
public:
    SpdSolver();
    ~SpdSolver();
    SpdSolver(SpdSolver&&) noexcept;
    SpdSolver& operator=(SpdSolver&&) noexcept;

    /// Throws LinearSolveError on a non-positive pivot or CG breakdown.
    Eigen::VectorXd solve(const SpMat& A, const Eigen::VectorXd& b);

    double last_relative_residual() const { return last_residual_; }
    bool last_used_cg() const { return last_cg_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    double last_residual_ = 0.0;
    bool last_cg_ = false;
};

/// One-shot convenience wrapper.
Eigen::VectorXd factor_solve(const SpMat& A, const Eigen::VectorXd& b);

}  // namespace pff
