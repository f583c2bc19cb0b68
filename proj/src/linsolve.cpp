#include "pff/linsolve.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

namespace pff {

struct SpdSolver::Impl {
    Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
    Eigen::Index rows = -1;
    Eigen::Index nnz = -1;
    std::vector<int> outer;
};

SpdSolver::SpdSolver() : impl_(std::make_unique<Impl>()) {}
SpdSolver::~SpdSolver() = default;
SpdSolver::SpdSolver(SpdSolver&&) noexcept = default;
SpdSolver& SpdSolver::operator=(SpdSolver&&) noexcept = default;

Eigen::VectorXd SpdSolver::solve(const SpMat& A, const Eigen::VectorXd& b) {
    if (A.rows() != A.cols() || A.rows() != b.size()) {
        throw LinearSolveError(fmt::format("linsolve: size mismatch {}x{} vs {}", A.rows(), A.cols(), b.size()));
    }
    const double bnorm = b.norm();
    if (!std::isfinite(bnorm)) throw LinearSolveError("linsolve: non-finite right-hand side");
    if (A.rows() == 0) return Eigen::VectorXd();
    if (bnorm == 0.0) {
        last_residual_ = 0.0;
        return Eigen::VectorXd::Zero(b.size());
    }

    Eigen::VectorXd x;
    if (A.rows() > kDirectSolveLimit) {
        Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
        cg.setTolerance(1e-8);
        cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * A.rows()));
        cg.compute(A);
        x = cg.solve(b);
        if (cg.info() != Eigen::Success) throw LinearSolveError("linsolve: CG did not converge");
        last_cg_ = true;
    } else {
        auto& im = *impl_;
        const std::vector<int> outer(A.outerIndexPtr(), A.outerIndexPtr() + A.outerSize() + 1);
        if (im.rows != A.rows() || im.nnz != A.nonZeros() || im.outer != outer) {
            im.llt.analyzePattern(A);
            im.rows = A.rows();
            im.nnz = A.nonZeros();
            im.outer = outer;
        }
        im.llt.factorize(A);
        if (im.llt.info() != Eigen::Success) {
            throw LinearSolveError("linsolve: matrix is indefinite or singular (non-positive pivot)");
        }
        x = im.llt.solve(b);
        // Two rounds of iterative refinement tighten badly scaled systems.
        for (int it = 0; it < 2; ++it) {
            const Eigen::VectorXd r = b - A * x;
            if (r.norm() <= 1e-12 * bnorm) break;
            x += im.llt.solve(r);
        }
        last_cg_ = false;
    }
    if (!x.allFinite()) throw LinearSolveError("linsolve: non-finite solution");
    last_residual_ = (b - A * x).norm() / bnorm;
    return x;
}

Eigen::VectorXd factor_solve(const SpMat& A, const Eigen::VectorXd& b) {
    SpdSolver s;
    return s.solve(A, b);
}

}  // namespace pff
