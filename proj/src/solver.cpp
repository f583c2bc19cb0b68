#include "pff/solver.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pff/energetics.hpp"
#include "pff/parallel.hpp"

namespace pff {

namespace {

double sup(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

constexpr int kMaxSearch = 60;
constexpr double kSlopeTol = 0.1;

// Both half-step energies are convex along a Newton direction, so the slope
// phi'(a) is nondecreasing and continuous. The full step is kept when it lowers
// the energy (semismooth Newton steps across kinks); otherwise a root of phi' in
// (0, 1) is bracketed, keeping only points with phi' <= 0 so phi never rises.
template <class Slope, class Energy>
double line_step(double g0, const Slope& slope, const Energy& energy_drop, int& evals) {
    const double g1 = slope(1.0);
    ++evals;
    if (g1 <= 0.0 || energy_drop()) return 1.0;
    double lo = 0.0, hi = 1.0, glo = g0, ghi = g1;
    for (int k = 0; k < kMaxSearch; ++k) {
        // Regula falsi, with a bisection every third try against stagnation.
        double a = (k % 3 == 2) ? 0.5 * (lo + hi) : (lo * ghi - hi * glo) / (ghi - glo);
        if (!(a > lo && a < hi)) a = 0.5 * (lo + hi);
        const double g = slope(a);
        ++evals;
        if (g <= 0.0) {
            lo = a;
            glo = g;
            if (std::abs(g) <= kSlopeTol * std::abs(g0)) break;
        } else {
            hi = a;
            ghi = g;
        }
        if (hi - lo <= 1e-12) break;
    }
    return lo;
}

// Quadrature points where the irreversibility penalty is active (A <= A_n).
std::vector<bool> penalty_active(const Problem& pb, const Vec& A, const Vec& An) {
    const std::size_t nq = pb.kernels.rule.weights.size();
    std::vector<bool> out(pb.mesh.elements.size() * nq);
    for (std::size_t e = 0; e < pb.mesh.elements.size(); ++e) {
        const auto b = element_beta(pb, e, A);
        const auto bn = element_beta(pb, e, An);
        for (std::size_t q = 0; q < nq; ++q) out[e * nq + q] = b[q] - bn[q] <= 0.0;
    }
    return out;
}

}  // namespace

double clamp_damage(Vec& A, double abort_above) {
    double moved = 0.0, above = 0.0;
    for (Eigen::Index i = 0; i < A.size(); ++i) {
        const double c = std::clamp(A(i), 0.0, 1.0);
        moved = std::max(moved, std::abs(c - A(i)));
        above = std::max(above, A(i) - 1.0);
        A(i) = c;
    }
    if (above > abort_above) {
        throw SolverError(fmt::format("damage exceeded 1 by {:.3e} (abort threshold {:.1e})", above, abort_above));
    }
    return moved;
}

void SolverConfig::validate() const {
    if (!(tol_u > 0.0) || !(tol_a > 0.0)) throw std::invalid_argument("solver: tolerances must be > 0");
    if (max_newton < 1 || max_alt < 1) throw std::invalid_argument("solver: iteration caps must be >= 1");
}

Vec newton_u(Problem& pb, const Vec& U0, const Vec& UD, const Vec& A, const SolverConfig& cfg, NewtonInfo* info) {
    NewtonInfo local;
    NewtonInfo& nfo = info ? *info : local;
    nfo = NewtonInfo{};
    SpdSolver lin;
    Vec U = U0;
    Vec f = internal_force(pb, U, UD, A);
    Vec r = pb.dofs.restrict(f);
    for (int it = 1; it <= cfg.max_newton; ++it) {
        nfo.iters = it;
        if (sup(r) <= 1e-10 * sup(f)) return U;
        const SpMat& K = tangent_u(pb, U, UD, A);
        Vec step;
        try {
            step = -lin.solve(K, r);
        } catch (const LinearSolveError& e) {
            throw SolverError(fmt::format("displacement Newton: {}", e.what()));
        }
        const double g0 = r.dot(step);
        // No descent left along the Newton direction: U is a minimizer to round-off.
        if (!(g0 < 0.0)) return U;
        const Vec dU = pb.dofs.expand(step);
        auto slope = [&](double a) { return residual_u(pb, U + a * dU, UD, A).dot(step); };
        auto drop = [&] { return erg(pb, U + dU, UD, A) <= erg(pb, U, UD, A); };
        const double alpha = line_step(g0, slope, drop, nfo.line_search_cuts);
        U += alpha * dU;
        f = internal_force(pb, U, UD, A);
        r = pb.dofs.restrict(f);
        if (sup(dU) <= cfg.tol_u || sup(r) <= 1e-10 * sup(f)) return U;
    }
    throw SolverError(fmt::format("displacement Newton did not converge in {} iterations", cfg.max_newton));
}

Vec newton_beta(Problem& pb, const Vec& A0, const Vec& U, const Vec& UD, const Vec& An, const SolverConfig& cfg,
                NewtonInfo* info) {
    NewtonInfo local;
    NewtonInfo& nfo = info ? *info : local;
    nfo = NewtonInfo{};
    SpdSolver lin;
    const Eigen::Index n = A0.size();
    Vec A = A0;
    auto energy = [&](const Vec& a) {
        return erg(pb, U, UD, a) + grad_term(pb, a) + dis(pb, a) + penalty_energy(pb, a, An);
    };
    bool converged = false;
    bool damped = false;
    std::vector<std::vector<bool>> seen;
    for (int it = 1; it <= cfg.max_newton; ++it) {
        nfo.iters = it;
        const Vec r = residual_beta(pb, U, UD, A, An);
        Vec step;
        try {
            // Nodes sitting on A_n count as active, which keeps the linear (AT1) case nonsingular.
            step = -lin.solve(tangent_beta(pb, U, UD, A, An, true), r);
        } catch (const LinearSolveError& e) {
            throw SolverError(fmt::format("damage Newton: {}", e.what()));
        }
        const double g0 = r.dot(step);
        if (!(g0 < 0.0)) {
            converged = true;
            break;
        }
        // Full semismooth steps update the penalty active set at once; a repeated
        // active set switches to the safeguarded line search.
        const std::vector<bool> before = penalty_active(pb, A, An);
        std::vector<bool> after = penalty_active(pb, A + step, An);
        const bool settled = after == before;
        if (!damped && !settled) {
            if (std::find(seen.begin(), seen.end(), after) != seen.end() || it > cfg.max_newton / 2) {
                damped = true;
            } else {
                seen.push_back(std::move(after));
            }
        }
        double alpha = 1.0;
        if (damped) {
            auto slope = [&](double a) { return residual_beta(pb, U, UD, A + a * step, An).dot(step); };
            auto drop = [&] { return energy(A + step) <= energy(A); };
            alpha = line_step(g0, slope, drop, nfo.line_search_cuts);
        }
        A += alpha * step;
        // On a settled active set the energy is quadratic and the full step is exact.
        if (sup(step) <= cfg.tol_a && settled && alpha == 1.0) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw SolverError(fmt::format("damage Newton did not converge in {} iterations", cfg.max_newton));
    }
    if (cfg.clamp_damage) nfo.clamp = clamp_damage(A, cfg.clamp_abort);
    return A;
}

AltResult alternate_minimize(Problem& pb, const Vec& U_start, const Vec& A_start, const Vec& An, const Vec& UD,
                             const SolverConfig& cfg) {
    AltResult res;
    res.U = U_start;
    res.A = A_start;
    auto record = [&]() {
        if (!cfg.record_trace) return;
        const double F = functional(pb, res.U, UD, res.A, An);
        if (!res.functional_trace.empty()) {
            const double prev = res.functional_trace.back();
            res.max_ascent = std::max(res.max_ascent, (F - prev) / (1.0 + std::abs(prev)));
        }
        res.functional_trace.push_back(F);
    };
    record();
    // The projection runs once on the converged pair, so every half-step stays an
    // exact minimization.
    SolverConfig inner = cfg;
    inner.clamp_damage = false;
    try {
        for (int it = 1; it <= cfg.max_alt; ++it) {
            res.alt_iters = it;
            NewtonInfo nu, nb;
            Vec U1 = newton_u(pb, res.U, UD, res.A, cfg, &nu);
            res.newton_iters_u += nu.iters;
            res.line_search_cuts += nu.line_search_cuts;
            const double dU = sup(U1 - res.U);
            res.U = std::move(U1);
            record();
            Vec A1 = newton_beta(pb, res.A, res.U, UD, An, inner, &nb);
            res.newton_iters_beta += nb.iters;
            res.line_search_cuts += nb.line_search_cuts;
            const double dA = sup(A1 - res.A);
            res.A = std::move(A1);
            record();
            if (dU <= cfg.tol_u && dA <= cfg.tol_a) {
                if (cfg.clamp_damage) res.clamp_max = clamp_damage(res.A, cfg.clamp_abort);
                res.converged = true;
                return res;
            }
        }
        res.failure = fmt::format("alternating minimization did not converge in {} alternations", cfg.max_alt);
    } catch (const SolverError& e) {
        res.failure = e.what();
    }
    return res;
}

KktReport kkt_check(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const Vec& An, double slack) {
    KktReport k;
    const Vec f = internal_force(pb, U, UD, A);
    k.force_scale = sup(f);
    k.residual_u = sup(pb.dofs.restrict(f));
    const Vec rb = residual_beta(pb, U, UD, A, An);
    for (Eigen::Index i = 0; i < A.size(); ++i) {
        if (A(i) > An(i) + slack) k.residual_beta = std::max(k.residual_beta, std::abs(rb(i)));
    }
    k.beta_min = A.size() ? A.minCoeff() : 0.0;
    k.beta_max = A.size() ? A.maxCoeff() : 0.0;
    return k;
}

}  // namespace pff
