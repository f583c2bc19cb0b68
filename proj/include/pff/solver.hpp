#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pff/fem.hpp"

namespace pff {

struct SolverConfig {
    double tol_u = 1e-5;  // mm, sup norm of the displacement increment
    double tol_a = 1e-5;  // sup norm of the damage increment
    int max_newton = 50;
    int max_alt = 10000;
    bool clamp_damage = true;
    bool record_trace = true;
    double clamp_abort = 1e-3;

    void validate() const;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NewtonInfo {
    int iters = 0;
    int line_search_cuts = 0;
    double clamp = 0.0;           // largest projection distance into [0, 1]
};

/// Projects A into [0, 1] and returns the largest move. Throws SolverError when
/// some value exceeded 1 by more than `abort_above`; values below 0 come from the
/// pointwise penalty and are only logged.
double clamp_damage(Vec& A, double abort_above);

/// Minimizes the bulk energy over free displacement dofs at fixed damage.
Vec newton_u(Problem& pb, const Vec& U0, const Vec& UD, const Vec& A, const SolverConfig& cfg,
             NewtonInfo* info = nullptr);

/// Semi-smooth Newton for the penalized damage problem at fixed displacement.
Vec newton_beta(Problem& pb, const Vec& A0, const Vec& U, const Vec& UD, const Vec& An, const SolverConfig& cfg,
                NewtonInfo* info = nullptr);

struct AltResult {
    Vec U;
    Vec A;
    bool converged = false;
    std::string failure;
    int alt_iters = 0;
    int newton_iters_u = 0;
    int newton_iters_beta = 0;
    int line_search_cuts = 0;
    double clamp_max = 0.0;
    /// Functional (energy + dissipation + penalty) at the start and after each half-step.
    std::vector<double> functional_trace;
    /// Largest relative increase between consecutive trace entries (<= 0 for exact descent).
    double max_ascent = 0.0;
};

AltResult alternate_minimize(Problem& pb, const Vec& U_start, const Vec& A_start, const Vec& An, const Vec& UD,
                             const SolverConfig& cfg);

/// Discrete optimality residuals at a converged pair.
struct KktReport {
    double residual_u = 0.0;       // sup norm over free dofs
    double force_scale = 0.0;      // sup norm of the internal force, for relative checks
    double residual_beta = 0.0;    // sup norm over nodes with A > A_n + slack
    double beta_min = 0.0;
    double beta_max = 0.0;
};

KktReport kkt_check(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const Vec& An,
                    double slack = 1e-6);

}  // namespace pff
