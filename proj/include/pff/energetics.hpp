#pragma once

#include "pff/fem.hpp"

namespace pff {

/// Bulk energy with displacement U1 + U2 (N·mm).
double erg(const Problem& pb, const Vec& U1, const Vec& U2, const Vec& A);
double grad_term(const Problem& pb, const Vec& A);
/// Dissipation state function; D(A_n, A) = dis(A) - dis(A_n).
double dis(const Problem& pb, const Vec& A);
double dissipation_increment(const Problem& pb, const Vec& An, const Vec& Anext);
/// (1/(2 eps)) * integral of [A - A_n]_-^2; its gradient is the penalty term of residual_beta.
double penalty_energy(const Problem& pb, const Vec& A, const Vec& An);

/// E = erg + grad_term.
double total_energy(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A);

/// Minimized by each alternating half-step: E + D(A_n, A) + penalty.
double functional(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const Vec& An);

double upper_bound(const Problem& pb, const Vec& Un, const Vec& UDn, const Vec& UDnext, const Vec& An);
double lower_bound(const Problem& pb, const Vec& Unext, const Vec& UDn, const Vec& UDnext, const Vec& Anext);
/// Literal reading of the postprocessing listing: subtracts erg(U_D,n+1, U_D,n, A_n+1).
double lower_bound_listing(const Problem& pb, const Vec& Unext, const Vec& UDn, const Vec& UDnext,
                           const Vec& Anext);

struct EnergyReport {
    int step = 0;
    double E_next = 0.0;
    double E_curr = 0.0;
    double D_inc = 0.0;
    double delta = 0.0;
    double LB = 0.0;
    double UB = 0.0;
    double eta = 0.0;
    bool passed = false;
    bool irreversibility_violation = false;
};

struct StepStates {
    const Vec& Un;
    const Vec& UDn;
    const Vec& An;
    const Vec& Unext;
    const Vec& UDnext;
    const Vec& Anext;
};

EnergyReport check_two_sided(const Problem& pb, int step, const StepStates& s, double eta,
                             bool listing_lower_bound = false);

/// The acceptance predicate on already computed numbers.
bool two_sided_holds(double delta, double LB, double UB, double eta);

}  // namespace pff
