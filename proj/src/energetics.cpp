#include "pff/energetics.hpp"

#include <stdexcept>

#include "pff/parallel.hpp"

namespace pff {

namespace {

// Per-element values computed in parallel, summed in element order.
template <class ElemFn>
double element_sum(const Problem& pb, ElemFn&& fn) {
    const std::size_t ne = pb.mesh.elements.size();
    std::vector<double> vals(ne);
    parallel_for(ne, [&](std::size_t b, std::size_t e_end) {
        for (std::size_t e = b; e < e_end; ++e) vals[e] = fn(e);
    });
    KahanSum s;
    for (double v : vals) s.add(v);
    return s.value();
}

void need(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("energetics: size mismatch in ") + what);
}

}  // namespace

double erg(const Problem& pb, const Vec& U1, const Vec& U2, const Vec& A) {
    need(U1.size() == pb.n_u() && U2.size() == pb.n_u() && A.size() == pb.n_nodes(), "erg");
    const Vec z = U1 + U2;
    const auto& rule = pb.kernels.rule;
    const int d = pb.dim();
    return element_sum(pb, [&](std::size_t e) {
        const SplitEval s = evaluate_split(from_engineering(element_strain(pb, e, z), d), pb.mat, false);
        const auto beta = element_beta(pb, e, A);
        double acc = 0.0;
        for (std::size_t q = 0; q < beta.size(); ++q) {
            acc += rule.weights[q] * (degradation(beta[q], pb.mat).R * s.psi_plus + s.psi_minus);
        }
        return acc * pb.kernels.elems[e].detJ;
    });
}

double grad_term(const Problem& pb, const Vec& A) {
    need(A.size() == pb.n_nodes(), "grad_term");
    const int d = pb.dim();
    return element_sum(pb, [&](std::size_t e) {
        const auto& el = pb.mesh.elements[e];
        const auto& k = pb.kernels.elems[e];
        double g2 = 0.0;
        for (int i = 0; i < d; ++i) {
            double gi = 0.0;
            for (int a = 0; a <= d; ++a) gi += k.grad[a][i] * A(el.v[a]);
            g2 += gi * gi;
        }
        return 0.5 * pb.mat.gc * pb.mat.ell * pb.kernels.volume(e) * g2;
    });
}

double dis(const Problem& pb, const Vec& A) {
    need(A.size() == pb.n_nodes(), "dis");
    const auto& rule = pb.kernels.rule;
    const auto& p = pb.mat;
    return element_sum(pb, [&](std::size_t e) {
        const auto beta = element_beta(pb, e, A);
        double acc = 0.0;
        for (std::size_t q = 0; q < beta.size(); ++q) {
            const double dens = p.dissipation == Dissipation::AT2 ? p.gc / (2.0 * p.ell) * beta[q] * beta[q]
                                                                  : p.kappa * p.gc / p.ell * beta[q];
            acc += rule.weights[q] * dens;
        }
        return acc * pb.kernels.elems[e].detJ;
    });
}

double dissipation_increment(const Problem& pb, const Vec& An, const Vec& Anext) {
    return dis(pb, Anext) - dis(pb, An);
}

double penalty_energy(const Problem& pb, const Vec& A, const Vec& An) {
    need(A.size() == pb.n_nodes() && An.size() == pb.n_nodes(), "penalty_energy");
    const auto& rule = pb.kernels.rule;
    const double pen = pb.mat.penalty();
    return element_sum(pb, [&](std::size_t e) {
        const auto beta = element_beta(pb, e, A);
        const auto beta_n = element_beta(pb, e, An);
        double acc = 0.0;
        for (std::size_t q = 0; q < beta.size(); ++q) {
            const double m = std::min(beta[q] - beta_n[q], 0.0);
            acc += rule.weights[q] * m * m;
        }
        return 0.5 * pen * acc * pb.kernels.elems[e].detJ;
    });
}

double total_energy(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A) {
    return erg(pb, U, UD, A) + grad_term(pb, A);
}

double functional(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const Vec& An) {
    return total_energy(pb, U, UD, A) + dissipation_increment(pb, An, A) + penalty_energy(pb, A, An);
}

double upper_bound(const Problem& pb, const Vec& Un, const Vec& UDn, const Vec& UDnext, const Vec& An) {
    return erg(pb, Un, UDnext, An) - erg(pb, Un, UDn, An);
}

double lower_bound(const Problem& pb, const Vec& Unext, const Vec& UDn, const Vec& UDnext, const Vec& Anext) {
    return erg(pb, Unext, UDnext, Anext) - erg(pb, Unext, UDn, Anext);
}

double lower_bound_listing(const Problem& pb, const Vec& Unext, const Vec& UDn, const Vec& UDnext,
                           const Vec& Anext) {
    return erg(pb, Unext, UDnext, Anext) - erg(pb, UDnext, UDn, Anext);
}

bool two_sided_holds(double delta, double LB, double UB, double eta) {
    return LB - eta <= delta && delta <= UB + eta;
}

EnergyReport check_two_sided(const Problem& pb, int step, const StepStates& s, double eta, bool listing_lower_bound) {
    if (!(eta > 0.0)) throw std::invalid_argument("energetics: eta must be > 0");
    EnergyReport r;
    r.step = step;
    r.eta = eta;
    r.E_next = total_energy(pb, s.Unext, s.UDnext, s.Anext);
    r.E_curr = total_energy(pb, s.Un, s.UDn, s.An);
    const double dis_n = dis(pb, s.An);
    r.D_inc = dis(pb, s.Anext) - dis_n;
    r.delta = r.E_next - r.E_curr + r.D_inc;
    r.UB = upper_bound(pb, s.Un, s.UDn, s.UDnext, s.An);
    r.LB = listing_lower_bound ? lower_bound_listing(pb, s.Unext, s.UDn, s.UDnext, s.Anext)
                               : lower_bound(pb, s.Unext, s.UDn, s.UDnext, s.Anext);
    r.passed = two_sided_holds(r.delta, r.LB, r.UB, eta);
    r.irreversibility_violation = r.D_inc < -1e-8 * (1.0 + dis_n);
    return r;
}

}  // namespace pff
