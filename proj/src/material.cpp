#include "pff/material.hpp"

#include <cmath>
#include <stdexcept>

namespace pff {

namespace {

// Voigt vector of n_a (x) n_b + n_b (x) n_a halved, i.e. of M_a when a == b.
Vec6 dyad(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    Vec6 v;
    v << a(0) * b(0), a(1) * b(1), a(2) * b(2), 0.5 * (a(1) * b(2) + a(2) * b(1)),
        0.5 * (a(0) * b(2) + a(2) * b(0)), 0.5 * (a(0) * b(1) + a(1) * b(0));
    return v;
}

void eigen_sym(const SymTensor& eps, std::array<double, 3>& val, Eigen::Matrix3d& vec) {
    if (eps.dim == 2) {
        // Closed form in the plane; e_z carries the embedded zero strain.
        const double a = eps.v(0), b = eps.v(1), c = eps.v(5);
        const double m = 0.5 * (a + b);
        const double r = std::hypot(0.5 * (a - b), c);
        const double th = 0.5 * std::atan2(2.0 * c, a - b);
        const double cs = std::cos(th), sn = std::sin(th);
        val = {m + r, m - r, 0.0};
        vec << cs, -sn, 0.0,
               sn, cs, 0.0,
               0.0, 0.0, 1.0;
        return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(eps.matrix());
    for (int a = 0; a < 3; ++a) val[a] = es.eigenvalues()(a);
    vec = es.eigenvectors();
}

double pos(double x) { return x > 0.0 ? x : 0.0; }
double neg(double x) { return x < 0.0 ? x : 0.0; }
double heav_pos(double x) { return x > 0.0 ? 1.0 : 0.0; }
double heav_neg(double x) { return x > 0.0 ? 0.0 : 1.0; }

struct Branch {
    double psi = 0.0;
    Vec6 sig = Vec6::Zero();
    Mat6 C = Mat6::Zero();
};

// psi = lambda/2 <tr eps>^2 + mu eps_pm : eps_pm for one sign; sigma = lambda <tr eps> I + 2 mu eps_pm.
Branch branch(const std::array<double, 3>& e, const Eigen::Matrix3d& n, const MaterialParams& p, bool plus,
              bool with_tangent, double gap_tol) {
    const double tr = e[0] + e[1] + e[2];
    const double T = plus ? pos(tr) : neg(tr);
    std::array<double, 3> part{}, H{};
    for (int a = 0; a < 3; ++a) {
        part[a] = plus ? pos(e[a]) : neg(e[a]);
        H[a] = plus ? heav_pos(e[a]) : heav_neg(e[a]);
    }
    Branch out;
    out.psi = 0.5 * p.lambda * T * T;
    std::array<Vec6, 3> M;
    for (int a = 0; a < 3; ++a) {
        M[a] = dyad(n.col(a), n.col(a));
        out.psi += p.mu * part[a] * part[a];
        out.sig += (p.lambda * T + 2.0 * p.mu * part[a]) * M[a];
    }
    if (!with_tangent) return out;

    const double HT = plus ? heav_pos(tr) : heav_neg(tr);
    if (HT != 0.0) {
        Vec6 I;
        I << 1.0, 1.0, 1.0, 0.0, 0.0, 0.0;
        out.C += p.lambda * I * I.transpose();
    }
    for (int a = 0; a < 3; ++a) {
        if (H[a] != 0.0) out.C += 2.0 * p.mu * M[a] * M[a].transpose();
    }
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            const double gap = e[a] - e[b];
            const double theta = std::abs(gap) < gap_tol ? 2.0 * p.mu * H[a] : 2.0 * p.mu * (part[a] - part[b]) / gap;
            const Vec6 s = 2.0 * dyad(n.col(a), n.col(b));
            out.C += 0.5 * theta * s * s.transpose();
        }
    }
    return out;
}

Eigen::MatrixXd restrict_dim(const Mat6& C, int dim) {
    if (dim == 3) return C;
    static constexpr int idx[3] = {0, 1, 5};
    Eigen::MatrixXd out(3, 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) out(i, j) = C(idx[i], idx[j]);
    }
    return out;
}

}  // namespace

std::string to_string(Dissipation d) { return d == Dissipation::AT1 ? "AT1" : "AT2"; }

Dissipation parse_dissipation(const std::string& s) {
    if (s == "AT2" || s == "at2") return Dissipation::AT2;
    if (s == "AT1" || s == "at1") return Dissipation::AT1;
    throw std::invalid_argument("unknown dissipation model '" + s + "' (expected AT2 or AT1)");
}

void MaterialParams::validate() const {
    auto bad = [](const char* what) { throw std::invalid_argument(std::string("material: ") + what); };
    if (!(lambda >= 0.0)) bad("lambda must be >= 0");
    if (!(mu > 0.0)) bad("mu must be > 0");
    if (!(gc > 0.0)) bad("gc must be > 0");
    if (!(ell > 0.0)) bad("ell must be > 0");
    if (!(k > 0.0 && k < 1.0)) bad("k must lie in (0, 1)");
    if (!(eps_pen > 0.0)) bad("eps_pen must be > 0");
    if (dissipation == Dissipation::AT1 && !(kappa > 0.0)) bad("kappa must be > 0 for AT1");
}

MaterialParams from_young(double E, double nu) {
    MaterialParams p;
    p.lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    p.mu = E / (2.0 * (1.0 + nu));
    return p;
}

SymTensor SymTensor::zero(int dim) {
    SymTensor t;
    t.dim = dim;
    return t;
}

SymTensor SymTensor::from_matrix(const Eigen::Matrix3d& m, int dim) {
    SymTensor t;
    t.dim = dim;
    t.v << m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(1, 2) + m(2, 1)), 0.5 * (m(0, 2) + m(2, 0)),
        0.5 * (m(0, 1) + m(1, 0));
    if (dim == 2) t.v(2) = t.v(3) = t.v(4) = 0.0;
    return t;
}

Eigen::Matrix3d SymTensor::matrix() const {
    Eigen::Matrix3d m;
    m << v(0), v(5), v(4),
         v(5), v(1), v(3),
         v(4), v(3), v(2);
    return m;
}

double SymTensor::norm() const {
    return std::sqrt(v(0) * v(0) + v(1) * v(1) + v(2) * v(2) +
                     2.0 * (v(3) * v(3) + v(4) * v(4) + v(5) * v(5)));
}

SymTensor from_engineering(const Vec6& gamma, int dim) {
    SymTensor t;
    t.dim = dim;
    t.v << gamma(0), gamma(1), gamma(2), 0.5 * gamma(3), 0.5 * gamma(4), 0.5 * gamma(5);
    return t;
}

SplitState spectral_split(const SymTensor& eps) {
    SplitState s;
    eigen_sym(eps, s.eigvals, s.eigvecs);
    s.eps_plus = SymTensor::zero(eps.dim);
    s.eps_minus = SymTensor::zero(eps.dim);
    for (int a = 0; a < 3; ++a) {
        const Vec6 M = dyad(s.eigvecs.col(a), s.eigvecs.col(a));
        s.eps_plus.v += pos(s.eigvals[a]) * M;
        s.eps_minus.v += neg(s.eigvals[a]) * M;
    }
    return s;
}

SplitEval evaluate_split(const SymTensor& eps, const MaterialParams& p, bool with_tangent) {
    std::array<double, 3> e;
    Eigen::Matrix3d n;
    eigen_sym(eps, e, n);
    const double gap_tol = 1e-9 * (1.0 + eps.norm());
    const Branch bp = branch(e, n, p, true, with_tangent, gap_tol);
    const Branch bm = branch(e, n, p, false, with_tangent, gap_tol);
    SplitEval out;
    out.psi_plus = bp.psi;
    out.psi_minus = bm.psi;
    out.sig_plus = bp.sig;
    out.sig_minus = bm.sig;
    out.C_plus = bp.C;
    out.C_minus = bm.C;
    if (eps.dim == 2) {
        for (int i : {2, 3, 4}) {
            out.sig_plus(i) = out.sig_minus(i) = 0.0;
        }
    }
    return out;
}

std::pair<double, double> psi_split(const SymTensor& eps, const MaterialParams& p) {
    const SplitEval s = evaluate_split(eps, p, false);
    return {s.psi_plus, s.psi_minus};
}

std::pair<SymTensor, SymTensor> sigma_split(const SymTensor& eps, const MaterialParams& p) {
    const SplitEval s = evaluate_split(eps, p, false);
    SymTensor a = SymTensor::zero(eps.dim), b = SymTensor::zero(eps.dim);
    a.v = s.sig_plus;
    b.v = s.sig_minus;
    return {a, b};
}

Degradation degradation(double beta, const MaterialParams& p) {
    return {(1.0 - beta) * (1.0 - beta) + p.k, -2.0 * (1.0 - beta)};
}

SymTensor stress(const SymTensor& eps, double beta, const MaterialParams& p) {
    const SplitEval s = evaluate_split(eps, p, false);
    SymTensor out = SymTensor::zero(eps.dim);
    out.v = degradation(beta, p).R * s.sig_plus + s.sig_minus;
    return out;
}

Eigen::MatrixXd tangent(const SymTensor& eps, double beta, const MaterialParams& p) {
    const SplitEval s = evaluate_split(eps, p, true);
    const Mat6 C = degradation(beta, p).R * s.C_plus + s.C_minus;
    return restrict_dim(C, eps.dim);
}

}  // namespace pff
