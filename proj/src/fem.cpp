#include "pff/fem.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "pff/parallel.hpp"

namespace pff {

namespace {

using MatX = Eigen::MatrixXd;

// 6 x (nv*dim) engineering-strain operator.
MatX b_matrix(const ElementKernel& k, int dim) {
    const int nv = dim + 1;
    MatX B = MatX::Zero(6, nv * dim);
    for (int a = 0; a < nv; ++a) {
        const auto& g = k.grad[a];
        const int c = a * dim;
        if (dim == 2) {
            B(0, c) = g[0];
            B(1, c + 1) = g[1];
            B(5, c) = g[1];
            B(5, c + 1) = g[0];
        } else {
            B(0, c) = g[0];
            B(1, c + 1) = g[1];
            B(2, c + 2) = g[2];
            B(3, c + 1) = g[2];
            B(3, c + 2) = g[1];
            B(4, c) = g[2];
            B(4, c + 2) = g[0];
            B(5, c) = g[1];
            B(5, c + 1) = g[0];
        }
    }
    return B;
}

void check_sizes(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A) {
    if (U.size() != pb.n_u() || UD.size() != pb.n_u() || A.size() != pb.n_nodes()) {
        throw std::invalid_argument(fmt::format("fem: size mismatch (U {}, U_D {}, A {}; expected {}, {}, {})", U.size(),
                                                UD.size(), A.size(), pb.n_u(), pb.n_u(), pb.n_nodes()));
    }
}

Pattern make_pattern(const Mesh& mesh, int ndof, int per_node, const std::vector<int>& free_of) {
    const int nv = mesh.vertices_per_element();
    const int L = nv * per_node;
    std::vector<Eigen::Triplet<double>> trip;
    auto local_dof = [&](const Element& el, int i) {
        const int full = el.v[i / per_node] * per_node + i % per_node;
        return free_of.empty() ? full : free_of[full];
    };
    for (const auto& el : mesh.elements) {
        for (int i = 0; i < L; ++i) {
            const int r = local_dof(el, i);
            if (r < 0) continue;
            for (int j = 0; j < L; ++j) {
                const int c = local_dof(el, j);
                if (c >= 0) trip.emplace_back(r, c, 0.0);
            }
        }
    }
    Pattern p;
    p.matrix.resize(ndof, ndof);
    p.matrix.setFromTriplets(trip.begin(), trip.end());
    p.matrix.makeCompressed();
    const int* outer = p.matrix.outerIndexPtr();
    const int* inner = p.matrix.innerIndexPtr();
    p.slots.resize(mesh.elements.size());
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        auto& s = p.slots[e];
        s.assign(static_cast<std::size_t>(L) * L, -1);
        for (int i = 0; i < L; ++i) {
            const int r = local_dof(mesh.elements[e], i);
            if (r < 0) continue;
            for (int j = 0; j < L; ++j) {
                const int c = local_dof(mesh.elements[e], j);
                if (c < 0) continue;
                const int* lo = inner + outer[c];
                const int* hi = inner + outer[c + 1];
                s[i * L + j] = static_cast<int>(std::lower_bound(lo, hi, r) - inner);
            }
        }
    }
    return p;
}

// Evaluates per-element local matrices in parallel, then scatters them in
// element order so the sums do not depend on the thread count.
template <class LocalFn>
const SpMat& assemble(Pattern& pat, std::size_t ne, int L, LocalFn&& local) {
    std::vector<double> buf(ne * static_cast<std::size_t>(L) * L);
    parallel_for(ne, [&](std::size_t b, std::size_t e_end) {
        for (std::size_t e = b; e < e_end; ++e) {
            Eigen::Map<MatX> K(buf.data() + e * L * L, L, L);
            local(e, K);
        }
    });
    double* val = pat.matrix.valuePtr();
    std::fill(val, val + pat.matrix.nonZeros(), 0.0);
    for (std::size_t e = 0; e < ne; ++e) {
        const double* K = buf.data() + e * L * L;
        const auto& s = pat.slots[e];
        // Map is column-major: K(i, j) lives at j * L + i.
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < L; ++j) {
                const int idx = s[i * L + j];
                if (idx >= 0) val[idx] += K[j * L + i];
            }
        }
    }
    return pat.matrix;
}

}  // namespace

double QuadratureRule::reference_measure() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

QuadratureRule quadrature(int dim) {
    QuadratureRule q;
    if (dim == 2) {
        const double a = 2.0 / 3.0, b = 1.0 / 6.0;
        q.points = {{a, b, b, 0.0}, {b, a, b, 0.0}, {b, b, a, 0.0}};
        q.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
    } else if (dim == 3) {
        const double a = 0.5854101966249685, b = 0.1381966011250105;
        q.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
        q.weights = {1.0 / 24.0, 1.0 / 24.0, 1.0 / 24.0, 1.0 / 24.0};
    } else {
        throw std::invalid_argument("quadrature: dimension must be 2 or 3");
    }
    return q;
}

Kernels build_kernels(const Mesh& mesh) {
    Kernels k;
    k.dim = mesh.dim;
    k.rule = quadrature(mesh.dim);
    const int d = mesh.dim;
    k.elems.resize(mesh.elements.size());
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
        const auto& el = mesh.elements[e];
        Eigen::Matrix3d J = Eigen::Matrix3d::Identity();
        const auto& x0 = mesh.nodes[el.v[0]].x;
        for (int c = 0; c < d; ++c) {
            const auto& xc = mesh.nodes[el.v[c + 1]].x;
            for (int i = 0; i < d; ++i) J(i, c) = xc[i] - x0[i];
        }
        const double det = J.topLeftCorner(d, d).determinant();
        double scale = 0.0;
        for (int c = 0; c < d; ++c) scale = std::max(scale, J.col(c).head(d).norm());
        if (!(std::abs(det) > 1e-14 * std::pow(scale, d))) {
            throw MeshError(fmt::format("element {} is degenerate (Jacobian {})", e, det));
        }
        const Eigen::MatrixXd Jinv = J.topLeftCorner(d, d).inverse();
        auto& ke = k.elems[e];
        ke.detJ = det;
        // Reference gradients: N_0 = 1 - sum(xi), N_c = xi_c.
        for (int a = 0; a <= d; ++a) {
            Eigen::VectorXd gref = Eigen::VectorXd::Zero(d);
            if (a == 0) {
                gref.setConstant(-1.0);
            } else {
                gref(a - 1) = 1.0;
            }
            const Eigen::VectorXd g = Jinv.transpose() * gref;
            for (int i = 0; i < d; ++i) ke.grad[a][i] = g(i);
        }
    }
    return k;
}

DofMap DofMap::make(int dim, int nnodes, std::vector<char> fixed) {
    DofMap m;
    m.dim = dim;
    m.nnodes = nnodes;
    if (fixed.empty()) fixed.assign(static_cast<std::size_t>(dim) * nnodes, 0);
    if (fixed.size() != static_cast<std::size_t>(dim) * nnodes) throw std::invalid_argument("DofMap: mask size");
    m.fixed = std::move(fixed);
    m.free_of.assign(m.fixed.size(), -1);
    for (std::size_t i = 0; i < m.fixed.size(); ++i) {
        if (!m.fixed[i]) {
            m.free_of[i] = static_cast<int>(m.free_dofs.size());
            m.free_dofs.push_back(static_cast<int>(i));
        }
    }
    return m;
}

Vec DofMap::restrict(const Vec& full) const {
    Vec out(n_free());
    for (int i = 0; i < n_free(); ++i) out(i) = full(free_dofs[i]);
    return out;
}

Vec DofMap::expand(const Vec& free) const {
    Vec out = Vec::Zero(n_u());
    for (int i = 0; i < n_free(); ++i) out(free_dofs[i]) = free(i);
    return out;
}

Problem::Problem(Mesh m, const MaterialParams& p, std::vector<char> fixed)
    : mesh(std::move(m)), mat(p) {
    mesh.validate();
    kernels = build_kernels(mesh);
    dofs = DofMap::make(mesh.dim, static_cast<int>(mesh.nodes.size()), std::move(fixed));
    pattern_u = make_pattern(mesh, dofs.n_free(), mesh.dim, dofs.free_of);
    pattern_beta = make_pattern(mesh, static_cast<int>(mesh.nodes.size()), 1, {});
}

Vec6 element_strain(const Problem& pb, std::size_t e, const Vec& z) {
    const int d = pb.dim();
    const auto& el = pb.mesh.elements[e];
    const auto& k = pb.kernels.elems[e];
    Vec6 g = Vec6::Zero();
    for (int a = 0; a <= d; ++a) {
        const auto& n = k.grad[a];
        const int base = el.v[a] * d;
        const double ux = z(base), uy = z(base + 1);
        g(0) += n[0] * ux;
        g(1) += n[1] * uy;
        g(5) += n[1] * ux + n[0] * uy;
        if (d == 3) {
            const double uz = z(base + 2);
            g(2) += n[2] * uz;
            g(3) += n[2] * uy + n[1] * uz;
            g(4) += n[2] * ux + n[0] * uz;
        }
    }
    return g;
}

std::vector<double> element_beta(const Problem& pb, std::size_t e, const Vec& A) {
    const auto& el = pb.mesh.elements[e];
    const auto& rule = pb.kernels.rule;
    std::vector<double> out(rule.points.size(), 0.0);
    for (std::size_t q = 0; q < out.size(); ++q) {
        for (int a = 0; a <= pb.dim(); ++a) out[q] += rule.points[q][a] * A(el.v[a]);
    }
    return out;
}

Vec internal_force(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A) {
    check_sizes(pb, U, UD, A);
    const Vec z = U + UD;
    const int d = pb.dim();
    const int L = (d + 1) * d;
    const std::size_t ne = pb.mesh.elements.size();
    std::vector<double> buf(ne * L);
    const auto& rule = pb.kernels.rule;
    parallel_for(ne, [&](std::size_t b, std::size_t e_end) {
        for (std::size_t e = b; e < e_end; ++e) {
            const auto& k = pb.kernels.elems[e];
            const SplitEval s = evaluate_split(from_engineering(element_strain(pb, e, z), d), pb.mat, false);
            const auto beta = element_beta(pb, e, A);
            double Rw = 0.0, W = 0.0;
            for (std::size_t q = 0; q < beta.size(); ++q) {
                Rw += rule.weights[q] * degradation(beta[q], pb.mat).R;
                W += rule.weights[q];
            }
            const Vec6 sig = k.detJ * (Rw * s.sig_plus + W * s.sig_minus);
            Eigen::Map<Vec> f(buf.data() + e * L, L);
            f = b_matrix(k, d).transpose() * sig;
        }
    });
    Vec out = Vec::Zero(pb.n_u());
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& el = pb.mesh.elements[e];
        for (int i = 0; i < L; ++i) out(el.v[i / d] * d + i % d) += buf[e * L + i];
    }
    return out;
}

Vec residual_u(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A) {
    return pb.dofs.restrict(internal_force(pb, U, UD, A));
}

Vec residual_beta(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const Vec& An) {
    check_sizes(pb, U, UD, A);
    if (An.size() != A.size()) throw std::invalid_argument("fem: A_n size mismatch");
    const Vec z = U + UD;
    const int d = pb.dim();
    const int nv = d + 1;
    const auto& p = pb.mat;
    const auto& rule = pb.kernels.rule;
    const double pen = p.penalty();
    const std::size_t ne = pb.mesh.elements.size();
    std::vector<double> buf(ne * nv);
    parallel_for(ne, [&](std::size_t b, std::size_t e_end) {
        for (std::size_t e = b; e < e_end; ++e) {
            const auto& el = pb.mesh.elements[e];
            const auto& k = pb.kernels.elems[e];
            const double psi = evaluate_split(from_engineering(element_strain(pb, e, z), d), p, false).psi_plus;
            const auto beta = element_beta(pb, e, A);
            const auto beta_n = element_beta(pb, e, An);
            double* r = buf.data() + e * nv;
            std::fill(r, r + nv, 0.0);
            for (std::size_t q = 0; q < beta.size(); ++q) {
                double s = degradation(beta[q], p).dR * psi;
                s += p.dissipation == Dissipation::AT2 ? p.gc / p.ell * beta[q] : p.kappa * p.gc / p.ell;
                s += pen * std::min(beta[q] - beta_n[q], 0.0);
                const double wj = rule.weights[q] * k.detJ;
                for (int a = 0; a < nv; ++a) r[a] += wj * rule.points[q][a] * s;
            }
            const double c = p.gc * p.ell * k.detJ * rule.reference_measure();
            for (int a = 0; a < nv; ++a) {
                for (int bn = 0; bn < nv; ++bn) {
                    double gg = 0.0;
                    for (int i = 0; i < d; ++i) gg += k.grad[a][i] * k.grad[bn][i];
                    r[a] += c * gg * A(el.v[bn]);
                }
            }
        }
    });
    Vec out = Vec::Zero(A.size());
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& el = pb.mesh.elements[e];
        for (int a = 0; a < nv; ++a) out(el.v[a]) += buf[e * nv + a];
    }
    return out;
}

const SpMat& tangent_u(Problem& pb, const Vec& U, const Vec& UD, const Vec& A) {
    check_sizes(pb, U, UD, A);
    const Vec z = U + UD;
    const int d = pb.dim();
    const int L = (d + 1) * d;
    const auto& rule = pb.kernels.rule;
    const Problem& cpb = pb;
    return assemble(pb.pattern_u, pb.mesh.elements.size(), L, [&](std::size_t e, Eigen::Map<MatX>& K) {
        const auto& k = cpb.kernels.elems[e];
        const SplitEval s = evaluate_split(from_engineering(element_strain(cpb, e, z), d), cpb.mat, true);
        const auto beta = element_beta(cpb, e, A);
        double Rw = 0.0, W = 0.0;
        for (std::size_t q = 0; q < beta.size(); ++q) {
            Rw += rule.weights[q] * degradation(beta[q], cpb.mat).R;
            W += rule.weights[q];
        }
        const Mat6 C = k.detJ * (Rw * s.C_plus + W * s.C_minus);
        const MatX B = b_matrix(k, d);
        K = B.transpose() * C * B;
    });
}

const SpMat& tangent_beta(Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const Vec& An,
                          bool active_on_zero) {
    check_sizes(pb, U, UD, A);
    if (An.size() != A.size()) throw std::invalid_argument("fem: A_n size mismatch");
    const Vec z = U + UD;
    const int d = pb.dim();
    const int nv = d + 1;
    const auto& p = pb.mat;
    const auto& rule = pb.kernels.rule;
    const double pen = p.penalty();
    const Problem& cpb = pb;
    return assemble(pb.pattern_beta, pb.mesh.elements.size(), nv, [&](std::size_t e, Eigen::Map<MatX>& K) {
        const auto& k = cpb.kernels.elems[e];
        const double psi = evaluate_split(from_engineering(element_strain(cpb, e, z), d), p, false).psi_plus;
        const auto beta = element_beta(cpb, e, A);
        const auto beta_n = element_beta(cpb, e, An);
        K.setZero();
        for (std::size_t q = 0; q < beta.size(); ++q) {
            double m = 2.0 * psi;
            if (p.dissipation == Dissipation::AT2) m += p.gc / p.ell;
            const double x = beta[q] - beta_n[q];
            if (x < 0.0 || (active_on_zero && x <= 0.0)) m += pen;
            const double wj = rule.weights[q] * k.detJ;
            for (int a = 0; a < nv; ++a) {
                for (int bn = 0; bn < nv; ++bn) K(a, bn) += wj * m * rule.points[q][a] * rule.points[q][bn];
            }
        }
        const double c = p.gc * p.ell * k.detJ * rule.reference_measure();
        for (int a = 0; a < nv; ++a) {
            for (int bn = 0; bn < nv; ++bn) {
                double gg = 0.0;
                for (int i = 0; i < d; ++i) gg += k.grad[a][i] * k.grad[bn][i];
                K(a, bn) += c * gg;
            }
        }
    });
}

double reaction_force(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const std::string& set_tag,
                      const std::array<double, 3>& direction) {
    const auto& ids = pb.mesh.node_set(set_tag);
    const Vec f = internal_force(pb, U, UD, A);
    KahanSum s;
    const int d = pb.dim();
    for (int n : ids) {
        for (int c = 0; c < d; ++c) s.add(direction[c] * f(n * d + c));
    }
    return s.value();
}

}  // namespace pff
