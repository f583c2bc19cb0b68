#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pff/fem.hpp"
#include "pff/linsolve.hpp"

using namespace pff;

namespace {

std::vector<char> fix_sets(const Mesh& m, const std::vector<std::pair<std::string, int>>& what) {
    std::vector<char> fixed(m.dim * m.nodes.size(), 0);
    for (const auto& [set, comp] : what) {
        for (int n : m.node_set(set)) fixed[n * m.dim + comp] = 1;
    }
    return fixed;
}

// Two triangles, bottom clamped, top pulled in y: free dofs are the top x components.
struct TwoElementCase {
    Problem pb;
    Vec UD;
    TwoElementCase()
        : pb(oracle::two_triangles(), oracle::sent_material(),
             fix_sets(oracle::two_triangles(), {{"bottom", 0}, {"bottom", 1}, {"top", 1}})) {
        UD = Vec::Zero(pb.n_u());
        for (int n : pb.mesh.node_set("top")) UD(n * 2 + 1) = 2e-3;
    }
};

// Structured patch with only one pinned corner; more free dofs for the FD checks.
Problem patch_problem(int nx, int ny) {
    Mesh m = generate_structured(2, {1.0, 1.0}, {nx, ny});
    auto fixed = fix_sets(m, {{"ymin", 1}});
    fixed[0] = 1;
    return Problem(m, oracle::sent_material(), fixed);
}

Vec affine(const Mesh& m, const Eigen::Matrix2d& M) {
    Vec z(m.nodes.size() * 2);
    for (const auto& n : m.nodes) {
        const Eigen::Vector2d u = M * Eigen::Vector2d(n.x[0], n.x[1]);
        z(n.id * 2) = u(0);
        z(n.id * 2 + 1) = u(1);
    }
    return z;
}

Eigen::MatrixXd dense(const SpMat& s) { return Eigen::MatrixXd(s); }

}  // namespace

TEST(Kernels, QuadratureAndPartitionOfUnity) {
    for (int d : {2, 3}) {
        const auto q = quadrature(d);
        double w = 0.0;
        for (double x : q.weights) w += x;
        EXPECT_NEAR(w, d == 2 ? 0.5 : 1.0 / 6.0, 1e-15);
        for (const auto& p : q.points) EXPECT_NEAR(p[0] + p[1] + p[2] + p[3], 1.0, 1e-15);
    }
    const Kernels k = build_kernels(generate_structured(3, {1, 1, 1}, {1, 1, 1}));
    for (const auto& el : k.elems) {
        for (int i = 0; i < 3; ++i) {
            double s = 0.0;
            for (int a = 0; a < 4; ++a) s += el.grad[a][i];
            EXPECT_NEAR(s, 0.0, 1e-14);
        }
    }
}

TEST(Kernels, TranslationInvariantAndMatchesVertexOracle) {
    Mesh a = generate_structured(2, {1.0, 2.0}, {3, 2});
    Mesh b = a;
    for (auto& n : b.nodes) {
        n.x[0] += 13.25;
        n.x[1] -= 4.5;
    }
    const Kernels ka = build_kernels(a), kb = build_kernels(b);
    for (std::size_t e = 0; e < a.elements.size(); ++e) {
        const auto s = oracle::simplex(a, e);
        EXPECT_NEAR(ka.volume(e), s.measure, 1e-15);
        for (int v = 0; v < 3; ++v) {
            for (int i = 0; i < 2; ++i) {
                EXPECT_NEAR(ka.elems[e].grad[v][i], kb.elems[e].grad[v][i], 1e-12);
                EXPECT_NEAR(ka.elems[e].grad[v][i], s.grad[v][i], 1e-12);
            }
        }
    }
}

TEST(Kernels, PatchTestReproducesAffineStrain) {
    std::mt19937 rng(1);
    for (int d : {2, 3}) {
        const Mesh m = d == 2 ? generate_structured(2, {1, 1}, {3, 3}) : generate_structured(3, {1, 1, 1}, {2, 2, 2});
        Problem pb(m, oracle::sent_material(), std::vector<char>(m.dim * m.nodes.size(), 0));
        const Eigen::Matrix3d M = Eigen::Matrix3d::Random() * 1e-3;
        Vec z(m.nodes.size() * d);
        for (const auto& n : m.nodes) {
            for (int i = 0; i < d; ++i) {
                z(n.id * d + i) = 0.0;
                for (int j = 0; j < d; ++j) z(n.id * d + i) += M(i, j) * n.x[j];
            }
        }
        const Eigen::Matrix3d S = 0.5 * (M + M.transpose());
        for (std::size_t e = 0; e < m.elements.size(); ++e) {
            const Vec6 g = element_strain(pb, e, z);
            EXPECT_NEAR(g(0), S(0, 0), 1e-15);
            EXPECT_NEAR(g(1), S(1, 1), 1e-15);
            EXPECT_NEAR(g(5), 2 * S(0, 1), 1e-15);
            if (d == 3) {
                EXPECT_NEAR(g(2), S(2, 2), 1e-15);
                EXPECT_NEAR(g(3), 2 * S(1, 2), 1e-15);
                EXPECT_NEAR(g(4), 2 * S(0, 2), 1e-15);
            }
        }
    }
}

TEST(ResidualU, ZeroStateIsZero) {
    Problem pb = patch_problem(2, 2);
    const Vec z = Vec::Zero(pb.n_u());
    std::mt19937 rng(2);
    const Vec A = oracle::random_vec(rng, pb.n_nodes(), 0.0, 1.0);
    EXPECT_EQ(residual_u(pb, z, z, A).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ResidualU, UndamagedTensionIsScaledElasticStiffness) {
    Problem pb = patch_problem(3, 2);
    Eigen::Matrix2d M;
    M << 2e-3, 3e-4, -1e-4, 3e-3;  // symmetric part positive definite: no compressive principal strain
    const Vec z = affine(pb.mesh, M);
    Vec U = z, UD = z;
    for (int i = 0; i < pb.n_u(); ++i) (pb.dofs.fixed[i] ? U(i) : UD(i)) = 0.0;
    const Vec A = Vec::Zero(pb.n_nodes());
    const Eigen::MatrixXd K = oracle::elastic_stiffness(pb.mesh, pb.mat.lambda, pb.mat.mu, 1.0 + pb.mat.k);
    const Vec expect = pb.dofs.restrict(K * z);
    EXPECT_LT(oracle::rel_err(residual_u(pb, U, UD, A), expect), 1e-12);
    const Eigen::MatrixXd T = dense(tangent_u(pb, U, UD, A));
    Eigen::MatrixXd Kff(pb.dofs.n_free(), pb.dofs.n_free());
    for (int i = 0; i < pb.dofs.n_free(); ++i) {
        for (int j = 0; j < pb.dofs.n_free(); ++j) Kff(i, j) = K(pb.dofs.free_dofs[i], pb.dofs.free_dofs[j]);
    }
    EXPECT_LT((T - Kff).cwiseAbs().maxCoeff(), 1e-10 * Kff.cwiseAbs().maxCoeff());
}

namespace {

struct State {
    Vec U, A, An;
};

State random_state(const Problem& pb, std::mt19937& rng, bool with_history) {
    State s;
    s.U = pb.dofs.expand(oracle::random_vec(rng, pb.dofs.n_free(), -2e-3, 2e-3));
    s.A = oracle::random_vec(rng, pb.n_nodes(), 0.0, 1.0);
    s.An = with_history ? Vec(s.A + oracle::random_vec(rng, pb.n_nodes(), -0.3, 0.3)) : Vec(Vec::Zero(pb.n_nodes()));
    return s;
}

// Smallest |N(A - A_n)| over all quadrature points.
double kink_margin(const Problem& pb, const Vec& A, const Vec& An) {
    double m = 1e300;
    for (std::size_t e = 0; e < pb.mesh.elements.size(); ++e) {
        for (const auto& q : oracle::interior_points(pb.dim())) {
            double x = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i) {
                const int n = pb.mesh.elements[e].v[i];
                x += q[i] * (A(n) - An(n));
            }
            m = std::min(m, std::abs(x));
        }
    }
    return m;
}

std::vector<Problem> fd_problems() {
    TwoElementCase c;
    std::vector<Problem> out;
    out.push_back(c.pb);
    out.push_back(patch_problem(2, 2));
    return out;
}

Vec lifting_of(const Problem& pb) {
    Vec UD = Vec::Zero(pb.n_u());
    for (int i = 0; i < pb.n_u(); ++i) {
        if (pb.dofs.fixed[i] && i % 2 == 1 && pb.mesh.nodes[i / 2].x[1] > 0.5) UD(i) = 2e-3;
    }
    return UD;
}

}  // namespace

TEST(ResidualU, IsGradientOfDenseEnergy) {
    std::mt19937 rng(4);
    for (Problem& pb : fd_problems()) {
        const Vec UD = lifting_of(pb);
        for (int t = 0; t < 5; ++t) {
            const State s = random_state(pb, rng, t % 2 == 1);
            // Only the elastic term depends on U; the penalty constant would swamp the differences.
            auto f = [&](const Vec& uf) { return oracle::erg(pb.mesh, pb.mat, pb.dofs.expand(uf) + UD, s.A); };
            const Vec fd = oracle::fd_gradient(f, pb.dofs.restrict(s.U), 1e-8);
            EXPECT_LT(oracle::rel_err(residual_u(pb, s.U, UD, s.A), fd), 1e-6);
        }
    }
}

TEST(ResidualBeta, IsGradientOfDenseFunctionalAwayFromKink) {
    std::mt19937 rng(6);
    for (Problem& pb : fd_problems()) {
        const Vec UD = lifting_of(pb);
        for (int t = 0; t < 5; ++t) {
            State s = random_state(pb, rng, t % 2 == 1);
            if (t % 2 == 1) ASSERT_GT(kink_margin(pb, s.A, s.An), 1e-6);
            auto f = [&](const Vec& a) { return oracle::functional(pb.mesh, pb.mat, s.U + UD, a, s.An); };
            const Vec fd = oracle::fd_gradient(f, s.A, 1e-7);
            EXPECT_LT(oracle::rel_err(residual_beta(pb, s.U, UD, s.A, s.An), fd), 1e-6);
        }
    }
}

TEST(ResidualBeta, HomogeneousElementStationarityDefect) {
    Mesh m;
    m.dim = 2;
    m.nodes = {{0, {0, 0, 0}}, {1, {0.7, 0.1, 0}}, {2, {0.2, 0.9, 0}}};
    m.elements = {{0, {0, 1, 2, -1}}};
    Problem pb(m, oracle::sent_material(), std::vector<char>(6, 0));
    Eigen::Matrix2d M;
    M << 1e-3, 0.0, 0.0, 4e-4;
    const Vec z = affine(m, M);
    const double beta = 0.37;
    const Vec A = Vec::Constant(3, beta);
    Eigen::Matrix3d e3 = Eigen::Matrix3d::Zero();
    e3.topLeftCorner<2, 2>() = M;
    const double psi_p = oracle::psi(e3, 2, pb.mat.lambda, pb.mat.mu).first;
    const double defect = -2.0 * (1.0 - beta) * psi_p + pb.mat.gc * beta / pb.mat.ell;
    const Vec r = residual_beta(pb, Vec::Zero(6), z, A, Vec::Zero(3));
    const double vol = oracle::simplex(m, 0).measure;
    EXPECT_NEAR(r.sum(), vol * defect, 1e-12 * std::abs(vol * defect));
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(r(i), vol * defect / 3.0, 1e-12 * std::abs(vol * defect));
    EXPECT_EQ(residual_beta(pb, Vec::Zero(6), Vec::Zero(6), Vec::Zero(3), Vec::Zero(3)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Tangents, SymmetricAndMatchResidualDifferences) {
    std::mt19937 rng(8);
    for (Problem& pb : fd_problems()) {
        const Vec UD = lifting_of(pb);
        for (int t = 0; t < 5; ++t) {
            const State s = random_state(pb, rng, t % 2 == 1);
            const Eigen::MatrixXd Ku = dense(tangent_u(pb, s.U, UD, s.A));
            EXPECT_LT((Ku - Ku.transpose()).cwiseAbs().maxCoeff(), 1e-10 * Ku.cwiseAbs().maxCoeff());
            const Vec du = oracle::random_vec(rng, pb.dofs.n_free(), -1.0, 1.0);
            const double hu = 1e-9;
            const Vec fdu = (residual_u(pb, s.U + pb.dofs.expand(hu * du), UD, s.A) -
                             residual_u(pb, s.U - pb.dofs.expand(hu * du), UD, s.A)) /
                            (2 * hu);
            EXPECT_LT(oracle::rel_err(Ku * du, fdu), 1e-4);

            const Eigen::MatrixXd Kb = dense(tangent_beta(pb, s.U, UD, s.A, s.An));
            EXPECT_LT((Kb - Kb.transpose()).cwiseAbs().maxCoeff(), 1e-10 * Kb.cwiseAbs().maxCoeff());
            const Vec da = oracle::random_vec(rng, pb.n_nodes(), -1.0, 1.0);
            const double ha = 1e-8;
            ASSERT_GT(kink_margin(pb, s.A, s.An), 10 * ha);
            const Vec fdb =
                (residual_beta(pb, s.U, UD, s.A + ha * da, s.An) - residual_beta(pb, s.U, UD, s.A - ha * da, s.An)) / (2 * ha);
            EXPECT_LT(oracle::rel_err(Kb * da, fdb), 1e-4);
        }
    }
}

TEST(Tangents, RigidTranslationIsInKernel) {
    const Mesh m = generate_structured(2, {1, 1}, {2, 3});
    Problem pb(m, oracle::sent_material(), std::vector<char>(m.nodes.size() * 2, 0));
    std::mt19937 rng(10);
    const Vec U = oracle::random_vec(rng, pb.n_u(), -1e-3, 1e-3);
    const Vec A = oracle::random_vec(rng, pb.n_nodes(), 0.0, 1.0);
    const Eigen::MatrixXd K = dense(tangent_u(pb, U, Vec::Zero(pb.n_u()), A));
    Vec t(pb.n_u());
    for (int i = 0; i < pb.n_u(); ++i) t(i) = i % 2 == 0 ? 1.0 : -0.5;
    EXPECT_LT((K * t).cwiseAbs().maxCoeff(), 1e-10 * K.cwiseAbs().maxCoeff());
}

TEST(Tangents, DamagePartsMatchMassAndLaplacian) {
    const Mesh m = generate_structured(2, {1, 1}, {2, 2});
    Problem pb(m, oracle::sent_material(), std::vector<char>(m.nodes.size() * 2, 0));
    const int n = pb.n_nodes();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n), L = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t e = 0; e < m.elements.size(); ++e) {
        const auto s = oracle::simplex(m, e);
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                const int i = m.elements[e].v[a], j = m.elements[e].v[b];
                M(i, j) += s.measure * (a == b ? 2.0 : 1.0) / 12.0;
                L(i, j) += s.measure * (s.grad[a][0] * s.grad[b][0] + s.grad[a][1] * s.grad[b][1]);
            }
        }
    }
    const Vec z = Vec::Zero(pb.n_u());
    const Vec A = Vec::Constant(n, 0.4);
    const Eigen::MatrixXd K0 = dense(tangent_beta(pb, z, z, A, A - Vec::Constant(n, 0.1)));
    const Eigen::MatrixXd expect = pb.mat.gc / pb.mat.ell * M + pb.mat.gc * pb.mat.ell * L;
    EXPECT_LT((K0 - expect).cwiseAbs().maxCoeff(), 1e-12 * expect.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd K1 = dense(tangent_beta(pb, z, z, A, A + Vec::Constant(n, 0.1)));
    const Eigen::MatrixXd pen = K1 - K0;
    EXPECT_LT((pen - pb.mat.penalty() * M).cwiseAbs().maxCoeff(), 1e-10 * pb.mat.penalty() * M.maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> llt(K0);
    EXPECT_EQ(llt.info(), Eigen::Success);
}

TEST(Reaction, ZeroStateAndUniaxialPatch) {
    Mesh m = generate_structured(2, {1, 1}, {4, 4});
    m.node_sets["origin"] = select_nodes(m, [](const Point& x) { return std::hypot(x[0], x[1]); });
    auto fixed = fix_sets(m, {{"ymin", 1}, {"ymax", 1}, {"origin", 0}});
    Problem pb(m, oracle::sent_material(), fixed);
    const Vec zero = Vec::Zero(pb.n_u());
    const Vec A = Vec::Zero(pb.n_nodes());
    EXPECT_EQ(reaction_force(pb, zero, zero, A, "ymax", {0, 1, 0}), 0.0);

    const double w = 1e-4;
    Vec UD = Vec::Zero(pb.n_u());
    for (int n : m.node_set("ymax")) UD(n * 2 + 1) = w;
    // Lateral contraction puts one principal strain in compression, so the split makes this nonlinear.
    Vec U = zero;
    for (int it = 0; it < 30; ++it) {
        const Vec r = residual_u(pb, U, UD, A);
        if (r.cwiseAbs().maxCoeff() < 1e-13) break;
        U -= pb.dofs.expand(factor_solve(tangent_u(pb, U, UD, A), r));
    }
    const double lam = pb.mat.lambda, mu = pb.mat.mu;
    const double plane_strain_modulus = 4.0 * mu * (lam + mu) / (lam + 2.0 * mu);
    const double top = reaction_force(pb, U, UD, A, "ymax", {0, 1, 0});
    const double bottom = reaction_force(pb, U, UD, A, "ymin", {0, 1, 0});
    EXPECT_NEAR(top, plane_strain_modulus * w, 0.01 * plane_strain_modulus * w);
    EXPECT_NEAR(top + bottom, 0.0, 1e-8 * std::abs(top));
}

TEST(Linsolve, SmallSystems) {
    SpMat I(3, 3);
    I.setIdentity();
    const Vec b = Vec::LinSpaced(3, 1.0, 3.0);
    EXPECT_LT((factor_solve(I, b) - b).cwiseAbs().maxCoeff(), 1e-15);

    SpMat A(2, 2);
    A.insert(0, 0) = 4;
    A.insert(0, 1) = 1;
    A.insert(1, 0) = 1;
    A.insert(1, 1) = 3;
    const Vec x = factor_solve(A, Eigen::Vector2d(1, 2));
    EXPECT_NEAR(x(0), 1.0 / 11.0, 1e-15);
    EXPECT_NEAR(x(1), 7.0 / 11.0, 1e-15);

    SpMat S(2, 2);
    S.insert(0, 0) = 1;
    S.insert(1, 1) = 0;
    EXPECT_THROW(factor_solve(S, Eigen::Vector2d(1, 1)), LinearSolveError);
}

TEST(Assembly, RepeatedEvaluationIsBitwiseIdentical) {
    Problem pb = patch_problem(4, 4);
    std::mt19937 rng(12);
    const State s = random_state(pb, rng, true);
    const Vec UD = lifting_of(pb);
    const Vec r1 = residual_u(pb, s.U, UD, s.A), r2 = residual_u(pb, s.U, UD, s.A);
    const Vec b1 = residual_beta(pb, s.U, UD, s.A, s.An), b2 = residual_beta(pb, s.U, UD, s.A, s.An);
    EXPECT_TRUE((r1.array() == r2.array()).all());
    EXPECT_TRUE((b1.array() == b2.array()).all());
}
