#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pff/linsolve.hpp"
#include "pff/material.hpp"
#include "pff/mesh.hpp"

namespace pff {

using Vec = Eigen::VectorXd;

/// Barycentric points and weights; weights sum to the reference measure
/// (1/2 for the triangle, 1/6 for the tetrahedron).
struct QuadratureRule {
    std::vector<std::array<double, 4>> points;
    std::vector<double> weights;
    double reference_measure() const;
};

QuadratureRule quadrature(int dim);

/// P1 data of one simplex. Shape gradients are constant, so the strain is too.
struct ElementKernel {
    double detJ = 0.0;
    std::array<std::array<double, 3>, 4> grad{};  // dN_a/dx_i
};

struct Kernels {
    int dim = 2;
    QuadratureRule rule;
    std::vector<ElementKernel> elems;

    int nv() const { return dim + 1; }
    double volume(std::size_t e) const { return elems[e].detJ * rule.reference_measure(); }
};

Kernels build_kernels(const Mesh& mesh);

/// Displacement dof of (node, comp) is node * dim + comp; damage dof is the node.
struct DofMap {
    int dim = 2;
    int nnodes = 0;
    std::vector<char> fixed;    // per displacement dof
    std::vector<int> free_of;   // full -> free index, -1 when fixed
    std::vector<int> free_dofs; // free index -> full

    static DofMap make(int dim, int nnodes, std::vector<char> fixed);
    int n_u() const { return dim * nnodes; }
    int n_free() const { return static_cast<int>(free_dofs.size()); }
    Vec restrict(const Vec& full) const;
    Vec expand(const Vec& free) const;  // zeros on fixed dofs
};

/// Sparse matrix with a precomputed element scatter map so repeated assembly
/// only rewrites values.
struct Pattern {
    SpMat matrix;
    std::vector<std::vector<int>> slots;  // per element, local (i, j) row-major -> value index or -1
};

/// Mesh, kernels, material and constraints of one simulation.
struct Problem {
    Mesh mesh;
    Kernels kernels;
    MaterialParams mat;
    DofMap dofs;
    Pattern pattern_u;
    Pattern pattern_beta;

    Problem() = default;
    Problem(Mesh m, const MaterialParams& p, std::vector<char> fixed);

    int dim() const { return mesh.dim; }
    int n_u() const { return dofs.n_u(); }
    int n_nodes() const { return static_cast<int>(mesh.nodes.size()); }
};

/// Engineering strain of an element under nodal displacement z.
Vec6 element_strain(const Problem& pb, std::size_t e, const Vec& z);

/// Damage values at the quadrature points of element e.
std::vector<double> element_beta(const Problem& pb, std::size_t e, const Vec& A);

/// Internal force over all displacement dofs (constrained ones included).
Vec internal_force(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A);

Vec residual_u(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A);
Vec residual_beta(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const Vec& An);

/// Over free displacement dofs.
const SpMat& tangent_u(Problem& pb, const Vec& U, const Vec& UD, const Vec& A);
/// active_on_zero also switches the penalty on where A == A_n (needed when the
/// linear dissipation leaves the damage Hessian singular).
const SpMat& tangent_beta(Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const Vec& An,
                          bool active_on_zero = false);

/// Directional reaction on a node set. direction has dim entries.
double reaction_force(const Problem& pb, const Vec& U, const Vec& UD, const Vec& A, const std::string& set_tag,
                      const std::array<double, 3>& direction);

}  // namespace pff
