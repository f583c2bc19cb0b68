#pragma once

#include <array>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace pff {

enum class Dissipation { AT2, AT1 };

std::string to_string(Dissipation d);
Dissipation parse_dissipation(const std::string& s);

/// 1 kN/mm² expressed in N/mm².
inline constexpr double kKiloNewton = 1000.0;

/// Kernels are unit-agnostic; after config load lambda/mu are in N/mm² and
/// modulus_unit = 1000 so that the penalty 1/eps_pen is read in kN/mm².
struct MaterialParams {
    double lambda = 0.0;
    double mu = 0.0;
    double gc = 0.0;
    double ell = 0.0;
    double k = 1e-4;
    Dissipation dissipation = Dissipation::AT2;
    double kappa = 0.0;
    double eps_pen = 1e-6;
    double modulus_unit = 1.0;

    double penalty() const { return modulus_unit / eps_pen; }
    void validate() const;
};

MaterialParams from_young(double E, double nu);  // only lambda and mu filled

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Symmetric tensor in Voigt order 11, 22, 33, 23, 13, 12 (tensor components,
/// no factor 2 on shears). dim = 2 means plane strain: 33, 23, 13 are zero.
struct SymTensor {
    int dim = 3;
    Vec6 v = Vec6::Zero();

    static SymTensor zero(int dim);
    static SymTensor from_matrix(const Eigen::Matrix3d& m, int dim = 3);
    Eigen::Matrix3d matrix() const;
    double norm() const;
};

struct SplitState {
    std::array<double, 3> eigvals{};
    Eigen::Matrix3d eigvecs = Eigen::Matrix3d::Identity();  // columns
    SymTensor eps_plus;
    SymTensor eps_minus;
};

SplitState spectral_split(const SymTensor& eps);

/// psi+- = lambda/2 <tr eps>+-^2 + mu eps+- : eps+-, the trace bracket taken on the full strain.
std::pair<double, double> psi_split(const SymTensor& eps, const MaterialParams& p);
std::pair<SymTensor, SymTensor> sigma_split(const SymTensor& eps, const MaterialParams& p);

struct Degradation {
    double R;
    double dR;
};
Degradation degradation(double beta, const MaterialParams& p);

SymTensor stress(const SymTensor& eps, double beta, const MaterialParams& p);

/// d(stress)/d(strain) at fixed beta. Acts on engineering strain
/// (shears doubled). 6x6 in 3-D, 3x3 block (11, 22, 12) in 2-D.
Eigen::MatrixXd tangent(const SymTensor& eps, double beta, const MaterialParams& p);

/// Everything the assembly needs from one strain evaluation.
struct SplitEval {
    double psi_plus = 0.0;
    double psi_minus = 0.0;
    Vec6 sig_plus = Vec6::Zero();
    Vec6 sig_minus = Vec6::Zero();
    Mat6 C_plus = Mat6::Zero();
    Mat6 C_minus = Mat6::Zero();
};

SplitEval evaluate_split(const SymTensor& eps, const MaterialParams& p, bool with_tangent);

/// Engineering-strain Voigt vector -> tensor.
SymTensor from_engineering(const Vec6& gamma, int dim);

}  // namespace pff
