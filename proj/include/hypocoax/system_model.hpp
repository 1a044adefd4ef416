#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "hypocoax/error.hpp"

namespace hypocoax {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Fused right-hand side on a whole grid: `values` is (points x n), `gradients[j]`
/// holds d/dx_j of every component, `rate` receives dV/dt.
using FieldRhs = std::function<void(const Matrix& values, const std::vector<Matrix>& gradients,
                                    Matrix& rate)>;

/// A quasilinear system  A^0(V) dV/dt + sum_j A^j(V) d_j V = H(V)  together with
/// its Friedrichs symmetrizer and an equilibrium. The first n1 components are
/// the conserved block, the remaining n - n1 the dissipated one.
struct SystemSpec {
  std::string name;
  int d = 1;
  int n = 1;
  int n1 = 0;
  std::function<Matrix(int j, const Vector& V)> coeff;
  std::function<Vector(const Vector& V)> source;
  std::function<Matrix(const Vector& V)> symmetrizer;
  Vector equilibrium;

  // Optional D_V(S H)(V). Central differences are used when empty.
  std::function<Matrix(const Vector& V)> weighted_source_jacobian;
  // Optional fast path for the time integrator.
  FieldRhs field_rhs;

  double neighborhood_radius = 0.1;

  int n2() const { return n - n1; }
  Matrix weighted_coeff(int j, const Vector& V) const { return symmetrizer(V) * coeff(j, V); }
  Vector weighted_source(const Vector& V) const { return symmetrizer(V) * source(V); }
};

/// Throws InvalidInput when the dimensions or evaluators are inconsistent.
void validate(const SystemSpec& system);

/// Frozen-coefficient data at the equilibrium.
struct LinearizedSystem {
  int d = 1;
  int n = 1;
  int n1 = 0;
  std::vector<Matrix> Abar;  // S A^j at the equilibrium, j = 0..d
  Matrix L;                  // -D_V(S H)
  Matrix N;                  // Abar[0]^{-1} L
  Matrix weight_inverse;     // Abar[0]^{-1}
  double kappa0 = 0.0;
  bool kappa0_vacuous = false;

  int n2() const { return n - n1; }

  /// Abar[0]^{-1} sum_j omega_j Abar[j].
  Matrix M(const Eigen::Ref<const Vector>& omega) const;

  /// Lower-right n2 x n2 block of L.
  Matrix dissipated_block() const { return L.bottomRightCorner(n2(), n2()); }

  /// Builds and validates from explicit matrices (d = abar.size() - 1).
  static LinearizedSystem from_matrices(std::vector<Matrix> abar, Matrix L, int n1);
};

struct LinearizeOptions {
  double symmetry_tolerance = 1e-10;
  double equilibrium_tolerance = 1e-12;
};

LinearizedSystem linearize(const SystemSpec& system, const LinearizeOptions& options = {});

/// Jacobian of `f` at `x` by central differences, step eps^{1/3} max(1, |x|_inf).
Matrix central_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x);

template <typename Derived>
double symmetry_defect(const Eigen::MatrixBase<Derived>& A) {
  return (A - A.transpose()).norm();
}

struct Dissipativity {
  double constant = 0.0;
  bool vacuous = false;  // M == 0: the inequality holds for every c
};

/// Largest c with (M eta | eta) >= c |M eta|^2 for every eta.
///
/// On ker(M) both sides vanish, but a cross term aT M b with a in ker(M) makes
/// the left side unbounded below, so coercivity requires ker(M)^T Sym(M) = 0.
/// On the complement the answer is the smallest generalized eigenvalue of
/// (Sym(M), M^T M).
template <typename Derived>
Dissipativity dissipativity_constant(const Eigen::MatrixBase<Derived>& M_in,
                                     double rank_tolerance = 1e-10) {
  using Eigen::Index;
  const Matrix M = M_in.template cast<double>();
  if (M.rows() != M.cols())
    throw Error(ErrorCode::DimensionMismatch, "dissipativity_constant needs a square matrix");
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double smax = sigma.size() ? sigma(0) : 0.0;
  if (smax == 0.0) return {std::numeric_limits<double>::infinity(), true};
  Index rank = 0;
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > rank_tolerance * smax) ++rank;
  const Matrix range_basis = svd.matrixV().leftCols(rank);
  const Matrix kernel_basis = svd.matrixV().rightCols(M.cols() - rank);
  const Matrix sym = 0.5 * (M + M.transpose());
  if (kernel_basis.cols() > 0) {
    const double cross = (kernel_basis.transpose() * sym * range_basis).norm();
    if (cross > 1e3 * rank_tolerance * smax) return {0.0, false};
  }
  const Matrix s = range_basis.transpose() * sym * range_basis;
  const Matrix g = range_basis.transpose() * M.transpose() * M * range_basis;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(s, g);
  const double mu = ges.eigenvalues().minCoeff();
  return {mu > 0.0 ? mu : 0.0, false};
}

struct StructureCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct StructureReport {
  std::vector<StructureCheck> checks;

  bool passed() const;
  const StructureCheck& at(std::string_view name) const;
};

/// Quasi-random points in the ball of the given radius around the equilibrium
/// (Sobol sequence, radial projection of the cube). radius < 0 uses the
/// system's declared neighborhood.
std::vector<Vector> neighborhood_samples(const SystemSpec& system, int count = 100,
                                         double radius = -1.0);

/// Symmetry of every S A^j and positivity of S A^0 on the samples. Checks:
/// "symmetry_defect" (absolute, passes when <= tol max(1, |SA^j|)),
/// "min_weight_eigenvalue".
StructureReport check_symmetrizability(const SystemSpec& system,
                                       const std::vector<Vector>& samples,
                                       double tolerance = 1e-9);

/// Block compatibility with the conserved/dissipated split plus the refined
/// structural conditions at the equilibrium (all on S A^j, by differences).
StructureReport check_block_structure(const SystemSpec& system,
                                      const std::vector<Vector>& samples,
                                      double tolerance = 1e-9);

/// Linear system from a JSON object with keys d, n, n1, A (d+1 matrices),
/// Lmat, equilibrium. Matrices may be nested rows or flat row-major arrays.
SystemSpec linear_system_from_json(const std::string& json_text);
SystemSpec load_system_file(const std::filesystem::path& path);

/// "euler-damped-1d", "euler-damped-2d", "euler-damped-3d".
SystemSpec builtin_system(std::string_view key, double gamma = 2.0, double lambda = 1.0);
std::vector<std::string> builtin_keys();

/// Registry key or path to a JSON file.
SystemSpec resolve_system(const std::string& key_or_path, double gamma = 2.0,
                          double lambda = 1.0);

}  // namespace hypocoax
