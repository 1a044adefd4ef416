#pragma once

// Independent reference computations shared by the tests. Nothing here calls
// into the library's numerical kernels.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "hypocoax/lp.hpp"
#include "hypocoax/system_model.hpp"

namespace testing_support {

using hypocoax::CMatrix;
using hypocoax::Matrix;
using hypocoax::Vector;

// Cutoff written out from its definition.
inline double ref_chi(double t) {
  auto f = [](double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; };
  if (t <= 0.75) return 1.0;
  if (t >= 4.0 / 3.0) return 0.0;
  const double a = f(4.0 / 3.0 - t), b = f(t - 0.75);
  return a / (a + b);
}
inline double ref_phi(double t) { return ref_chi(0.5 * t) - ref_chi(t); }

// exp(A) by Taylor series in long double with scaling and squaring.
inline CMatrix ref_expm(const CMatrix& a) {
  using LC = std::complex<long double>;
  using LM = Eigen::Matrix<LC, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = a.rows();
  int squarings = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.25) {
    norm *= 0.5;
    ++squarings;
  }
  LM x(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      x(i, j) = LC(a(i, j).real(), a(i, j).imag()) / static_cast<long double>(std::ldexp(1.0, squarings));
  LM term = LM::Identity(n, n), sum = LM::Identity(n, n);
  for (int k = 1; k < 40; ++k) {
    term = (term * x) / static_cast<long double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  CMatrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(i, j) = {static_cast<double>(sum(i, j).real()), static_cast<double>(sum(i, j).imag())};
  return out;
}

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Matrix random_symmetric(std::mt19937_64& rng, int n) {
  const Matrix m = random_matrix(rng, n, n);
  return 0.5 * (m + m.transpose());
}

// Storage row of wave vector k (row-major over axes, negative k wrapped).
inline Eigen::Index mode_index(int N, const std::vector<int>& k) {
  Eigen::Index m = 0;
  for (int kj : k) m = m * N + ((kj % N) + N) % N;
  return m;
}

// Real field a cos(xi.x) + b sin(xi.x) in component c, i.e. z_k = (a - ib)/2.
inline hypocoax::SpectralField single_mode(int d, int comps, int N, double L, const std::vector<int>& k,
                                           int c, double a, double b = 0.0) {
  hypocoax::SpectralField f(d, comps, N, L);
  std::vector<int> neg(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) neg[j] = -k[j];
  f.coeffs()(mode_index(N, k), c) = {0.5 * a, -0.5 * b};
  f.coeffs()(mode_index(N, neg), c) = {0.5 * a, 0.5 * b};
  return f;
}

// Random real field whose coefficients live in the dyadic blocks [qa, qb].
inline hypocoax::SpectralField band_field(std::mt19937_64& rng, int d, int comps, int N, double L,
                                          int qa, int qb) {
  hypocoax::SpectralField f(d, comps, N, L);
  std::normal_distribution<double> g;
  const auto& grid = f.frequencies();
  for (Eigen::Index m = 0; m < f.modes(); ++m) {
    const double xi = grid.magnitude(m);
    const bool inside = xi >= 0.75 * std::ldexp(1.0, qa) && xi <= 8.0 / 3.0 * std::ldexp(1.0, qb);
    for (int c = 0; c < comps; ++c) {
      const double re = g(rng), im = g(rng);
      if (inside && grid.dealiased[static_cast<std::size_t>(m)]) f.coeffs()(m, c) = {re, im};
    }
  }
  f.enforce_hermitian();
  return f;
}

// Linear, symmetric hyperbolic system with a partially dissipative source.
inline hypocoax::LinearizedSystem random_linear_system(std::mt19937_64& rng, int d, int n, int n1) {
  std::vector<Matrix> abar;
  Matrix a0 = random_matrix(rng, n, n);
  a0 = a0 * a0.transpose() + n * Matrix::Identity(n, n);
  a0.topRightCorner(n1, n - n1).setZero();
  a0.bottomLeftCorner(n - n1, n1).setZero();
  abar.push_back(a0);
  for (int j = 1; j <= d; ++j) abar.push_back(random_symmetric(rng, n));
  Matrix l = Matrix::Zero(n, n);
  Matrix b = random_matrix(rng, n - n1, n - n1);
  l.bottomRightCorner(n - n1, n - n1) = b * b.transpose() + Matrix::Identity(n - n1, n - n1);
  return hypocoax::LinearizedSystem::from_matrices(abar, l, n1);
}

inline hypocoax::SystemSpec linear_spec(const hypocoax::LinearizedSystem& lin) {
  hypocoax::SystemSpec s;
  s.name = "linear";
  s.d = lin.d;
  s.n = lin.n;
  s.n1 = lin.n1;
  s.equilibrium = Vector::Zero(lin.n);
  const auto abar = lin.Abar;
  const Matrix l = lin.L;
  const int n = lin.n;
  s.coeff = [abar](int j, const Vector&) { return abar.at(static_cast<std::size_t>(j)); };
  s.source = [l](const Vector& v) -> Vector { return -l * v; };
  s.symmetrizer = [n](const Vector&) -> Matrix { return Matrix::Identity(n, n); };
  s.neighborhood_radius = 1e9;
  return s;
}

}  // namespace testing_support
