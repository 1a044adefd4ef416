#pragma once

#include <Eigen/Dense>
#include <vector>

#include "hypocoax/system_model.hpp"

namespace hypocoax {

/// Weights eps_0..eps_{n-1} of the corrector and of the Gram form.
struct EpsilonSchedule {
  int n = 0;
  int d = 1;
  double epsilon = 0.0;
  double delta = 1.0;
  double kappa0 = 0.0;
  std::vector<double> exponents;  // m_0..m_{n-1}, m_0 = 0
  std::vector<double> values;     // eps_0..eps_{n-1}

  double operator[](int k) const { return values.at(static_cast<std::size_t>(k)); }

  /// All weights equal to `value`; used where only the sign of the Gram form matters.
  static EpsilonSchedule uniform(int n, double value = 1.0);
};

/// m_k = k(2n - k), eps_k = eps^{m_k}, eps_0 = (2 pi)^{-d} kappa0 / 2.
EpsilonSchedule make_schedule(int n, int d, double kappa0, double epsilon, double delta = 1.0);

/// Same with caller-supplied exponents; the margin conditions are verified.
EpsilonSchedule make_schedule(int n, int d, double kappa0, double epsilon, double delta,
                              std::vector<double> exponents);

/// Largest margin the exponents satisfy (both midpoint and terminal conditions).
double schedule_margin(const std::vector<double>& exponents);

/// [N; N M; ...; N M^{n-1}], an n^2 x n matrix.
template <typename DM, typename DN>
Matrix kalman_stack(const Eigen::MatrixBase<DM>& M, const Eigen::MatrixBase<DN>& N) {
  const Eigen::Index n = M.rows();
  Matrix stack(n * n, n);
  Matrix power = N;
  for (Eigen::Index k = 0; k < n; ++k) {
    stack.middleRows(k * n, n) = power;
    power = power * M;
  }
  return stack;
}

struct KalmanResult {
  int rank = 0;
  double min_sigma = 0.0;  // n-th singular value of the stack
};

template <typename DM, typename DN>
KalmanResult kalman_rank_test(const Eigen::MatrixBase<DM>& M, const Eigen::MatrixBase<DN>& N,
                              double rank_tolerance = 1e-10) {
  if (M.rows() != M.cols() || N.rows() != N.cols() || M.rows() != N.rows())
    throw Error(ErrorCode::DimensionMismatch, "kalman_rank_test needs square n x n matrices");
  const Eigen::JacobiSVD<Matrix> svd(kalman_stack(M, N));
  const auto& s = svd.singularValues();
  KalmanResult r;
  const double smax = s.size() ? s(0) : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (smax > 0.0 && s(i) > rank_tolerance * smax) ++r.rank;
  r.min_sigma = s(s.size() - 1);
  return r;
}

KalmanResult kalman_rank_test(const LinearizedSystem& lin, const Eigen::Ref<const Vector>& omega);

/// K = sum_k eps_k (M^T)^k N^T N M^k.
template <typename DM, typename DN>
Matrix gram_matrix(const Eigen::MatrixBase<DM>& M, const Eigen::MatrixBase<DN>& N,
                   const std::vector<double>& weights) {
  const Eigen::Index n = M.rows();
  Matrix k = Matrix::Zero(n, n);
  Matrix nm = N;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    k.noalias() += weights[j] * nm.transpose() * nm;
    nm = nm * M;
  }
  return 0.5 * (k + k.transpose());
}

/// Hermitian form of the corrector: I(z) = z^* K z with
/// K = sum_{k>=1} eps_k (B_k - B_k^T) / (2i),  B_k = (M^T)^k N^T N M^{k-1}.
template <typename DM, typename DN>
CMatrix corrector_matrix(const Eigen::MatrixBase<DM>& M, const Eigen::MatrixBase<DN>& N,
                         const std::vector<double>& weights) {
  const Eigen::Index n = M.rows();
  Matrix skew = Matrix::Zero(n, n);
  Matrix prev = N;       // N M^{k-1}
  Matrix cur = N * M;    // N M^k
  for (std::size_t k = 1; k < weights.size(); ++k) {
    const Matrix b = cur.transpose() * prev;
    skew += weights[k] * (b - b.transpose());
    prev = cur;
    cur = cur * M;
  }
  return CMatrix(skew.cast<std::complex<double>>() * std::complex<double>(0.0, -0.5));
}

/// sum_{k>=1} eps_k |(M^T)^k N^T N M^{k-1}| (spectral norm).
template <typename DM, typename DN>
double corrector_norm_sum(const Eigen::MatrixBase<DM>& M, const Eigen::MatrixBase<DN>& N,
                          const std::vector<double>& weights) {
  double total = 0.0;
  Matrix prev = N;
  Matrix cur = N * M;
  for (std::size_t k = 1; k < weights.size(); ++k) {
    const Matrix b = cur.transpose() * prev;
    total += weights[k] * Eigen::JacobiSVD<Matrix>(b).singularValues()(0);
    prev = cur;
    cur = cur * M;
  }
  return total;
}

/// Unit directions: {+1, -1} for d = 1, `count` equispaced angles for d = 2,
/// a (count/2) x count latitude/longitude product for d = 3.
std::vector<Vector> sphere_grid(int d, int count);

/// Unit vector from angles: theta (d = 2) or (theta, phi) (d = 3).
Vector direction_from_angles(int d, const Vector& angles);

struct SkReport {
  bool holds = false;
  double min_gram_eig = 0.0;  // refined estimate of N_Vbar
  double grid_min_gram_eig = 0.0;
  Vector worst_omega;
  double kalman_min_sigma = 0.0;
  int kalman_min_rank = 0;
};

SkReport sk_condition(const LinearizedSystem& lin, const EpsilonSchedule& schedule,
                      int sphere_grid_size = 64);

/// 64 log-spaced points in [rho_min, rho_max] plus the block-support endpoints.
std::vector<double> default_rho_grid(double rho_min = 1e-2, double rho_max = 1e2, int count = 64);

struct CertifyOptions {
  // Multiples of min(rho, 1/rho) used for the corrector weight. The block
  // functionals use a dyadic weight that differs from min(rho, 1/rho) by a
  // factor in [3/8, 8/3] on each block's support; the smallest eigenvalue is
  // concave in the weight, so the interval endpoints cover it.
  std::vector<double> weight_scales{3.0 / 8.0, 1.0, 8.0 / 3.0};
  bool throw_on_nonpositive_weight = true;
};

struct Certificate {
  double c_min = 0.0;
  double worst_rho = 0.0;
  Vector worst_omega;
  double min_weight_eig = 0.0;  // min over the grid of lambda_min(P)
  double weight_ratio = 0.0;    // min_weight_eig / lambda_min(Abar0)
  double max_weight_eig = 0.0;
  double corrector_bound = 0.0;  // max over omega of corrector_norm_sum
  bool certified(double threshold = 1e-10) const { return c_min > threshold; }
};

Certificate certify_hypocoercivity(const LinearizedSystem& lin, const EpsilonSchedule& schedule,
                                   const std::vector<double>& rho_grid,
                                   const std::vector<Vector>& omega_grid,
                                   const CertifyOptions& options = {});

struct AutotuneStep {
  double epsilon = 0.0;
  double c_min = 0.0;
  double weight_ratio = 0.0;
  double corrector_bound = 0.0;
  bool certified = false;
};

struct AutotuneResult {
  EpsilonSchedule schedule;
  Certificate certificate;
  std::vector<AutotuneStep> trace;
};

/// Largest tested eps in (0, 1/2] whose schedule certifies with
/// lambda_min(P) >= lambda_min(Abar0)/2 and the corrector bound
/// sum eps_k |B_k| <= (2 pi)^{-d} / 2. At most 40 certification calls.
AutotuneResult autotune_epsilon(const LinearizedSystem& lin, double kappa0,
                                const std::vector<double>& rho_grid,
                                const std::vector<Vector>& omega_grid,
                                const CertifyOptions& options = {});

}  // namespace hypocoax
