#include "hypocoax/lyapunov.hpp"

#include <algorithm>
#include <cmath>

#include "hypocoax/parallel.hpp"

namespace hypocoax {

namespace {

using cd = std::complex<double>;

double quad(const CVector& z, const Matrix& a) {
  return (z.adjoint() * a.cast<cd>() * z)(0).real();
}

// Direction and effective frequency of a mode; Nyquist planes carry no
// derivative, matching SpectralField::derivative.
Vector effective_xi(const FrequencyGrid& g, Eigen::Index m) {
  Vector xi(g.d);
  for (int j = 0; j < g.d; ++j) xi(j) = g.axis[static_cast<std::size_t>(j)](m);
  return xi;
}

double kappa_for_weights(const LinearizedSystem& lin) {
  return lin.kappa0_vacuous || !std::isfinite(lin.kappa0) ? 1.0 : lin.kappa0;
}

}  // namespace

double BlockSeries::at(int q) const {
  if (q < q_min || q > q_max()) return 0.0;
  return values[static_cast<std::size_t>(q - q_min)];
}

Matrix dissipated_block_inverse(const LinearizedSystem& lin) {
  const Matrix b = lin.dissipated_block();
  Eigen::FullPivLU<Matrix> lu(b);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible())
    throw Error(ErrorCode::SingularBlock, "dissipated block of L is singular");
  const Eigen::JacobiSVD<Matrix> svd(b);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= 1e-12 * s(0))
    throw Error(ErrorCode::SingularBlock, "dissipated block of L is numerically singular");
  return lu.inverse();
}

LyapunovEvaluator::LyapunovEvaluator(const LinearizedSystem& lin, const EpsilonSchedule& schedule,
                                     int d, int resolution, double box_length,
                                     FunctionalWeights weights)
    : lin_(lin), schedule_(schedule), d_(d), N_(resolution), L_(box_length) {
  if (d != lin.d) throw Error(ErrorCode::DimensionMismatch, "box dimension differs from system");
  if (schedule.n != lin.n) throw Error(ErrorCode::DimensionMismatch, "schedule size differs from n");
  range_ = dyadic_range(resolution, box_length);
  const double k0 = kappa_for_weights(lin);
  eps_ = weights.eps >= 0.0 ? weights.eps : 1e-2 * k0;
  eps_prime_ = weights.eps_prime >= 0.0 ? weights.eps_prime : 1e-4 * k0 * k0;
  grid_ = FrequencyGrid::get(d, resolution, box_length);
  const Eigen::Index modes = grid_->magnitude.size();
  corrector_.assign(static_cast<std::size_t>(modes), CMatrix::Zero(lin.n, lin.n));
  tail_.assign(static_cast<std::size_t>(modes), Matrix::Zero(lin.n, lin.n));
  std::vector<double> tail_weights = schedule.values;
  tail_weights[0] = 0.0;
  parallel_for(static_cast<std::size_t>(modes), [&](std::size_t m) {
    if (grid_->magnitude(static_cast<Eigen::Index>(m)) == 0.0) return;
    const Vector xi = effective_xi(*grid_, static_cast<Eigen::Index>(m));
    const double rho = xi.norm();
    const Matrix M = rho > 0.0 ? lin.M(xi / rho) : Matrix::Zero(lin.n, lin.n);
    corrector_[m] = corrector_matrix(M, lin.N, schedule.values);
    tail_[m] = gram_matrix(M, lin.N, tail_weights);
  });
  NtN_ = lin.N.transpose() * lin.N;
  A0_22_ = lin.Abar[0].bottomRightCorner(lin.n2(), lin.n2());
}

double LyapunovEvaluator::corrector(const SpectralField& block) const {
  const auto& c = block.coeffs();
  double total = 0.0;
  for (Eigen::Index m = 0; m < c.rows(); ++m) {
    if (grid_->magnitude(m) == 0.0) continue;
    const CVector z = c.row(m).transpose();
    total += (z.adjoint() * corrector_[static_cast<std::size_t>(m)] * z)(0).real();
  }
  return block.volume() * total;
}

double LyapunovEvaluator::dissipation(const SpectralField& block, int q) const {
  const auto& c = block.coeffs();
  double first = 0.0, second = 0.0;
  for (Eigen::Index m = 0; m < c.rows(); ++m) {
    if (grid_->magnitude(m) == 0.0) continue;
    const CVector z = c.row(m).transpose();
    first += quad(z, NtN_);
    second += quad(z, tail_[static_cast<std::size_t>(m)]);
  }
  const double k0 = lin_.kappa0_vacuous ? 0.0 : lin_.kappa0;
  return block.volume() * (0.5 * k0 * first + std::min(1.0, std::ldexp(1.0, 2 * q)) * second);
}

FunctionalSnapshot LyapunovEvaluator::evaluate(double t, const SpectralField& Z,
                                               const SpectralField& W, const SystemSpec* system,
                                               const Matrix* state) const {
  if (Z.components() != lin_.n || Z.resolution() != N_ || Z.d() != d_)
    throw Error(ErrorCode::DimensionMismatch, "field does not match the evaluator box");
  if (W.components() != lin_.n2())
    throw Error(ErrorCode::DimensionMismatch, "damped mode must have n2 components");
  const int nq = range_.q_max - range_.q_min + 1;
  std::vector<double> zn2(nq, 0.0), za0(nq, 0.0), zi(nq, 0.0), znn(nq, 0.0), ztail(nq, 0.0),
      wa(nq, 0.0), w2(nq, 0.0);
  const double vol = Z.volume();
  const auto& zc = Z.coeffs();
  const auto& wc = W.coeffs();
  const Matrix& a0 = lin_.Abar[0];
  for (Eigen::Index m = 0; m < zc.rows(); ++m) {
    const double xi = grid_->magnitude(m);
    if (xi == 0.0) continue;
    const int lo = std::max(range_.q_min, static_cast<int>(std::floor(std::log2(0.375 * xi))));
    const int hi = std::min(range_.q_max, static_cast<int>(std::ceil(std::log2(4.0 * xi / 3.0))));
    const CVector z = zc.row(m).transpose();
    const CVector w = wc.row(m).transpose();
    const bool zero_z = z.squaredNorm() == 0.0, zero_w = w.squaredNorm() == 0.0;
    if (zero_z && zero_w) continue;
    double e_z = 0, e_a0 = 0, e_i = 0, e_nn = 0, e_tail = 0, e_wa = 0, e_w2 = 0;
    if (!zero_z) {
      e_z = z.squaredNorm();
      e_a0 = quad(z, a0);
      e_i = (z.adjoint() * corrector_[static_cast<std::size_t>(m)] * z)(0).real();
      e_nn = quad(z, NtN_);
      e_tail = quad(z, tail_[static_cast<std::size_t>(m)]);
    }
    if (!zero_w) {
      e_w2 = w.squaredNorm();
      e_wa = quad(w, A0_22_);
    }
    for (int q = lo; q <= hi; ++q) {
      const double p = phi(std::ldexp(xi, -q));
      if (p == 0.0) continue;
      const double w_ = vol * p * p;
      const auto i = static_cast<std::size_t>(q - range_.q_min);
      zn2[i] += w_ * e_z;
      za0[i] += w_ * e_a0;
      zi[i] += w_ * e_i;
      znn[i] += w_ * e_nn;
      ztail[i] += w_ * e_tail;
      wa[i] += w_ * e_wa;
      w2[i] += w_ * e_w2;
    }
  }

  // State-dependent weight for q >= 0, by quadrature on the grid.
  std::vector<double> zweighted = za0;
  if (system && state) {
    if (state->rows() != Z.modes() || state->cols() != lin_.n)
      throw Error(ErrorCode::DimensionMismatch, "state samples do not match the grid");
    std::vector<Matrix> weight(static_cast<std::size_t>(state->rows()));
    for (Eigen::Index x = 0; x < state->rows(); ++x) {
      const Matrix a = system->weighted_coeff(0, state->row(x).transpose());
      weight[static_cast<std::size_t>(x)] = 0.5 * (a + a.transpose());
    }
    const double cell = vol / static_cast<double>(state->rows());
    for (int q = std::max(0, range_.q_min); q <= range_.q_max; ++q) {
      const Matrix zq = dyadic_block(Z, q).to_physical();
      double sum = 0.0;
      for (Eigen::Index x = 0; x < zq.rows(); ++x) {
        const Vector zx = zq.row(x).transpose();
        sum += zx.dot(weight[static_cast<std::size_t>(x)] * zx);
      }
      zweighted[static_cast<std::size_t>(q - range_.q_min)] = cell * sum;
    }
  }

  FunctionalSnapshot s;
  s.t = t;
  for (auto* series : {&s.I, &s.L, &s.H, &s.Znorm2}) {
    series->q_min = range_.q_min;
    series->values.assign(static_cast<std::size_t>(nq), 0.0);
  }
  const double k0 = lin_.kappa0_vacuous ? 0.0 : lin_.kappa0;
  const double half_d = 0.5 * d_;
  for (int q = range_.q_min; q <= range_.q_max; ++q) {
    const auto i = static_cast<std::size_t>(q - range_.q_min);
    const double lq = q < 0 ? za0[i] + std::ldexp(1.0, q) * zi[i]
                            : zweighted[i] + std::ldexp(1.0, -q) * zi[i];
    s.I.values[i] = zi[i];
    s.L.values[i] = lq;
    s.H.values[i] = 0.5 * k0 * znn[i] + std::min(1.0, std::ldexp(1.0, 2 * q)) * ztail[i];
    s.Znorm2.values[i] = zn2[i];
    const double root = std::sqrt(std::max(0.0, lq));
    if (q < 0) {
      s.Lgen += std::pow(2.0, q * (half_d - 1.0)) * root;
      s.Lprime += std::pow(2.0, q * half_d) * root;
      const double wq = std::sqrt(std::max(0.0, wa[i]));
      s.W_lo += std::pow(2.0, q * (half_d - 1.0)) * wq;
      s.W_mid += std::pow(2.0, q * half_d) * wq;
      s.W_hi += std::pow(2.0, q * (half_d + 1.0)) * wq;
    } else {
      s.Lgen += std::pow(2.0, q * (half_d + 1.0)) * root;
      s.Lprime += std::pow(2.0, q * (half_d + 1.0)) * root;
    }
    s.Htilde += std::pow(2.0, q * (half_d + 1.0)) * std::sqrt(zn2[i]);
    if (q <= 0) {
      const double wq = std::sqrt(w2[i]);
      s.Htilde += eps_ * std::pow(2.0, q * half_d) * wq + eps_prime_ * std::pow(2.0, q * (half_d - 1.0)) * wq;
    }
  }
  s.Ltilde = s.Lgen + eps_ * s.W_mid + eps_prime_ * s.W_lo;
  s.Ltildeprime = s.Lprime + eps_ * s.W_hi + eps_prime_ * s.W_mid;
  return s;
}

double corrector_Iq(const SpectralField& block, const LinearizedSystem& lin,
                    const EpsilonSchedule& schedule) {
  const LyapunovEvaluator ev(lin, schedule, block.d(), block.resolution(), block.box_length());
  return ev.corrector(block);
}

double block_functional_Lq(const SpectralField& Z, const LinearizedSystem& lin,
                           const EpsilonSchedule& schedule, int q, const SystemSpec* system,
                           const Matrix* state) {
  const LyapunovEvaluator ev(lin, schedule, Z.d(), Z.resolution(), Z.box_length());
  const SpectralField W(Z.d(), lin.n2(), Z.resolution(), Z.box_length());
  return ev.evaluate(0.0, Z, W, system, state).L.at(q);
}

double dissipation_Hq(const SpectralField& Z, const LinearizedSystem& lin,
                      const EpsilonSchedule& schedule, int q) {
  const LyapunovEvaluator ev(lin, schedule, Z.d(), Z.resolution(), Z.box_length());
  return ev.dissipation(dyadic_block(Z, q), q);
}

SpectralField damped_mode_linear(const SpectralField& Z, const LinearizedSystem& lin) {
  if (Z.components() != lin.n) throw Error(ErrorCode::DimensionMismatch, "field must have n components");
  const Matrix binv = dissipated_block_inverse(lin);
  const int n1 = lin.n1, n2 = lin.n2();
  const Matrix l21 = lin.L.bottomLeftCorner(n2, n1);
  const auto& g = Z.frequencies();
  std::vector<CMatrix> rows;
  for (int j = 1; j <= lin.d; ++j) rows.push_back(lin.Abar[j].bottomRows(n2).cast<cd>());
  SpectralField W(Z.d(), n2, Z.resolution(), Z.box_length());
  const CMatrix binv_c = binv.cast<cd>();
  for (Eigen::Index m = 0; m < Z.modes(); ++m) {
    const CVector z = Z.coeffs().row(m).transpose();
    CVector rhs = l21.cast<cd>() * z.head(n1);
    for (int j = 0; j < lin.d; ++j)
      rhs += cd(0.0, g.axis[static_cast<std::size_t>(j)](m)) * (rows[j] * z);
    W.coeffs().row(m) = (z.tail(n2) + binv_c * rhs).transpose();
  }
  return W;
}

SpectralField damped_mode(const SpectralField& Z, const SystemSpec& system,
                          const LinearizedSystem& lin) {
  if (Z.components() != lin.n) throw Error(ErrorCode::DimensionMismatch, "field must have n components");
  const Matrix binv = dissipated_block_inverse(lin);
  const int n1 = lin.n1, n2 = lin.n2(), d = lin.d;
  SpectralField zd = Z;
  zd.dealias();
  const Matrix z = zd.to_physical();
  std::vector<Matrix> grad;
  for (int j = 0; j < d; ++j) grad.push_back(zd.derivative(j).to_physical());
  const Matrix l21 = lin.L.bottomLeftCorner(n2, n1);
  const Vector& vbar = system.equilibrium;
  Matrix w(z.rows(), n2);
  for (Eigen::Index x = 0; x < z.rows(); ++x) {
    const Vector zx = z.row(x).transpose();
    const Vector v = vbar + zx;
    Vector rhs = l21 * zx.head(n1);
    for (int j = 1; j <= d; ++j)
      rhs += system.weighted_coeff(j, v).bottomRows(n2) * grad[j - 1].row(x).transpose();
    const Vector r = system.weighted_source(v) + lin.L * zx;
    rhs -= r.tail(n2);
    w.row(x) = (zx.tail(n2) + binv * rhs).transpose();
  }
  SpectralField W = SpectralField::from_physical(w, Z.d(), Z.resolution(), Z.box_length());
  W.dealias();
  return W;
}

}  // namespace hypocoax
