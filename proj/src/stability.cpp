#include "hypocoax/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hypocoax/parallel.hpp"

namespace hypocoax {

namespace {

using cd = std::complex<double>;

double min_eigenvalue(const Matrix& m) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

// Nelder-Mead on a low-dimensional unconstrained problem; returns the best value.
template <typename F>
double nelder_mead(F&& f, Vector x0, double step, int max_iter, Vector* argmin) {
  const Eigen::Index dim = x0.size();
  std::vector<Vector> pts(static_cast<std::size_t>(dim + 1), x0);
  std::vector<double> vals(pts.size());
  for (Eigen::Index i = 0; i < dim; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step;
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = f(pts[i]);
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<std::size_t> order(pts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];
    if (std::abs(vals[worst] - vals[best]) <= 1e-15 * (1.0 + std::abs(vals[best])) &&
        (pts[worst] - pts[best]).norm() < 1e-10)
      break;
    Vector centroid = Vector::Zero(dim);
    for (std::size_t i : order)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(dim);
    const Vector reflected = centroid + (centroid - pts[worst]);
    const double fr = f(reflected);
    if (fr < vals[best]) {
      const Vector expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = reflected;
      vals[worst] = fr;
    } else {
      const Vector contracted = centroid + 0.5 * (pts[worst] - centroid);
      const double fc = f(contracted);
      if (fc < vals[worst]) {
        pts[worst] = contracted;
        vals[worst] = fc;
      } else {
        for (std::size_t i = 0; i < pts.size(); ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          vals[i] = f(pts[i]);
        }
      }
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  if (argmin) *argmin = pts[static_cast<std::size_t>(it - vals.begin())];
  return *it;
}

Vector angles_of(int d, const Vector& omega) {
  if (d == 2) return Vector::Constant(1, std::atan2(omega(1), omega(0)));
  Vector a(2);
  a(0) = std::acos(std::clamp(omega(2), -1.0, 1.0));
  a(1) = std::atan2(omega(1), omega(0));
  return a;
}

}  // namespace

EpsilonSchedule EpsilonSchedule::uniform(int n, double value) {
  EpsilonSchedule s;
  s.n = n;
  s.epsilon = value;
  s.exponents.assign(static_cast<std::size_t>(n), 0.0);
  s.values.assign(static_cast<std::size_t>(n), value);
  return s;
}

double schedule_margin(const std::vector<double>& m) {
  const int n = static_cast<int>(m.size());
  double margin = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= n - 2; ++k) margin = std::min(margin, m[k] - 0.5 * (m[k - 1] + m[k + 1]));
  if (n >= 2)
    for (int k = 0; k < n; ++k) margin = std::min(margin, m[n - 1] - 0.5 * (m[k] + m[n - 2]));
  return margin;
}

EpsilonSchedule make_schedule(int n, int d, double kappa0, double epsilon, double delta,
                              std::vector<double> exponents) {
  if (n < 1 || d < 1) throw Error(ErrorCode::InvalidInput, "need n >= 1 and d >= 1");
  if (!(kappa0 > 0.0) || !std::isfinite(kappa0))
    throw Error(ErrorCode::InvalidInput, "kappa0 must be positive and finite");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidInput, "need 0 < eps < 1");
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidMargin, "margin must be positive");
  if (exponents.size() != static_cast<std::size_t>(n))
    throw Error(ErrorCode::DimensionMismatch, "need n exponents");
  if (exponents[0] != 0.0) throw Error(ErrorCode::InvalidInput, "m_0 must be 0");
  const double margin = schedule_margin(exponents);
  if (delta > margin)
    throw Error(ErrorCode::InvalidMargin, "exponents only admit margin " + std::to_string(margin));
  EpsilonSchedule s;
  s.n = n;
  s.d = d;
  s.epsilon = epsilon;
  s.delta = delta;
  s.kappa0 = kappa0;
  s.exponents = std::move(exponents);
  s.values.resize(static_cast<std::size_t>(n));
  s.values[0] = std::pow(2.0 * std::numbers::pi, -d) * kappa0 / 2.0;
  for (int k = 1; k < n; ++k) s.values[k] = std::pow(epsilon, s.exponents[k]);
  return s;
}

EpsilonSchedule make_schedule(int n, int d, double kappa0, double epsilon, double delta) {
  if (delta > 1.5)
    throw Error(ErrorCode::InvalidMargin, "default exponents admit margins up to 3/2");
  std::vector<double> m(static_cast<std::size_t>(std::max(n, 0)));
  for (int k = 0; k < n; ++k) m[k] = static_cast<double>(k * (2 * n - k));
  return make_schedule(n, d, kappa0, epsilon, delta, std::move(m));
}

KalmanResult kalman_rank_test(const LinearizedSystem& lin, const Eigen::Ref<const Vector>& omega) {
  if (omega.size() != lin.d) throw Error(ErrorCode::DimensionMismatch, "direction has wrong size");
  if (std::abs(omega.norm() - 1.0) > 1e-12)
    throw Error(ErrorCode::InvalidInput, "direction must be a unit vector");
  return kalman_rank_test(lin.M(omega), lin.N);
}

std::vector<Vector> sphere_grid(int d, int count) {
  std::vector<Vector> grid;
  if (d == 1) {
    grid.push_back(Vector::Constant(1, 1.0));
    grid.push_back(Vector::Constant(1, -1.0));
    return grid;
  }
  if (count < 8) throw Error(ErrorCode::InvalidInput, "sphere grid needs >= 8 points per angle");
  if (d == 2) {
    for (int i = 0; i < count; ++i)
      grid.push_back(direction_from_angles(2, Vector::Constant(1, 2.0 * std::numbers::pi * i / count)));
    return grid;
  }
  if (d == 3) {
    const int polar = std::max(8, count / 2);
    for (int i = 0; i < polar; ++i) {
      for (int j = 0; j < count; ++j) {
        Vector a(2);
        a << std::numbers::pi * (i + 0.5) / polar, 2.0 * std::numbers::pi * j / count;
        grid.push_back(direction_from_angles(3, a));
      }
    }
    return grid;
  }
  throw Error(ErrorCode::InvalidInput, "sphere grids are available for d <= 3");
}

Vector direction_from_angles(int d, const Vector& a) {
  Vector w(d);
  if (d == 2) {
    w << std::cos(a(0)), std::sin(a(0));
  } else {
    w << std::sin(a(0)) * std::cos(a(1)), std::sin(a(0)) * std::sin(a(1)), std::cos(a(0));
  }
  return w;
}

SkReport sk_condition(const LinearizedSystem& lin, const EpsilonSchedule& schedule,
                      int sphere_grid_size) {
  if (schedule.n != lin.n) throw Error(ErrorCode::DimensionMismatch, "schedule size differs from n");
  const auto grid = sphere_grid(lin.d, sphere_grid_size);
  std::vector<double> gram(grid.size());
  std::vector<KalmanResult> kalman(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const Matrix m = lin.M(grid[i]);
    gram[i] = min_eigenvalue(gram_matrix(m, lin.N, schedule.values));
    kalman[i] = kalman_rank_test(m, lin.N);
  });
  SkReport r;
  std::size_t worst = 0;
  r.kalman_min_sigma = std::numeric_limits<double>::infinity();
  r.kalman_min_rank = lin.n;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (gram[i] < gram[worst]) worst = i;
    r.kalman_min_sigma = std::min(r.kalman_min_sigma, kalman[i].min_sigma);
    r.kalman_min_rank = std::min(r.kalman_min_rank, kalman[i].rank);
  }
  r.grid_min_gram_eig = gram[worst];
  r.min_gram_eig = gram[worst];
  r.worst_omega = grid[worst];
  if (lin.d >= 2) {
    auto f = [&](const Vector& a) {
      return min_eigenvalue(gram_matrix(lin.M(direction_from_angles(lin.d, a)), lin.N, schedule.values));
    };
    Vector best;
    const double step = 2.0 * std::numbers::pi / sphere_grid_size;
    const double refined = nelder_mead(f, angles_of(lin.d, grid[worst]), step, 200, &best);
    if (refined < r.min_gram_eig) {
      r.min_gram_eig = refined;
      r.worst_omega = direction_from_angles(lin.d, best);
    }
  }
  r.holds = r.min_gram_eig > 1e-10;
  return r;
}

std::vector<double> default_rho_grid(double rho_min, double rho_max, int count) {
  if (!(rho_min > 0.0 && rho_max > rho_min) || count < 2)
    throw Error(ErrorCode::InvalidInput, "need 0 < rho_min < rho_max and count >= 2");
  std::vector<double> grid;
  const double a = std::log(rho_min), b = std::log(rho_max);
  for (int i = 0; i < count; ++i) grid.push_back(std::exp(a + (b - a) * i / (count - 1)));
  for (double e : {0.75, 4.0 / 3.0, 1.5, 8.0 / 3.0})
    if (e >= rho_min && e <= rho_max) grid.push_back(e);
  std::sort(grid.begin(), grid.end());
  return grid;
}

Certificate certify_hypocoercivity(const LinearizedSystem& lin, const EpsilonSchedule& schedule,
                                   const std::vector<double>& rho_grid,
                                   const std::vector<Vector>& omega_grid,
                                   const CertifyOptions& options) {
  if (schedule.n != lin.n) throw Error(ErrorCode::DimensionMismatch, "schedule size differs from n");
  if (rho_grid.empty() || omega_grid.empty())
    throw Error(ErrorCode::InvalidInput, "empty certification grid");
  const int n = lin.n;
  const Eigen::SelfAdjointEigenSolver<Matrix> a0eig(lin.Abar[0], Eigen::EigenvaluesOnly);
  const double a0_min = a0eig.eigenvalues()(0);
  const double a0_max = a0eig.eigenvalues()(n - 1);
  const CMatrix a0 = lin.Abar[0].cast<cd>();
  const CMatrix ncx = lin.N.cast<cd>();

  struct Local {
    double c = std::numeric_limits<double>::infinity();
    double rho = 0.0;
    double pmin = std::numeric_limits<double>::infinity();
    double pmax = 0.0;
    double bound = 0.0;
  };
  std::vector<Local> local(omega_grid.size());
  parallel_for(omega_grid.size(), [&](std::size_t i) {
    const Matrix m = lin.M(omega_grid[i]);
    const CMatrix kc = corrector_matrix(m, lin.N, schedule.values);
    const CMatrix mc = m.cast<cd>();
    Local& out = local[i];
    out.bound = corrector_norm_sum(m, lin.N, schedule.values);
    Eigen::SelfAdjointEigenSolver<CMatrix> es;
    for (double rho : rho_grid) {
      const CMatrix gen = cd(0.0, rho) * mc + ncx;
      const double base = std::min(rho, 1.0 / rho);
      const double scale = std::min(1.0, rho * rho) * a0_max;
      for (double s : options.weight_scales) {
        const CMatrix p = a0 + (base * s) * kc;
        es.compute(p, Eigen::EigenvaluesOnly);
        out.pmin = std::min(out.pmin, es.eigenvalues()(0));
        out.pmax = std::max(out.pmax, es.eigenvalues()(n - 1));
        CMatrix dis = gen.adjoint() * p + p * gen;
        dis = 0.5 * (dis + dis.adjoint()).eval();
        es.compute(dis, Eigen::EigenvaluesOnly);
        const double c = es.eigenvalues()(0) / scale;
        if (c < out.c) {
          out.c = c;
          out.rho = rho;
        }
      }
    }
  });
  Certificate cert;
  cert.c_min = std::numeric_limits<double>::infinity();
  cert.min_weight_eig = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < local.size(); ++i) {
    if (local[i].c < cert.c_min) {
      cert.c_min = local[i].c;
      cert.worst_rho = local[i].rho;
      cert.worst_omega = omega_grid[i];
    }
    cert.min_weight_eig = std::min(cert.min_weight_eig, local[i].pmin);
    cert.max_weight_eig = std::max(cert.max_weight_eig, local[i].pmax);
    cert.corrector_bound = std::max(cert.corrector_bound, local[i].bound);
  }
  cert.weight_ratio = cert.min_weight_eig / a0_min;
  if (cert.min_weight_eig <= 0.0 && options.throw_on_nonpositive_weight)
    throw Error(ErrorCode::WeightNotPositive,
                "lambda_min(P) = " + std::to_string(cert.min_weight_eig) + "; decrease eps");
  return cert;
}

AutotuneResult autotune_epsilon(const LinearizedSystem& lin, double kappa0,
                                const std::vector<double>& rho_grid,
                                const std::vector<Vector>& omega_grid,
                                const CertifyOptions& options) {
  constexpr int max_iterations = 40;
  CertifyOptions opts = options;
  opts.throw_on_nonpositive_weight = false;
  const double bound_limit = 0.5 * std::pow(2.0 * std::numbers::pi, -lin.d);

  AutotuneResult result;
  bool found = false;
  auto attempt = [&](double eps) {
    const auto schedule = make_schedule(lin.n, lin.d, kappa0, eps);
    const auto cert = certify_hypocoercivity(lin, schedule, rho_grid, omega_grid, opts);
    AutotuneStep step{eps, cert.c_min, cert.weight_ratio, cert.corrector_bound, false};
    step.certified = cert.certified() && cert.weight_ratio >= 0.5 && cert.corrector_bound <= bound_limit;
    result.trace.push_back(step);
    if (step.certified && (!found || eps > result.schedule.epsilon)) {
      result.schedule = schedule;
      result.certificate = cert;
      found = true;
    }
    return step.certified;
  };

  // Halve from 1/2 until something certifies, then bisect towards the
  // largest certified value.
  double lo = 0.0, hi = 0.0;
  double eps = 0.5;
  int used = 0;
  while (used < max_iterations) {
    ++used;
    if (attempt(eps)) {
      lo = eps;
      break;
    }
    hi = eps;
    eps *= 0.5;
  }
  if (!found) {
    const auto& last = result.trace.back();
    std::ostringstream msg;
    msg << "no eps down to " << last.epsilon << " certifies (last c_min = " << last.c_min
        << ", weight ratio = " << last.weight_ratio << ")";
    throw Error(ErrorCode::CannotCertify, msg.str());
  }
  while (hi > 0.0 && used < max_iterations && hi / lo > 1.05) {
    ++used;
    const double mid = 0.5 * (lo + hi);
    if (attempt(mid))
      lo = mid;
    else
      hi = mid;
  }
  return result;
}

}  // namespace hypocoax
