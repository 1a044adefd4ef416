#include "hypocoax/simulator.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "hypocoax/lyapunov.hpp"
#include "hypocoax/parallel.hpp"

namespace hypocoax {

namespace {

using cd = std::complex<double>;

CMatrix generator(const LinearizedSystem& lin, const Vector& xi) {
  Matrix s = Matrix::Zero(lin.n, lin.n);
  for (int j = 0; j < lin.d; ++j) s += xi(j) * lin.Abar[j + 1];
  return cd(0.0, 1.0) * (lin.weight_inverse * s).cast<cd>() + lin.N.cast<cd>();
}

Vector mode_xi(const FrequencyGrid& g, Eigen::Index m) {
  Vector xi(g.d);
  for (int j = 0; j < g.d; ++j) xi(j) = g.axis[static_cast<std::size_t>(j)](m);
  return xi;
}

// Sphere rule: directions and weights summing to the surface measure.
void sphere_rule(int d, int points, std::vector<Vector>& dirs, std::vector<double>& weights) {
  dirs.clear();
  weights.clear();
  if (d == 1) {
    dirs = {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
    weights = {1.0, 1.0};
    return;
  }
  if (d == 2) {
    for (int k = 0; k < points; ++k) {
      const double th = 2.0 * std::numbers::pi * (k + 0.5) / points;
      Vector w(2);
      w << std::cos(th), std::sin(th);
      dirs.push_back(w);
      weights.push_back(2.0 * std::numbers::pi / points);
    }
    return;
  }
  // Gauss-Legendre in cos(theta) times a uniform azimuthal rule.
  using GL = boost::math::quadrature::gauss<double, 8>;
  std::vector<std::pair<double, double>> mu;
  for (std::size_t i = 0; i < GL::abscissa().size(); ++i) {
    const double x = GL::abscissa()[i], w = GL::weights()[i];
    mu.emplace_back(x, w);
    if (x != 0.0) mu.emplace_back(-x, w);
  }
  for (const auto& [c, w] : mu) {
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    for (int k = 0; k < points; ++k) {
      const double ph = 2.0 * std::numbers::pi * (k + 0.5) / points;
      Vector dir(3);
      dir << s * std::cos(ph), s * std::sin(ph), c;
      dirs.push_back(dir);
      weights.push_back(w * 2.0 * std::numbers::pi / points);
    }
  }
}

struct Interval {
  double a, b;
  Vector value, error;
};

}  // namespace

CMatrix mode_propagator(const LinearizedSystem& lin, const Vector& xi, double t) {
  if (xi.size() != lin.d) throw Error(ErrorCode::DimensionMismatch, "frequency has wrong size");
  if (t == 0.0) return CMatrix::Identity(lin.n, lin.n);
  const CMatrix g = (-t) * generator(lin, xi);
  return g.exp();
}

ExactLinearFlow::ExactLinearFlow(const LinearizedSystem& lin, int d, int resolution, double box_length)
    : lin_(lin), d_(d), N_(resolution), L_(box_length) {
  if (d != lin.d) throw Error(ErrorCode::DimensionMismatch, "box dimension differs from system");
}

std::vector<CMatrix> ExactLinearFlow::propagators(double dt) const {
  const auto grid = FrequencyGrid::get(d_, N_, L_);
  std::vector<CMatrix> p(static_cast<std::size_t>(grid->magnitude.size()));
  parallel_for(p.size(), [&](std::size_t m) {
    p[m] = mode_propagator(lin_, mode_xi(*grid, static_cast<Eigen::Index>(m)), dt);
  });
  return p;
}

void ExactLinearFlow::evolve(const SpectralField& Z0, const std::vector<double>& times,
                             const std::function<void(double, const SpectralField&)>& visit) const {
  if (Z0.components() != lin_.n || Z0.resolution() != N_ || Z0.d() != d_)
    throw Error(ErrorCode::DimensionMismatch, "field does not match the flow box");
  SpectralField z = Z0;
  double t = 0.0;
  double cached_dt = -1.0;
  std::vector<CMatrix> prop;
  for (double target : times) {
    if (target < t) throw Error(ErrorCode::InvalidInput, "output times must be increasing and >= 0");
    const double dt = target - t;
    if (dt > 0.0) {
      if (std::abs(dt - cached_dt) > 1e-14 * std::max(1.0, dt)) {
        prop = propagators(dt);
        cached_dt = dt;
      }
      auto& c = z.coeffs();
      for (Eigen::Index m = 0; m < c.rows(); ++m)
        c.row(m) = (prop[static_cast<std::size_t>(m)] * c.row(m).transpose()).transpose();
      z.enforce_hermitian();
    }
    t = target;
    visit(t, z);
  }
}

std::vector<SpectralField> ExactLinearFlow::evolve(const SpectralField& Z0,
                                                   const std::vector<double>& times) const {
  std::vector<SpectralField> out;
  evolve(Z0, times, [&](double, const SpectralField& z) { out.push_back(z); });
  return out;
}

SpectralField ExactLinearFlow::at(const SpectralField& Z0, double t) const {
  return evolve(Z0, std::vector<double>{t}).front();
}

std::vector<SpectralField> linear_exact_evolve(const LinearizedSystem& lin, const SpectralField& Z0,
                                               const std::vector<double>& times) {
  return ExactLinearFlow(lin, Z0.d(), Z0.resolution(), Z0.box_length()).evolve(Z0, times);
}

double gaussian_profile(double rho) { return std::exp(-0.5 * rho * rho); }

double high_frequency_profile(double rho) {
  return (1.0 - chi(3.0 * rho / 8.0)) * std::exp(-rho * rho / 32.0);
}

OracleTable radial_oracle_decay(const LinearizedSystem& lin, const std::function<double(double)>& profile,
                                const Vector& v, const std::vector<double>& times,
                                const OracleOptions& options) {
  if (v.size() != lin.n) throw Error(ErrorCode::DimensionMismatch, "profile vector must have length n");
  if (times.empty()) throw Error(ErrorCode::InvalidInput, "no output times");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (times[i] <= times[i - 1]) throw Error(ErrorCode::InvalidInput, "times must increase");
  if (times.front() < 0.0) throw Error(ErrorCode::InvalidInput, "times must be >= 0");
  const int d = lin.d, n = lin.n, n1 = lin.n1, n2 = lin.n2();
  const std::size_t nt = times.size();
  const Matrix binv = dissipated_block_inverse(lin);
  const CMatrix binv_c = binv.cast<cd>();
  const CMatrix l21 = lin.L.bottomLeftCorner(n2, n1).cast<cd>();
  std::vector<CMatrix> rows;
  for (int j = 1; j <= d; ++j) rows.push_back(lin.Abar[j].bottomRows(n2).cast<cd>());

  std::vector<Vector> dirs;
  std::vector<double> dir_w;
  sphere_rule(d, options.angular_points, dirs, dir_w);
  const double norm = std::pow(2.0 * std::numbers::pi, -d);
  const CVector v_c = v.cast<cd>();

  // Integrand: for each time, |Z|^2, |Z2|^2, |W|^2 integrated over the sphere.
  auto integrand = [&](double rho, int q) -> Vector {
    Vector out = Vector::Zero(static_cast<Eigen::Index>(3 * nt));
    const double p = phi(std::ldexp(rho, -q));
    const double g = profile(rho);
    const double radial = norm * p * p * g * g * std::pow(rho, d - 1);
    if (radial == 0.0) return out;
    for (std::size_t a = 0; a < dirs.size(); ++a) {
      const Vector xi = rho * dirs[a];
      const CMatrix gen = generator(lin, xi);
      CMatrix wmap = CMatrix::Zero(n2, n);
      wmap.rightCols(n2).setIdentity();
      CMatrix inner = CMatrix::Zero(n2, n);
      inner.leftCols(n1) = l21;
      for (int j = 0; j < d; ++j) inner += cd(0.0, xi(j)) * rows[j];
      wmap += binv_c * inner;
      CVector z = v_c;
      double t = 0.0, cached = -1.0;
      CMatrix step;
      for (std::size_t i = 0; i < nt; ++i) {
        const double dt = times[i] - t;
        if (dt > 0.0) {
          if (dt != cached) {
            step = CMatrix((-dt) * gen).exp();
            cached = dt;
          }
          z = step * z;
        }
        t = times[i];
        const double w = radial * dir_w[a];
        out(3 * i) += w * z.squaredNorm();
        out(3 * i + 1) += w * z.tail(n2).squaredNorm();
        out(3 * i + 2) += w * (wmap * z).squaredNorm();
      }
    }
    return out;
  };

  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G7 = boost::math::quadrature::gauss<double, 7>;
  const auto& xk = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G7::weights();
  auto rule = [&](double a, double b, int q, Vector& value, Vector& error) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const Vector f0 = integrand(c, q);
    Vector k = wk[0] * f0;
    Vector gs = wg[0] * f0;
    for (std::size_t i = 1; i < xk.size(); ++i) {
      const Vector fp = integrand(c + h * xk[i], q);
      const Vector fm = integrand(c - h * xk[i], q);
      k += wk[i] * (fp + fm);
      if (i % 2 == 0) gs += wg[i / 2] * (fp + fm);
    }
    value = h * k;
    error = (h * (k - gs)).cwiseAbs();
  };

  const int nq = options.q_high - options.q_low + 1;
  std::vector<Vector> energy(static_cast<std::size_t>(nq));
  parallel_for(static_cast<std::size_t>(nq), [&](std::size_t iq) {
    const int q = options.q_low + static_cast<int>(iq);
    const double a = 0.75 * std::ldexp(1.0, q), b = 8.0 / 3.0 * std::ldexp(1.0, q);
    std::vector<Interval> parts;
    constexpr int initial = 4;
    for (int s = 0; s < initial; ++s) {
      Interval it{a + (b - a) * s / initial, a + (b - a) * (s + 1) / initial, {}, {}};
      rule(it.a, it.b, q, it.value, it.error);
      parts.push_back(std::move(it));
    }
    while (true) {
      Vector total = Vector::Zero(parts[0].value.size());
      Vector err = Vector::Zero(total.size());
      for (const auto& p : parts) {
        total += p.value;
        err += p.error;
      }
      // Z2 and W are small differences at low frequency; below 1e-20 of the Z
      // energy they are roundoff and only need absolute accuracy. Energies
      // below 1e-280 are at the edge of the double range and are not refined.
      Vector allowed = (options.rel_tol * total.cwiseAbs()).array() + 1e-280;
      for (std::size_t i = 0; i < nt; ++i) {
        const double floor = 1e-20 * std::abs(total(3 * i));
        allowed(3 * i + 1) += floor;
        allowed(3 * i + 2) += floor;
      }
      if ((err.array() <= allowed.array()).all()) {
        energy[iq] = total;
        return;
      }
      if (static_cast<int>(parts.size()) >= options.max_intervals)
        throw Error(ErrorCode::QuadratureFailure,
                    "annulus q = " + std::to_string(q) + " did not converge");
      // Split the interval with the largest error relative to the tolerance.
      std::size_t worst = 0;
      double worst_ratio = -1.0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        const double r = (parts[i].error.array() / allowed.array()).maxCoeff();
        if (r > worst_ratio) {
          worst_ratio = r;
          worst = i;
        }
      }
      const double mid = 0.5 * (parts[worst].a + parts[worst].b);
      Interval left{parts[worst].a, mid, {}, {}}, right{mid, parts[worst].b, {}, {}};
      rule(left.a, left.b, q, left.value, left.error);
      rule(right.a, right.b, q, right.value, right.error);
      parts[worst] = std::move(left);
      parts.push_back(std::move(right));
    }
  });

  OracleTable table;
  table.times = times;
  table.sigmas = options.sigmas;
  const std::size_t ns = options.sigmas.size();
  table.Z_low.assign(ns, std::vector<double>(nt, 0.0));
  table.Z2_low.assign(ns, std::vector<double>(nt, 0.0));
  table.W_low.assign(ns, std::vector<double>(nt, 0.0));
  table.Z_high.assign(nt, 0.0);
  table.Z_blocks.assign(static_cast<std::size_t>(nq), std::vector<double>(nt, 0.0));
  const double s_high = 0.5 * d + 1.0;
  for (int iq = 0; iq < nq; ++iq) {
    const int q = options.q_low + iq;
    const Vector& e = energy[static_cast<std::size_t>(iq)];
    for (std::size_t i = 0; i < nt; ++i) {
      const double ez = std::max(0.0, e(3 * i)), ez2 = std::max(0.0, e(3 * i + 1)),
                   ew = std::max(0.0, e(3 * i + 2));
      table.Z_blocks[static_cast<std::size_t>(iq)][i] = ez;
      if (q <= 0) {
        for (std::size_t s = 0; s < ns; ++s) {
          const double w = std::pow(2.0, q * options.sigmas[s]);
          table.Z_low[s][i] += w * std::sqrt(ez);
          table.Z2_low[s][i] += w * std::sqrt(ez2);
          table.W_low[s][i] += w * std::sqrt(ew);
        }
      } else {
        table.Z_high[i] += std::pow(2.0, q * s_high) * std::sqrt(ez);
      }
    }
  }
  return table;
}

InitialDatum::Kind parse_datum_kind(std::string_view name) {
  if (name == "gaussian-bump") return InitialDatum::Kind::GaussianBump;
  if (name == "fourier-random-band") return InitialDatum::Kind::FourierRandomBand;
  if (name == "single-mode") return InitialDatum::Kind::SingleMode;
  if (name == "file") return InitialDatum::Kind::File;
  throw Error(ErrorCode::InvalidInput, "unknown datum kind " + std::string(name));
}

SpectralField make_initial_field(const InitialDatum& datum, int d, int components, int resolution,
                                 double box_length) {
  std::vector<double> factor = datum.components;
  if (factor.empty()) factor.assign(static_cast<std::size_t>(components), 1.0);
  if (factor.size() != static_cast<std::size_t>(components))
    throw Error(ErrorCode::DimensionMismatch, "component selector has the wrong length");

  SpectralField f(d, components, resolution, box_length);
  switch (datum.kind) {
    case InitialDatum::Kind::GaussianBump: {
      if (!(datum.width > 0.0)) throw Error(ErrorCode::InvalidInput, "width must be positive");
      const Eigen::Index points = f.modes();
      Matrix values(points, components);
      const double h = box_length / resolution, centre = 0.5 * box_length;
      for (Eigen::Index p = 0; p < points; ++p) {
        Eigen::Index rem = p;
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
          const double x = h * static_cast<double>(rem % resolution) - centre;
          rem /= resolution;
          r2 += x * x;
        }
        const double g = datum.amplitude * std::exp(-0.5 * r2 / (datum.width * datum.width));
        for (int c = 0; c < components; ++c) values(p, c) = factor[c] * g;
      }
      return SpectralField::from_physical(values, d, resolution, box_length);
    }
    case InitialDatum::Kind::FourierRandomBand: {
      if (datum.q_b < datum.q_a) throw Error(ErrorCode::InvalidInput, "empty band");
      std::mt19937_64 rng(datum.seed);
      std::normal_distribution<double> normal;
      const auto& g = f.frequencies();
      for (Eigen::Index m = 0; m < f.modes(); ++m) {
        double weight = 0.0;
        for (int q = datum.q_a; q <= datum.q_b; ++q) weight += phi(std::ldexp(g.magnitude(m), -q));
        for (int c = 0; c < components; ++c) {
          const double re = normal(rng), im = normal(rng);
          f.coeffs()(m, c) = weight * factor[c] * cd(re, im);
        }
      }
      f.dealias();
      f.enforce_hermitian();
      const double peak = f.to_physical().cwiseAbs().maxCoeff();
      if (peak > 0.0) f *= datum.amplitude / peak;
      return f;
    }
    case InitialDatum::Kind::SingleMode: {
      if (datum.wavevector.size() != static_cast<std::size_t>(d))
        throw Error(ErrorCode::DimensionMismatch, "wavevector must have d entries");
      Eigen::Index plus = 0, minus = 0;
      for (int a = 0; a < d; ++a) {
        const int k = datum.wavevector[a];
        if (2 * std::abs(k) >= resolution) throw Error(ErrorCode::InvalidInput, "mode not resolved");
        plus = plus * resolution + ((k % resolution) + resolution) % resolution;
        minus = minus * resolution + ((-k % resolution) + resolution) % resolution;
      }
      for (int c = 0; c < components; ++c) {
        f.coeffs()(plus, c) += 0.5 * datum.amplitude * factor[c];
        f.coeffs()(minus, c) += 0.5 * datum.amplitude * factor[c];
      }
      return f;
    }
    case InitialDatum::Kind::File: {
      SpectralField g = read_lpf1(datum.path);
      if (g.d() != d || g.components() != components || g.resolution() != resolution)
        throw Error(ErrorCode::DimensionMismatch, "field file does not match the run grid");
      g.enforce_hermitian();
      return g;
    }
  }
  return f;
}

PseudospectralIntegrator::PseudospectralIntegrator(const SystemSpec& system, int resolution,
                                                   double box_length, IntegratorOptions options)
    : system_(system), N_(resolution), L_(box_length), options_(options) {
  validate(system_);
  if (!(options_.dt > 0.0)) throw Error(ErrorCode::InvalidInput, "dt must be positive");
  // Bound on the fastest characteristic speed over the neighborhood, sampled:
  // |sum_j w_j A_j| <= sqrt(d) max_j rho(A_j) for unit w.
  wave_speed_ = 0.0;
  auto states = neighborhood_samples(system_, 16);
  states.push_back(system_.equilibrium);
  for (const auto& v : states) {
    const Matrix a0inv = system_.coeff(0, v).inverse();
    for (int j = 1; j <= system_.d; ++j) {
      const Eigen::EigenSolver<Matrix> es(a0inv * system_.coeff(j, v), false);
      wave_speed_ = std::max(wave_speed_, es.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  wave_speed_ *= std::sqrt(static_cast<double>(system_.d));
}

double PseudospectralIntegrator::cfl_limit() const {
  if (wave_speed_ == 0.0) return std::numeric_limits<double>::infinity();
  return options_.cfl * (L_ / N_) / wave_speed_;
}

Matrix PseudospectralIntegrator::state(const SpectralField& Z) const {
  Matrix v = Z.to_physical();
  v.rowwise() += system_.equilibrium.transpose();
  return v;
}

SpectralField PseudospectralIntegrator::rate(const SpectralField& Z) const {
  const int d = system_.d, n = system_.n;
  SpectralField zd = Z;
  if (options_.dealias) zd.dealias();
  const Matrix v = state(zd);
  std::vector<Matrix> grad;
  grad.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) grad.push_back(zd.derivative(j).to_physical());
  Matrix r(v.rows(), n);
  if (system_.field_rhs) {
    system_.field_rhs(v, grad, r);
  } else {
    for (Eigen::Index x = 0; x < v.rows(); ++x) {
      const Vector vx = v.row(x).transpose();
      Vector rhs = system_.source(vx);
      for (int j = 1; j <= d; ++j) rhs -= system_.coeff(j, vx) * grad[j - 1].row(x).transpose();
      const Eigen::PartialPivLU<Matrix> lu(system_.coeff(0, vx));
      if (!(lu.rcond() > 1e-12))
        throw Error(ErrorCode::CoefficientSingular, "A^0(V) is not invertible on the grid");
      r.row(x) = lu.solve(rhs).transpose();
    }
  }
  if (!r.allFinite()) throw Error(ErrorCode::BlowupSuspected, "non-finite rate");
  SpectralField out = SpectralField::from_physical(r, d, N_, L_);
  if (options_.dealias) out.dealias();
  return out;
}

SpectralField PseudospectralIntegrator::rk4_step(const SpectralField& Z, double dt) const {
  const SpectralField k1 = rate(Z);
  const SpectralField k2 = rate(Z + (0.5 * dt) * k1);
  const SpectralField k3 = rate(Z + (0.5 * dt) * k2);
  const SpectralField k4 = rate(Z + dt * k3);
  SpectralField out = Z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.enforce_hermitian();
  return out;
}

IntegratorStats PseudospectralIntegrator::integrate(
    const SpectralField& Z0, double t0, const std::vector<double>& times,
    const std::function<void(double, const SpectralField&)>& visit) const {
  if (Z0.components() != system_.n || Z0.d() != system_.d || Z0.resolution() != N_)
    throw Error(ErrorCode::DimensionMismatch, "initial field does not match the integrator");
  IntegratorStats stats;
  const double dt_max = std::min(options_.dt, cfl_limit());
  stats.dt_used = dt_max;
  const double initial_peak = Z0.to_physical().cwiseAbs().maxCoeff();
  const double radius = system_.neighborhood_radius;

  auto peak_of = [](const SpectralField& z) { return z.to_physical().cwiseAbs().maxCoeff(); };
  std::function<SpectralField(const SpectralField&, double, int)> advance =
      [&](const SpectralField& z, double h, int depth) -> SpectralField {
    SpectralField next = rk4_step(z, h);
    const double peak = peak_of(next);
    if (!std::isfinite(peak)) throw Error(ErrorCode::BlowupSuspected, "non-finite state");
    if (initial_peak > 0.0 && peak > options_.blowup_factor * initial_peak)
      throw Error(ErrorCode::BlowupSuspected, "L-infinity growth beyond the blow-up factor");
    if (options_.check_neighborhood && peak > radius) {
      ++stats.rejected;
      if (depth >= options_.max_halvings)
        throw Error(ErrorCode::BlowupSuspected, "state left the declared neighborhood");
      const SpectralField half = advance(z, 0.5 * h, depth + 1);
      return advance(half, 0.5 * h, depth + 1);
    }
    ++stats.steps;
    return next;
  };

  SpectralField z = Z0;
  double t = t0;
  for (double target : times) {
    if (target < t - 1e-12) throw Error(ErrorCode::InvalidInput, "output times must increase");
    const double span = target - t;
    if (span > 1e-12 * std::max(1.0, std::abs(target))) {
      const long steps = std::max(1L, static_cast<long>(std::ceil(span / dt_max - 1e-9)));
      const double h = span / static_cast<double>(steps);
      for (long s = 0; s < steps; ++s) z = advance(z, h, 0);
    }
    t = target;
    visit(t, z);
  }
  return stats;
}

std::vector<double> output_times(double t0, double t_end, double every) {
  if (!(every > 0.0) || t_end < t0) throw Error(ErrorCode::InvalidInput, "bad output cadence");
  std::vector<double> out;
  for (long k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * every;
    if (t > t_end + 1e-9 * every) break;
    out.push_back(t);
  }
  return out;
}

std::vector<double> RunConfig::times() const {
  if (!output_times.empty()) return output_times;
  return hypocoax::output_times(0.0, t_end, output_every);
}

RunConfig::Mode parse_mode(std::string_view name) {
  if (name == "linear-exact") return RunConfig::Mode::LinearExact;
  if (name == "linear-oracle") return RunConfig::Mode::LinearOracle;
  if (name == "nonlinear") return RunConfig::Mode::Nonlinear;
  throw Error(ErrorCode::InvalidInput, "unknown mode " + std::string(name));
}

std::string_view to_string(RunConfig::Mode mode) {
  switch (mode) {
    case RunConfig::Mode::LinearExact: return "linear-exact";
    case RunConfig::Mode::LinearOracle: return "linear-oracle";
    case RunConfig::Mode::Nonlinear: return "nonlinear";
  }
  return "linear-exact";
}

RunConfig run_config_from_json(const std::string& text) {
  using json = nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("run config: ") + e.what());
  }
  RunConfig c;
  try {
    c.system = j.value("system", c.system);
    if (j.contains("mode")) c.mode = parse_mode(j["mode"].get<std::string>());
    c.d = j.value("d", c.d);
    c.resolution = j.value("resolution", c.resolution);
    c.box_length = j.value("box_length", c.box_length);
    c.t_end = j.value("t_end", c.t_end);
    c.dt = j.value("dt", c.dt);
    c.output_every = j.value("output_every", c.output_every);
    c.output_times = j.value("output_times", c.output_times);
    c.lambda = j.value("lambda", c.lambda);
    c.gamma = j.value("gamma", c.gamma);
    c.cfl = j.value("cfl", c.cfl);
    c.dealias = j.value("dealias", c.dealias);
    c.sigmas = j.value("sigmas", c.sigmas);
    c.fit_window = j.value("fit_window", c.fit_window);
    c.profile = j.value("profile", c.profile);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.dump_dir = j.value("dump_dir", c.dump_dir);
    if (j.contains("datum")) {
      const auto& dj = j["datum"];
      auto& dd = c.datum;
      if (dj.contains("kind")) dd.kind = parse_datum_kind(dj["kind"].get<std::string>());
      dd.amplitude = dj.value("amplitude", dd.amplitude);
      dd.width = dj.value("width", dd.width);
      if (dj.contains("band")) {
        dd.q_a = dj["band"].at(0).get<int>();
        dd.q_b = dj["band"].at(1).get<int>();
      }
      dd.components = dj.value("components", dd.components);
      dd.wavevector = dj.value("wavevector", dd.wavevector);
      dd.seed = dj.value("seed", dd.seed);
      if (dj.contains("path")) dd.path = dj["path"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, std::string("run config: ") + e.what());
  }
  if (c.dealias != "two-thirds" && c.dealias != "none")
    throw Error(ErrorCode::InvalidInput, "dealias must be \"two-thirds\" or \"none\"");
  if (c.resolution < 2 || (c.resolution & (c.resolution - 1)) != 0)
    throw Error(ErrorCode::InvalidInput, "resolution must be a power of two");
  if (!(c.t_end >= 0.0)) throw Error(ErrorCode::InvalidInput, "t_end must be >= 0");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

}  // namespace hypocoax
