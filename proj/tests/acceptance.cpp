// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "hypocoax/analysis.hpp"
#include "hypocoax/euler.hpp"
#include "support.hpp"

using namespace hypocoax;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double relative_error(const SpectralField& a, const SpectralField& b) {
  return (a.coeffs() - b.coeffs()).norm() / b.coeffs().norm();
}

double fit_exponent(const nlohmann::json& report, const std::string& column) {
  for (const auto& f : report["fits"])
    if (f.value("column", "") == column && f.contains("exponent")) return f["exponent"].get<double>();
  return std::numeric_limits<double>::quiet_NaN();
}

const nlohmann::json* fit_entry(const nlohmann::json& report, const std::string& column) {
  for (const auto& f : report["fits"])
    if (f.value("column", "") == column) return &f;
  return nullptr;
}

void sk_positive(Outcome& o) {
  for (int d : {1, 2}) {
    const SystemSpec sys = make_euler_system(d);
    const auto t0 = std::chrono::steady_clock::now();
    const CommandResult r = run_analyze(sys, {64, 0.1, true});
    const double elapsed = seconds_since(t0);
    const LinearizedSystem lin = linearize(sys);
    double sigma = std::numeric_limits<double>::infinity();
    for (const auto& w : sphere_grid(d, 64)) sigma = std::min(sigma, kalman_rank_test(lin, w).min_sigma);
    o.detail << " d=" << d << ": holds=" << r.report["sk"]["holds"] << " min_sigma=" << sigma
             << " t=" << elapsed << "s;";
    o.require(r.report["sk"]["holds"].get<bool>(), "SK holds");
    o.require(sigma > 1e-6, "Kalman min singular value > 1e-6");
    o.require(elapsed < 1.0, "runtime < 1 s");
  }
}

void sk_negative(Outcome& o) {
  Matrix l = Matrix::Zero(2, 2);
  l(1, 1) = 1.0;
  const auto lin = LinearizedSystem::from_matrices({Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, l, 1);
  const SkReport sk = sk_condition(lin, EpsilonSchedule::uniform(2));
  o.detail << " holds=" << sk.holds << " rank=" << sk.kalman_min_rank;
  o.require(!sk.holds, "SK fails");
  o.require(sk.kalman_min_rank == 1, "Kalman rank 1");
  bool cannot = false;
  try {
    autotune_epsilon(lin, 1.0, default_rho_grid(), sphere_grid(1, 64));
  } catch (const Error& e) {
    cannot = e.code() == ErrorCode::CannotCertify;
  }
  o.detail << " autotune=" << (cannot ? "CannotCertify" : "certified");
  o.require(cannot, "autotune returns CannotCertify");
}

// Half the pairs have a common eigenvector of every A_j inside ker N, which
// makes the rank drop for every direction.
void kalman_gram(Outcome& o) {
  std::mt19937_64 rng(2024);
  int disagreements = 0, full = 0, deficient = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 4;
    const int d = 1 + trial % 3;
    const int r = 1 + static_cast<int>(rng() % static_cast<unsigned>(n - 1));
    Matrix N = Matrix::Zero(n, n);
    N.bottomRightCorner(r, r) = Matrix::Identity(r, r);
    const bool degenerate = trial % 2 == 1;
    Vector e = Vector::Zero(n);
    e.head(n - r) = testing_support::random_matrix(rng, n - r, 1);
    e.normalize();
    const Matrix perp = Matrix::Identity(n, n) - e * e.transpose();
    std::vector<Matrix> a;
    for (int j = 0; j < d; ++j) {
      Matrix s = testing_support::random_symmetric(rng, n);
      if (degenerate) s = perp * s * perp + (1.0 + j) * e * e.transpose();
      a.push_back(s);
    }
    for (const auto& w : sphere_grid(d, 16)) {
      Matrix M = Matrix::Zero(n, n);
      for (int j = 0; j < d; ++j) M += w(j) * a[static_cast<std::size_t>(j)];
      const bool rank_full = kalman_rank_test(M, N).rank == n;
      const Matrix K = gram_matrix(M, N, std::vector<double>(static_cast<std::size_t>(n), 1.0));
      const bool gram_pos = Eigen::SelfAdjointEigenSolver<Matrix>(K).eigenvalues()(0) > 1e-10;
      if (rank_full != gram_pos) ++disagreements;
      (rank_full ? full : deficient) += 1;
    }
  }
  o.detail << " directions full=" << full << " deficient=" << deficient << " disagreements=" << disagreements;
  o.require(disagreements == 0, "zero disagreements");
  o.require(full > 0 && deficient > 0, "both verdicts exercised");
}

void certification(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int d : {1, 2}) {
    const LinearizedSystem lin = linearize(make_euler_system(d));
    const auto r = autotune_epsilon(lin, lin.kappa0, default_rho_grid(), sphere_grid(d, 64));
    const double a0 = Eigen::SelfAdjointEigenSolver<Matrix>(lin.Abar[0]).eigenvalues()(0);
    o.detail << " d=" << d << ": eps=" << r.schedule.epsilon << " c_min=" << r.certificate.c_min
             << " lambda_min(P)=" << r.certificate.min_weight_eig << ";";
    o.require(r.certificate.c_min > 0.0, "c_min > 0");
    o.require(r.certificate.min_weight_eig >= 0.5 * a0, "lambda_min(P) >= lambda_min(Abar0)/2");
  }
  const double elapsed = seconds_since(t0);
  o.detail << " t=" << elapsed << "s";
  o.require(elapsed < 30.0, "runtime < 30 s");
}

void partition(Outcome& o) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double xi = std::exp(u(rng));
    double sum = 0.0;
    for (int q = -40; q <= 40; ++q) sum += phi(std::ldexp(xi, -q));
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  double recon = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int d = 1 + i % 2;
    const int N = d == 1 ? 128 : 32;
    const double L = kTwoPi * (2 + i % 5);
    const DyadicRange range = dyadic_range(N, L);
    SpectralField z = testing_support::band_field(rng, d, 2, N, L, range.q_min + 1, range.q_max - 2);
    z.coeffs()(0, 0) = u(rng);
    SpectralField sum = z.zeros_like();
    for (int q = range.q_min; q <= range.q_max; ++q) sum += dyadic_block(z, q);
    SpectralField centered = z;
    centered.coeffs().row(0).setZero();
    recon = std::max(recon, relative_error(sum, centered));
  }
  o.detail << " max|sum phi - 1|=" << worst << " max reconstruction error=" << recon;
  o.require(worst <= 1e-10, "partition of unity to 1e-10");
  o.require(recon <= 1e-10, "reconstruction to 1e-10");
}

void monotonicity(Outcome& o) {
  const int d = 2, N = 64;
  const double L = kTwoPi * 8;
  const LinearizedSystem lin = linearize(make_euler_system(d));
  const auto tuned = autotune_epsilon(lin, lin.kappa0, rho_grid_for_box(d, N, L), sphere_grid(d, 64));
  const std::uint64_t seed = 7;
  const FunctionalWeights weights = tune_functional_weights(lin, tuned.schedule, d, N, L, seed + 1);
  const LyapunovEvaluator ev(lin, tuned.schedule, d, N, L, weights);
  InitialDatum datum;
  datum.kind = InitialDatum::Kind::FourierRandomBand;
  datum.q_a = -3;
  datum.q_b = 1;
  datum.seed = seed;
  const SpectralField z0 = make_initial_field(datum, d, lin.n, N, L);
  double l0 = 0.0, prev = 0.0, worst_rise = 0.0, worst_ratio = 0.0;
  int steps = 0;
  ExactLinearFlow(lin, d, N, L).evolve(z0, output_times(0.0, 50.0, 0.5), [&](double t, const SpectralField& z) {
    const FunctionalSnapshot s = ev.evaluate(t, z, damped_mode_linear(z, lin));
    if (steps == 0) l0 = s.Ltilde;
    else worst_rise = std::max(worst_rise, (s.Ltilde - prev) / l0);
    prev = s.Ltilde;
    for (int q = s.I.q_min; q <= s.I.q_max(); ++q)
      if (s.Znorm2.at(q) > 0.0) worst_ratio = std::max(worst_ratio, std::abs(s.I.at(q)) / s.Znorm2.at(q));
    ++steps;
  });
  o.detail << " outputs=" << steps << " max rise/Ltilde(0)=" << worst_rise << " max |I_q|/|Z_q|^2=" << worst_ratio;
  o.require(steps == 101, "101 outputs on [0, 50]");
  o.require(worst_rise <= 1e-10, "Ltilde nonincreasing within 1e-10 Ltilde(0)");
  o.require(worst_ratio <= 0.5, "|I_q| <= |Z_q|^2 / 2");
}

void decay(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c;
  c.system = "euler-damped-2d";
  c.mode = RunConfig::Mode::LinearOracle;
  c.d = 2;
  c.t_end = 500.0;
  c.output_every = 5.0;
  c.sigmas = {0.0, -0.5};
  c.fit_window = {50.0, 500.0};
  const CommandResult low = run_decay(c);
  const double z0 = fit_exponent(low.report, "Z_s0_r1_low0");
  const double z = fit_exponent(low.report, "Z_s-0.5_r1_low0");
  const double z2 = fit_exponent(low.report, "Z2_s-0.5_r1_low0");
  const double w = fit_exponent(low.report, "W_s-0.5_r1_low0");
  o.detail << " Z(s=0)=" << z0 << " Z2 gain=" << z2 - z << " W gain=" << w - z << ";";
  o.require(std::abs(z0 - 0.5) <= 0.05, "Z low exponent 0.50 +- 0.05");
  o.require(z2 - z >= 0.4, "Z2 gain >= 0.4 at sigma = -0.5");
  o.require(w - z >= 0.4, "W gain >= 0.4 at sigma = -0.5");

  RunConfig h = c;
  h.profile = "high-frequency";
  h.sigmas = {0.0};
  h.t_end = 100.0;
  h.output_every = 1.0;
  h.fit_window = {10.0, 100.0};
  const CommandResult high = run_decay(h);
  const nlohmann::json* e = fit_entry(high.report, "Z_s2_r1_high0");
  const double r2 = e && e->contains("r2") ? (*e)["r2"].get<double>() : 0.0;
  const double rate = e && e->contains("exponent") ? (*e)["exponent"].get<double>() : 0.0;
  o.detail << " high rate=" << rate << " R2=" << r2 << ";";
  o.require(r2 >= 0.99 && rate > 0.0, "log-linear fit R2 >= 0.99");
  const double elapsed = seconds_since(t0);
  o.detail << " t=" << elapsed << "s";
  o.require(elapsed < 300.0, "runtime < 5 min");
}

void oracle_equivalence(Outcome& o) {
  const int d = 2, N = 32;
  const double L = kTwoPi * 4;
  const LinearizedSystem lin = linearize(make_euler_system(d));
  const SystemSpec spec = testing_support::linear_spec(lin);
  std::mt19937_64 rng(17);
  const SpectralField z0 = testing_support::band_field(rng, d, lin.n, N, L, -2, 1);
  const SpectralField exact = ExactLinearFlow(lin, d, N, L).at(z0, 1.0);
  auto error_at = [&](double dt) {
    IntegratorOptions opt;
    opt.dt = dt;
    opt.cfl = 100.0;
    SpectralField last;
    PseudospectralIntegrator(spec, N, L, opt).integrate(z0, 0.0, {1.0}, [&](double, const SpectralField& z) {
      last = z;
    });
    return relative_error(last, exact);
  };
  const double e3 = error_at(1e-3);
  std::vector<double> errs;
  double order = std::numeric_limits<double>::infinity();
  for (double dt : {0.1, 0.05, 0.025}) {
    errs.push_back(error_at(dt));
    if (errs.size() > 1) order = std::min(order, std::log2(errs[errs.size() - 2] / errs.back()));
  }
  o.detail << " error(dt=1e-3)=" << e3 << " min observed order=" << order;
  o.require(e3 <= 1e-6, "relative L2 error <= 1e-6 at t = 1");
  o.require(order >= 3.7, "RK4 order >= 3.7");
}

void small_data(Outcome& o) {
  RunConfig c;
  c.system = "euler-damped-2d";
  c.mode = RunConfig::Mode::Nonlinear;
  c.d = 2;
  c.gamma = 2.0;
  c.lambda = 1.0;
  c.resolution = 256;
  c.box_length = kTwoPi * 16;
  c.t_end = 100.0;
  c.output_every = 0.5;
  c.dt = 0.05;
  c.datum.kind = InitialDatum::Kind::GaussianBump;
  c.datum.amplitude = 4e-4;
  c.datum.width = 4.0;
  const auto t0 = std::chrono::steady_clock::now();
  const CommandResult r = run_simulate(c);
  const double elapsed = seconds_since(t0);
  const auto& rep = r.report;
  const double hg = rep["initial_hybrid_norm"]["general"].get<double>();
  const double hr = rep["initial_hybrid_norm"]["refined"].get<double>();
  o.detail << " hybrid=" << hg << "/" << hr << " Zcal'(0)=" << rep["Zcal_prime"]["initial"]
           << " sup=" << rep["Zcal_prime"]["sup"] << " verdicts=" << rep["verdicts"].dump() << " t=" << elapsed
           << "s";
  o.require(hg <= 1e-2 && hr <= 1e-2, "hybrid norms <= 1e-2");
  o.require(rep["verdicts"].value("finite", "") == "pass", "finite");
  o.require(rep["verdicts"].value("zprime_bounded", "") == "pass", "sup Z' <= 10 Z'(0)");
  o.require(rep["verdicts"].value("ltildeprime_monotone", "") == "pass", "Ltilde' nonincreasing");
  o.require(elapsed < 600.0, "runtime < 10 min");
}

void rescaling(Outcome& o) {
  const int d = 2, N = 32;
  const double L = kTwoPi * 4, lambda = 2.0, dt = 0.01;
  InitialDatum g;
  g.amplitude = 1e-2;
  g.width = 2.0;
  const SpectralField z0 = make_initial_field(g, d, 3, N, L);
  SpectralField scaled(d, 3, N, lambda * L);
  scaled.coeffs() = z0.coeffs();
  const std::vector<double> times{0.5, 1.0, 2.0};
  std::vector<SpectralField> a, b;
  IntegratorOptions opt;
  opt.dt = dt;
  PseudospectralIntegrator(make_euler_system(d, 2.0, lambda), N, L, opt)
      .integrate(z0, 0.0, times, [&](double, const SpectralField& z) { a.push_back(z); });
  opt.dt = lambda * dt;
  std::vector<double> stretched;
  for (double t : times) stretched.push_back(lambda * t);
  PseudospectralIntegrator(make_euler_system(d, 2.0, 1.0), N, lambda * L, opt)
      .integrate(scaled, 0.0, stretched, [&](double, const SpectralField& z) { b.push_back(z); });
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    worst = std::max(worst, (a[i].coeffs() - b[i].coeffs()).norm() / b[i].coeffs().norm());
  o.detail << " samples=" << std::min(a.size(), b.size()) << " max relative difference=" << worst;
  o.require(a.size() == 3 && b.size() == 3, "three sampled times");
  o.require(worst <= 1e-6, "agreement to 1e-6");
}

// Pressure algebra against P'(rho) - 1 and the Euler coefficients; mass of n
// along a nonlinear run.
void euler_algebra(Outcome& o) {
  double worst = 0.0, coeff = 0.0;
  for (double gamma : {1.0, 1.4, 2.0, 3.0}) {
    const EulerPressure p{gamma};
    const SystemSpec sys = make_euler_system(2, gamma);
    for (int i = 0; i <= 200; ++i) {
      const double n = -0.1 + 0.001 * i;
      const double rho = p.density(n);
      const double g = p.pressure_derivative(rho) - 1.0;
      const double direct = gamma == 1.0 ? 0.0 : std::pow(rho, gamma - 1.0) - 1.0;
      worst = std::max({worst, std::abs(g - (gamma - 1.0) * n), std::abs(direct - (gamma - 1.0) * n),
                        std::abs(p.G(n) - (gamma - 1.0) * n)});
      Vector v = Vector::Zero(3);
      v(0) = n;
      for (int j = 1; j <= 2; ++j)
        coeff = std::max(coeff, std::abs(sys.coeff(j, v)(0, j) - (1.0 + (gamma - 1.0) * n)));
    }
  }
  const int N = 32;
  const double L = kTwoPi * 2;
  InitialDatum g;
  g.amplitude = 2e-2;
  const SpectralField z0 = make_initial_field(g, 2, 3, N, L);
  const double mass0 = z0.mean()(0);
  double drift = 0.0;
  IntegratorOptions opt;
  opt.dt = 0.02;
  PseudospectralIntegrator(make_euler_system(2, 2.0), N, L, opt)
      .integrate(z0, 0.0, output_times(0.2, 10.0, 0.2), [&](double, const SpectralField& z) {
        drift = std::max(drift, std::abs(z.mean()(0) - mass0));
      });
  o.detail << " max|G(n)-(gamma-1)n|=" << worst << " coefficient defect=" << coeff << " mass drift=" << drift;
  o.require(worst <= 1e-12, "G algebra to 1e-12");
  o.require(coeff <= 1e-12, "Euler coefficients use 1 + G(n)");
  o.require(drift <= 1e-12, "mass constant to 1e-12");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"SK positive control", sk_positive},
      {"SK negative control", sk_negative},
      {"Kalman and Gram agree", kalman_gram},
      {"certification", certification},
      {"Littlewood-Paley partition", partition},
      {"Lyapunov monotonicity", monotonicity},
      {"decay exponents", decay},
      {"oracle equivalence", oracle_equivalence},
      {"nonlinear small-data stability", small_data},
      {"lambda rescaling", rescaling},
      {"Euler algebra", euler_algebra},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::printf("%s %zu %s:%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
