#include "hypocoax/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "hypocoax/error.hpp"

namespace hypocoax {

namespace {

using json = nlohmann::json;

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Band sum of 2^{qs} |Delta_q| that is zero on an empty band. which: -1 low,
// +1 high, 0 all; low means 2^q <= split.
double band_sum(const BlockNorms& b, double s, int which, double split) {
  double total = 0.0;
  for (int q = b.range.q_min; q <= b.range.q_max; ++q) {
    const bool low = std::ldexp(1.0, q) <= split;
    if ((which < 0 && !low) || (which > 0 && low)) continue;
    total += std::pow(2.0, q * s) * b.at(q);
  }
  return total;
}

double kappa_or_one(const LinearizedSystem& lin) {
  return lin.kappa0_vacuous || !(lin.kappa0 > 0.0) || !std::isfinite(lin.kappa0) ? 1.0 : lin.kappa0;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

json config_json(const RunConfig& c) {
  json datum = {{"amplitude", c.datum.amplitude}, {"width", c.datum.width},
                {"band", {c.datum.q_a, c.datum.q_b}}, {"components", c.datum.components},
                {"wavevector", c.datum.wavevector}, {"seed", c.datum.seed},
                {"path", c.datum.path.string()}};
  switch (c.datum.kind) {
    case InitialDatum::Kind::GaussianBump: datum["kind"] = "gaussian-bump"; break;
    case InitialDatum::Kind::FourierRandomBand: datum["kind"] = "fourier-random-band"; break;
    case InitialDatum::Kind::SingleMode: datum["kind"] = "single-mode"; break;
    case InitialDatum::Kind::File: datum["kind"] = "file"; break;
  }
  return {{"system", c.system},         {"mode", std::string(to_string(c.mode))},
          {"d", c.d},                   {"resolution", c.resolution},
          {"box_length", c.box_length}, {"t_end", c.t_end},
          {"dt", c.dt},                 {"output_every", c.output_every},
          {"output_times", c.output_times}, {"datum", datum},
          {"lambda", c.lambda},         {"gamma", c.gamma},
          {"cfl", c.cfl},               {"dealias", c.dealias},
          {"sigmas", c.sigmas},         {"fit_window", c.fit_window},
          {"profile", c.profile},       {"epsilon", c.epsilon},
          {"dump_dir", c.dump_dir}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

const char* verdict(bool ok) { return ok ? "pass" : "fail"; }

int exit_code_of(const json& verdicts) {
  for (const auto& [k, v] : verdicts.items())
    if (v != "pass") return 1;
  return 0;
}

std::vector<double> window_or_default(const std::vector<double>& times, std::vector<double> window) {
  if (window.empty()) {
    const double t_end = times.empty() ? 0.0 : times.back();
    return {t_end / 10.0, t_end};
  }
  if (window.size() != 2 || !(window[0] <= window[1]))
    throw Error(ErrorCode::InvalidInput, "fit window must be [t_a, t_b] with t_a <= t_b");
  return window;
}

DecayFit least_squares(const std::vector<double>& times, const std::vector<double>& values,
                       std::vector<double> window, bool log_abscissa) {
  if (times.size() != values.size())
    throw Error(ErrorCode::DimensionMismatch, "times and values differ in length");
  window = window_or_default(times, window);
  DecayFit fit;
  fit.t_a = window[0];
  fit.t_b = window[1];
  std::vector<double> x, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (t < window[0] || t > window[1]) continue;
    if (!(values[i] > 0.0) || !std::isfinite(values[i]))
      throw Error(ErrorCode::DegenerateWindow, "non-positive value at t = " + format_double(t));
    x.push_back(log_abscissa ? 0.5 * std::log1p(t * t) : t);
    y.push_back(std::log(values[i]));
  }
  if (x.size() < 10)
    throw Error(ErrorCode::DegenerateWindow,
                "fewer than 10 samples in [" + format_double(window[0]) + ", " +
                    format_double(window[1]) + "]");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::DegenerateWindow, "all samples at one abscissa");
  const double slope = sxy / sxx;
  fit.exponent = -slope;
  fit.intercept = my - slope * mx;
  fit.samples = static_cast<int>(x.size());
  // A constant column is fitted exactly.
  const double scale = std::max(1.0, my * my) * n;
  if (syy <= 1e-28 * scale) {
    fit.r2 = 1.0;
  } else {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - (fit.intercept + slope * x[i]);
      ss_res += r * r;
    }
    fit.r2 = 1.0 - ss_res / syy;
  }
  fit.reliable = fit.r2 >= 0.98;
  return fit;
}

}  // namespace

// ---------------------------------------------------------------------------

TrajectoryRecord::TrajectoryRecord(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void TrajectoryRecord::append(double t, const std::vector<double>& values) {
  if (values.size() != columns_.size())
    throw Error(ErrorCode::DimensionMismatch, "row has " + std::to_string(values.size()) +
                                                  " values for " + std::to_string(columns_.size()) +
                                                  " columns");
  if (!times_.empty() && !(t > times_.back()))
    throw Error(ErrorCode::InvalidInput, "times must be strictly increasing");
  times_.push_back(t);
  rows_.push_back(values);
}

bool TrajectoryRecord::has_column(std::string_view name) const {
  return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
}

std::vector<double> TrajectoryRecord::column(std::string_view name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw Error(ErrorCode::InvalidInput, "no column " + std::string(name));
  const auto c = static_cast<std::size_t>(it - columns_.begin());
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& row : rows_) out.push_back(row[c]);
  return out;
}

std::string TrajectoryRecord::csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "t";
  for (const auto& c : columns_) os << "," << c;
  os << "\n";
  for (std::size_t i = 0; i < times_.size(); ++i) {
    os << times_[i];
    for (double v : rows_[i]) os << "," << v;
    os << "\n";
  }
  return os.str();
}

void TrajectoryRecord::write_csv(const std::filesystem::path& path) const { write_text(path, csv()); }

std::string ColumnQuery::key() const { return target + "_" + query.key(); }

// ---------------------------------------------------------------------------

TrajectoryRecorder::TrajectoryRecorder(const LinearizedSystem& lin, const LyapunovEvaluator& evaluator,
                                       std::vector<ColumnQuery> queries, double split)
    : lin_(lin), evaluator_(evaluator), queries_(std::move(queries)), split_(split) {
  std::vector<std::string> columns;
  for (const auto& q : queries_) {
    if (q.target != "Z" && q.target != "Z1" && q.target != "Z2" && q.target != "W")
      throw Error(ErrorCode::InvalidInput, "query target must be Z, Z1, Z2 or W");
    columns.push_back(q.key());
  }
  for (const char* c : {"L", "Ltilde", "Lprime", "Ltildeprime", "Htilde"}) columns.emplace_back(c);
  record_ = TrajectoryRecord(std::move(columns));
}

void TrajectoryRecorder::add(double t, const SpectralField& Z, const SpectralField& W,
                             const SystemSpec* system, const Matrix* state) {
  const int n1 = lin_.n1, n2 = lin_.n2();
  const BlockNorms bz = block_norms(Z);
  const BlockNorms bz1 = n1 > 0 ? block_norms(Z, 0, n1) : BlockNorms{bz.range, std::vector<double>(bz.norms.size(), 0.0)};
  const BlockNorms bz2 = block_norms(Z, n1, n2);
  const BlockNorms bw = block_norms(W);

  std::vector<double> row;
  row.reserve(record_.columns().size());
  for (const auto& q : queries_) {
    const BlockNorms& b = q.target == "Z" ? bz : q.target == "Z1" ? bz1 : q.target == "Z2" ? bz2 : bw;
    row.push_back(besov_from_blocks(b, q.query));
  }
  FunctionalSnapshot s = evaluator_.evaluate(t, Z, W, system, state);
  for (double v : {s.Lgen, s.Ltilde, s.Lprime, s.Ltildeprime, s.Htilde}) row.push_back(v);
  record_.append(t, row);

  const double h = 0.5 * lin_.d;
  const double lo = band_sum(bz, h - 1.0, -1, split_);
  const double hi = band_sum(bz, h + 1.0, 1, split_);
  const double lo_prime = band_sum(bz, h, -1, split_);
  const std::vector<double> f{
      band_sum(bz, h + 1.0, 0, split_),                      // general
      band_sum(bw, h - 1.0, -1, split_),
      band_sum(bz2, h, -1, split_),
      std::pow(band_sum(bz2, h - 1.0, -1, split_), 2),
      band_sum(bz1, h + 2.0, -1, split_),                    // refined
      band_sum(bz2, h + 1.0, -1, split_),
      std::pow(band_sum(bz2, h, -1, split_), 2),
      hi,
      band_sum(bw, h, -1, split_),
  };
  if (prev_.empty()) {
    integral_.assign(f.size(), 0.0);
    sup_lo_ = lo;
    sup_hi_ = hi;
    sup_lo_prime_ = lo_prime;
    running_.Zcal0 = lo + hi;
    running_.Zcal_prime0 = lo_prime + hi;
  } else {
    const double dt = t - t_prev_;
    for (std::size_t i = 0; i < f.size(); ++i) integral_[i] += 0.5 * dt * (f[i] + prev_[i]);
    sup_lo_ = std::max(sup_lo_, lo);
    sup_hi_ = std::max(sup_hi_, hi);
    sup_lo_prime_ = std::max(sup_lo_prime_, lo_prime);
  }
  prev_ = f;
  t_prev_ = t;
  const auto& I = integral_;
  running_.Zcal.push_back(sup_lo_ + sup_hi_ + I[0] + I[1] + I[2] + std::sqrt(I[3]));
  running_.Zcal_prime.push_back(sup_lo_prime_ + sup_hi_ + I[4] + I[5] + std::sqrt(I[6]) + I[7] + I[8]);
  snapshots_.push_back(std::move(s));
}

TrajectoryRecord record_trajectory(const std::vector<std::pair<double, SpectralField>>& run,
                                   const LinearizedSystem& lin, const LyapunovEvaluator& evaluator,
                                   const std::vector<ColumnQuery>& queries) {
  TrajectoryRecorder rec(lin, evaluator, queries);
  for (const auto& [t, z] : run) rec.add(t, z, damped_mode_linear(z, lin));
  return rec.record();
}

// ---------------------------------------------------------------------------

DecayFit fit_decay_exponent(const std::vector<double>& times, const std::vector<double>& values,
                            std::vector<double> window) {
  return least_squares(times, values, std::move(window), true);
}

DecayFit fit_decay_exponent(const TrajectoryRecord& record, std::string_view column,
                            std::vector<double> window) {
  return fit_decay_exponent(record.times(), record.column(column), std::move(window));
}

DecayFit fit_exponential_rate(const std::vector<double>& times, const std::vector<double>& values,
                              std::vector<double> window) {
  return least_squares(times, values, std::move(window), false);
}

ExponentTable theory_exponents(int d, double sigma1, double sigma, TheoremVariant variant) {
  if (d < 1) throw Error(ErrorCode::InvalidInput, "d must be >= 1");
  const double h = 0.5 * d;
  auto out_of_range = [&](const std::string& violated) {
    throw Error(ErrorCode::OutOfRange, "sigma = " + format_double(sigma) + ", sigma1 = " +
                                           format_double(sigma1) + " violates " + violated);
  };
  if (!(sigma1 > -h)) out_of_range("-d/2 < sigma1");
  if (!(sigma1 <= h)) out_of_range("sigma1 <= d/2");
  const bool refined = variant == TheoremVariant::Refined;
  const double top = refined ? h : h - 1.0;  // upper end of the Z-low range
  const char* top_name = refined ? "sigma <= d/2" : "sigma <= d/2 - 1";
  if (!(-sigma1 < sigma)) out_of_range("-sigma1 < sigma");
  if (!(sigma <= top)) out_of_range(top_name);

  ExponentTable t;
  t.variant = variant;
  t.alpha1 = 0.5 * (sigma1 + top);
  t.Z_low = 0.5 * (sigma + sigma1);
  if (-sigma1 < sigma && sigma <= top - 1.0)
    t.Z2_low.push_back({"(sigma+sigma1)/2+1/2", 0.5 * (sigma + sigma1) + 0.5});
  if (std::min(top - 1.0, -sigma1) < sigma && sigma <= top)
    t.Z2_low.push_back({refined ? "alpha1'" : "alpha1", t.alpha1});
  t.Z_high = 2.0 * t.alpha1;
  return t;
}

json to_json(const DecayFit& fit) {
  return {{"exponent", fit.exponent}, {"intercept", fit.intercept}, {"r2", fit.r2},
          {"window", {fit.t_a, fit.t_b}}, {"samples", fit.samples}, {"reliable", fit.reliable}};
}

json to_json(const StructureReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"tolerance", c.tolerance},
                      {"passed", c.passed}});
  return {{"passed", report.passed()}, {"checks", checks}};
}

json to_json(const SkReport& r) {
  return {{"holds", r.holds},
          {"N_Vbar", r.min_gram_eig},
          {"grid_min_gram_eig", r.grid_min_gram_eig},
          {"worst_omega", to_std(r.worst_omega)},
          {"kalman_min_sigma", r.kalman_min_sigma},
          {"kalman_min_rank", r.kalman_min_rank}};
}

json to_json(const EpsilonSchedule& s) {
  return {{"n", s.n},           {"d", s.d},         {"epsilon", s.epsilon}, {"delta", s.delta},
          {"kappa0", s.kappa0}, {"exponents", s.exponents}, {"values", s.values}};
}

json to_json(const Certificate& c) {
  return {{"c_min", c.c_min},
          {"certified", c.certified()},
          {"worst_rho", c.worst_rho},
          {"worst_omega", to_std(c.worst_omega)},
          {"min_weight_eig", c.min_weight_eig},
          {"weight_ratio", c.weight_ratio},
          {"max_weight_eig", c.max_weight_eig},
          {"corrector_bound", c.corrector_bound}};
}

std::vector<double> rho_grid_for_box(int d, int resolution, double box_length) {
  const double lowest = 2.0 * std::numbers::pi / box_length;
  const double highest = std::sqrt(static_cast<double>(d)) * std::numbers::pi * resolution / box_length;
  return default_rho_grid(std::min(1e-2, 0.5 * lowest), std::max(1e2, 2.0 * highest), 64);
}

// ---------------------------------------------------------------------------

CommandResult run_analyze(const SystemSpec& system, const AnalyzeOptions& options) {
  CommandResult res;
  json& r = res.report;
  r["system"] = system.name;
  r["d"] = system.d;
  r["n"] = system.n;
  r["n1"] = system.n1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto samples = neighborhood_samples(system, 100);
  r["symmetrizability"] = to_json(check_symmetrizability(system, samples));
  r["block_structure"] = to_json(check_block_structure(system, samples));
  const LinearizedSystem lin = linearize(system);
  r["kappa0"] = lin.kappa0_vacuous ? json(nullptr) : json(lin.kappa0);
  const EpsilonSchedule schedule = make_schedule(lin.n, lin.d, kappa_or_one(lin), options.epsilon);
  const SkReport sk = sk_condition(lin, schedule, options.omega_count);
  r["sk"] = to_json(sk);
  r["runtime_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json verdicts = json::object();
  if (options.require_sk) verdicts["sk"] = verdict(sk.holds);
  r["verdicts"] = verdicts;
  res.exit_code = exit_code_of(verdicts);
  return res;
}

CommandResult run_certify(const SystemSpec& system, const CertifyCommandOptions& options) {
  CommandResult res;
  json& r = res.report;
  const LinearizedSystem lin = linearize(system);
  const double k0 = kappa_or_one(lin);
  const auto rho = default_rho_grid(options.rho_min, options.rho_max, options.rho_count);
  const auto omega = sphere_grid(lin.d, options.omega_count);
  r["system"] = system.name;
  r["kappa0"] = lin.kappa0_vacuous ? json(nullptr) : json(lin.kappa0);
  const SkReport sk = sk_condition(lin, make_schedule(lin.n, lin.d, k0, 0.1), options.omega_count);
  r["sk"] = to_json(sk);
  r["N_Vbar"] = sk.min_gram_eig;
  bool certified = false;
  try {
    EpsilonSchedule schedule;
    Certificate cert;
    if (options.autotune) {
      AutotuneResult tuned = autotune_epsilon(lin, k0, rho, omega);
      schedule = tuned.schedule;
      cert = tuned.certificate;
      json trace = json::array();
      for (const auto& s : tuned.trace)
        trace.push_back({{"epsilon", s.epsilon}, {"c_min", s.c_min}, {"weight_ratio", s.weight_ratio},
                         {"corrector_bound", s.corrector_bound}, {"certified", s.certified}});
      r["trace"] = trace;
    } else {
      schedule = make_schedule(lin.n, lin.d, k0, options.epsilon);
      cert = certify_hypocoercivity(lin, schedule, rho, omega);
    }
    certified = cert.certified();
    r["c_min"] = cert.c_min;
    r["epsilon"] = schedule.epsilon;
    r["schedule"] = to_json(schedule);
    r["worst_omega"] = to_std(cert.worst_omega);
    r["worst_rho"] = cert.worst_rho;
    r["certificate"] = to_json(cert);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CannotCertify && e.code() != ErrorCode::WeightNotPositive) throw;
    r["error"] = std::string(to_string(e.code()));
    r["message"] = e.what();
    r["c_min"] = nullptr;
  }
  r["holds"] = certified && sk.holds;
  json verdicts = {{"certified", verdict(certified)}};
  if (options.require_sk) verdicts["sk"] = verdict(sk.holds);
  r["verdicts"] = verdicts;
  res.exit_code = exit_code_of(verdicts);
  return res;
}

FunctionalWeights tune_functional_weights(const LinearizedSystem& lin, const EpsilonSchedule& schedule,
                                          int d, int resolution, double box_length,
                                          std::uint64_t seed, double t_end, double every) {
  const DyadicRange range = dyadic_range(resolution, box_length);
  InitialDatum datum;
  datum.kind = InitialDatum::Kind::FourierRandomBand;
  datum.q_a = std::max(range.q_min, -3);
  datum.q_b = std::max(datum.q_a, std::min(range.q_max, 1));
  datum.seed = seed;
  const SpectralField z0 = make_initial_field(datum, d, lin.n, resolution, box_length);
  // The weighted functionals are linear in (eps, eps'), so one pass suffices.
  const LyapunovEvaluator ev(lin, schedule, d, resolution, box_length, {0.0, 0.0});
  std::vector<FunctionalSnapshot> snaps;
  ExactLinearFlow(lin, d, resolution, box_length)
      .evolve(z0, output_times(0.0, t_end, every), [&](double t, const SpectralField& z) {
        snaps.push_back(ev.evaluate(t, z, damped_mode_linear(z, lin)));
      });
  const double k0 = kappa_or_one(lin);
  FunctionalWeights w{1e-2 * k0, 1e-4 * k0 * k0};
  for (int attempt = 0; attempt < 40; ++attempt) {
    bool ok = true;
    double first = 0.0, prev = 0.0, prev_p = 0.0;
    for (std::size_t i = 0; i < snaps.size() && ok; ++i) {
      const auto& s = snaps[i];
      const double lt = s.Lgen + w.eps * s.W_mid + w.eps_prime * s.W_lo;
      const double lp = s.Lprime + w.eps * s.W_hi + w.eps_prime * s.W_mid;
      if (i == 0) {
        first = lt;
      } else {
        ok = lt <= prev + 1e-12 * first && lp <= prev_p * (1.0 + 1e-12);
      }
      prev = lt;
      prev_p = lp;
    }
    if (ok) return w;
    w.eps *= 0.5;
    w.eps_prime *= 0.5;
  }
  return w;
}

namespace {

std::vector<ColumnQuery> decay_queries(int d, const std::vector<double>& sigmas) {
  std::vector<ColumnQuery> q;
  for (double s : sigmas) {
    for (const char* target : {"Z", "Z2", "W"}) q.push_back({target, {s, 1.0, Band::Low, 0.0}});
  }
  q.push_back({"Z", {0.5 * d + 1.0, 1.0, Band::High, 0.0}});
  return q;
}

json fit_entry(const std::string& column, const std::function<DecayFit()>& run) {
  json e = {{"column", column}};
  try {
    const DecayFit f = run();
    e.update(to_json(f));
  } catch (const Error& err) {
    if (err.code() != ErrorCode::DegenerateWindow) throw;
    e["error"] = err.what();
  }
  return e;
}

std::string column_for(const std::string& target, double s) {
  return ColumnQuery{target, {s, 1.0, Band::Low, 0.0}}.key();
}

struct FitContext {
  int d;
  double sigma1;
  bool have_sigma1;
  std::vector<double> window;
};

// Power-law fits of the low-frequency columns against theory. The Z-low
// exponent is sharp for linear flows and is checked within 10%; the Z2 branch
// exponents are upper bounds on the norm and are checked as lower bounds on the
// fitted rate; the damped mode must gain at least 0.4 over Z.
void add_power_fits(const std::vector<double>& times, const std::vector<double>& sigmas,
                    const std::function<std::vector<double>(const std::string&, double)>& column,
                    const FitContext& ctx, json& fits, json& verdicts, bool enabled) {
  for (double s : sigmas) {
    std::optional<ExponentTable> theory;
    if (ctx.have_sigma1) {
      try {
        theory = theory_exponents(ctx.d, ctx.sigma1, s);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::OutOfRange) throw;
      }
    }
    const std::string tag = "s" + format_double(s);
    std::optional<double> fz, fz2, fw;
    for (const char* target : {"Z", "Z2", "W"}) {
      const std::string name = column_for(target, s);
      json e = fit_entry(name, [&] { return fit_decay_exponent(times, column(target, s), ctx.window); });
      const bool ok_fit = !e.contains("error");
      const std::string key = "fit:" + name;
      if (ok_fit) {
        const double x = e["exponent"].get<double>();
        (target[0] == 'W' ? fw : target[1] == '2' ? fz2 : fz) = x;
      }
      if (theory && std::string(target) == "Z") {
        e["theory"] = theory->Z_low;
        e["branch"] = "(sigma+sigma1)/2";
        if (ok_fit) {
          const double rel = std::abs(e["exponent"].get<double>() - theory->Z_low) / std::abs(theory->Z_low);
          e["rel_error"] = rel;
          if (enabled) verdicts[key] = verdict(rel <= 0.10);
        } else if (enabled) {
          verdicts[key] = "fail";
        }
      } else if (theory && std::string(target) == "Z2") {
        json branches = json::array();
        double weakest = std::numeric_limits<double>::infinity();
        for (const auto& b : theory->Z2_low) {
          branches.push_back({{"branch", b.name}, {"theory", b.exponent}});
          weakest = std::min(weakest, b.exponent);
        }
        e["branches"] = branches;
        if (!theory->Z2_low.empty()) {
          e["theory"] = weakest;
          e["branch"] = theory->Z2_low.size() == 1 ? theory->Z2_low[0].name : std::string("both");
          if (ok_fit)
            e["rel_error"] = std::abs(e["exponent"].get<double>() - weakest) / std::abs(weakest);
          if (enabled)
            verdicts[key] = verdict(ok_fit && e["exponent"].get<double>() >= 0.9 * weakest);
        }
      }
      fits.push_back(e);
    }
    if (theory && enabled) {
      verdicts["gain:W_" + tag] = verdict(fz && fw && *fw - *fz >= 0.4);
      verdicts["gain:Z2_" + tag] = verdict(fz && fz2 && *fz2 - *fz >= 0.4);
    }
  }
}

}  // namespace

CommandResult run_decay(const RunConfig& config, const RunOptions& options) {
  CommandResult res;
  json& r = res.report;
  r["config"] = config_json(config);
  r["config_hash"] = hex(fnv1a(r["config"].dump()));
  const SystemSpec system = resolve_system(config.system, config.gamma, config.lambda);
  const LinearizedSystem lin = linearize(system);
  const int d = lin.d;
  const SkReport sk = sk_condition(lin, make_schedule(lin.n, d, kappa_or_one(lin), 0.1));
  r["sk"] = to_json(sk);
  json verdicts = json::object();
  if (options.require_sk) verdicts["sk"] = verdict(sk.holds);

  // Equal spacing lets the oracle reuse one propagator per node.
  const std::vector<double> times = config.times();
  const bool gaussian = config.profile == "gaussian";
  if (!gaussian && config.profile != "high-frequency")
    throw Error(ErrorCode::InvalidInput, "profile must be \"gaussian\" or \"high-frequency\"");
  OracleOptions oo;
  oo.sigmas = config.sigmas;
  // Components of the datum direction; default all ones, normalized.
  Vector v = Vector::Ones(lin.n);
  if (!config.datum.components.empty()) {
    if (config.datum.components.size() != static_cast<std::size_t>(lin.n))
      throw Error(ErrorCode::DimensionMismatch, "component selector has the wrong length");
    v = Eigen::Map<const Vector>(config.datum.components.data(), lin.n);
  }
  v /= v.norm();
  const auto started = std::chrono::steady_clock::now();
  const OracleTable table = radial_oracle_decay(
      lin, gaussian ? std::function<double(double)>(gaussian_profile) : high_frequency_profile, v,
      times, oo);
  r["oracle_runtime_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  std::vector<ColumnQuery> queries = decay_queries(d, config.sigmas);
  std::vector<std::string> cols;
  for (const auto& q : queries) cols.push_back(q.key());
  TrajectoryRecord record(cols);
  for (std::size_t i = 0; i < table.times.size(); ++i) {
    std::vector<double> row;
    for (std::size_t s = 0; s < config.sigmas.size(); ++s) {
      row.push_back(table.Z_low[s][i]);
      row.push_back(table.Z2_low[s][i]);
      row.push_back(table.W_low[s][i]);
    }
    row.push_back(table.Z_high[i]);
    record.append(table.times[i], row);
  }

  const std::vector<double> window = window_or_default(times, config.fit_window);
  json fits = json::array();
  if (gaussian) {
    // A Gaussian datum belongs to the low-frequency space with sigma1 = d/2.
    FitContext ctx{d, 0.5 * d, true, window};
    r["sigma1"] = ctx.sigma1;
    add_power_fits(record.times(), config.sigmas,
                   [&](const std::string& target, double s) { return record.column(column_for(target, s)); },
                   ctx, fits, verdicts, options.verify_decay);
  } else {
    const std::string high = queries.back().key();
    json e = fit_entry(high, [&] { return fit_exponential_rate(record.times(), record.column(high), window); });
    e["kind"] = "exponential";
    if (options.verify_decay)
      verdicts["fit:" + high] = verdict(!e.contains("error") && e["r2"].get<double>() >= 0.99 &&
                                        e["exponent"].get<double>() > 0.0);
    fits.push_back(e);
  }
  r["fits"] = fits;
  r["verdicts"] = verdicts;
  res.exit_code = exit_code_of(verdicts);
  if (!options.out.empty()) {
    prepare_dir(options.out);
    record.write_csv(options.out / "trajectory.csv");
    write_text(options.out / "report.json", r.dump(2) + "\n");
  }
  return res;
}

CommandResult run_simulate(const RunConfig& config_in, const RunOptions& options) {
  if (config_in.mode == RunConfig::Mode::LinearOracle) return run_decay(config_in, options);
  RunConfig config = config_in;
  if (options.seed) config.datum.seed = *options.seed;
  CommandResult res;
  json& r = res.report;
  r["config"] = config_json(config);
  r["config_hash"] = hex(fnv1a(r["config"].dump()));

  const SystemSpec system = resolve_system(config.system, config.gamma, config.lambda);
  if (system.d != config.d)
    throw Error(ErrorCode::DimensionMismatch, "config d = " + std::to_string(config.d) +
                                                  " but the system has d = " + std::to_string(system.d));
  const LinearizedSystem lin = linearize(system);
  const int d = lin.d, N = config.resolution;
  const double L = config.box_length;
  const double k0 = kappa_or_one(lin);
  r["kappa0"] = lin.kappa0_vacuous ? json(nullptr) : json(lin.kappa0);

  json verdicts = json::object();
  EpsilonSchedule schedule;
  const auto rho = rho_grid_for_box(d, N, L);
  const auto omega = sphere_grid(d, d == 3 ? 16 : 64);
  if (config.epsilon > 0.0) {
    schedule = make_schedule(lin.n, d, k0, config.epsilon);
    try {
      const Certificate cert = certify_hypocoercivity(lin, schedule, rho, omega);
      r["c_min"] = cert.c_min;
      r["certificate"] = to_json(cert);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::WeightNotPositive) throw;
      r["c_min"] = nullptr;
      r["certificate_error"] = e.what();
    }
  } else {
    try {
      const AutotuneResult tuned = autotune_epsilon(lin, k0, rho, omega);
      schedule = tuned.schedule;
      r["c_min"] = tuned.certificate.c_min;
      r["certificate"] = to_json(tuned.certificate);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CannotCertify) throw;
      schedule = make_schedule(lin.n, d, k0, 0.1);
      r["c_min"] = nullptr;
      r["certificate_error"] = e.what();
    }
  }
  r["schedule"] = to_json(schedule);
  const SkReport sk = sk_condition(lin, schedule);
  r["sk"] = to_json(sk);
  if (options.require_sk) verdicts["sk"] = verdict(sk.holds);
  if (options.require_sk && !sk.holds) {
    r["verdicts"] = verdicts;
    res.exit_code = 1;
    if (!options.out.empty()) {
      prepare_dir(options.out);
      write_text(options.out / "report.json", r.dump(2) + "\n");
    }
    return res;
  }

  const std::vector<double> times = config.times();
  FunctionalWeights weights =
      tune_functional_weights(lin, schedule, d, N, L, config.datum.seed + 1,
                              std::min(50.0, std::max(config.t_end, 1.0)),
                              std::min(0.5, std::max(config.t_end, 1.0) / 20.0));
  const LyapunovEvaluator evaluator(lin, schedule, d, N, L, weights);
  r["functional_weights"] = {{"eps", evaluator.eps()}, {"eps_prime", evaluator.eps_prime()}};

  std::vector<ColumnQuery> queries = decay_queries(d, config.sigmas);
  TrajectoryRecorder recorder(lin, evaluator, queries);
  const SpectralField z0 = make_initial_field(config.datum, d, lin.n, N, L);
  const HybridNorms hyb_gen = hybrid_threshold_norms(z0, 0.5 * d - 1.0, 0.5 * d + 1.0);
  const HybridNorms hyb_ref = hybrid_threshold_norms(z0, 0.5 * d, 0.5 * d + 1.0);
  r["initial_hybrid_norm"] = {{"general", hyb_gen.sum()}, {"refined", hyb_ref.sum()}};

  if (!config.dump_dir.empty()) prepare_dir(config.dump_dir);
  std::size_t visit_index = 0;
  auto dump = [&](const SpectralField& z) {
    if (config.dump_dir.empty()) return;
    std::ostringstream name;
    name << "z_" << std::setw(6) << std::setfill('0') << visit_index << ".lpf1";
    write_lpf1(std::filesystem::path(config.dump_dir) / name.str(), z);
  };

  bool finite = true;
  const bool track_mass = system.name.rfind("euler", 0) == 0 && config.gamma == 2.0;
  double mass0 = 0.0, mass_drift = 0.0;
  const auto started = std::chrono::steady_clock::now();
  if (config.mode == RunConfig::Mode::LinearExact) {
    ExactLinearFlow(lin, d, N, L).evolve(z0, times, [&](double t, const SpectralField& z) {
      finite = finite && z.coeffs().allFinite();
      recorder.add(t, z, damped_mode_linear(z, lin));
      dump(z);
      ++visit_index;
    });
  } else {
    IntegratorOptions io;
    io.dt = config.dt;
    io.cfl = config.cfl;
    io.dealias = config.dealias == "two-thirds";
    const PseudospectralIntegrator integrator(system, N, L, io);
    std::vector<double> after;
    double t0 = 0.0;
    const Matrix state0 = integrator.state(z0);
    if (!times.empty() && times.front() > 0.0) {
      recorder.add(0.0, z0, damped_mode(z0, system, lin), &system, &state0);
      after = times;
    } else if (!times.empty()) {
      t0 = times.front();
      recorder.add(t0, z0, damped_mode(z0, system, lin), &system, &state0);
      after.assign(times.begin() + 1, times.end());
    }
    mass0 = z0.coeffs()(0, 0).real();
    try {
      const IntegratorStats stats = integrator.integrate(z0, t0, after, [&](double t, const SpectralField& z) {
        finite = finite && z.coeffs().allFinite();
        const Matrix state = integrator.state(z);
        recorder.add(t, z, damped_mode(z, system, lin), &system, &state);
        if (track_mass) mass_drift = std::max(mass_drift, std::abs(z.coeffs()(0, 0).real() - mass0));
        dump(z);
        ++visit_index;
      });
      r["integrator"] = {{"steps", stats.steps}, {"rejected", stats.rejected}, {"dt", stats.dt_used}};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BlowupSuspected && e.code() != ErrorCode::CoefficientSingular) throw;
      r["integrator_error"] = e.what();
      finite = false;
    }
  }
  r["runtime_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const TrajectoryRecord& rec = recorder.record();
  verdicts["finite"] = verdict(finite);
  const auto& snaps = recorder.snapshots();
  if (config.mode == RunConfig::Mode::LinearExact) {
    bool mono = true;
    for (std::size_t i = 1; i < snaps.size(); ++i)
      mono = mono && snaps[i].Ltilde <= snaps[i - 1].Ltilde + 1e-10 * snaps[0].Ltilde;
    verdicts["ltilde_monotone"] = verdict(mono);
  } else {
    bool mono = true;
    for (std::size_t i = 1; i < snaps.size(); ++i)
      mono = mono && snaps[i].Ltildeprime <= snaps[i - 1].Ltildeprime * (1.0 + 1e-8);
    verdicts["ltildeprime_monotone"] = verdict(mono);
    const auto& run = recorder.running();
    const double sup = run.Zcal_prime.empty()
                           ? 0.0
                           : *std::max_element(run.Zcal_prime.begin(), run.Zcal_prime.end());
    r["Zcal_prime"] = {{"initial", run.Zcal_prime0}, {"sup", sup}};
    verdicts["zprime_bounded"] = verdict(sup <= 10.0 * run.Zcal_prime0);
    if (track_mass) {
      r["mass_drift"] = mass_drift;
      verdicts["mass_conserved"] = verdict(mass_drift <= 1e-12 * std::max(1.0, std::abs(mass0)));
    }
  }
  {
    const auto& run = recorder.running();
    const double sup = run.Zcal.empty() ? 0.0 : *std::max_element(run.Zcal.begin(), run.Zcal.end());
    r["Zcal"] = {{"initial", run.Zcal0}, {"sup", sup}};
  }

  json fits = json::array();
  if (options.verify_decay) {
    FitContext ctx{d, 0.0, false, window_or_default(rec.times(), config.fit_window)};
    if (config.datum.kind == InitialDatum::Kind::GaussianBump) {
      ctx.sigma1 = 0.5 * d;
      ctx.have_sigma1 = true;
    }
    add_power_fits(rec.times(), config.sigmas,
                   [&](const std::string& target, double s) { return rec.column(column_for(target, s)); },
                   ctx, fits, verdicts, true);
  }
  r["fits"] = fits;
  r["verdicts"] = verdicts;
  res.exit_code = exit_code_of(verdicts);
  if (!options.out.empty()) {
    prepare_dir(options.out);
    rec.write_csv(options.out / "trajectory.csv");
    write_text(options.out / "report.json", r.dump(2) + "\n");
  }
  return res;
}

CommandResult run_lp_norm(const SpectralField& field, const BesovQuery& query) {
  CommandResult res;
  const BlockNorms blocks = block_norms(field);
  json b = json::array();
  for (int q = blocks.range.q_min; q <= blocks.range.q_max; ++q)
    b.push_back({{"q", q}, {"norm", blocks.at(q)}});
  res.report = {{"query", query.key()},  {"s", query.s},
                {"r", std::isinf(query.r) ? json("inf") : json(query.r)},
                {"band", std::string(to_string(query.band))}, {"threshold", query.threshold},
                {"value", besov_from_blocks(blocks, query)}, {"blocks", b}};
  return res;
}

}  // namespace hypocoax
