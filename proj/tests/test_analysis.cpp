#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hypocoax/analysis.hpp"
#include "hypocoax/euler.hpp"
#include "support.hpp"

using namespace hypocoax;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Io;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hypocoax_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

RunConfig small_linear_run() {
  RunConfig c;
  c.system = "euler-damped-2d";
  c.mode = RunConfig::Mode::LinearExact;
  c.d = 2;
  c.resolution = 16;
  c.box_length = kTwoPi * 4;
  c.t_end = 5.0;
  c.output_every = 0.5;
  c.datum.kind = InitialDatum::Kind::FourierRandomBand;
  c.datum.q_a = -2;
  c.datum.q_b = 0;
  c.datum.seed = 5;
  return c;
}

}  // namespace

class PowerLaw : public ::testing::TestWithParam<double> {};

TEST_P(PowerLaw, RecoversExponent) {
  const double a = GetParam();
  std::vector<double> t, v;
  for (int i = 0; i <= 200; ++i) {
    t.push_back(0.5 * i);
    v.push_back(3.0 * std::pow(1.0 + t.back() * t.back(), -0.5 * a));
  }
  const DecayFit f = fit_decay_exponent(t, v, {10.0, 100.0});
  EXPECT_NEAR(f.exponent, a, 1e-6);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-6);
  EXPECT_GE(f.r2, 1.0 - 1e-12);
  EXPECT_TRUE(f.reliable);
  EXPECT_EQ(f.samples, 181);
}

INSTANTIATE_TEST_SUITE_P(Exponents, PowerLaw, ::testing::Values(0.0, 0.25, 0.5, 1.0, 2.0));

TEST(Fits, DefaultWindowIsLastDecade) {
  std::vector<double> t, v;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(i);
    v.push_back(std::pow(1.0 + i * i, -0.75));
  }
  const DecayFit f = fit_decay_exponent(t, v);
  EXPECT_EQ(f.t_a, 10.0);
  EXPECT_EQ(f.t_b, 100.0);
  EXPECT_NEAR(f.exponent, 1.5, 1e-9);
}

TEST(Fits, DegenerateWindows) {
  std::vector<double> t, v;
  for (int i = 0; i < 20; ++i) {
    t.push_back(i);
    v.push_back(1.0 / (1.0 + i));
  }
  EXPECT_EQ(code_of([&] { fit_decay_exponent(t, v, {0.0, 8.0}); }), ErrorCode::DegenerateWindow);
  std::vector<double> w = v;
  w[15] = 0.0;
  EXPECT_EQ(code_of([&] { fit_decay_exponent(t, w, {0.0, 19.0}); }), ErrorCode::DegenerateWindow);
  EXPECT_EQ(code_of([&] { fit_decay_exponent(t, v, {5.0, 1.0}); }), ErrorCode::InvalidInput);
}

TEST(Fits, ExponentialRate) {
  std::vector<double> t, v;
  for (int i = 0; i <= 50; ++i) {
    t.push_back(i);
    v.push_back(2.0 * std::exp(-0.3 * i));
  }
  const DecayFit f = fit_exponential_rate(t, v, {5.0, 50.0});
  EXPECT_NEAR(f.exponent, 0.3, 1e-12);
  EXPECT_GE(f.r2, 1.0 - 1e-12);
}

TEST(Theory, GeneralVariant) {
  const ExponentTable a = theory_exponents(2, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(a.Z_low, 0.5);
  EXPECT_DOUBLE_EQ(a.alpha1, 0.5);
  EXPECT_DOUBLE_EQ(a.Z_high, 1.0);
  ASSERT_EQ(a.Z2_low.size(), 1u);
  EXPECT_DOUBLE_EQ(a.Z2_low[0].exponent, 0.5);

  const ExponentTable b = theory_exponents(2, 1.0, -0.5);
  EXPECT_DOUBLE_EQ(b.Z_low, 0.25);
  ASSERT_EQ(b.Z2_low.size(), 1u);
  EXPECT_DOUBLE_EQ(b.Z2_low[0].exponent, 0.5);

  // d = 3, sigma = -1 lies in both branches.
  const ExponentTable c = theory_exponents(3, 1.5, -1.0);
  EXPECT_DOUBLE_EQ(c.Z_low, 0.25);
  EXPECT_DOUBLE_EQ(c.alpha1, 1.0);
  ASSERT_EQ(c.Z2_low.size(), 2u);
  EXPECT_DOUBLE_EQ(c.Z2_low[0].exponent, 0.75);
  EXPECT_DOUBLE_EQ(c.Z2_low[1].exponent, 1.0);

  // d = 3, sigma = 0.25 lies above the first branch.
  const ExponentTable e = theory_exponents(3, 1.5, 0.25);
  ASSERT_EQ(e.Z2_low.size(), 1u);
  EXPECT_DOUBLE_EQ(e.Z2_low[0].exponent, 1.0);
}

TEST(Theory, RefinedVariantOverlap) {
  const ExponentTable t = theory_exponents(2, 1.0, 0.0, TheoremVariant::Refined);
  EXPECT_DOUBLE_EQ(t.alpha1, 1.0);
  EXPECT_DOUBLE_EQ(t.Z_low, 0.5);
  ASSERT_EQ(t.Z2_low.size(), 2u);
  EXPECT_DOUBLE_EQ(t.Z2_low[0].exponent, 1.0);
  EXPECT_DOUBLE_EQ(t.Z2_low[1].exponent, 1.0);
  EXPECT_DOUBLE_EQ(t.Z_high, 2.0);
}

TEST(Theory, OutOfRangeNamesInequality) {
  auto message = [](auto f) -> std::string {
    try {
      f();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::OutOfRange);
      return e.what();
    }
    return "";
  };
  EXPECT_NE(message([] { theory_exponents(2, 1.0, 0.5); }).find("sigma <= d/2 - 1"), std::string::npos);
  EXPECT_NE(message([] { theory_exponents(2, 1.0, -1.0); }).find("-sigma1 < sigma"), std::string::npos);
  EXPECT_NE(message([] { theory_exponents(2, 1.5, 0.0); }).find("sigma1 <= d/2"), std::string::npos);
  EXPECT_NE(message([] { theory_exponents(2, 1.0, 1.5, TheoremVariant::Refined); }).find("sigma <= d/2"),
            std::string::npos);
}

TEST(Record, Invariants) {
  TrajectoryRecord r({"a", "b"});
  r.append(0.0, {1.0, 2.0});
  r.append(0.5, {0.5, 1.0 / 3.0});
  EXPECT_EQ(code_of([&] { r.append(1.0, {1.0}); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { r.append(0.5, {1.0, 1.0}); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([&] { r.column("c"); }), ErrorCode::InvalidInput);
  EXPECT_EQ(r.size(), 2u);
  EXPECT_EQ(r.column("b")[1], 1.0 / 3.0);
  const std::string csv = r.csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,a,b");
  // 17 significant digits round-trip exactly.
  const std::string last = csv.substr(csv.rfind(',', csv.size() - 2) + 1);
  EXPECT_EQ(std::stod(last), 1.0 / 3.0);
}

TEST(Recorder, ColumnsMatchDirectNorms) {
  const LinearizedSystem lin = linearize(make_euler_system(2));
  const auto schedule = make_schedule(3, 2, lin.kappa0, 0.2);
  const int N = 32;
  const double L = kTwoPi * 8;
  const LyapunovEvaluator ev(lin, schedule, 2, N, L);
  std::vector<ColumnQuery> queries{{"Z", {0.0, 1.0, Band::Low, 0.0}},
                                   {"Z2", {1.0, 1.0, Band::Low, 0.0}},
                                   {"W", {0.0, 1.0, Band::Low, 0.0}},
                                   {"Z1", {2.0, 1.0, Band::High, 0.0}}};
  TrajectoryRecorder rec(lin, ev, queries);
  const SpectralField z = testing_support::single_mode(2, 3, N, L, {3, 1}, 1, 0.4);
  const SpectralField w = damped_mode_linear(z, lin);
  rec.add(0.0, z, w);
  const auto& r = rec.record();
  const std::vector<std::string> expect_cols{"Z_s0_r1_low0", "Z2_s1_r1_low0", "W_s0_r1_low0",
                                             "Z1_s2_r1_high0", "L", "Ltilde", "Lprime",
                                             "Ltildeprime", "Htilde"};
  EXPECT_EQ(r.columns(), expect_cols);
  EXPECT_DOUBLE_EQ(r.column("Z_s0_r1_low0")[0], besov_norm(z, queries[0].query));
  EXPECT_DOUBLE_EQ(r.column("Z2_s1_r1_low0")[0], besov_norm(z.component_range(1, 2), queries[1].query));
  EXPECT_DOUBLE_EQ(r.column("W_s0_r1_low0")[0], besov_norm(w, queries[2].query));
  EXPECT_EQ(r.column("Z1_s2_r1_high0")[0], 0.0);  // the mode is in the velocity only
  // Closed form: a cos mode of amplitude a has block norm sqrt(vol/2) a phi.
  const double xi = kTwoPi / L * std::sqrt(10.0);
  double expect = 0.0;
  for (int q = -8; q <= 0; ++q) expect += std::sqrt(L * L / 2.0) * 0.4 * testing_support::ref_phi(std::ldexp(xi, -q));
  EXPECT_NEAR(r.column("Z_s0_r1_low0")[0], expect, 1e-12 * expect);
  EXPECT_EQ(code_of([&] { TrajectoryRecorder(lin, ev, {{"V", {}}}); }), ErrorCode::InvalidInput);
}

TEST(Commands, AnalyzeRequireSk) {
  const CommandResult ok = run_analyze(make_euler_system(2), {64, 0.1, true});
  EXPECT_EQ(ok.exit_code, 0);
  EXPECT_EQ(ok.report["verdicts"]["sk"], "pass");
  EXPECT_TRUE(ok.report["block_structure"]["passed"].get<bool>());

  const SystemSpec neg = linear_system_from_json(
      R"({"d":1,"n":2,"n1":1,"A":[[[1,0],[0,1]],[[1,0],[0,1]]],"Lmat":[[0,0],[0,1]],"equilibrium":[0,0]})");
  const CommandResult bad = run_analyze(neg, {64, 0.1, true});
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_EQ(bad.report["verdicts"]["sk"], "fail");
  EXPECT_EQ(bad.report["sk"]["kalman_min_rank"], 1);
  EXPECT_EQ(run_analyze(neg, {64, 0.1, false}).exit_code, 0);
}

TEST(Commands, CertifyReportsCannotCertify) {
  const SystemSpec neg = linear_system_from_json(
      R"({"d":1,"n":2,"n1":1,"A":[[[1,0],[0,1]],[[1,0],[0,1]]],"Lmat":[[0,0],[0,1]],"equilibrium":[0,0]})");
  CertifyCommandOptions opt;
  opt.autotune = true;
  const CommandResult r = run_certify(neg, opt);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.report["error"], "CannotCertify");
  EXPECT_TRUE(r.report["c_min"].is_null());
  const CommandResult e = run_certify(make_euler_system(1), opt);
  EXPECT_EQ(e.exit_code, 0);
  EXPECT_GT(e.report["c_min"].get<double>(), 0.0);
}

TEST(Commands, LinearRunIsDeterministicAndWritesCsv) {
  const RunConfig c = small_linear_run();
  const auto a = fresh_dir("run_a"), b = fresh_dir("run_b");
  RunOptions oa, ob;
  oa.out = a;
  ob.out = b;
  const CommandResult ra = run_simulate(c, oa);
  const CommandResult rb = run_simulate(c, ob);
  EXPECT_EQ(ra.exit_code, 0) << ra.report["verdicts"].dump();
  const std::string csv = slurp(a / "trajectory.csv");
  EXPECT_EQ(csv, slurp(b / "trajectory.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "t,Z_s0_r1_low0,Z2_s0_r1_low0,W_s0_r1_low0,Z_s2_r1_high0,L,Ltilde,Lprime,Ltildeprime,Htilde");
  EXPECT_EQ(ra.report["config_hash"], rb.report["config_hash"]);
  EXPECT_TRUE(std::filesystem::exists(a / "report.json"));
  for (const char* k : {"finite", "ltilde_monotone"}) EXPECT_EQ(ra.report["verdicts"][k], "pass");
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(Commands, ZeroDatumRun) {
  RunConfig c = small_linear_run();
  c.datum.amplitude = 0.0;
  const CommandResult r = run_simulate(c);
  EXPECT_EQ(r.exit_code, 0) << r.report["verdicts"].dump();
  EXPECT_EQ(r.report["Zcal"]["sup"].get<double>(), 0.0);
  EXPECT_EQ(r.report["verdicts"]["ltilde_monotone"], "pass");
}

TEST(Commands, RequireSkStopsBeforeIntegrating) {
  const auto dir = fresh_dir("neg_system");
  std::filesystem::create_directories(dir);
  const auto sys = dir / "neg.json";
  std::ofstream(sys) << R"({"d":1,"n":2,"n1":1,"A":[[[1,0],[0,1]],[[1,0],[0,1]]],"Lmat":[[0,0],[0,1]],"equilibrium":[0,0]})";
  RunConfig c = small_linear_run();
  c.system = sys.string();
  c.d = 1;
  RunOptions o;
  o.require_sk = true;
  const CommandResult r = run_simulate(c, o);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.report["verdicts"]["sk"], "fail");
  EXPECT_FALSE(r.report.contains("Zcal"));
  std::filesystem::remove_all(dir);
}

TEST(Commands, DecayWithoutVerificationExitsZero) {
  RunConfig c;
  c.system = "euler-damped-2d";
  c.mode = RunConfig::Mode::LinearOracle;
  c.d = 2;
  c.t_end = 4.0;
  c.output_every = 1.0;  // too few samples for the default window
  const CommandResult r = run_decay(c);
  EXPECT_EQ(r.exit_code, 0);
  ASSERT_TRUE(r.report["fits"].is_array());
  for (const auto& f : r.report["fits"]) EXPECT_TRUE(f.contains("error"));
  RunOptions o;
  o.verify_decay = true;
  EXPECT_EQ(run_decay(c, o).exit_code, 1);
}

TEST(Commands, LpNormOfSingleMode) {
  const SpectralField f = testing_support::single_mode(1, 1, 32, kTwoPi * 4, {3}, 0, 1.0);
  const CommandResult r = run_lp_norm(f, {0.0, 1.0});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_DOUBLE_EQ(r.report["value"].get<double>(), besov_norm(f, {0.0, 1.0}));
}
