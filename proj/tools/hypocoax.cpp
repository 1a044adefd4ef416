#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "hypocoax/analysis.hpp"
#include "hypocoax/error.hpp"

namespace {

using namespace hypocoax;
using json = nlohmann::json;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A registry key, a linear system file (keys "A" and "Lmat"), or a run
// config naming a system.
SystemSpec system_from_config(const std::string& config) {
  const auto keys = builtin_keys();
  if (std::find(keys.begin(), keys.end(), config) != keys.end()) return builtin_system(config);
  const std::string text = slurp(config);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, config + ": " + e.what());
  }
  if (j.contains("Lmat")) return linear_system_from_json(text);
  const RunConfig rc = run_config_from_json(text);
  return resolve_system(rc.system, rc.gamma, rc.lambda);
}

void emit(const CommandResult& r, const std::string& out) {
  std::cout << r.report.dump(2) << "\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream f(std::filesystem::path(out) / "report.json");
    if (!f) throw Error(ErrorCode::Io, "cannot write report to " + out);
    f << r.report.dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypocoercivity analysis for partially dissipative hyperbolic systems"};
  app.require_subcommand(1);

  std::string config, out, system_key, band = "all";
  bool require_sk = false, verify_decay = false, autotune = false;
  std::uint64_t seed = 0;
  AnalyzeOptions analyze_opts;
  CertifyCommandOptions certify_opts;
  double s = 0.0, threshold = 0.0;
  std::string r_text = "1";

  auto* analyze = app.add_subcommand("analyze", "structure checks and the SK condition");
  analyze->add_option("--config", config, "registry key, system JSON or run config")->required();
  analyze->add_option("--out", out, "directory for report.json");
  analyze->add_flag("--require-sk", require_sk, "exit 1 unless SK holds");
  analyze->add_option("--omega-count", analyze_opts.omega_count, "directions on the sphere grid");
  analyze->add_option("--epsilon", analyze_opts.epsilon, "schedule base for the Gram form");

  auto* certify = app.add_subcommand("certify", "hypocoercivity certificate over a rho-omega grid");
  certify->add_option("--config", config, "registry key, system JSON or run config")->required();
  certify->add_option("--out", out, "directory for report.json");
  certify->add_flag("--require-sk", require_sk, "exit 1 unless SK holds");
  certify->add_option("--epsilon", certify_opts.epsilon, "schedule base");
  certify->add_flag("--autotune", autotune, "search for the largest certifying epsilon");
  certify->add_option("--rho-min", certify_opts.rho_min);
  certify->add_option("--rho-max", certify_opts.rho_max);
  certify->add_option("--rho-count", certify_opts.rho_count);
  certify->add_option("--omega-count", certify_opts.omega_count);

  auto add_run = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "run config JSON")->required();
    cmd->add_option("--out", out, "directory for trajectory.csv and report.json");
    cmd->add_flag("--require-sk", require_sk, "exit 1 unless SK holds");
    cmd->add_flag("--verify-decay", verify_decay, "fit decay exponents and check them");
    cmd->add_option("--seed", seed, "seed of random initial data");
  };
  auto* simulate = app.add_subcommand("simulate", "exact linear or nonlinear run");
  add_run(simulate);
  auto* decay = app.add_subcommand("decay", "continuous-frequency linear decay");
  add_run(decay);

  auto* lp = app.add_subcommand("lp-norm", "Besov norm of an LPF1 field");
  lp->add_option("--config", config, "LPF1 field file")->required();
  lp->add_option("--s", s, "regularity");
  lp->add_option("--r", r_text, "summability: 1 or inf");
  lp->add_option("--band", band, "all, low, high, low-lambda or high-lambda");
  lp->add_option("--threshold", threshold, "band split");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      analyze_opts.require_sk = require_sk;
      const auto r = run_analyze(system_from_config(config), analyze_opts);
      emit(r, out);
      return r.exit_code;
    }
    if (*certify) {
      certify_opts.require_sk = require_sk;
      certify_opts.autotune = autotune;
      const auto r = run_certify(system_from_config(config), certify_opts);
      emit(r, out);
      return r.exit_code;
    }
    if (*simulate || *decay) {
      const RunConfig rc = load_run_config(config);
      RunOptions ro;
      ro.out = out;
      ro.require_sk = require_sk;
      ro.verify_decay = verify_decay;
      const CLI::App* cmd = *simulate ? simulate : decay;
      if (cmd->count("--seed")) ro.seed = seed;
      const auto r = *simulate ? run_simulate(rc, ro) : run_decay(rc, ro);
      std::cout << r.report.dump(2) << "\n";
      return r.exit_code;
    }
    if (*lp) {
      BesovQuery q;
      q.s = s;
      q.r = r_text == "inf" ? std::numeric_limits<double>::infinity() : std::stod(r_text);
      if (!(q.r == 1.0 || std::isinf(q.r))) throw Error(ErrorCode::InvalidInput, "--r must be 1 or inf");
      q.band = parse_band(band);
      q.threshold = threshold;
      const auto r = run_lp_norm(read_lpf1(config), q);
      emit(r, out);
      return r.exit_code;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
