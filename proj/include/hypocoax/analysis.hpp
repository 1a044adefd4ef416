#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hypocoax/lp.hpp"
#include "hypocoax/lyapunov.hpp"
#include "hypocoax/simulator.hpp"
#include "hypocoax/stability.hpp"
#include "hypocoax/system_model.hpp"

namespace hypocoax {

/// Time series with a fixed column order. Rows are complete by construction.
class TrajectoryRecord {
 public:
  explicit TrajectoryRecord(std::vector<std::string> columns = {});

  void append(double t, const std::vector<double>& values);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<double>& times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  std::vector<double> column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;

  nlohmann::json metadata = nlohmann::json::object();

 private:
  std::vector<std::string> columns_;
  std::vector<double> times_;
  std::vector<std::vector<double>> rows_;
};

/// A Besov query applied to one part of the state: "Z", "Z1", "Z2" or "W".
struct ColumnQuery {
  std::string target = "Z";
  BesovQuery query;

  std::string key() const;
};

/// Running sup/integral quantities of the two global theorems, evaluated on
/// the output grid (trapezoidal time integrals).
struct RunningNorms {
  std::vector<double> Zcal;        // general setting
  std::vector<double> Zcal_prime;  // refined setting
  double Zcal0 = 0.0;
  double Zcal_prime0 = 0.0;
};

/// Evaluates the queries and the functionals at each output and appends a row.
class TrajectoryRecorder {
 public:
  /// `split` is the low/high threshold: 2^q <= split is low.
  TrajectoryRecorder(const LinearizedSystem& lin, const LyapunovEvaluator& evaluator,
                     std::vector<ColumnQuery> queries, double split = 1.0);

  void add(double t, const SpectralField& Z, const SpectralField& W,
           const SystemSpec* system = nullptr, const Matrix* state = nullptr);

  const TrajectoryRecord& record() const { return record_; }
  TrajectoryRecord& record() { return record_; }
  const RunningNorms& running() const { return running_; }
  const std::vector<FunctionalSnapshot>& snapshots() const { return snapshots_; }

 private:
  LinearizedSystem lin_;
  const LyapunovEvaluator& evaluator_;
  std::vector<ColumnQuery> queries_;
  double split_;
  TrajectoryRecord record_;
  RunningNorms running_;
  std::vector<FunctionalSnapshot> snapshots_;
  // integrands at the previous output for the trapezoidal sums
  double t_prev_ = 0.0;
  std::vector<double> prev_;
  std::vector<double> integral_;
  double sup_lo_ = 0.0, sup_hi_ = 0.0, sup_lo_prime_ = 0.0;
};

/// Evaluates stored snapshots; convenience wrapper over TrajectoryRecorder.
TrajectoryRecord record_trajectory(const std::vector<std::pair<double, SpectralField>>& run,
                                   const LinearizedSystem& lin, const LyapunovEvaluator& evaluator,
                                   const std::vector<ColumnQuery>& queries);

struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double t_a = 0.0;
  double t_b = 0.0;
  int samples = 0;
  bool reliable = false;  // r2 >= 0.98
};

/// Least squares of log(value) against log<t>, <t> = sqrt(1 + t^2); the
/// exponent is minus the slope. Empty window means the last decade.
DecayFit fit_decay_exponent(const std::vector<double>& times, const std::vector<double>& values,
                            std::vector<double> window = {});
DecayFit fit_decay_exponent(const TrajectoryRecord& record, std::string_view column,
                            std::vector<double> window = {});
/// Least squares of log(value) against t; the exponent is the decay rate.
DecayFit fit_exponential_rate(const std::vector<double>& times, const std::vector<double>& values,
                              std::vector<double> window = {});

enum class TheoremVariant { General, Refined };

struct TheoryBranch {
  std::string name;
  double exponent = 0.0;
};

struct ExponentTable {
  TheoremVariant variant = TheoremVariant::General;
  double alpha1 = 0.0;
  double Z_low = 0.0;
  std::vector<TheoryBranch> Z2_low;  // every branch whose range contains sigma
  double Z_high = 0.0;
};

ExponentTable theory_exponents(int d, double sigma1, double sigma,
                               TheoremVariant variant = TheoremVariant::General);

nlohmann::json to_json(const DecayFit& fit);
nlohmann::json to_json(const StructureReport& report);
nlohmann::json to_json(const SkReport& report);
nlohmann::json to_json(const EpsilonSchedule& schedule);
nlohmann::json to_json(const Certificate& cert);

// ---------------------------------------------------------------------------
// Commands. Each returns the report and the process exit code; files are
// written only when `out` is not empty.

struct CommandResult {
  nlohmann::json report;
  int exit_code = 0;
};

struct AnalyzeOptions {
  int omega_count = 64;
  double epsilon = 0.1;
  bool require_sk = false;
};
CommandResult run_analyze(const SystemSpec& system, const AnalyzeOptions& options = {});

struct CertifyCommandOptions {
  double epsilon = 0.1;
  bool autotune = false;
  double rho_min = 1e-2;
  double rho_max = 1e2;
  int rho_count = 64;
  int omega_count = 64;
  bool require_sk = false;
};
CommandResult run_certify(const SystemSpec& system, const CertifyCommandOptions& options = {});

struct RunOptions {
  std::filesystem::path out;
  bool require_sk = false;
  bool verify_decay = false;
  std::optional<std::uint64_t> seed;
};
CommandResult run_simulate(const RunConfig& config, const RunOptions& options = {});
CommandResult run_decay(const RunConfig& config, const RunOptions& options = {});
CommandResult run_lp_norm(const SpectralField& field, const BesovQuery& query);

/// Certification grid covering the frequencies of a box.
std::vector<double> rho_grid_for_box(int d, int resolution, double box_length);

/// Halves (eps, eps') from the defaults until L~ and L~' are nonincreasing
/// along an exact linear run with random band data on the given box.
FunctionalWeights tune_functional_weights(const LinearizedSystem& lin, const EpsilonSchedule& schedule,
                                          int d, int resolution, double box_length,
                                          std::uint64_t seed, double t_end = 50.0, double every = 0.5);

}  // namespace hypocoax
