#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hypocoax/lp.hpp"
#include "hypocoax/system_model.hpp"

namespace hypocoax {

/// exp(-t (i sum_j xi_j Abar0^{-1} Abar^j + N)) for one frequency.
CMatrix mode_propagator(const LinearizedSystem& lin, const Vector& xi, double t);

/// Exact per-mode flow of the frozen linear system on a box.
class ExactLinearFlow {
 public:
  ExactLinearFlow(const LinearizedSystem& lin, int d, int resolution, double box_length);

  /// Z(t) from Z(0) = Z0.
  SpectralField at(const SpectralField& Z0, double t) const;
  /// Z at increasing `times` (t >= 0). Equal consecutive increments reuse the
  /// same propagators.
  std::vector<SpectralField> evolve(const SpectralField& Z0, const std::vector<double>& times) const;
  /// Calls `visit(t, Z)` instead of storing every snapshot.
  void evolve(const SpectralField& Z0, const std::vector<double>& times,
              const std::function<void(double, const SpectralField&)>& visit) const;

 private:
  std::vector<CMatrix> propagators(double dt) const;

  LinearizedSystem lin_;
  int d_;
  int N_;
  double L_;
};

std::vector<SpectralField> linear_exact_evolve(const LinearizedSystem& lin, const SpectralField& Z0,
                                               const std::vector<double>& times);

// ---------------------------------------------------------------------------
// Continuous-frequency oracle.

/// Radial profiles of the initial datum Z0(xi) = v g(|xi|).
double gaussian_profile(double rho);
/// Supported in |xi| >= 2.
double high_frequency_profile(double rho);

struct OracleOptions {
  std::vector<double> sigmas{0.0};
  int q_low = -20;  // 2^q ~ 1e-6
  int q_high = 6;
  int angular_points = 16;   // per angle; d = 3 uses (points/2) x points
  double rel_tol = 1e-8;
  int max_intervals = 400;   // per dyadic annulus
};

struct OracleTable {
  std::vector<double> times;
  std::vector<double> sigmas;
  // [sigma index][time index]
  std::vector<std::vector<double>> Z_low;
  std::vector<std::vector<double>> Z2_low;
  std::vector<std::vector<double>> W_low;
  std::vector<double> Z_high;  // high band at regularity d/2 + 1
  // Squared block norms of Z, [q - q_low][time index]
  std::vector<std::vector<double>> Z_blocks;
};

/// |Delta_q Z(t)|^2 = (2 pi)^{-d} int phi(2^{-q}|xi|)^2 |Z(xi, t)|^2 dxi with
/// adaptive Gauss-Kronrod in |xi| and a fixed rule on the sphere.
OracleTable radial_oracle_decay(const LinearizedSystem& lin, const std::function<double(double)>& profile,
                                const Vector& v, const std::vector<double>& times,
                                const OracleOptions& options = {});

// ---------------------------------------------------------------------------
// Initial data.

struct InitialDatum {
  enum class Kind { GaussianBump, FourierRandomBand, SingleMode, File };
  Kind kind = Kind::GaussianBump;
  double amplitude = 1e-3;  // peak |z| in physical space
  double width = 1.0;
  int q_a = -3;
  int q_b = 0;
  std::vector<double> components;  // per-component factors; empty means all ones
  std::vector<int> wavevector;      // single mode
  std::uint64_t seed = 1;
  std::filesystem::path path;
};

InitialDatum::Kind parse_datum_kind(std::string_view name);

SpectralField make_initial_field(const InitialDatum& datum, int d, int components, int resolution,
                                 double box_length);

// ---------------------------------------------------------------------------
// Pseudospectral integrator.

struct IntegratorOptions {
  double dt = 1e-2;
  double cfl = 0.4;
  bool dealias = true;
  double blowup_factor = 1e3;
  int max_halvings = 12;
  bool check_neighborhood = true;
};

struct IntegratorStats {
  long steps = 0;
  long rejected = 0;
  double dt_used = 0.0;
};

class PseudospectralIntegrator {
 public:
  PseudospectralIntegrator(const SystemSpec& system, int resolution, double box_length,
                           IntegratorOptions options = {});

  const SystemSpec& system() const { return system_; }
  /// Largest step allowed by the CFL rule.
  double cfl_limit() const;
  /// dZ/dt for the perturbation Z = V - Vbar.
  SpectralField rate(const SpectralField& Z) const;
  /// One classical RK4 step.
  SpectralField rk4_step(const SpectralField& Z, double dt) const;

  /// Integrates through the increasing output `times`, calling `visit(t, Z)`
  /// at each one (and at t = times.front() when it is the start time).
  IntegratorStats integrate(const SpectralField& Z0, double t0, const std::vector<double>& times,
                            const std::function<void(double, const SpectralField&)>& visit) const;

  /// Physical samples of V = Vbar + Z.
  Matrix state(const SpectralField& Z) const;

 private:
  SystemSpec system_;
  int N_;
  double L_;
  IntegratorOptions options_;
  double wave_speed_;
};

/// Output times t0 + k * every up to t_end (inclusive within roundoff).
std::vector<double> output_times(double t0, double t_end, double every);

// ---------------------------------------------------------------------------
// Run configuration.

struct RunConfig {
  std::string system = "euler-damped-2d";
  enum class Mode { LinearExact, LinearOracle, Nonlinear };
  Mode mode = Mode::LinearExact;
  int d = 2;
  int resolution = 64;
  double box_length = 2.0 * 3.14159265358979323846 * 128.0;
  double t_end = 10.0;
  double dt = 1e-2;
  double output_every = 1.0;
  std::vector<double> output_times;  // overrides output_every when set
  InitialDatum datum;
  double lambda = 1.0;
  double gamma = 2.0;
  double cfl = 0.4;
  std::string dealias = "two-thirds";
  std::vector<double> sigmas{0.0};
  std::vector<double> fit_window;  // empty: last decade
  std::string profile = "gaussian";  // oracle profile
  double epsilon = -1.0;  // schedule base; < 0 autotunes
  std::string dump_dir;   // LPF1 snapshots when not empty

  std::vector<double> times() const;
};

RunConfig::Mode parse_mode(std::string_view name);
std::string_view to_string(RunConfig::Mode mode);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace hypocoax
