#pragma once

#include <memory>
#include <vector>

#include "hypocoax/lp.hpp"
#include "hypocoax/stability.hpp"
#include "hypocoax/system_model.hpp"

namespace hypocoax {

/// Per-q values indexed from q_min.
struct BlockSeries {
  int q_min = 0;
  std::vector<double> values;

  int q_max() const { return q_min + static_cast<int>(values.size()) - 1; }
  double at(int q) const;
};

struct FunctionalSnapshot {
  double t = 0.0;
  BlockSeries I;       // corrector I_q
  BlockSeries L;       // block functional L_q
  BlockSeries H;       // dissipation H_q
  BlockSeries Znorm2;  // |Z_q|^2_{L^2}
  double Lgen = 0.0;     // general-variant global functional
  double Lprime = 0.0;   // refined-variant global functional
  double W_lo = 0.0;     // W^{d/2-1}
  double W_mid = 0.0;    // W^{d/2}
  double W_hi = 0.0;     // W^{d/2+1}
  double Ltilde = 0.0;
  double Ltildeprime = 0.0;
  double Htilde = 0.0;
};

struct FunctionalWeights {
  double eps = -1.0;        // < 0: 1e-2 kappa0
  double eps_prime = -1.0;  // < 0: 1e-4 kappa0^2
};

/// Frozen per-mode operators for one box: corrector form, dissipation form and
/// the weights of every functional. Immutable after construction.
class LyapunovEvaluator {
 public:
  LyapunovEvaluator(const LinearizedSystem& lin, const EpsilonSchedule& schedule, int d,
                    int resolution, double box_length, FunctionalWeights weights = {});

  const LinearizedSystem& linearization() const { return lin_; }
  const EpsilonSchedule& schedule() const { return schedule_; }
  double eps() const { return eps_; }
  double eps_prime() const { return eps_prime_; }
  DyadicRange range() const { return range_; }

  /// I(z) = vol sum_{xi != 0} z^* K(xi/|xi|) z for a field already localized.
  double corrector(const SpectralField& block) const;
  /// kappa0/2 |N z|^2 + min(1, 2^{2q}) sum_k eps_k |N M^k z|^2 on a localized field.
  double dissipation(const SpectralField& block, int q) const;

  /// Full snapshot. `state` holds V(x) on the grid (points x n) for the
  /// state-dependent high-frequency weight; nullptr uses the frozen weight.
  FunctionalSnapshot evaluate(double t, const SpectralField& Z, const SpectralField& W,
                              const SystemSpec* system = nullptr,
                              const Matrix* state = nullptr) const;

 private:
  LinearizedSystem lin_;
  EpsilonSchedule schedule_;
  int d_;
  int N_;
  double L_;
  DyadicRange range_;
  double eps_;
  double eps_prime_;
  std::shared_ptr<const FrequencyGrid> grid_;
  std::vector<CMatrix> corrector_;  // per mode, zero at xi = 0
  std::vector<Matrix> tail_;        // sum_{k>=1} eps_k (N M^k)^T (N M^k)
  Matrix NtN_;
  Matrix A0_22_;
};

double corrector_Iq(const SpectralField& block, const LinearizedSystem& lin,
                    const EpsilonSchedule& schedule);

/// |Z_q|^2 weighted by Abar0 (q < 0) or by S A^0(V(x)) pointwise (q >= 0),
/// plus 2^{-|q|} I_q. With `system` null or `state` null the weight is Abar0.
double block_functional_Lq(const SpectralField& Z, const LinearizedSystem& lin,
                           const EpsilonSchedule& schedule, int q,
                           const SystemSpec* system = nullptr, const Matrix* state = nullptr);

double dissipation_Hq(const SpectralField& Z, const LinearizedSystem& lin,
                      const EpsilonSchedule& schedule, int q);

/// W = Z2 + Lb^{-1}(L21 Z1 + sum_j Abar^j_{2,.} d_j Z) computed per mode,
/// where Lb is the dissipated block of L.
SpectralField damped_mode_linear(const SpectralField& Z, const LinearizedSystem& lin);

/// W = Z2 + Lb^{-1}(L21 Z1 + sum_j (S A^j)_{2,.}(V) d_j Z - r_2(Z)) with
/// r(Z) = S H(Vbar + Z) + L Z; products are formed in physical space on
/// dealiased inputs.
SpectralField damped_mode(const SpectralField& Z, const SystemSpec& system,
                          const LinearizedSystem& lin);

/// Throws SingularBlock when the dissipated block of L is not invertible.
Matrix dissipated_block_inverse(const LinearizedSystem& lin);

}  // namespace hypocoax
