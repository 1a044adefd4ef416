#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hypocoax/system_model.hpp"

namespace hypocoax {

/// Smooth cutoff: 1 on [0, 3/4], 0 on [4/3, inf).
double chi(double t);
/// Dyadic annulus multiplier chi(t/2) - chi(t), supported in [3/4, 8/3].
double phi(double t);

/// Signed wave number of FFT storage index j on an N-point axis.
inline int wave_index(int j, int N) { return j < N / 2 ? j : j - N; }

/// Cached |xi| and xi_j for every storage index of a (d, N, L) box.
struct FrequencyGrid {
  int d = 1;
  int N = 0;
  double L = 0.0;
  Vector magnitude;             // |xi| per mode
  std::vector<Vector> axis;     // xi_j per mode, 0 on the Nyquist plane of axis j
  std::vector<bool> dealiased;  // all |k_j| <= N/3
  std::vector<Eigen::Index> negated;  // storage index of -k

  static std::shared_ptr<const FrequencyGrid> get(int d, int N, double L);
};

/// Real n-component field on the periodic box [0, L)^d, stored as Fourier
/// coefficients z_k = N^{-d} sum_x z(x) e^{-i xi.x}, xi = 2 pi k / L, in FFT
/// storage order (row-major over axes). Column c holds component c.
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(int d, int components, int resolution, double box_length);

  int d() const { return d_; }
  int components() const { return static_cast<int>(coeffs_.cols()); }
  int resolution() const { return N_; }
  double box_length() const { return L_; }
  double volume() const { return std::pow(L_, d_); }
  Eigen::Index modes() const { return coeffs_.rows(); }

  CMatrix& coeffs() { return coeffs_; }
  const CMatrix& coeffs() const { return coeffs_; }
  const FrequencyGrid& frequencies() const { return *grid_; }

  /// Same box and components, all coefficients zero.
  SpectralField zeros_like() const { return SpectralField(d_, components(), N_, L_); }
  SpectralField with_coeffs(CMatrix coeffs) const;
  SpectralField component_range(int first, int count) const;

  /// Projects onto real fields: z_k <- (z_k + conj(z_{-k})) / 2.
  void enforce_hermitian();
  double hermitian_defect() const;

  /// Physical samples, (N^d x components), row-major grid order x = L i / N.
  Matrix to_physical() const;
  static SpectralField from_physical(const Matrix& values, int d, int resolution, double box_length);

  /// d/dx_j of every component.
  SpectralField derivative(int j) const;
  /// Zeroes modes with some |k_j| > N/3.
  void dealias();

  /// vol * sum_k |z_k|^2 over all components (mean mode included).
  double l2_norm_squared() const;
  Vector mean() const;

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double a);

 private:
  int d_ = 0;
  int N_ = 0;
  double L_ = 0.0;
  CMatrix coeffs_;
  std::shared_ptr<const FrequencyGrid> grid_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

/// Resolvable block range of a box.
struct DyadicRange {
  int q_min = 0;
  int q_max = 0;
};
DyadicRange dyadic_range(int resolution, double box_length);

/// Delta_q z; the zero field outside the resolvable range.
SpectralField dyadic_block(const SpectralField& field, int q);

/// Multiplies coefficients by phi(2^{-q}|xi|) in place.
void apply_dyadic_multiplier(CMatrix& coeffs, const FrequencyGrid& grid, int q);

enum class Band { All, Low, High, LowLambda, HighLambda };

Band parse_band(std::string_view name);
std::string_view to_string(Band band);

/// 2^{qs} |Delta_q z|_{L^2} summed (r = 1) or maximized (r = inf) over a band.
/// Low/High split at q0 = threshold (q <= q0 is low); the lambda variants put
/// q in the low band when 2^q <= threshold.
struct BesovQuery {
  double s = 0.0;
  double r = 1.0;
  Band band = Band::All;
  double threshold = 0.0;

  bool in_band(int q) const;
  std::string key() const;
};

/// |Delta_q z|_{L^2} for q in [q_min, q_max].
struct BlockNorms {
  DyadicRange range;
  std::vector<double> norms;

  double at(int q) const;
};

BlockNorms block_norms(const SpectralField& field);
/// Block norms of the first `count` components starting at `first`.
BlockNorms block_norms(const SpectralField& field, int first, int count);

double besov_from_blocks(const BlockNorms& blocks, const BesovQuery& query);
double besov_norm(const SpectralField& field, const BesovQuery& query);

struct BesovReport {
  std::vector<std::pair<BesovQuery, double>> values;
  BlockNorms blocks;
};
BesovReport besov_report(const SpectralField& field, const std::vector<BesovQuery>& queries);

struct HybridNorms {
  double low = 0.0;
  double high = 0.0;
  double sum() const { return low + high; }
};

/// Low part at regularity s_low plus high part at s_high, r = 1. With
/// `lambda_split` the split is 2^q <= threshold, otherwise q <= threshold.
HybridNorms hybrid_threshold_norms(const SpectralField& field, double s_low, double s_high,
                                   double threshold = 0.0, bool lambda_split = false);

/// Binary field format: "LPF1", int64 d, components, resolution, float64 L,
/// then (re, im) doubles for each mode and component, all little-endian.
void write_lpf1(const std::filesystem::path& path, const SpectralField& field);
SpectralField read_lpf1(const std::filesystem::path& path);

}  // namespace hypocoax
