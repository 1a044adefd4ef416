#include "hypocoax/lp.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>

#include "hypocoax/fft.hpp"

namespace hypocoax {

namespace {

double mollifier(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw Error(ErrorCode::Io, "truncated LPF1 file");
  return to_little(v);
}

Eigen::Index grid_size(int d, int N) {
  Eigen::Index total = 1;
  for (int i = 0; i < d; ++i) total *= N;
  return total;
}

}  // namespace

double chi(double t) {
  t = std::abs(t);
  if (t <= 0.75) return 1.0;
  if (t >= 4.0 / 3.0) return 0.0;
  const double a = mollifier(4.0 / 3.0 - t);
  const double b = mollifier(t - 0.75);
  return a / (a + b);
}

double phi(double t) { return chi(0.5 * t) - chi(t); }

std::shared_ptr<const FrequencyGrid> FrequencyGrid::get(int d, int N, double L) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, double>, std::shared_ptr<const FrequencyGrid>> cache;
  std::lock_guard lock(mutex);
  const auto key = std::make_tuple(d, N, L);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto g = std::make_shared<FrequencyGrid>();
  g->d = d;
  g->N = N;
  g->L = L;
  const Eigen::Index total = grid_size(d, N);
  g->magnitude.resize(total);
  g->axis.assign(static_cast<std::size_t>(d), Vector(total));
  g->dealiased.resize(static_cast<std::size_t>(total));
  g->negated.resize(static_cast<std::size_t>(total));
  const double unit = 2.0 * std::numbers::pi / L;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (Eigen::Index m = 0; m < total; ++m) {
    Eigen::Index rem = m, neg = 0;
    for (int a = d - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % N);
      rem /= N;
    }
    double mag2 = 0.0;
    bool keep = true;
    for (int a = 0; a < d; ++a) {
      const int k = wave_index(idx[a], N);
      const double xi = unit * k;
      mag2 += xi * xi;
      g->axis[a](m) = (2 * k == -N) ? 0.0 : xi;
      keep = keep && 3 * std::abs(k) <= N;
      neg = neg * N + (N - idx[a]) % N;
    }
    g->magnitude(m) = std::sqrt(mag2);
    g->dealiased[static_cast<std::size_t>(m)] = keep;
    g->negated[static_cast<std::size_t>(m)] = neg;
  }
  cache.emplace(key, g);
  return g;
}

SpectralField::SpectralField(int d, int components, int resolution, double box_length)
    : d_(d), N_(resolution), L_(box_length) {
  if (d < 1 || d > 3) throw Error(ErrorCode::InvalidInput, "fields support d = 1, 2, 3");
  if (components < 1) throw Error(ErrorCode::InvalidInput, "need at least one component");
  if (resolution < 2 || !std::has_single_bit(static_cast<unsigned>(resolution)))
    throw Error(ErrorCode::InvalidInput, "resolution must be a power of two");
  if (!(box_length > 0.0)) throw Error(ErrorCode::InvalidInput, "box length must be positive");
  coeffs_ = CMatrix::Zero(grid_size(d, resolution), components);
  grid_ = FrequencyGrid::get(d, resolution, box_length);
}

SpectralField SpectralField::with_coeffs(CMatrix coeffs) const {
  if (coeffs.rows() != modes())
    throw Error(ErrorCode::DimensionMismatch, "coefficient block has the wrong number of modes");
  SpectralField f(d_, static_cast<int>(coeffs.cols()), N_, L_);
  f.coeffs_ = std::move(coeffs);
  return f;
}

SpectralField SpectralField::component_range(int first, int count) const {
  if (first < 0 || count < 1 || first + count > components())
    throw Error(ErrorCode::DimensionMismatch, "component range out of bounds");
  return with_coeffs(coeffs_.middleCols(first, count));
}

void SpectralField::enforce_hermitian() {
  const auto& neg = grid_->negated;
  for (Eigen::Index m = 0; m < modes(); ++m) {
    const Eigen::Index p = neg[static_cast<std::size_t>(m)];
    if (p < m) continue;
    for (Eigen::Index c = 0; c < coeffs_.cols(); ++c) {
      const std::complex<double> avg = 0.5 * (coeffs_(m, c) + std::conj(coeffs_(p, c)));
      coeffs_(m, c) = avg;
      coeffs_(p, c) = std::conj(avg);
    }
  }
}

double SpectralField::hermitian_defect() const {
  double worst = 0.0;
  const auto& neg = grid_->negated;
  for (Eigen::Index m = 0; m < modes(); ++m) {
    const Eigen::Index p = neg[static_cast<std::size_t>(m)];
    for (Eigen::Index c = 0; c < coeffs_.cols(); ++c)
      worst = std::max(worst, std::abs(coeffs_(m, c) - std::conj(coeffs_(p, c))));
  }
  return worst;
}

Matrix SpectralField::to_physical() const {
  Matrix out(modes(), components());
  CVector buf(modes());
  for (Eigen::Index c = 0; c < coeffs_.cols(); ++c) {
    fft(d_, N_, +1, coeffs_.col(c).data(), buf.data());
    out.col(c) = buf.real();
  }
  return out;
}

SpectralField SpectralField::from_physical(const Matrix& values, int d, int resolution,
                                           double box_length) {
  SpectralField f(d, static_cast<int>(values.cols()), resolution, box_length);
  if (values.rows() != f.modes())
    throw Error(ErrorCode::DimensionMismatch, "sample count does not match the grid");
  const double scale = 1.0 / static_cast<double>(f.modes());
  CVector buf(f.modes());
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    buf = values.col(c).cast<std::complex<double>>();
    fft(d, resolution, -1, buf.data(), buf.data());
    f.coeffs_.col(c) = buf * scale;
  }
  f.enforce_hermitian();
  return f;
}

SpectralField SpectralField::derivative(int j) const {
  if (j < 0 || j >= d_) throw Error(ErrorCode::DimensionMismatch, "derivative axis out of range");
  SpectralField out = *this;
  const Vector& xi = grid_->axis[static_cast<std::size_t>(j)];
  for (Eigen::Index c = 0; c < coeffs_.cols(); ++c)
    out.coeffs_.col(c) = coeffs_.col(c).cwiseProduct(
        (xi.cast<std::complex<double>>() * std::complex<double>(0.0, 1.0)).eval());
  return out;
}

void SpectralField::dealias() {
  const auto& keep = grid_->dealiased;
  for (Eigen::Index m = 0; m < modes(); ++m)
    if (!keep[static_cast<std::size_t>(m)]) coeffs_.row(m).setZero();
}

double SpectralField::l2_norm_squared() const { return volume() * coeffs_.squaredNorm(); }

Vector SpectralField::mean() const { return coeffs_.row(0).real().transpose(); }

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  if (o.coeffs_.rows() != coeffs_.rows() || o.coeffs_.cols() != coeffs_.cols())
    throw Error(ErrorCode::DimensionMismatch, "field shapes differ");
  coeffs_ += o.coeffs_;
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  if (o.coeffs_.rows() != coeffs_.rows() || o.coeffs_.cols() != coeffs_.cols())
    throw Error(ErrorCode::DimensionMismatch, "field shapes differ");
  coeffs_ -= o.coeffs_;
  return *this;
}

SpectralField& SpectralField::operator*=(double a) {
  coeffs_ *= a;
  return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

DyadicRange dyadic_range(int resolution, double box_length) {
  const double lowest = 2.0 * std::numbers::pi / box_length;
  const double nyquist = std::numbers::pi * resolution / box_length;
  return {static_cast<int>(std::floor(std::log2(lowest))) - 1,
          static_cast<int>(std::ceil(std::log2(nyquist))) + 1};
}

void apply_dyadic_multiplier(CMatrix& coeffs, const FrequencyGrid& grid, int q) {
  const double scale = std::ldexp(1.0, -q);
  for (Eigen::Index m = 0; m < coeffs.rows(); ++m) {
    const double w = phi(scale * grid.magnitude(m));
    if (w == 0.0)
      coeffs.row(m).setZero();
    else
      coeffs.row(m) *= w;
  }
}

SpectralField dyadic_block(const SpectralField& field, int q) {
  SpectralField out = field;
  const auto range = dyadic_range(field.resolution(), field.box_length());
  if (q < range.q_min || q > range.q_max) {
    out.coeffs().setZero();
    return out;
  }
  apply_dyadic_multiplier(out.coeffs(), field.frequencies(), q);
  return out;
}

Band parse_band(std::string_view name) {
  if (name == "all") return Band::All;
  if (name == "low") return Band::Low;
  if (name == "high") return Band::High;
  if (name == "low-lambda") return Band::LowLambda;
  if (name == "high-lambda") return Band::HighLambda;
  throw Error(ErrorCode::InvalidInput, "unknown band " + std::string(name));
}

std::string_view to_string(Band band) {
  switch (band) {
    case Band::All: return "all";
    case Band::Low: return "low";
    case Band::High: return "high";
    case Band::LowLambda: return "low-lambda";
    case Band::HighLambda: return "high-lambda";
  }
  return "all";
}

bool BesovQuery::in_band(int q) const {
  switch (band) {
    case Band::All: return true;
    case Band::Low: return q <= threshold;
    case Band::High: return q > threshold;
    case Band::LowLambda: return std::ldexp(1.0, q) <= threshold;
    case Band::HighLambda: return std::ldexp(1.0, q) > threshold;
  }
  return false;
}

std::string BesovQuery::key() const {
  std::ostringstream os;
  os << "s" << s << "_r" << (std::isinf(r) ? std::string("inf") : std::to_string(static_cast<int>(r)))
     << "_" << to_string(band);
  if (band != Band::All) os << threshold;
  return os.str();
}

double BlockNorms::at(int q) const {
  if (q < range.q_min || q > range.q_max) return 0.0;
  return norms[static_cast<std::size_t>(q - range.q_min)];
}

BlockNorms block_norms(const SpectralField& field, int first, int count) {
  if (first < 0 || count < 1 || first + count > field.components())
    throw Error(ErrorCode::DimensionMismatch, "component range out of bounds");
  BlockNorms b;
  b.range = dyadic_range(field.resolution(), field.box_length());
  std::vector<double> energy(static_cast<std::size_t>(b.range.q_max - b.range.q_min + 1), 0.0);
  const auto& mag = field.frequencies().magnitude;
  const auto& c = field.coeffs();
  const double vol = field.volume();
  for (Eigen::Index m = 0; m < c.rows(); ++m) {
    const double xi = mag(m);
    if (xi == 0.0) continue;
    const double e = vol * c.row(m).segment(first, count).squaredNorm();
    if (e == 0.0) continue;
    const int lo = std::max(b.range.q_min, static_cast<int>(std::floor(std::log2(0.375 * xi))));
    const int hi = std::min(b.range.q_max, static_cast<int>(std::ceil(std::log2(4.0 * xi / 3.0))));
    for (int q = lo; q <= hi; ++q) {
      const double w = phi(std::ldexp(xi, -q));
      energy[static_cast<std::size_t>(q - b.range.q_min)] += w * w * e;
    }
  }
  b.norms.resize(energy.size());
  for (std::size_t i = 0; i < energy.size(); ++i) b.norms[i] = std::sqrt(energy[i]);
  return b;
}

BlockNorms block_norms(const SpectralField& field) {
  return block_norms(field, 0, field.components());
}

namespace {

bool band_sum(const BlockNorms& blocks, const BesovQuery& query, double& value) {
  bool any = false;
  value = 0.0;
  for (int q = blocks.range.q_min; q <= blocks.range.q_max; ++q) {
    if (!query.in_band(q)) continue;
    any = true;
    const double term = std::pow(2.0, q * query.s) * blocks.at(q);
    if (std::isinf(query.r))
      value = std::max(value, term);
    else
      value += term;
  }
  return any;
}

}  // namespace

double besov_from_blocks(const BlockNorms& blocks, const BesovQuery& query) {
  if (!(query.r == 1.0 || std::isinf(query.r)))
    throw Error(ErrorCode::InvalidInput, "summation exponent must be 1 or inf");
  double value = 0.0;
  if (!band_sum(blocks, query, value))
    throw Error(ErrorCode::UnresolvedBand, "band " + query.key() + " has no resolvable blocks");
  return value;
}

double besov_norm(const SpectralField& field, const BesovQuery& query) {
  return besov_from_blocks(block_norms(field), query);
}

BesovReport besov_report(const SpectralField& field, const std::vector<BesovQuery>& queries) {
  BesovReport r;
  r.blocks = block_norms(field);
  for (const auto& q : queries) r.values.emplace_back(q, besov_from_blocks(r.blocks, q));
  return r;
}

HybridNorms hybrid_threshold_norms(const SpectralField& field, double s_low, double s_high,
                                   double threshold, bool lambda_split) {
  const BlockNorms blocks = block_norms(field);
  const BesovQuery low{s_low, 1.0, lambda_split ? Band::LowLambda : Band::Low, threshold};
  const BesovQuery high{s_high, 1.0, lambda_split ? Band::HighLambda : Band::High, threshold};
  // A band with no resolvable block contributes nothing to the hybrid norm.
  HybridNorms h;
  band_sum(blocks, low, h.low);
  band_sum(blocks, high, h.high);
  return h;
}

void write_lpf1(const std::filesystem::path& path, const SpectralField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write("LPF1", 4);
  put<std::int64_t>(out, field.d());
  put<std::int64_t>(out, field.components());
  put<std::int64_t>(out, field.resolution());
  put<double>(out, field.box_length());
  const auto& c = field.coeffs();
  for (Eigen::Index m = 0; m < c.rows(); ++m) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
      put<double>(out, c(m, k).real());
      put<double>(out, c(m, k).imag());
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

SpectralField read_lpf1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "LPF1", 4) != 0)
    throw Error(ErrorCode::Io, path.string() + " is not an LPF1 file");
  const auto d = get<std::int64_t>(in);
  const auto comps = get<std::int64_t>(in);
  const auto res = get<std::int64_t>(in);
  const double L = get<double>(in);
  if (d < 1 || d > 3 || comps < 1 || comps > 64 || res < 2 || res > (1 << 16))
    throw Error(ErrorCode::Io, "implausible LPF1 header in " + path.string());
  SpectralField f(static_cast<int>(d), static_cast<int>(comps), static_cast<int>(res), L);
  auto& c = f.coeffs();
  for (Eigen::Index m = 0; m < c.rows(); ++m) {
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
      const double re = get<double>(in);
      const double im = get<double>(in);
      c(m, k) = {re, im};
    }
  }
  return f;
}

}  // namespace hypocoax
