#include "hypocoax/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "hypocoax/error.hpp"

namespace hypocoax {

namespace {

// Planning is not thread-safe in FFTW, execution of an existing plan on new
// arrays is. Plans are made once per shape and kept for the process lifetime.
fftw_plan plan_for(int d, int N, int sign, bool in_place) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int, bool>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  const auto key = std::make_tuple(d, N, sign, in_place);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(N);
  auto* a = fftw_alloc_complex(total);
  auto* b = in_place ? a : fftw_alloc_complex(total);
  std::vector<int> dims(static_cast<std::size_t>(d), N);
  fftw_plan p = fftw_plan_dft(d, dims.data(), a, b, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(a);
  if (!in_place) fftw_free(b);
  if (!p) throw Error(ErrorCode::InvalidInput, "FFT planning failed");
  plans.emplace(key, p);
  return p;
}

}  // namespace

void fft(int d, int N, int sign, const std::complex<double>* in, std::complex<double>* out) {
  const bool in_place = in == out;
  fftw_plan p = plan_for(d, N, sign, in_place);
  // FFTW's new-array interface takes a non-const input even for out-of-place
  // plans; it does not write to it without FFTW_DESTROY_INPUT.
  auto* src = reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in));
  fftw_execute_dft(p, src, reinterpret_cast<fftw_complex*>(out));
}

}  // namespace hypocoax
