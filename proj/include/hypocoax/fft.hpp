#pragma once

#include <complex>

namespace hypocoax {

/// Unnormalized d-dimensional complex transform on an N^d row-major grid.
/// sign = -1 is the forward transform. `in` and `out` may alias.
void fft(int d, int N, int sign, const std::complex<double>* in, std::complex<double>* out);

}  // namespace hypocoax
