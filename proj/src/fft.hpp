#pragma once

#include <complex>
#include <vector>

namespace caslab::detail {

// In-place 2-D DFT of a row-major ny x nx array. sign = -1 forward, +1 backward.
// Unnormalized.
void fft2(std::vector<std::complex<double>>& data, int nx, int ny, int sign);

} // namespace caslab::detail
