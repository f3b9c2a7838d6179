// Minimal power-of-two complex FFT for phase-screen synthesis and
// frozen-flow shifts. Grid sizes are spec-limited to powers of two, so a
// radix-2 transform is all that is needed.

#ifndef SKYLINK_DETAIL_FFT_HPP
#define SKYLINK_DETAIL_FFT_HPP

#include <complex>
#include <vector>

namespace skylink::detail {

// In-place transform; sign = -1 forward, +1 inverse. No 1/N scaling is
// applied in either direction.
void fft(std::vector<std::complex<double>>& data, int sign);

// 2D transform of an n-by-n row-major grid, same conventions.
void fft2(std::vector<std::complex<double>>& grid, int n, int sign);

// Rectangular rows-by-cols transform (both powers of two).
void fft2_rect(std::vector<std::complex<double>>& grid, int rows, int cols, int sign);

bool is_power_of_two(int n);

} // namespace skylink::detail

#endif
