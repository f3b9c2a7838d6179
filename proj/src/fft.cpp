#include "skylink/detail/fft.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skylink::detail {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

void fft(std::vector<std::complex<double>>& data, int sign) {
    const std::size_t n = data.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft: length must be a power of two");

    // Bit-reversal permutation.
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    const double pi = 3.14159265358979323846;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * pi / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = data[i + k];
                std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

void fft2(std::vector<std::complex<double>>& grid, int n, int sign) {
    fft2_rect(grid, n, n, sign);
}

void fft2_rect(std::vector<std::complex<double>>& grid, int rows, int cols, int sign) {
    if (!is_power_of_two(rows) || !is_power_of_two(cols) ||
        grid.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("fft2_rect: dimensions must be powers of two");

    std::vector<std::complex<double>> line(static_cast<std::size_t>(std::max(rows, cols)));
    line.resize(static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) line[c] = grid[static_cast<std::size_t>(r) * cols + c];
        fft(line, sign);
        for (int c = 0; c < cols; ++c) grid[static_cast<std::size_t>(r) * cols + c] = line[c];
    }
    line.resize(static_cast<std::size_t>(rows));
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) line[r] = grid[static_cast<std::size_t>(r) * cols + c];
        fft(line, sign);
        for (int r = 0; r < rows; ++r) grid[static_cast<std::size_t>(r) * cols + c] = line[r];
    }
}

} // namespace skylink::detail
