#include "atomlink/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace atomlink {

bool is_power_of_two(std::size_t n) {
    return n != 0 && (n & (n - 1)) == 0;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("fft: length must be a power of two");

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& x : a) x *= scale;
}

void fft2d_inplace(std::vector<std::complex<double>>& grid, std::size_t n, bool inverse) {
    if (grid.size() != n * n) throw std::invalid_argument("fft2d: grid size mismatch");

    std::vector<std::complex<double>> line(n);
    // rows
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) line[c] = grid[r * n + c];
        fft_inplace(line, inverse);
        for (std::size_t c = 0; c < n; ++c) grid[r * n + c] = line[c];
    }
    // columns
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < n; ++r) line[r] = grid[r * n + c];
        fft_inplace(line, inverse);
        for (std::size_t r = 0; r < n; ++r) grid[r * n + c] = line[r];
    }
}

} // namespace atomlink
