#pragma once

#include <complex>
#include <vector>

namespace atomlink {

// Radix-2 in-place FFT. Length must be a power of two.
// Unitary normalization: both directions scale by 1/sqrt(n), so a 2D N x N
// transform built from row/column passes scales by 1/N total and Parseval
// holds exactly: sum |F|^2 == sum |f|^2.
void fft_inplace(std::vector<std::complex<double>>& data, bool inverse);

// 2D transform on a row-major n x n grid.
void fft2d_inplace(std::vector<std::complex<double>>& grid, std::size_t n, bool inverse);

bool is_power_of_two(std::size_t n);

} // namespace atomlink
