#include "mmgesture/fft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <utility>

#include "mmgesture/errors.hpp"

namespace mmgesture {

void fft_inplace(std::span<std::complex<double>> data, FftDirection direction) {
  const std::size_t n = data.size();
  if (n == 0 || !std::has_single_bit(n)) {
    throw InvalidArgument("fft: length must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  const double sign = direction == FftDirection::Forward ? -1.0 : 1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles computed directly rather than by recurrence to keep round-off flat.
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                           static_cast<double>(len);
      const std::complex<double> w(std::cos(angle), std::sin(angle));
      for (std::size_t start = 0; start < n; start += len) {
        const auto u = data[start + k];
        const auto v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

void fftshift(std::span<std::complex<double>> data) {
  std::rotate(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(data.size() / 2),
              data.end());
}

}  // namespace mmgesture
