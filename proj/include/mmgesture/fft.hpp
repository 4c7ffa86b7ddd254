#pragma once

#include <complex>
#include <span>

namespace mmgesture {

enum class FftDirection { Forward, Inverse };

// In-place iterative radix-2 FFT, unnormalized. Forward uses exp(-2*pi*i*k*n/N).
// Length must be a power of two.
void fft_inplace(std::span<std::complex<double>> data,
                 FftDirection direction = FftDirection::Forward);

// Swaps halves so index N/2 holds the zero-frequency term.
void fftshift(std::span<std::complex<double>> data);

}  // namespace mmgesture
