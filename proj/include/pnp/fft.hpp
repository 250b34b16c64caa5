#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace pnp {

using cplx = std::complex<double>;

// Thin wrappers over FFTW. Plans are created once per size with FFTW_ESTIMATE (deterministic
// algorithm choice) and are safe to execute concurrently. Transforms are unnormalized.

/// out[k] = sum_n in[n] exp(-2 pi i k n / N). in and out must not alias.
void fft_forward(std::span<const cplx> in, std::span<cplx> out);
/// out[n] = sum_k in[k] exp(+2 pi i k n / N). in and out must not alias.
void fft_inverse(std::span<const cplx> in, std::span<cplx> out);
/// Real-to-half-complex: out has N/2 + 1 bins.
void fft_real(std::span<const double> in, std::span<cplx> out);
/// `count` consecutive real transforms of length n; out holds count blocks of n/2 + 1 bins.
void fft_real_batch(std::span<const double> in, std::span<cplx> out, std::size_t n, std::size_t count);
/// 2-D inverse transform of a row-major rows x cols array.
void fft_inverse_2d(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols);

std::size_t next_pow2(std::size_t n);

}  // namespace pnp
