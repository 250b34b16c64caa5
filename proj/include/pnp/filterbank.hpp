#pragma once

#include <cstddef>
#include <vector>

namespace pnp {

/// Geometrically spaced constant-Q bank. Units are Hz and samples/s for temporal banks, or
/// cycles/octave and samples/octave for banks along the log-frequency axis.
struct FilterbankSpec {
  int q = 12;
  int n_octaves = 8;
  double min_center = 0.0;
  double sample_rate = 0.0;
  std::size_t signal_length = 0;

  std::size_t size() const { return static_cast<std::size_t>(q) * static_cast<std::size_t>(n_octaves); }
};

/// Frequency-domain Morlet wavelet: a Gaussian bump at `center` minus a DC-cancelling Gaussian,
/// so the response at zero frequency is exactly zero.
struct Morlet {
  double center = 0.0;
  double sigma = 0.0;  // Gaussian standard deviation in frequency

  double operator()(double f) const;
};

struct Filterbank {
  FilterbankSpec spec;
  std::vector<Morlet> filters;  // ascending center frequency

  /// Response of filter i on the FFT grid of spec.signal_length (bin k <-> k * sr / N, upper half
  /// negative).
  std::vector<double> response(std::size_t i) const;
};

/// Bandwidth for ratio r = 2^(1/q): adjacent filters cross slightly above half maximum.
double morlet_sigma(double center, int q);

/// Throws invalid-spec unless q >= 1, n_octaves >= 1 and every center is strictly below Nyquist.
Filterbank morlet_filterbank(const FilterbankSpec& spec);

/// Bank of q * n_octaves filters whose highest center is `top_center`.
FilterbankSpec top_anchored_spec(double sample_rate, std::size_t length, int q, int n_octaves,
                                 double top_center);

}  // namespace pnp
