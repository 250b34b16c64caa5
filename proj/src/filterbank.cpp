#include "pnp/filterbank.hpp"

#include <cmath>

#include "pnp/errors.hpp"

namespace pnp {

double Morlet::operator()(double f) const {
  const double bump = std::exp(-0.5 * ((f - center) / sigma) * ((f - center) / sigma));
  const double dc = std::exp(-0.5 * (center / sigma) * (center / sigma));
  return bump - dc * std::exp(-0.5 * (f / sigma) * (f / sigma));
}

double morlet_sigma(double center, int q) {
  const double r = std::exp2(1.0 / q);
  return 1.05 * center * (r - 1.0) / ((r + 1.0) * std::sqrt(2.0 * std::log(2.0)));
}

Filterbank morlet_filterbank(const FilterbankSpec& spec) {
  require(spec.q >= 1, ErrorKind::kInvalidSpec, "q must be >= 1");
  require(spec.n_octaves >= 1, ErrorKind::kInvalidSpec, "n_octaves must be >= 1");
  require(spec.min_center > 0, ErrorKind::kInvalidSpec, "min_center must be positive");
  require(spec.sample_rate > 0, ErrorKind::kInvalidSpec, "sample_rate must be positive");
  Filterbank bank;
  bank.spec = spec;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double center = spec.min_center * std::exp2(static_cast<double>(i) / spec.q);
    require(center < spec.sample_rate / 2, ErrorKind::kInvalidSpec, "filter center above Nyquist");
    bank.filters.push_back({center, morlet_sigma(center, spec.q)});
  }
  return bank;
}

std::vector<double> Filterbank::response(std::size_t i) const {
  const std::size_t n = spec.signal_length;
  require(n > 0, ErrorKind::kInvalidSpec, "signal_length not set");
  std::vector<double> out(n);
  const double bin = spec.sample_rate / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = (k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n)) * bin;
    out[k] = filters[i](f);
  }
  return out;
}

FilterbankSpec top_anchored_spec(double sample_rate, std::size_t length, int q, int n_octaves, double top_center) {
  FilterbankSpec spec;
  spec.q = q;
  spec.n_octaves = n_octaves;
  spec.sample_rate = sample_rate;
  spec.signal_length = length;
  spec.min_center = top_center * std::exp2(-(static_cast<double>(q) * n_octaves - 1.0) / q);
  return spec;
}

}  // namespace pnp
