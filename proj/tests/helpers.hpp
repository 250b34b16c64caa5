#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "pnp/audio.hpp"
#include "pnp/errors.hpp"

namespace testing {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline double l2(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

// Linearly interpolated zero crossings of a sampled signal, in seconds.
inline std::vector<double> zero_crossings(const pnp::AudioBuffer& x) {
  std::vector<double> out;
  for (std::size_t i = 1; i < x.length(); ++i) {
    const double a = x.samples[i - 1], b = x.samples[i];
    if ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)) {
      const double frac = a / (a - b);
      out.push_back((static_cast<double>(i - 1) + frac) / x.sample_rate);
    }
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pnp_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

template <class F>
pnp::ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const pnp::Error& e) {
    return e.kind();
  }
  throw std::runtime_error("expected a pnp::Error");
}

}  // namespace testing
