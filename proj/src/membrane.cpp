#include "pnp/membrane.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {
namespace {

void check_finite(std::initializer_list<double> values, const char* what) {
  for (double v : values) require(std::isfinite(v), ErrorKind::kInvalidArgument, std::string(what) + " must be finite");
}

}  // namespace

double gamma_m(double alpha, int m1, int m2) {
  require(alpha > 0 && std::isfinite(alpha), ErrorKind::kInvalidArgument, "alpha must be positive");
  require(m1 >= 1 && m2 >= 1, ErrorKind::kInvalidArgument, "mode indices start at 1");
  const double a2 = alpha * alpha;
  return ((alpha + 1.0) / (a2 + 1.0)) * (double(m1) * m1 + double(m2) * m2 / a2);
}

std::vector<Mode> modal_constants(const DrumPhysical& phys, std::array<double, 2> strike, int m_max) {
  check_finite({phys.S, phys.c, phys.d1, phys.d3, phys.alpha}, "physical parameters");
  require(m_max >= 1, ErrorKind::kInvalidArgument, "m_max must be >= 1");
  require(strike[0] > 0 && strike[0] < 1 && strike[1] > 0 && strike[1] < 1, ErrorKind::kInvalidArgument,
          "strike position must lie inside the unit square");

  const double s4 = std::pow(phys.S, 4);
  const double quad = s4 - phys.d3 * phys.d3 / 4.0;
  const double lin = phys.c * phys.c + phys.d1 * phys.d3 / 2.0;
  const double cst = phys.d1 * phys.d1 / 4.0;

  std::vector<Mode> modes;
  modes.reserve(static_cast<std::size_t>(m_max) * static_cast<std::size_t>(m_max));
  for (int m1 = 1; m1 <= m_max; ++m1) {
    for (int m2 = 1; m2 <= m_max; ++m2) {
      const double g = gamma_m(phys.alpha, m1, m2);
      const double omega2 = quad * g * g + lin * g - cst;
      const double sigma = phys.d3 / 2.0 * g - phys.d1 / 2.0;
      if (!(omega2 > 0.0) || !(sigma < 0.0)) continue;
      Mode m;
      m.m1 = m1;
      m.m2 = m2;
      m.omega = std::sqrt(omega2);
      m.sigma = sigma;
      m.amp = kDrumExcitation * std::sin(std::numbers::pi * m1 * strike[0]) *
              std::sin(std::numbers::pi * m2 * strike[1]);
      modes.push_back(m);
    }
  }
  require(!modes.empty(), ErrorKind::kDegenerateParameters, "no oscillating, decaying mode");
  return modes;
}

DrumPhysical to_physical(const DrumPerceptual& perc) {
  check_finite({perc.omega1, perc.tau1, perc.p, perc.D, perc.alpha}, "perceptual parameters");
  require(perc.omega1 > 0 && perc.tau1 > 0 && perc.p >= 0 && perc.D >= 0 && perc.alpha > 0,
          ErrorKind::kOutOfManifold, "perceptual parameters out of domain");
  const double a = perc.alpha;
  const double b = perc.beta();
  const double w = perc.omega1;
  const double t = perc.tau1;

  const double s4 = (perc.D * w * a) * (perc.D * w * a) + (perc.p * a / t) * (perc.p * a / t);
  const double c2 = (a / (t * t)) * (1.0 / b - perc.p * perc.p * b) + a * w * w * (1.0 / b - perc.D * perc.D * b);
  require(c2 > 0.0, ErrorKind::kOutOfManifold,
          "infeasible perceptual combination (c^2 = " + std::to_string(c2) + " <= 0)");

  DrumPhysical phys;
  phys.S = std::pow(s4, 0.25);
  phys.c = std::sqrt(c2);
  phys.d1 = (2.0 / t) * (1.0 - perc.p * b);
  phys.d3 = -2.0 * perc.p * a / t;
  phys.alpha = a;
  return phys;
}

DrumPerceptual to_perceptual(const DrumPhysical& phys) {
  check_finite({phys.S, phys.c, phys.d1, phys.d3, phys.alpha}, "physical parameters");
  require(phys.alpha > 0, ErrorKind::kOutOfManifold, "alpha must be positive");
  const double a = phys.alpha;
  const double b = 1.0 + 1.0 / a;
  const double ratio = b / a;  // Gamma_1
  const double s4 = std::pow(phys.S, 4);

  const double rate = phys.d1 - ratio * phys.d3;
  require(rate > 0.0, ErrorKind::kOutOfManifold, "first mode does not decay");
  const double disp = s4 - phys.d3 * phys.d3 / 4.0;
  require(disp >= 0.0, ErrorKind::kOutOfManifold, "S^4 < d3^2 / 4");
  const double w2 = s4 * ratio * ratio + phys.c * phys.c * ratio - 0.25 * (ratio * phys.d3 - phys.d1) * (ratio * phys.d3 - phys.d1);
  require(w2 > 0.0, ErrorKind::kOutOfManifold, "first mode does not oscillate");

  DrumPerceptual perc;
  perc.omega1 = std::sqrt(w2);
  perc.tau1 = 2.0 / rate;
  perc.p = phys.d3 / (b * phys.d3 - a * phys.d1);
  perc.D = std::sqrt(disp) / (a * perc.omega1);
  perc.alpha = a;
  return perc;
}

AudioBuffer render_modes(const std::vector<Mode>& modes, std::size_t length, double sample_rate) {
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.assign(length, 0.0);
  // Complex rotation per mode, re-anchored exactly every block to bound drift.
  constexpr std::size_t kBlock = 512;
  for (const Mode& m : modes) {
    const std::complex<double> pole(m.sigma / sample_rate, m.omega / sample_rate);
    const std::complex<double> step = std::exp(pole);
    for (std::size_t start = 0; start < length; start += kBlock) {
      std::complex<double> z = std::exp(pole * static_cast<double>(start));
      const std::size_t stop = std::min(length, start + kBlock);
      for (std::size_t i = start; i < stop; ++i) {
        out.samples[i] += m.amp * z.imag();
        z *= step;
      }
    }
  }
  return out;
}

AudioBuffer synth_drum(const DrumPerceptual& perc, double duration, double sample_rate, int m_max) {
  require(duration > 0 && sample_rate > 0, ErrorKind::kInvalidArgument, "duration and sample rate must be positive");
  const auto length = static_cast<std::size_t>(std::llround(duration * sample_rate));
  require(length >= 1, ErrorKind::kInvalidArgument, "duration shorter than one sample");
  std::vector<Mode> modes = modal_constants(to_physical(perc), kDrumStrike, m_max);
  std::erase_if(modes, [&](const Mode& m) { return m.omega / (2.0 * std::numbers::pi) >= sample_rate / 2.0; });
  require(!modes.empty(), ErrorKind::kDegenerateParameters, "every mode lies above Nyquist");
  return render_modes(modes, length, sample_rate);
}

}  // namespace pnp
