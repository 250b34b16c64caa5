#include "pnp/chirp.hpp"

#include <cmath>
#include <numbers>

#include "pnp/errors.hpp"

namespace pnp {
namespace {

void check(const ChirpParams& p, double duration, double sample_rate) {
  require(std::isfinite(p.fc) && std::isfinite(p.fm) && std::isfinite(p.gamma), ErrorKind::kInvalidArgument,
          "chirp parameters must be finite");
  require(p.fc > 0 && p.fm > 0 && p.gamma > 0, ErrorKind::kInvalidArgument, "chirp parameters must be positive");
  require(duration > 0 && std::isfinite(duration), ErrorKind::kInvalidArgument, "duration must be positive");
  require(sample_rate > 0 && std::isfinite(sample_rate), ErrorKind::kInvalidArgument,
          "sample rate must be positive");
  const double top = chirp_carrier_frequency(p, 4.0 * chirp_window_std(p));
  require(top < sample_rate / 2, ErrorKind::kInvalidArgument,
          "carrier exceeds Nyquist inside the window support (" + std::to_string(top) + " Hz)");
}

std::size_t sample_count(double duration, double sample_rate) {
  const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
  require(n >= 1, ErrorKind::kInvalidArgument, "duration shorter than one sample");
  return n;
}

}  // namespace

double chirp_carrier_frequency(const ChirpParams& params, double t) {
  require(std::isfinite(t), ErrorKind::kInvalidArgument, "time must be finite");
  return params.fc * std::exp2(params.gamma * t);
}

AudioBuffer synth_chirp(const ChirpParams& params, double duration, double sample_rate) {
  check(params, duration, sample_rate);
  const std::size_t n = sample_count(duration, sample_rate);
  const double two_pi = 2.0 * std::numbers::pi;
  const double sweep = two_pi * params.fc / (params.gamma * std::numbers::ln2);
  const double sigma = chirp_window_std(params);
  const double center = duration / 2.0;

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate - center;
    const double carrier = std::sin(sweep * std::expm1(params.gamma * std::numbers::ln2 * t));
    const double modulator = std::sin(two_pi * params.fm * t);
    const double window = std::exp(-0.5 * (t / sigma) * (t / sigma));
    out.samples[i] = carrier * modulator * window;
  }
  return out;
}

AudioBuffer chirp_modulator(const ChirpParams& params, double duration, double sample_rate) {
  check(params, duration, sample_rate);
  const std::size_t n = sample_count(duration, sample_rate);
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate - duration / 2.0;
    out.samples[i] = std::sin(2.0 * std::numbers::pi * params.fm * t);
  }
  return out;
}

}  // namespace pnp
