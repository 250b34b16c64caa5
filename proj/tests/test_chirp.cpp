#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "pnp/chirp.hpp"

using namespace pnp;

namespace {

// Peak frequency of a Hann-windowed DFT around sample `center`, refined by parabolic interpolation.
double ridge_frequency(const AudioBuffer& x, std::size_t center, std::size_t n) {
  std::vector<double> frame(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    frame[i] = x.samples[center - n / 2 + i] * w;
  }
  std::vector<double> mag(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += frame[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
    mag[k] = std::abs(acc);
  }
  std::size_t best = 1;
  for (std::size_t k = 1; k + 1 < n / 2; ++k)
    if (mag[k] > mag[best]) best = k;
  const double a = std::log(mag[best - 1]), b = std::log(mag[best]), c = std::log(mag[best + 1]);
  const double shift = 0.5 * (a - c) / (a - 2 * b + c);
  return (best + shift) * x.sample_rate / n;
}

}  // namespace

TEST_SUITE("chirp") {
  TEST_CASE("carrier frequency examples") {
    CHECK(chirp_carrier_frequency({512, 8, 1}, 0.0) == 512.0);
    CHECK(chirp_carrier_frequency({512, 8, 1}, 1.0) == 1024.0);
    CHECK(chirp_carrier_frequency({724, 8, 0.5}, 2.0) == doctest::Approx(1448.0).epsilon(1e-15));
  }

  TEST_CASE("phase derivative at the time origin equals fc") {
    const ChirpParams p{724, 8, 1.4};
    const double sweep = p.fc / (p.gamma * std::numbers::ln2);
    const double h = 1e-6;
    const double d = sweep * (std::exp2(p.gamma * h) - std::exp2(-p.gamma * h)) / (2 * h);
    CHECK(d == doctest::Approx(p.fc).epsilon(1e-9));
  }

  TEST_CASE("default render length and determinism") {
    const AudioBuffer a = synth_chirp({724, 8, 1.4});
    CHECK(a.length() == 32768);
    CHECK(a.sample_rate == 8192.0);
    const AudioBuffer b = synth_chirp({724, 8, 1.4});
    CHECK(a.samples == b.samples);
  }

  TEST_CASE("modulator zero crossings are spaced 1/(2 fm) near the center") {
    for (double fm : {8.0, 16.0}) {
      const AudioBuffer mod = chirp_modulator({724, fm, 1.4});
      std::vector<double> zc;
      for (double t : testing::zero_crossings(mod))
        if (std::abs(t - 2.0) < 0.3) zc.push_back(t);
      REQUIRE(zc.size() >= 4);
      for (std::size_t i = 1; i < zc.size(); ++i) CHECK(zc[i] - zc[i - 1] == doctest::Approx(0.5 / fm).epsilon(1e-6));
    }
  }

  TEST_CASE("rendered envelope zero crossings follow the modulator") {
    // The product vanishes wherever the modulator does; every modulator crossing near the center
    // is also a sign change of the rendered signal's envelope.
    const ChirpParams p{724, 8, 1.4};
    const AudioBuffer x = synth_chirp(p);
    const AudioBuffer mod = chirp_modulator(p);
    for (double t : testing::zero_crossings(mod)) {
      if (std::abs(t - 2.0) > 0.2) continue;
      const auto i = static_cast<std::size_t>(std::llround(t * 8192));
      CHECK(std::abs(x.samples[i]) < 0.02);
    }
  }

  TEST_CASE("ridge frequency doubles per second for gamma = 1") {
    const ChirpParams p{512, 4, 1};
    const AudioBuffer x = synth_chirp(p);
    const auto at = [&](double t) { return ridge_frequency(x, static_cast<std::size_t>((2.0 + t) * 8192), 1024); };
    // Frames centered on modulator peaks, where the envelope is locally symmetric.
    for (double t0 : {-0.4375, -0.1875}) CHECK(at(t0 + 1.0) / at(t0) == doctest::Approx(2.0).epsilon(0.02));
  }

  TEST_CASE("energy is confined to four window deviations") {
    for (double gamma : {0.5, 1.4, 4.0}) {
      const ChirpParams p{1024, 16, gamma};
      const AudioBuffer x = synth_chirp(p);
      const double s = chirp_window_std(p);
      double inside = 0, outside = 0;
      for (std::size_t i = 0; i < x.length(); ++i) {
        const double t = i / 8192.0 - 2.0;
        (std::abs(t) <= 4 * s ? inside : outside) += x.samples[i] * x.samples[i];
      }
      CHECK(outside < 1e-6 * (inside + outside));
    }
  }

  TEST_CASE("ascending chirp is not time symmetric") {
    const AudioBuffer x = synth_chirp({600, 6, 2});
    std::vector<double> diff(x.length());
    for (std::size_t i = 0; i < x.length(); ++i) diff[i] = x.samples[i] - x.samples[x.length() - 1 - i];
    CHECK(testing::l2(diff) > 1.0);
  }

  TEST_CASE("invalid arguments") {
    using testing::error_kind;
    CHECK(error_kind([] { synth_chirp({724, 8, 1.4}, 0.0); }) == ErrorKind::kInvalidArgument);
    CHECK(error_kind([] { synth_chirp({724, 8, 1.4}, 4.0, -1.0); }) == ErrorKind::kInvalidArgument);
    CHECK(error_kind([] { synth_chirp({NAN, 8, 1.4}); }) == ErrorKind::kInvalidArgument);
    CHECK(error_kind([] { synth_chirp({724, 8, 1.4}, 4.0, 1000.0); }) == ErrorKind::kInvalidArgument);
    CHECK(error_kind([] { chirp_carrier_frequency({724, 8, 1.4}, INFINITY); }) == ErrorKind::kInvalidArgument);
  }
}
