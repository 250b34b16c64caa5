#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "pnp/membrane.hpp"
#include "pnp/random.hpp"

using namespace pnp;

namespace {

DrumPerceptual random_drum(Rng& r) {
  DrumPerceptual p;
  p.omega1 = 2 * std::numbers::pi * std::exp(r.uniform(std::log(40.0), std::log(1000.0)));
  p.tau1 = r.uniform(0.4, 3.0);
  p.p = std::exp(r.uniform(std::log(1e-5), std::log(0.2)));
  p.D = std::exp(r.uniform(std::log(1e-5), std::log(0.3)));
  p.alpha = r.uniform(1e-5, 1.0);
  return p;
}

}  // namespace

TEST_SUITE("membrane") {
  TEST_CASE("gamma examples") {
    CHECK(gamma_m(1.0, 1, 1) == doctest::Approx(2.0));
    CHECK(gamma_m(0.5, 1, 1) == doctest::Approx(6.0));
    CHECK(gamma_m(1.0, 2, 1) == doctest::Approx(5.0));
    for (double a : {1e-3, 0.1, 0.7, 1.0}) CHECK(gamma_m(a, 1, 1) == doctest::Approx((1 + 1 / a) / a).epsilon(1e-14));
    CHECK(testing::error_kind([] { gamma_m(0.0, 1, 1); }) == ErrorKind::kInvalidArgument);
  }

  TEST_CASE("undamped ideal membrane is degenerate") {
    DrumPhysical p{0.0, 100.0, 0.0, 0.0, 1.0};
    CHECK(testing::error_kind([&] { modal_constants(p); }) == ErrorKind::kDegenerateParameters);
  }

  TEST_CASE("first mode decays at -1/tau1") {
    Rng r(3);
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
      const DrumPerceptual perc = random_drum(r);
      DrumPhysical phys;
      try {
        phys = to_physical(perc);
      } catch (const Error&) {
        continue;
      }
      const double sigma1 = phys.d3 / 2 * gamma_m(perc.alpha, 1, 1) - phys.d1 / 2;
      CHECK(sigma1 * perc.tau1 == doctest::Approx(-1.0).epsilon(1e-12));
      ++checked;
    }
    CHECK(checked > 150);
  }

  TEST_CASE("strike at the center silences even modes") {
    DrumPhysical p = to_physical({2 * std::numbers::pi * 200, 1.0, 0.01, 0.01, 1.0});
    for (const Mode& m : modal_constants(p, {0.5, 0.5})) {
      if (m.m1 % 2 == 0 || m.m2 % 2 == 0) CHECK(std::abs(m.amp) < 1e-15);
      else CHECK(std::abs(m.amp) > 1e-3);
    }
  }

  TEST_CASE("undispersed homogeneous limit") {
    const DrumPerceptual perc{2 * std::numbers::pi * 300, 1.5, 0.0, 0.0, 0.6};
    const DrumPhysical phys = to_physical(perc);
    const double a = perc.alpha, b = perc.beta(), t = perc.tau1, w = perc.omega1;
    CHECK(phys.S == 0.0);
    CHECK(phys.d3 == 0.0);
    CHECK(phys.d1 == doctest::Approx(2 / t));
    CHECK(phys.c * phys.c == doctest::Approx(a / (b * t * t) + a * w * w / b).epsilon(1e-13));
  }

  TEST_CASE("round trips and damping signs over random draws") {
    Rng r(11);
    int kept = 0, rejected = 0;
    for (int i = 0; i < 10000; ++i) {
      const DrumPerceptual perc = random_drum(r);
      DrumPhysical phys;
      try {
        phys = to_physical(perc);
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::kOutOfManifold);
        ++rejected;
        continue;
      }
      ++kept;
      CHECK(phys.d3 <= 0.0);
      const DrumPerceptual back = to_perceptual(phys);
      CHECK(testing::rel_err(back.omega1, perc.omega1) < 1e-9);
      CHECK(testing::rel_err(back.tau1, perc.tau1) < 1e-9);
      CHECK(testing::rel_err(back.p, perc.p) < 1e-9);
      CHECK(testing::rel_err(back.D, perc.D) < 1e-9);
      CHECK(testing::rel_err(back.alpha, perc.alpha) < 1e-9);
      const DrumPhysical again = to_physical(back);
      CHECK(testing::rel_err(again.c, phys.c) < 1e-9);
      CHECK(testing::rel_err(again.d1, phys.d1) < 1e-9);
    }
    CHECK(kept > 9000);
    MESSAGE("rejected " << rejected << " infeasible draws");
  }

  TEST_CASE("alpha = 1 inverse formula") {
    const DrumPhysical phys = to_physical({2 * std::numbers::pi * 150, 0.8, 0.05, 0.02, 1.0});
    const double s4 = std::pow(phys.S, 4);
    const double w2 = 4 * s4 + 2 * phys.c * phys.c - 0.25 * std::pow(2 * phys.d3 - phys.d1, 2);
    CHECK(to_perceptual(phys).omega1 == doctest::Approx(std::sqrt(w2)).epsilon(1e-12));
  }

  TEST_CASE("dispersion stretches partial ratios") {
    DrumPerceptual lo{2 * std::numbers::pi * 100, 1.0, 0.01, 0.01, 0.8};
    DrumPerceptual hi = lo;
    hi.D = 0.05;
    const auto a = modal_constants(to_physical(lo));
    const auto b = modal_constants(to_physical(hi));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(b[i].omega / b[0].omega > a[i].omega / a[0].omega);
  }

  TEST_CASE("render: zero at t=0, bounded by the amplitude sum, default length") {
    const DrumPerceptual perc{2 * std::numbers::pi * 220, 1.2, 0.02, 0.05, 0.7};
    const AudioBuffer x = synth_drum(perc);
    CHECK(x.length() == 65536);
    CHECK(x.sample_rate == 22050.0);
    CHECK(x.samples[0] == 0.0);
    double bound = 0;
    for (const Mode& m : modal_constants(to_physical(perc))) bound += std::abs(m.amp);
    for (double v : x.samples) CHECK(std::abs(v) <= bound + 1e-12);
  }

  TEST_CASE("single mode: frequency within one bin and envelope e^-1 at t = tau1") {
    const DrumPerceptual perc{2 * std::numbers::pi * 100, 1.0, 1e-5, 1e-5, 1.0};
    const AudioBuffer x = synth_drum(perc, kDrumDuration, kDrumSampleRate, 1);
    // Rectified peaks in one-period windows around t = 0.05 and t = 1.05.
    auto peak = [&](double t) {
      double m = 0;
      const auto c = static_cast<std::size_t>(t * 22050);
      for (std::size_t i = c - 110; i < c + 110; ++i) m = std::max(m, std::abs(x.samples[i]));
      return m;
    };
    CHECK(peak(1.05) / peak(0.05) == doctest::Approx(std::exp(-1.0)).epsilon(0.01));
    // Autocorrelation lag of the first period.
    std::size_t best = 0;
    double best_v = -1e300;
    for (std::size_t lag = 150; lag < 300; ++lag) {
      double acc = 0;
      for (std::size_t i = 0; i + lag < 22050; ++i) acc += x.samples[i] * x.samples[i + lag];
      if (acc > best_v) {
        best_v = acc;
        best = lag;
      }
    }
    CHECK(std::abs(22050.0 / best - 100.0) < 22050.0 / best - 22050.0 / (best + 1));
  }

  TEST_CASE("modes above Nyquist are dropped") {
    const DrumPerceptual perc{2 * std::numbers::pi * 1000, 1.0, 0.01, 0.3, 1.0};
    const auto modes = modal_constants(to_physical(perc));
    bool any_above = false;
    for (const Mode& m : modes) any_above = any_above || m.omega / (2 * std::numbers::pi) >= 11025;
    REQUIRE(any_above);
    const AudioBuffer x = synth_drum(perc);
    std::vector<Mode> below;
    for (const Mode& m : modes)
      if (m.omega / (2 * std::numbers::pi) < 11025) below.push_back(m);
    const AudioBuffer y = render_modes(below, x.length(), 22050);
    CHECK(x.samples == y.samples);
  }
}
