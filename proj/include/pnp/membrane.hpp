#pragma once

#include <array>
#include <vector>

#include "pnp/audio.hpp"

namespace pnp {

/// Coefficients of the fourth-order damped membrane PDE.
struct DrumPhysical {
  double S = 0.0;      // stiffness
  double c = 0.0;      // wave speed
  double d1 = 0.0;     // frequency-independent damping, 1/s
  double d3 = 0.0;     // frequency-dependent damping, 1/s
  double alpha = 1.0;  // aspect ratio
};

/// Perceptual reparametrization of the membrane.
struct DrumPerceptual {
  double omega1 = 2.0 * 3.141592653589793 * 200.0;  // fundamental, rad/s
  double tau1 = 1.0;                                // decay time of the first mode, s
  double p = 0.01;                                  // inhomogeneous damping rate
  double D = 0.01;                                  // frequential dispersion
  double alpha = 0.5;                               // aspect ratio

  double beta() const { return 1.0 + 1.0 / alpha; }
};

struct Mode {
  int m1 = 1;
  int m2 = 1;
  double omega = 0.0;  // rad/s
  double sigma = 0.0;  // 1/s, negative for decaying modes
  double amp = 0.0;
};

inline constexpr double kDrumSampleRate = 22050.0;
inline constexpr double kDrumDuration = 65536.0 / 22050.0;
inline constexpr int kDrumModes = 10;
inline constexpr std::array<double, 2> kDrumStrike = {0.4, 0.4};
inline constexpr double kDrumExcitation = 0.03;

/// Gamma_m = ((alpha + 1) / (alpha^2 + 1)) * (m1^2 + m2^2 / alpha^2).
///
/// The side length is chosen per alpha so that Gamma_1 = beta / alpha, which makes the perceptual
/// forward and inverse maps exact inverses of each other.
double gamma_m(double alpha, int m1, int m2);

/// Modal frequencies, decay rates and amplitudes for m1, m2 in [1, m_max]. Modes that do not
/// oscillate (omega^2 <= 0) or do not decay (sigma >= 0) are dropped; an empty result throws
/// degenerate-parameters.
std::vector<Mode> modal_constants(const DrumPhysical& phys, std::array<double, 2> strike = kDrumStrike,
                                  int m_max = kDrumModes);

DrumPhysical to_physical(const DrumPerceptual& perc);
DrumPerceptual to_perceptual(const DrumPhysical& phys);

/// Modal synthesis x(t) = sum_m amp_m exp(sigma_m t) sin(omega_m t); modes at or above Nyquist are
/// dropped.
AudioBuffer synth_drum(const DrumPerceptual& perc, double duration = kDrumDuration,
                       double sample_rate = kDrumSampleRate, int m_max = kDrumModes);

/// Renders an explicit mode list (shared by synth_drum and tests).
AudioBuffer render_modes(const std::vector<Mode>& modes, std::size_t length, double sample_rate);

}  // namespace pnp
