#pragma once

#include "pnp/audio.hpp"

namespace pnp {

/// AM/FM arpeggiator parameters: carrier start frequency (Hz), AM frequency (Hz), chirp rate (oct/s).
struct ChirpParams {
  double fc = 724.0;
  double fm = 8.0;
  double gamma = 1.4;
};

inline constexpr double kChirpSampleRate = 8192.0;
inline constexpr double kChirpDuration = 4.0;

/// Standard deviation of the Gaussian window, seconds.
inline double chirp_window_std(const ChirpParams& p) { return 0.2 / p.gamma; }

/// Amplitude-modulated exponential chirp under a Gaussian window.
///
/// Time is measured from the window center t_c = duration / 2:
///   x(t) = sin(2 pi fc / (gamma ln 2) * (2^(gamma t) - 1)) * sin(2 pi fm t) * exp(-t^2 / (2 s^2)),
/// with s = 0.2 / gamma. The carrier therefore sweeps through fc at the center of the window and the
/// Nyquist check only has to cover the window support (+-4 s).
AudioBuffer synth_chirp(const ChirpParams& params, double duration = kChirpDuration,
                        double sample_rate = kChirpSampleRate);

/// Instantaneous carrier frequency fc * 2^(gamma t), t in seconds relative to the window center.
double chirp_carrier_frequency(const ChirpParams& params, double t);

/// The modulator factor sin(2 pi fm t) sampled on the same grid as synth_chirp (test helper).
AudioBuffer chirp_modulator(const ChirpParams& params, double duration = kChirpDuration,
                            double sample_rate = kChirpSampleRate);

}  // namespace pnp
