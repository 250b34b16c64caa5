#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace pnp {

/// Uniformly sampled mono signal.
struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 0.0;

  std::size_t length() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Throws invalid-argument unless sample_rate > 0, length >= 1 and all samples are finite.
void validate(const AudioBuffer& buffer);

/// 16-bit PCM little-endian mono WAV, peak-scaled to 0.891 (-1 dBFS). Silence is written as zeros.
void write_wav(const std::filesystem::path& path, const AudioBuffer& buffer);

/// Reads a 16-bit PCM mono WAV written by write_wav (used by tests and tools).
AudioBuffer read_wav(const std::filesystem::path& path);

inline constexpr double kWavPeak = 0.891;

}  // namespace pnp
