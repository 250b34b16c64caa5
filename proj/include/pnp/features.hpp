#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pnp/audio.hpp"
#include "pnp/fft.hpp"
#include "pnp/filterbank.hpp"

namespace pnp {

/// Descriptor of one scattering coefficient.
struct PathInfo {
  std::uint8_t order = 1;
  std::int8_t spin = 0;          // +1 up, -1 down, 0 first order or frequential low-pass
  std::int16_t lambda = -1;      // first-order filter index; -1 when averaged over frequency
  double center_hz = 0.0;        // first-order center
  double rate_hz = 0.0;          // temporal modulation rate (order 2)
  double scale_cpo = 0.0;        // frequential scale in cycles/octave (0 = low-pass)

  bool operator==(const PathInfo&) const = default;
};

struct PathLayout {
  std::vector<PathInfo> paths;
  std::uint64_t hash = 0;
};

struct FeatureVector {
  std::vector<double> coeffs;
  std::shared_ptr<const PathLayout> layout;
  bool log_compressed = false;

  std::size_t size() const { return coeffs.size(); }
};

/// Bins x frames magnitude image, row-major by bin.
struct TimeFreqImage {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> data;
  std::vector<double> centers_hz;
  std::size_t hop = 0;

  double at(std::size_t bin, std::size_t frame) const { return data[bin * frames + frame]; }
};

/// Joint time-frequency scattering configuration. Every field enters the hash stored in caches.
struct JtfsConfig {
  double sample_rate = 8192.0;
  std::size_t length = 32768;     // padded to a power of two
  int q1 = 12;
  int octaves1 = 8;               // first-order bank, top center at sample_rate / 4
  double rate_min_hz = 0.5;       // second-order temporal bank, Q = 1
  int n_rates = 8;                // 0.5 .. 64 Hz
  double scale_min_cpo = 0.25;    // frequential bank, Q = 1
  int n_scales = 5;               // 0.25 .. 4 cycles/octave
  double support_sigmas = 4.0;    // band truncation of every filter, in Gaussian std units
  double time_oversample = 2.0;   // oversampling of the decimated second-order time grids

  std::string describe() const;
  std::uint64_t hash() const;
};

JtfsConfig jtfs_config_for(double sample_rate, std::size_t length);

/// Precomputed JTFS operator: immutable after construction and shareable across threads.
class Jtfs {
 public:
  explicit Jtfs(const JtfsConfig& cfg);

  /// [S1, S2] with global time and frequency averaging (pre-log, non-negative).
  FeatureVector operator()(const AudioBuffer& x) const;

  const JtfsConfig& config() const { return cfg_; }
  std::shared_ptr<const PathLayout> layout() const { return layout_; }
  const Filterbank& first_order() const { return bank1_; }

 private:
  struct Band {
    std::size_t start = 0;          // first FFT bin (signed offset for the frequential axis)
    std::vector<double> response;   // filter values on consecutive bins
    std::size_t grid = 0;           // decimated output length
  };

  JtfsConfig cfg_;
  std::size_t n_ = 0;               // padded signal length
  std::size_t frames_ = 0;          // first-order decimated length (M1)
  std::size_t lambda_pad_ = 0;
  Filterbank bank1_;
  std::vector<Band> first_;         // one per first-order filter
  std::vector<Band> rates_;         // temporal modulation filters (bins from 0)
  std::vector<Band> freq_;          // lowpass, then (scale, spin +1, spin -1) per scale
  std::vector<std::ptrdiff_t> freq_start_;  // signed first bin of each frequential band
  std::shared_ptr<const PathLayout> layout_;
};

FeatureVector jtfs(const AudioBuffer& x, const JtfsConfig& cfg);

/// log(1 + c / eps) per coefficient; negative input throws invalid-state.
FeatureVector log_compress(const FeatureVector& f, double eps = 1e-3);

/// Euclidean distance; layouts must match.
double feature_distance(const FeatureVector& a, const FeatureVector& b);

/// |x * psi_lambda| averaged over consecutive frames of `hop` samples.
TimeFreqImage scalogram(const AudioBuffer& x, const FilterbankSpec& spec, std::size_t hop);

/// Magnitude STFTs at window sizes 2^5 .. 2^10 (periodic Hann, hop = window / 4).
struct MssMagnitudes {
  std::vector<std::vector<double>> scales;
  std::size_t length = 0;
  double sample_rate = 0.0;
};

MssMagnitudes mss_magnitudes(const AudioBuffer& x);
double mss_distance(const MssMagnitudes& a, const MssMagnitudes& b);
/// Sum over k = 5..10 of || |STFT_k(x)| - |STFT_k(y)| ||^2.
double mss_distance(const AudioBuffer& x, const AudioBuffer& y);

}  // namespace pnp
