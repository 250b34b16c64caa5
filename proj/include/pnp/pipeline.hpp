#pragma once

#include <memory>

#include "pnp/audio.hpp"
#include "pnp/features.hpp"
#include "pnp/param_space.hpp"

namespace pnp {

/// Renders natural-space parameters with the synth they are tagged with. Drum parameters off the
/// physical manifold throw out-of-manifold or degenerate-parameters.
AudioBuffer render(const ParamVector& natural);

JtfsConfig default_jtfs_config(SynthId synth);

/// Dataset feasibility: the drum must stay on the physical manifold (with at least one mode below
/// Nyquist) at the draw and at every finite-difference probe around it. Empty for the chirp.
Feasibility default_feasibility(const ScalingSpec& scaling, double fd_step);

/// Constant-Q image fed to the regressor.
struct ImageSpec {
  FilterbankSpec bank;
  std::size_t hop = 0;
  double log_eps = 1e-3;

  std::size_t bins() const { return bank.size(); }
  std::size_t frames() const { return bank.signal_length / hop; }
};

/// chirp: Q=12, 4 octaves up to 2048 Hz, hop 256 (48 x 128). drum: Q=12, 8 octaves up to sr/4,
/// hop 512 (96 x 128).
ImageSpec default_image_spec(SynthId synth);

/// log(1 + |x * psi| / eps) scalogram (not yet standardized).
TimeFreqImage regressor_image(const AudioBuffer& x, const ImageSpec& spec);

/// Phi(g(h^-1(theta_bar))) with log compression: the map whose Jacobian defines the PNP metric.
class FeatureMap {
 public:
  FeatureMap(ScalingSpec scaling, const JtfsConfig& cfg);

  FeatureVector operator()(const ParamVector& theta_bar) const;
  /// Log-compressed JTFS of an already rendered signal.
  FeatureVector features(const AudioBuffer& x) const;

  const ScalingSpec& scaling() const { return scaling_; }
  const Jtfs& jtfs() const { return *jtfs_; }

 private:
  ScalingSpec scaling_;
  std::shared_ptr<const Jtfs> jtfs_;
};

}  // namespace pnp
