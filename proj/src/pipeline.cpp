#include "pnp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pnp/chirp.hpp"
#include "pnp/errors.hpp"
#include "pnp/membrane.hpp"

namespace pnp {

AudioBuffer render(const ParamVector& natural) {
  require(natural.space == Space::kNatural, ErrorKind::kInvalidArgument, "render expects natural parameters");
  if (natural.synth == SynthId::kChirp) {
    require(natural.size() == 3, ErrorKind::kInvalidArgument, "chirp expects 3 parameters");
    return synth_chirp(ChirpParams{natural[0], natural[1], natural[2]});
  }
  require(natural.size() == 5, ErrorKind::kInvalidArgument, "drum expects 5 parameters");
  return synth_drum(DrumPerceptual{natural[0], natural[1], natural[2], natural[3], natural[4]});
}

JtfsConfig default_jtfs_config(SynthId synth) {
  if (synth == SynthId::kChirp) return jtfs_config_for(kChirpSampleRate, 32768);
  return jtfs_config_for(kDrumSampleRate, 131072);
}

Feasibility default_feasibility(const ScalingSpec& scaling, double fd_step) {
  if (scaling.synth == SynthId::kChirp) return {};
  return [scaling, fd_step](const ParamVector& bar) {
    auto ok = [&](const ParamVector& b) {
      try {
        const ParamVector n = unscale(b, scaling);
        const std::vector<Mode> modes = modal_constants(to_physical(DrumPerceptual{n[0], n[1], n[2], n[3], n[4]}));
        for (const Mode& m : modes)
          if (m.omega / (2.0 * std::numbers::pi) < kDrumSampleRate / 2.0) return true;
        return false;
      } catch (const Error&) {
        return false;
      }
    };
    if (!ok(bar)) return false;
    for (std::size_t d = 0; d < bar.size(); ++d) {
      for (double sign : {-1.0, 1.0}) {
        ParamVector probe = bar;
        probe.values[d] = std::clamp(bar[d] + sign * fd_step, scaling.box_lo(d), scaling.box_hi(d));
        if (!ok(probe)) return false;
      }
    }
    return true;
  };
}

ImageSpec default_image_spec(SynthId synth) {
  ImageSpec s;
  if (synth == SynthId::kChirp) {
    s.bank = top_anchored_spec(kChirpSampleRate, 32768, 12, 4, 2048.0);
    s.hop = 256;
  } else {
    s.bank = top_anchored_spec(kDrumSampleRate, 65536, 12, 8, kDrumSampleRate / 4);
    s.hop = 512;
  }
  return s;
}

TimeFreqImage regressor_image(const AudioBuffer& x, const ImageSpec& spec) {
  TimeFreqImage img = scalogram(x, spec.bank, spec.hop);
  for (double& v : img.data) v = std::log1p(v / spec.log_eps);
  return img;
}

FeatureMap::FeatureMap(ScalingSpec scaling, const JtfsConfig& cfg)
    : scaling_(std::move(scaling)), jtfs_(std::make_shared<const Jtfs>(cfg)) {}

FeatureVector FeatureMap::operator()(const ParamVector& theta_bar) const {
  return features(render(unscale(theta_bar, scaling_)));
}

FeatureVector FeatureMap::features(const AudioBuffer& x) const { return log_compress((*jtfs_)(x)); }

}  // namespace pnp
