#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pnp/features.hpp"
#include "pnp/param_space.hpp"
#include "pnp/pipeline.hpp"
#include "pnp/trainer.hpp"

namespace pnp {

/// Flat `key = value` run configuration. Lines starting with '#' are comments; unknown keys, duplicate
/// keys and malformed values throw config errors.
struct RunConfig {
  SynthId synth = SynthId::kChirp;
  std::vector<int> steps;           // empty: desk default for the synth
  std::uint64_t dataset_seed = 0;
  bool use_log = true;
  bool use_minmax = true;
  JtfsConfig jtfs;                  // sample rate and length follow the synth
  double fd_step = 1e-3;
  TrainConfig train;
  std::string data_dir;             // manifest and caches; empty: the run directory

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  /// Applies one `key=value` override (same validation as the file).
  void set(const std::string& key, const std::string& value);

  ScalingSpec scaling() const;
  GridSpec grid() const;
  ImageSpec image() const;

  /// Canonical text listing every key with its resolved value.
  std::string resolved() const;
  /// Hash of the resolved text without `jobs`.
  std::uint64_t hash() const;
  /// Hash of the keys a manifest depends on.
  std::uint64_t dataset_hash() const;
  /// Hash identifying a feature cache: dataset manifest + JTFS configuration.
  std::uint64_t feature_hash(std::uint64_t manifest_hash) const;
  /// Hash identifying a kernel cache: feature hash + finite-difference step.
  std::uint64_t kernel_hash(std::uint64_t manifest_hash) const;
};

std::vector<std::string> config_keys();

}  // namespace pnp
