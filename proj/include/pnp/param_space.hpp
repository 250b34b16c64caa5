#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace pnp {

enum class SynthId { kChirp, kDrum };
enum class Space { kNatural, kLog, kNormalized };

const char* to_string(SynthId id);
SynthId parse_synth(const std::string& name);

struct ParamVector {
  std::vector<double> values;
  Space space = Space::kNatural;
  SynthId synth = SynthId::kChirp;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

/// One parameter dimension. lo/hi are natural-unit bounds; the post-log bounds follow from them.
struct DimScaling {
  std::string name;
  bool log = false;
  double lo = 0.0;
  double hi = 1.0;
};

/// Per-dimension log (optional) followed by min-max to [-1, 1] (optional). The two flags are the
/// ablation switches; with both on this is the default reparametrization h.
struct ScalingSpec {
  SynthId synth = SynthId::kChirp;
  std::vector<DimScaling> dims;
  bool use_log = true;
  bool use_minmax = true;

  std::size_t size() const { return dims.size(); }
  bool logged(std::size_t d) const { return use_log && dims[d].log; }
  /// Bounds of dimension d after the optional log (the grid coordinates).
  double warped_lo(std::size_t d) const;
  double warped_hi(std::size_t d) const;
  /// Bounds of dimension d in normalized coordinates ([-1, 1] with min-max on).
  double box_lo(std::size_t d) const;
  double box_hi(std::size_t d) const;
  std::string describe() const;
};

/// chirp: fc [512, 1024] Hz, fm [4, 16] Hz, gamma [0.5, 4] oct/s, all log-scaled.
/// drum: omega1 [2 pi 40, 2 pi 1000] rad/s (log), tau1 [0.4, 3] s, p [1e-5, 0.2] (log),
/// D [1e-5, 0.3] (log), alpha [1e-5, 1].
ScalingSpec default_scaling(SynthId synth);

/// Throws range-error naming the dimension if a natural value lies outside its range.
ParamVector scale(const ParamVector& theta, const ScalingSpec& spec);
ParamVector unscale(const ParamVector& theta_bar, const ScalingSpec& spec);
/// Natural -> post-log coordinates (identity on linear dimensions).
ParamVector to_log(const ParamVector& theta, const ScalingSpec& spec);

struct GridSpec {
  std::vector<int> steps;  // per dimension, each >= 4
  std::uint64_t seed = 0;

  std::size_t cells() const;
};

/// Desk defaults: chirp 12^3, drum 6^5.
GridSpec default_grid(SynthId synth, std::uint64_t seed = 0);

/// Side length of the centered validation block: max(1, round(0.1^(1/J) * steps)).
int validation_side(int steps, std::size_t dims);

enum class Split : std::uint8_t { kTrain, kVal, kTest };
const char* to_string(Split s);

struct ManifestRow {
  std::uint32_t id = 0;  // lexicographic cell index, first dimension slowest
  Split split = Split::kTrain;
  std::vector<double> natural;
  std::vector<double> normalized;
};

struct DatasetManifest {
  ScalingSpec scaling;
  GridSpec grid;
  std::vector<ManifestRow> rows;
  std::string config_path;   // recorded in the CSV header comment
  std::string config_hash;

  std::vector<std::size_t> indices(Split s) const;
  ParamVector natural(std::size_t row) const;
  ParamVector normalized(std::size_t row) const;
  /// Hash of the canonical CSV text; caches derived from this manifest store it.
  std::uint64_t hash() const;
};

/// Predicate on normalized parameters; draws failing it are redrawn inside the same cell.
using Feasibility = std::function<bool(const ParamVector&)>;

/// One uniform draw per cell in post-log coordinates; centered interior block -> val, the other
/// cells shuffled into train/test at 8:1. Throws invalid-spec if any steps < 4, or if a cell yields
/// no feasible draw in 1000 attempts.
DatasetManifest generate_grid(const GridSpec& grid, const ScalingSpec& scaling, const Feasibility& feasible = {});

std::string manifest_csv(const DatasetManifest& m);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace pnp
