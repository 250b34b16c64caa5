#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pnp/cache.hpp"
#include "pnp/config.hpp"
#include "pnp/errors.hpp"
#include "pnp/param_space.hpp"
#include "pnp/trainer.hpp"

namespace pnp {

/// 2 config/range, 3 cache mismatch, 4 divergence, 5 missing artifact, 1 anything else.
int exit_code(ErrorKind kind);

/// A configured run. Dataset and caches live in `data_dir` (shared between runs with the same
/// dataset keys); config, history and checkpoints live in `run_dir`.
struct RunContext {
  RunConfig cfg;
  std::filesystem::path run_dir;
  std::ostream* log = nullptr;

  std::filesystem::path data_dir() const;
  std::filesystem::path manifest_path() const { return data_dir() / "manifest.csv"; }
  std::filesystem::path features_path() const { return data_dir() / "features.pnpf"; }
  std::filesystem::path kernels_path() const { return data_dir() / "kernels.pnpk"; }
  std::filesystem::path history_path() const { return run_dir / "history.tsv"; }
  std::filesystem::path best_path() const { return run_dir / "best.pnpw"; }
};

/// Exclusive ownership of a run directory through `<run_dir>/.lock`. Throws invalid-state if the
/// lock is held.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Creates the run directory and writes config.resolved + config.hash; refuses (cache-mismatch) a
/// directory that already holds a different config.
void prepare_run_dir(const RunContext& ctx);

DatasetManifest cmd_dataset(const RunContext& ctx);
/// Reads the manifest of the data directory, refusing one produced by other dataset keys.
DatasetManifest load_dataset(const RunContext& ctx);

struct PrecomputeStats {
  std::size_t features_computed = 0, features_kept = 0;
  std::size_t kernels_computed = 0, kernels_kept = 0;
};
/// Features for every manifest row, kernels for train and val rows. Rows already present in
/// caches with matching hashes are kept.
PrecomputeStats cmd_precompute(const RunContext& ctx);

struct TrainResult {
  TrainHistory history;
  std::uint64_t weights = 0;
};
/// Fits from seed `cfg.train.seed`; writes history.tsv, best.pnpw and a `best` pointer file.
TrainResult cmd_train(const RunContext& ctx);

struct EvalRow {
  std::string label;
  EvalMetrics metrics;
};
/// One row per checkpoint (an empty list evaluates the oracle stub) plus a mean row when more
/// than one is given. Requires the feature cache.
std::vector<EvalRow> cmd_eval(const RunContext& ctx, const std::vector<std::filesystem::path>& checkpoints,
                              bool oracle);
std::string format_report(const std::vector<EvalRow>& rows);

/// Natural parameters, or the centre of the normalized box when `natural` is empty.
AudioBuffer cmd_render(SynthId synth, const std::vector<double>& natural, const std::filesystem::path& out);

struct AuditRow {
  std::uint32_t id = 0;
  double max_abs = 0.0;
  double rel = 0.0;  // Frobenius, relative to the cached m
};
/// Recomputes the metric of `count` seeded random cached rows.
std::vector<AuditRow> cmd_audit(const RunContext& ctx, std::size_t count, std::uint64_t seed);

}  // namespace pnp
