#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pnp/cache.hpp"
#include "pnp/features.hpp"
#include "pnp/kernel.hpp"
#include "pnp/param_space.hpp"
#include "pnp/pipeline.hpp"
#include "pnp/regressor.hpp"

namespace pnp {

enum class LossKind { kPloss, kPnp, kMss, kDdspAfterPloss, kPnpAfterPloss };
const char* to_string(LossKind k);
LossKind parse_loss(const std::string& s);
bool two_stage(LossKind k);
bool needs_kernels(LossKind k);

enum class FinetuneOptimizer { kAuto, kAdam, kClipped };

struct TrainConfig {
  LossKind loss = LossKind::kPloss;
  int epochs = 32;
  int pretrain_epochs = -1;           // -1: half of epochs for two-stage kinds
  std::size_t batch_size = 64;
  std::size_t samples_per_epoch = 1024;
  double eta0 = 1e-3;
  int plateau_patience = 3;
  double lr_factor = 0.1;
  double damping_decay = 0.2;
  double damping_floor = 0.0;
  double lambda_init = -1.0;          // < 0: lambda_max over training kernels
  FinetuneOptimizer finetune_optimizer = FinetuneOptimizer::kAuto;
  std::size_t val_perceptual_rows = 32;
  double mss_fd_step = 1e-3;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Reduce-on-plateau: cut when an epoch fails to beat the best of the previous `patience` epochs.
/// The window only counts epochs run since the last cut, so the first epochs of a stage and of
/// each new learning rate are exempt.
class PlateauRule {
 public:
  explicit PlateauRule(int patience) : patience_(static_cast<std::size_t>(std::max(patience, 1))) {}
  bool observe(double val_loss);

 private:
  std::size_t patience_;
  std::vector<double> window_;
};

/// Squared L2 distance in normalized space.
double ploss(const Vector& theta_hat, const Vector& theta_bar);

/// Rows, images, kernels and targets shared by training and evaluation. Lazily computed values are
/// memoized per row and safe to request from worker threads.
class Workspace {
 public:
  Workspace(const DatasetManifest& manifest, std::shared_ptr<const FeatureMap> phi, const ImageSpec& image,
            std::size_t image_budget_bytes = std::size_t{1} << 30);

  const DatasetManifest& manifest() const { return manifest_; }
  const ScalingSpec& scaling() const { return manifest_.scaling; }
  const FeatureMap& feature_map() const { return *phi_; }
  const ImageSpec& image_spec() const { return image_; }
  RegressorSpec regressor_spec() const;

  void attach_kernels(const KernelCache* kernels);
  void attach_features(const FeatureCache* features);
  const PNPKernel& kernel(std::size_t row) const;
  bool has_kernel(std::size_t row) const;

  /// Standardized regressor input for a manifest row.
  std::vector<double> image(std::size_t row) const;
  AudioBuffer target_audio(std::size_t row) const;
  /// Log-compressed JTFS of the target (feature cache if attached, else computed once).
  const FeatureVector& target_features(std::size_t row) const;
  Vector theta_bar(std::size_t row) const;

  /// Clamps normalized parameters into the box and renders them.
  AudioBuffer render_normalized(const Vector& theta) const;

 private:
  struct Memo;
  const DatasetManifest& manifest_;
  std::shared_ptr<const FeatureMap> phi_;
  ImageSpec image_;
  bool keep_images_ = true;
  std::vector<std::ptrdiff_t> kernel_index_;
  const KernelCache* kernels_ = nullptr;
  const FeatureCache* features_ = nullptr;
  std::shared_ptr<Memo> memo_;
};

/// mss_distance(g(h^-1(clamp(theta))), target) and its central-difference gradient over theta
/// (2J + 1 syntheses; the step shrinks one-sidedly at the box boundary).
struct MssEval {
  double loss = 0.0;
  Vector grad;
};
MssEval mss_loss_and_grad(const Workspace& ws, const Vector& theta, const MssMagnitudes& target, double step,
                          bool with_grad = true);

struct EpochRecord {
  int epoch = 0;        // 1-based over the whole run
  int stage = 1;        // 1 = pretrain or single stage, 2 = finetune
  std::string stage_loss;
  double eta = 0.0;
  double lambda = 0.0;  // 0 outside PNP stages
  double train_loss = 0.0;
  double val_loss = 0.0;  // the stage objective, drives the schedules
  double val_ploss = 0.0;
  double val_mss = 0.0;
  double val_jtfs = 0.0;
  std::size_t skipped_items = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  std::uint64_t pretrain_hash = 0;  // weights restored at the stage boundary
  std::uint64_t boundary_hash = 0;  // weights the finetune stage started from
  double lambda_max = 0.0;
};

std::string history_header();
std::string history_line(const EpochRecord& r);
std::uint64_t weights_hash(const Regressor& net);

struct FitCallbacks {
  std::function<void(const EpochRecord&, const Regressor&)> on_epoch;
  /// Called on every weight update with the 0-based global step (used by equivalence tests).
  std::function<void(std::uint64_t, const Regressor&)> on_step;
};

/// Staged training (pretrain, then finetune). `net` holds the initial weights and receives the best-validation weights
/// of the final stage.
TrainHistory fit(const TrainConfig& cfg, const Workspace& ws, Regressor& net, const FitCallbacks& cb = {});

using Predictor = std::function<Vector(std::size_t row)>;
Predictor regressor_predictor(const Workspace& ws, const Regressor& net);

struct EvalMetrics {
  std::size_t rows = 0;
  std::size_t failures = 0;  // predictions that could not be rendered
  double jtfs_mean = 0.0, jtfs_std = 0.0;
  double mss_mean = 0.0, mss_std = 0.0;
  double ploss_mean = 0.0;
};

EvalMetrics evaluate(const Workspace& ws, const std::vector<std::size_t>& rows, const Predictor& predict, int jobs = 1);

/// Aligned report row: loss kind, feature, JTFS mean +- std, MSS mean +- std, P-loss mean.
std::string report_header();
std::string report_row(const std::string& label, const EvalMetrics& m);
extern const char* const kBackboneDisclaimer;

}  // namespace pnp
