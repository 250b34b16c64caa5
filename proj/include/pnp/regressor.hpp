#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnp/param_space.hpp"

namespace pnp {

/// Output activation of the last dense layer: tanh with min-max scaling, identity with log-only
/// scaling, LeakyReLU (slope 0.01) with neither.
enum class HeadActivation : std::uint8_t { kTanh, kIdentity, kLeakyRelu };

HeadActivation head_for(const ScalingSpec& scaling);
const char* to_string(HeadActivation h);

struct RegressorSpec {
  std::size_t height = 48;   // image bins
  std::size_t width = 128;   // image frames
  std::size_t outputs = 3;
  HeadActivation head = HeadActivation::kTanh;
  std::array<std::size_t, 4> channels = {16, 32, 64, 64};
  std::size_t hidden = 64;

  std::string describe() const;
  std::uint64_t hash() const;
};

/// Conv net: 4 x [3x3 conv (zero padding) -> SiLU -> 2x2 mean-pool], global mean-pool,
/// dense -> SiLU, dense -> head. All parameters live in one flat vector.
class Regressor {
 public:
  struct Layer {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;  // 1 for biases
    std::size_t fan_in = 0;
    bool bias = false;

    std::size_t size() const { return rows * cols; }
  };

  explicit Regressor(const RegressorSpec& spec);

  const RegressorSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t size() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  /// Mutable access; invalidates forward caches taken before the call.
  std::span<double> mutable_params() {
    ++version_;
    return params_;
  }
  std::uint64_t version() const { return version_; }

  /// Weights ~ N(0, 1 / fan_in), biases 0, from a seeded stream.
  void init(std::uint64_t seed);

 private:
  RegressorSpec spec_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
  std::uint64_t version_ = 0;
};

/// Per-sample activations kept for backward.
struct ForwardCache {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  struct Block {
    std::size_t h = 0, w = 0;  // input spatial size
    RowMatrix cols;            // im2col of the block input, (cin * 9) x (h * w)
    RowMatrix z;               // pre-activation, cout x (h * w)
  };
  std::array<Block, 4> blocks;
  std::size_t pooled_h = 0, pooled_w = 0;
  Eigen::VectorXd g, zh, h, zo, out;
  std::uint64_t version = 0;
  const Regressor* owner = nullptr;
};

/// Per-image standardization: zero mean, unit variance (variance guarded by 1e-12).
std::vector<double> standardize(std::span<const double> image);

/// theta_tilde for an already standardized height x width image (row-major by bin).
Eigen::VectorXd forward(const Regressor& net, std::span<const double> image, ForwardCache* cache = nullptr);

/// Accumulates dLoss/dW into grad (size net.size()) given dLoss/dtheta_tilde.
void backward(const Regressor& net, const ForwardCache& cache, const Eigen::VectorXd& upstream, std::span<double> grad);

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 0.0;   // global L2 norm threshold on the raw gradient; 0 disables
  double decay = 0.0;  // decoupled decay W <- W - decay * eta * W
};

/// Plain Adam (pretraining and single-stage runs).
OptimizerConfig adam_config();
/// Finetuning optimizer: beta1 0.965, beta2 0.999, eps 1e-15, clip 0.04, decay 0.1.
OptimizerConfig clipped_config();

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, std::size_t n, double eta);

  /// Rejects non-finite gradients with training-divergence, leaving weights and state untouched.
  void step(Regressor& net, std::span<const double> grad);

  double eta() const { return eta_; }
  void set_eta(double eta);
  std::uint64_t steps() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }
  double last_update_norm() const { return last_update_norm_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
  double eta_ = 0.0;
  double last_update_norm_ = 0.0;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

/// "PNPW" u16 version, u64 spec hash, u32 layer count, per layer u32 size + f64 values.
void save_checkpoint(const std::filesystem::path& path, const Regressor& net);
/// Refuses (cache-mismatch) a checkpoint written for a different layer spec.
void load_checkpoint(const std::filesystem::path& path, Regressor& net);

}  // namespace pnp
