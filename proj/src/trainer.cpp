#include "pnp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "pnp/binary_io.hpp"
#include "pnp/errors.hpp"
#include "pnp/parallel.hpp"
#include "pnp/random.hpp"

namespace pnp {
namespace {

// Gradients are summed per chunk of consecutive batch items, then chunks in order, so the result
// does not depend on the number of worker threads.
constexpr std::size_t kChunk = 8;

enum class Objective { kPloss, kPnp, kMss };

struct Stage {
  Objective objective = Objective::kPloss;
  int epochs = 0;
  OptimizerConfig optimizer;
  const char* name = "ploss";
};

std::vector<Stage> plan(const TrainConfig& cfg) {
  require(cfg.epochs >= 1, ErrorKind::kConfig, "epochs must be >= 1");
  require(cfg.batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  require(cfg.eta0 > 0, ErrorKind::kConfig, "eta0 must be positive");
  std::vector<Stage> stages;
  switch (cfg.loss) {
    case LossKind::kPloss: stages.push_back({Objective::kPloss, cfg.epochs, adam_config(), "ploss"}); break;
    case LossKind::kPnp: stages.push_back({Objective::kPnp, cfg.epochs, adam_config(), "pnp"}); break;
    case LossKind::kMss: stages.push_back({Objective::kMss, cfg.epochs, adam_config(), "mss"}); break;
    case LossKind::kDdspAfterPloss:
    case LossKind::kPnpAfterPloss: {
      const int pre = cfg.pretrain_epochs >= 0 ? cfg.pretrain_epochs : cfg.epochs / 2;
      require(pre >= 1 && pre < cfg.epochs, ErrorKind::kConfig, "pretrain_epochs must leave both stages non-empty");
      const bool pnp = cfg.loss == LossKind::kPnpAfterPloss;
      OptimizerConfig fine = adam_config();
      if (cfg.finetune_optimizer == FinetuneOptimizer::kClipped ||
          (cfg.finetune_optimizer == FinetuneOptimizer::kAuto && pnp)) {
        fine = clipped_config();
      }
      stages.push_back({Objective::kPloss, pre, adam_config(), "ploss"});
      stages.push_back({pnp ? Objective::kPnp : Objective::kMss, cfg.epochs - pre, fine, pnp ? "pnp" : "mss"});
      break;
    }
  }
  return stages;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::kPloss: return "ploss";
    case LossKind::kPnp: return "pnp";
    case LossKind::kMss: return "mss";
    case LossKind::kDdspAfterPloss: return "ddsp_after_ploss";
    case LossKind::kPnpAfterPloss: return "pnp_after_ploss";
  }
  return "?";
}

LossKind parse_loss(const std::string& s) {
  for (LossKind k : {LossKind::kPloss, LossKind::kPnp, LossKind::kMss, LossKind::kDdspAfterPloss,
                     LossKind::kPnpAfterPloss}) {
    if (s == to_string(k)) return k;
  }
  fail(ErrorKind::kConfig, "unknown loss '" + s + "' (ploss, pnp, mss, ddsp_after_ploss, pnp_after_ploss)");
}

bool two_stage(LossKind k) { return k == LossKind::kDdspAfterPloss || k == LossKind::kPnpAfterPloss; }
bool needs_kernels(LossKind k) { return k == LossKind::kPnp || k == LossKind::kPnpAfterPloss; }

bool PlateauRule::observe(double val_loss) {
  bool cut = false;
  if (window_.size() >= patience_) {
    const double best = *std::min_element(window_.end() - static_cast<std::ptrdiff_t>(patience_), window_.end());
    cut = val_loss >= best;
  }
  if (cut) window_.clear();
  else window_.push_back(val_loss);
  return cut;
}

double ploss(const Vector& theta_hat, const Vector& theta_bar) {
  require(theta_hat.size() == theta_bar.size(), ErrorKind::kInvalidArgument, "parameter dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < theta_hat.size(); ++i) {
    const double d = theta_hat(i) - theta_bar(i);
    s += d * d;
  }
  return s;
}

struct Workspace::Memo {
  explicit Memo(std::size_t n) : image_once(n), feature_once(n), images(n), features(n) {}
  std::vector<std::once_flag> image_once;
  std::vector<std::once_flag> feature_once;
  std::vector<std::vector<double>> images;
  std::vector<FeatureVector> features;
};

Workspace::Workspace(const DatasetManifest& manifest, std::shared_ptr<const FeatureMap> phi, const ImageSpec& image,
                     std::size_t image_budget_bytes)
    : manifest_(manifest), phi_(std::move(phi)), image_(image), memo_(std::make_shared<Memo>(manifest.rows.size())) {
  require(phi_ != nullptr, ErrorKind::kInvalidArgument, "workspace needs a feature map");
  const std::size_t bytes = manifest.rows.size() * image.bins() * image.frames() * sizeof(double);
  keep_images_ = bytes <= image_budget_bytes;
}

RegressorSpec Workspace::regressor_spec() const {
  RegressorSpec s;
  s.height = image_.bins();
  s.width = image_.frames();
  s.outputs = scaling().size();
  s.head = head_for(scaling());
  return s;
}

void Workspace::attach_kernels(const KernelCache* kernels) {
  kernels_ = kernels;
  kernel_index_.assign(manifest_.rows.size(), -1);
  if (!kernels) return;
  std::vector<std::ptrdiff_t> by_id;
  for (std::size_t i = 0; i < kernels->kernels.size(); ++i) {
    const std::uint32_t id = kernels->kernels[i].id;
    if (by_id.size() <= id) by_id.resize(id + 1, -1);
    by_id[id] = static_cast<std::ptrdiff_t>(i);
  }
  for (std::size_t r = 0; r < manifest_.rows.size(); ++r) {
    const std::uint32_t id = manifest_.rows[r].id;
    if (id < by_id.size()) kernel_index_[r] = by_id[id];
  }
}

void Workspace::attach_features(const FeatureCache* features) { features_ = features; }

bool Workspace::has_kernel(std::size_t row) const {
  return kernels_ && row < kernel_index_.size() && kernel_index_[row] >= 0;
}

const PNPKernel& Workspace::kernel(std::size_t row) const {
  if (!has_kernel(row)) {
    fail(ErrorKind::kMissingArtifact,
         "no PNP kernel for manifest row " + std::to_string(manifest_.rows.at(row).id) + "; run the precompute command");
  }
  return kernels_->kernels[static_cast<std::size_t>(kernel_index_[row])];
}

AudioBuffer Workspace::target_audio(std::size_t row) const { return render_normalized(theta_bar(row)); }

std::vector<double> Workspace::image(std::size_t row) const {
  auto compute = [&] { return standardize(regressor_image(target_audio(row), image_).data); };
  if (!keep_images_) return compute();
  std::call_once(memo_->image_once.at(row), [&] { memo_->images[row] = compute(); });
  return memo_->images[row];
}

const FeatureVector& Workspace::target_features(std::size_t row) const {
  std::call_once(memo_->feature_once.at(row), [&] {
    if (features_) {
      const std::ptrdiff_t i = features_->find(manifest_.rows[row].id);
      if (i >= 0) {
        FeatureVector f;
        f.coeffs = features_->coeffs[static_cast<std::size_t>(i)];
        f.layout = phi_->jtfs().layout();
        f.log_compressed = true;
        require(f.size() == f.layout->paths.size(), ErrorKind::kCacheMismatch, "feature cache layout differs");
        memo_->features[row] = std::move(f);
        return;
      }
    }
    memo_->features[row] = phi_->features(target_audio(row));
  });
  return memo_->features[row];
}

Vector Workspace::theta_bar(std::size_t row) const {
  const auto& v = manifest_.rows.at(row).normalized;
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

AudioBuffer Workspace::render_normalized(const Vector& theta) const {
  const ScalingSpec& s = scaling();
  require(static_cast<std::size_t>(theta.size()) == s.size(), ErrorKind::kInvalidArgument, "parameter dimension mismatch");
  ParamVector p{std::vector<double>(s.size()), Space::kNormalized, s.synth};
  for (std::size_t d = 0; d < s.size(); ++d) {
    p.values[d] = std::clamp(theta(static_cast<Eigen::Index>(d)), s.box_lo(d), s.box_hi(d));
  }
  return render(unscale(p, s));
}

MssEval mss_loss_and_grad(const Workspace& ws, const Vector& theta, const MssMagnitudes& target, double step,
                          bool with_grad) {
  const ScalingSpec& s = ws.scaling();
  Vector t = theta;
  for (std::size_t d = 0; d < s.size(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    t(i) = std::clamp(t(i), s.box_lo(d), s.box_hi(d));
  }
  auto loss_at = [&](const Vector& x) { return mss_distance(mss_magnitudes(ws.render_normalized(x)), target); };
  MssEval out;
  out.loss = loss_at(t);
  if (!with_grad) return out;
  out.grad = Vector::Zero(t.size());
  for (std::size_t d = 0; d < s.size(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    const double hp = std::min(step, s.box_hi(d) - t(i));
    const double hm = std::min(step, t(i) - s.box_lo(d));
    Vector a = t, b = t;
    a(i) += hp;
    b(i) -= hm;
    out.grad(i) = (loss_at(a) - loss_at(b)) / (hp + hm);
  }
  return out;
}

std::string history_header() { return "epoch\tstage\teta\tlambda\ttrain_loss\tval_loss\tval_ploss\tval_mss\tval_jtfs"; }

std::string history_line(const EpochRecord& r) {
  std::ostringstream s;
  s << r.epoch << '\t' << r.stage_loss << '\t' << fmt_g(r.eta) << '\t' << fmt_g(r.lambda) << '\t' << fmt_g(r.train_loss)
    << '\t' << fmt_g(r.val_loss) << '\t' << fmt_g(r.val_ploss) << '\t' << fmt_g(r.val_mss) << '\t' << fmt_g(r.val_jtfs);
  return s.str();
}

std::uint64_t weights_hash(const Regressor& net) {
  const auto p = net.params();
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(double)));
}

namespace {

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const Workspace& ws, Regressor& net, const FitCallbacks& cb)
      : cfg_(cfg), ws_(ws), net_(net), cb_(cb), workers_(resolve_jobs(cfg.jobs)) {
    train_ = ws.manifest().indices(Split::kTrain);
    val_ = ws.manifest().indices(Split::kVal);
    require(!train_.empty(), ErrorKind::kInvalidSpec, "manifest has no training rows");
    require(!val_.empty(), ErrorKind::kInvalidSpec, "manifest has no validation rows");
    const RegressorSpec want = ws.regressor_spec();
    require(net.spec().hash() == want.hash(), ErrorKind::kInvalidArgument,
            "regressor spec does not match the workspace image/parameter layout");
    // Fixed perceptual subset, independent of the training seed.
    std::vector<std::size_t> pick = val_;
    Rng r = Rng::derive(ws.manifest().grid.seed, 0x76616c);
    r.shuffle(std::span<std::size_t>(pick));
    pick.resize(std::min(pick.size(), cfg.val_perceptual_rows));
    std::sort(pick.begin(), pick.end());
    perceptual_ = std::move(pick);
  }

  TrainHistory run() {
    const std::vector<Stage> stages = plan(cfg_);
    std::vector<std::size_t> warm = train_;
    warm.insert(warm.end(), val_.begin(), val_.end());
    parallel_for(warm.size(), workers_, [&](std::size_t i, std::size_t) { (void)ws_.image(warm[i]); });
    parallel_for(perceptual_.size(), workers_,
                 [&](std::size_t i, std::size_t) { (void)ws_.target_features(perceptual_[i]); });

    TrainHistory hist;
    int epoch = 0;
    for (std::size_t si = 0; si < stages.size(); ++si) {
      const Stage& st = stages[si];
      if (st.objective == Objective::kPnp) {
        for (std::size_t r : train_) (void)ws_.kernel(r);
        for (std::size_t r : val_) (void)ws_.kernel(r);
        if (cfg_.lambda_init >= 0) {
          lambda_ = cfg_.lambda_init;
        } else {
          double top = 0.0;
          for (std::size_t r : train_) top = std::max(top, ws_.kernel(r).eigvals(0));
          lambda_ = top;
        }
        hist.lambda_max = lambda_;
      } else {
        lambda_ = 0.0;
      }
      if (si > 0) hist.boundary_hash = weights_hash(net_);

      Optimizer opt(st.optimizer, net_.size(), cfg_.eta0);
      std::vector<double> stage_val;
      PlateauRule plateau(cfg_.plateau_patience);
      double best = std::numeric_limits<double>::infinity();
      std::vector<double> best_weights(net_.params().begin(), net_.params().end());
      int best_epoch = epoch + 1;
      for (int e = 0; e < st.epochs; ++e, ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.stage = static_cast<int>(si) + 1;
        rec.stage_loss = st.name;
        rec.eta = opt.eta();
        rec.lambda = lambda_;
        rec.train_loss = train_epoch(st, opt, epoch, rec.skipped_items);
        validate(st, rec);
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
          fail(ErrorKind::kTrainingDivergence, "non-finite loss at epoch " + std::to_string(rec.epoch) +
                                                   " (eta = " + fmt_g(opt.eta()) + ", lambda = " + fmt_g(lambda_) + ")");
        }
        hist.epochs.push_back(rec);
        if (cb_.on_epoch) cb_.on_epoch(rec, net_);

        if (rec.val_loss < best) {
          best = rec.val_loss;
          best_epoch = rec.epoch;
          std::copy(net_.params().begin(), net_.params().end(), best_weights.begin());
        }
        if (plateau.observe(rec.val_loss)) opt.set_eta(opt.eta() * cfg_.lr_factor);
        const auto k = stage_val.size();
        if (st.objective == Objective::kPnp && k >= 1 && rec.val_loss < stage_val.back()) {
          lambda_ = std::max(cfg_.damping_floor, lambda_ * cfg_.damping_decay);
        }
        stage_val.push_back(rec.val_loss);
      }
      auto dst = net_.mutable_params();
      std::copy(best_weights.begin(), best_weights.end(), dst.begin());
      hist.best_epoch = best_epoch;
      if (si + 1 < stages.size()) hist.pretrain_hash = weights_hash(net_);
    }
    return hist;
  }

 private:
  struct ItemResult {
    double loss = 0.0;
    bool ok = true;
  };

  std::vector<std::size_t> epoch_order(int epoch) const {
    std::vector<std::size_t> out;
    for (std::uint64_t k = 0; out.size() < cfg_.samples_per_epoch; ++k) {
      std::vector<std::size_t> perm = train_;
      Rng r = Rng::derive(cfg_.seed, 0x65706f, static_cast<std::uint64_t>(epoch), k);
      r.shuffle(std::span<std::size_t>(perm));
      for (std::size_t i : perm) {
        if (out.size() == cfg_.samples_per_epoch) break;
        out.push_back(i);
      }
    }
    return out;
  }

  // Loss and dLoss/dtheta for one item.
  ItemResult item_upstream(const Stage& st, std::size_t row, const Vector& pred, Vector& up) const {
    const Vector target = ws_.theta_bar(row);
    const Vector delta = pred - target;
    ItemResult res;
    switch (st.objective) {
      case Objective::kPloss:
        res.loss = ploss(pred, target);
        up.resize(delta.size());
        for (Eigen::Index i = 0; i < delta.size(); ++i) up(i) = 2.0 * delta(i);
        break;
      case Objective::kPnp: {
        const PNPKernel& k = ws_.kernel(row);
        res.loss = pnp_quadratic(delta, k, lambda_);
        up = pnp_gradient(delta, k, lambda_);
        break;
      }
      case Objective::kMss: {
        try {
          const MssMagnitudes tgt = mss_magnitudes(ws_.target_audio(row));
          const MssEval ev = mss_loss_and_grad(ws_, pred, tgt, cfg_.mss_fd_step);
          res.loss = ev.loss;
          up = ev.grad;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kOutOfManifold && e.kind() != ErrorKind::kDegenerateParameters) throw;
          res.ok = false;
        }
        break;
      }
    }
    return res;
  }

  double train_epoch(const Stage& st, Optimizer& opt, int epoch, std::size_t& skipped) {
    const std::vector<std::size_t> order = epoch_order(epoch);
    const std::size_t B = cfg_.batch_size;
    const std::size_t steps = std::max<std::size_t>(1, order.size() / B);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s * B)),
                                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), (s + 1) * B)));
      std::sort(batch.begin(), batch.end());
      const std::size_t n = batch.size();
      const std::size_t chunks = (n + kChunk - 1) / kChunk;
      std::vector<std::vector<double>> grads(chunks, std::vector<double>(net_.size(), 0.0));
      std::vector<ItemResult> results(n);
      parallel_for(chunks, workers_, [&](std::size_t c, std::size_t) {
        ForwardCache cache;
        Vector up;
        for (std::size_t i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
          const std::vector<double> img = ws_.image(batch[i]);
          const Vector pred = forward(net_, img, &cache);
          results[i] = item_upstream(st, batch[i], pred, up);
          if (results[i].ok) backward(net_, cache, up, grads[c]);
        }
      });
      std::size_t valid = 0;
      for (const ItemResult& r : results) {
        if (!r.ok) {
          ++skipped;
          continue;
        }
        ++valid;
        loss_sum += r.loss;
        ++loss_count;
      }
      if (valid == 0) continue;
      std::vector<double>& total = grads[0];
      for (std::size_t c = 1; c < chunks; ++c)
        for (std::size_t i = 0; i < total.size(); ++i) total[i] += grads[c][i];
      const double inv = 1.0 / static_cast<double>(valid);
      for (double& g : total) g *= inv;
      opt.step(net_, total);
      if (cb_.on_step) cb_.on_step(step_++, net_);
    }
    return loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::quiet_NaN();
  }

  void validate(const Stage& st, EpochRecord& rec) const {
    std::vector<Vector> preds(val_.size());
    parallel_for(val_.size(), workers_, [&](std::size_t i, std::size_t) {
      preds[i] = forward(net_, ws_.image(val_[i]));
    });
    std::vector<double> pl(val_.size()), obj(val_.size(), 0.0);
    for (std::size_t i = 0; i < val_.size(); ++i) pl[i] = ploss(preds[i], ws_.theta_bar(val_[i]));
    rec.val_ploss = mean(pl);
    if (st.objective == Objective::kPloss) {
      rec.val_loss = rec.val_ploss;
    } else if (st.objective == Objective::kPnp) {
      for (std::size_t i = 0; i < val_.size(); ++i)
        obj[i] = pnp_quadratic(preds[i] - ws_.theta_bar(val_[i]), ws_.kernel(val_[i]), lambda_);
      rec.val_loss = mean(obj);
    } else {
      std::vector<char> ok(val_.size(), 1);
      parallel_for(val_.size(), workers_, [&](std::size_t i, std::size_t) {
        try {
          obj[i] = mss_loss_and_grad(ws_, preds[i], mss_magnitudes(ws_.target_audio(val_[i])), 0.0, false).loss;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kOutOfManifold && e.kind() != ErrorKind::kDegenerateParameters) throw;
          ok[i] = 0;
        }
      });
      std::vector<double> kept;
      for (std::size_t i = 0; i < val_.size(); ++i)
        if (ok[i]) kept.push_back(obj[i]);
      rec.val_loss = kept.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(kept);
    }
    Predictor p = [&](std::size_t row) {
      const auto it = std::lower_bound(val_.begin(), val_.end(), row);
      return preds[static_cast<std::size_t>(it - val_.begin())];
    };
    const EvalMetrics m = evaluate(ws_, perceptual_, p, cfg_.jobs);
    rec.val_mss = m.mss_mean;
    rec.val_jtfs = m.jtfs_mean;
  }

  const TrainConfig& cfg_;
  const Workspace& ws_;
  Regressor& net_;
  const FitCallbacks& cb_;
  std::size_t workers_;
  std::vector<std::size_t> train_, val_, perceptual_;
  double lambda_ = 0.0;
  std::uint64_t step_ = 0;
};

}  // namespace

TrainHistory fit(const TrainConfig& cfg, const Workspace& ws, Regressor& net, const FitCallbacks& cb) {
  return Trainer(cfg, ws, net, cb).run();
}

Predictor regressor_predictor(const Workspace& ws, const Regressor& net) {
  return [&ws, &net](std::size_t row) { return forward(net, ws.image(row)); };
}

EvalMetrics evaluate(const Workspace& ws, const std::vector<std::size_t>& rows, const Predictor& predict, int jobs) {
  struct One {
    bool ok = false;
    double jtfs = 0.0, mss = 0.0, pl = 0.0;
  };
  std::vector<One> out(rows.size());
  parallel_for(rows.size(), resolve_jobs(jobs), [&](std::size_t i, std::size_t) {
    const std::size_t row = rows[i];
    const Vector theta = predict(row);
    out[i].pl = ploss(theta, ws.theta_bar(row));
    AudioBuffer x;
    try {
      x = ws.render_normalized(theta);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kOutOfManifold && e.kind() != ErrorKind::kDegenerateParameters) throw;
      return;
    }
    out[i].jtfs = feature_distance(ws.target_features(row), ws.feature_map().features(x));
    out[i].mss = mss_distance(x, ws.target_audio(row));
    out[i].ok = true;
  });
  EvalMetrics m;
  m.rows = rows.size();
  std::vector<double> j, s, p;
  for (const One& o : out) {
    p.push_back(o.pl);
    if (!o.ok) {
      ++m.failures;
      continue;
    }
    j.push_back(o.jtfs);
    s.push_back(o.mss);
  }
  auto stdev = [](const std::vector<double>& v, double mu) {
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return v.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(v.size()));
  };
  m.jtfs_mean = mean(j);
  m.jtfs_std = stdev(j, m.jtfs_mean);
  m.mss_mean = mean(s);
  m.mss_std = stdev(s, m.mss_mean);
  m.ploss_mean = mean(p);
  return m;
}

std::string report_header() {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s | %-4s | %-21s | %-25s | %-10s | %s", "loss", "Phi", "JTFS distance",
                "MSS distance", "P-loss", "failed");
  return buf;
}

std::string report_row(const std::string& label, const EvalMetrics& m) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-24s | %-4s | %9.4f +- %-8.4f | %11.5g +- %-10.5g | %10.6f | %zu/%zu", label.c_str(),
                "JTFS", m.jtfs_mean, m.jtfs_std, m.mss_mean, m.mss_std, m.ploss_mean, m.failures, m.rows);
  return buf;
}

const char* const kBackboneDisclaimer =
    "note: the regressor is a compact 4-block CNN (~65k parameters) standing in for EfficientNet-B0; "
    "compare rows with each other, not with full-scale published numbers.";

}  // namespace pnp
