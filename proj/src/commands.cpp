#include "pnp/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "pnp/binary_io.hpp"
#include "pnp/kernel.hpp"
#include "pnp/parallel.hpp"
#include "pnp/pipeline.hpp"
#include "pnp/random.hpp"

namespace pnp {
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kFlushRows = 64;

void note(const RunContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << std::endl;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::kIo, "cannot write " + p.string());
    out << text;
  }
  fs::rename(tmp, p);
}

std::shared_ptr<const FeatureMap> feature_map(const RunConfig& cfg) {
  return std::make_shared<const FeatureMap>(cfg.scaling(), cfg.jtfs);
}

std::optional<FeatureCache> maybe_features(const RunContext& ctx, std::uint64_t manifest_hash) {
  if (!fs::exists(ctx.features_path())) return std::nullopt;
  return read_feature_cache(ctx.features_path(), ctx.cfg.feature_hash(manifest_hash));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidSpec:
    case ErrorKind::kRangeError:
    case ErrorKind::kOutOfManifold:
    case ErrorKind::kDegenerateParameters: return 2;
    case ErrorKind::kCacheMismatch: return 3;
    case ErrorKind::kTrainingDivergence: return 4;
    case ErrorKind::kMissingArtifact: return 5;
    default: return 1;
  }
}

fs::path RunContext::data_dir() const { return cfg.data_dir.empty() ? run_dir : fs::path(cfg.data_dir); }

RunLock::RunLock(const fs::path& run_dir) : path_(run_dir / ".lock") {
  fs::create_directories(run_dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    fail(ErrorKind::kInvalidState,
         "run directory " + run_dir.string() + " is locked by another process (remove " + path_.string() + " if stale)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

void prepare_run_dir(const RunContext& ctx) {
  fs::create_directories(ctx.run_dir);
  fs::create_directories(ctx.data_dir());
  const fs::path hash_file = ctx.run_dir / "config.hash";
  const std::string hash = hex64(ctx.cfg.hash());
  if (fs::exists(hash_file)) {
    std::string stored = read_text(hash_file);
    stored.erase(std::remove_if(stored.begin(), stored.end(), ::isspace), stored.end());
    require(stored == hash, ErrorKind::kCacheMismatch,
            "run directory " + ctx.run_dir.string() + " holds config " + stored + ", this run resolves to " + hash +
                "; use a fresh --run-dir");
  }
  write_text(ctx.run_dir / "config.resolved", ctx.cfg.resolved());
  write_text(hash_file, hash + "\n");
}

DatasetManifest cmd_dataset(const RunContext& ctx) {
  const ScalingSpec scaling = ctx.cfg.scaling();
  DatasetManifest m = generate_grid(ctx.cfg.grid(), scaling, default_feasibility(scaling, ctx.cfg.fd_step));
  m.config_hash = hex64(ctx.cfg.dataset_hash());
  fs::create_directories(ctx.data_dir());
  write_manifest(ctx.manifest_path(), m);
  note(ctx, "dataset: " + std::to_string(m.rows.size()) + " rows (" + std::to_string(m.indices(Split::kTrain).size()) +
                " train, " + std::to_string(m.indices(Split::kVal).size()) + " val, " +
                std::to_string(m.indices(Split::kTest).size()) + " test), manifest " + hex64(m.hash()));
  return m;
}

DatasetManifest load_dataset(const RunContext& ctx) {
  if (!fs::exists(ctx.manifest_path())) {
    fail(ErrorKind::kMissingArtifact, "no manifest at " + ctx.manifest_path().string() + "; run the dataset command");
  }
  DatasetManifest m = read_manifest(ctx.manifest_path());
  const std::string want = hex64(ctx.cfg.dataset_hash());
  require(m.config_hash == want, ErrorKind::kCacheMismatch,
          "manifest was generated with dataset keys " + m.config_hash + ", config resolves to " + want);
  return m;
}

PrecomputeStats cmd_precompute(const RunContext& ctx) {
  const DatasetManifest m = load_dataset(ctx);
  const std::uint64_t mh = m.hash();
  const auto phi = feature_map(ctx.cfg);
  const std::size_t workers = resolve_jobs(ctx.cfg.train.jobs);
  PrecomputeStats stats;

  FeatureCache fc;
  if (auto old = maybe_features(ctx, mh)) fc = std::move(*old);
  fc.hash = ctx.cfg.feature_hash(mh);
  fc.layout = *phi->jtfs().layout();
  std::vector<std::size_t> todo;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (fc.find(m.rows[r].id) >= 0) ++stats.features_kept;
    else todo.push_back(r);
  }
  for (std::size_t start = 0; start < todo.size(); start += kFlushRows) {
    const std::size_t n = std::min(kFlushRows, todo.size() - start);
    std::vector<std::vector<double>> out(n);
    parallel_for(n, workers, [&](std::size_t i, std::size_t) { out[i] = (*phi)(m.normalized(todo[start + i])).coeffs; });
    for (std::size_t i = 0; i < n; ++i) {
      fc.ids.push_back(m.rows[todo[start + i]].id);
      fc.coeffs.push_back(std::move(out[i]));
    }
    write_feature_cache(ctx.features_path(), fc);
    stats.features_computed += n;
    note(ctx, "features: " + std::to_string(start + n) + "/" + std::to_string(todo.size()));
  }
  if (todo.empty() && !fs::exists(ctx.features_path())) write_feature_cache(ctx.features_path(), fc);

  KernelCache kc;
  if (fs::exists(ctx.kernels_path())) kc = read_kernel_cache(ctx.kernels_path(), ctx.cfg.kernel_hash(mh));
  kc.hash = ctx.cfg.kernel_hash(mh);
  todo.clear();
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (m.rows[r].split == Split::kTest) continue;
    if (kc.find(m.rows[r].id) >= 0) ++stats.kernels_kept;
    else todo.push_back(r);
  }
  for (std::size_t start = 0; start < todo.size(); start += kFlushRows) {
    const std::size_t n = std::min(kFlushRows, todo.size() - start);
    std::vector<PNPKernel> out(n);
    parallel_for(n, workers, [&](std::size_t i, std::size_t) {
      const std::size_t r = todo[start + i];
      out[i] = make_kernel(m.rows[r].id, metric(jacobian_fd(m.normalized(r), *phi, ctx.cfg.fd_step)));
    });
    for (PNPKernel& k : out) kc.kernels.push_back(std::move(k));
    write_kernel_cache(ctx.kernels_path(), kc);
    stats.kernels_computed += n;
    note(ctx, "kernels: " + std::to_string(start + n) + "/" + std::to_string(todo.size()));
  }
  if (todo.empty() && !fs::exists(ctx.kernels_path())) write_kernel_cache(ctx.kernels_path(), kc);

  note(ctx, "precompute: features " + std::to_string(stats.features_computed) + " computed, " +
                std::to_string(stats.features_kept) + " kept; kernels " + std::to_string(stats.kernels_computed) +
                " computed, " + std::to_string(stats.kernels_kept) + " kept");
  return stats;
}

TrainResult cmd_train(const RunContext& ctx) {
  const DatasetManifest m = load_dataset(ctx);
  const std::uint64_t mh = m.hash();
  Workspace ws(m, feature_map(ctx.cfg), ctx.cfg.image());
  const std::optional<FeatureCache> fc = maybe_features(ctx, mh);
  if (fc) ws.attach_features(&*fc);
  std::optional<KernelCache> kc;
  if (needs_kernels(ctx.cfg.train.loss)) {
    if (!fs::exists(ctx.kernels_path())) {
      fail(ErrorKind::kMissingArtifact,
           "loss " + std::string(to_string(ctx.cfg.train.loss)) + " needs PNP kernels; run the precompute command");
    }
    kc = read_kernel_cache(ctx.kernels_path(), ctx.cfg.kernel_hash(mh));
    ws.attach_kernels(&*kc);
  }

  Regressor net(ws.regressor_spec());
  net.init(ctx.cfg.train.seed);
  std::string history = history_header() + "\n";
  write_text(ctx.history_path(), history);
  FitCallbacks cb;
  cb.on_epoch = [&](const EpochRecord& r, const Regressor&) {
    history += history_line(r) + "\n";
    write_text(ctx.history_path(), history);
    std::ostringstream s;
    s.precision(6);
    s << "epoch " << r.epoch << " [" << r.stage_loss << "] train " << r.train_loss << " val " << r.val_loss
      << " val_jtfs " << r.val_jtfs << " eta " << r.eta << " lambda " << r.lambda;
    note(ctx, s.str());
  };

  TrainResult res;
  res.history = fit(ctx.cfg.train, ws, net, cb);
  res.weights = weights_hash(net);
  save_checkpoint(ctx.best_path(), net);
  write_text(ctx.run_dir / "best", ctx.best_path().filename().string() + " epoch=" +
                                       std::to_string(res.history.best_epoch) + " weights=" + hex64(res.weights) + "\n");
  note(ctx, "best epoch " + std::to_string(res.history.best_epoch) + ", checkpoint " + ctx.best_path().string());
  return res;
}

std::vector<EvalRow> cmd_eval(const RunContext& ctx, const std::vector<fs::path>& checkpoints, bool oracle) {
  const DatasetManifest m = load_dataset(ctx);
  if (!fs::exists(ctx.features_path())) {
    fail(ErrorKind::kMissingArtifact, "no feature cache at " + ctx.features_path().string() + "; run the precompute command");
  }
  const FeatureCache fc = read_feature_cache(ctx.features_path(), ctx.cfg.feature_hash(m.hash()));
  Workspace ws(m, feature_map(ctx.cfg), ctx.cfg.image());
  ws.attach_features(&fc);
  const std::vector<std::size_t> test = m.indices(Split::kTest);
  for (std::size_t r : test) {
    require(fc.find(m.rows[r].id) >= 0, ErrorKind::kMissingArtifact,
            "feature cache lacks test row " + std::to_string(m.rows[r].id) + "; run the precompute command");
  }

  std::vector<EvalRow> rows;
  if (oracle) {
    rows.push_back({"oracle", evaluate(ws, test, [&](std::size_t r) { return ws.theta_bar(r); }, ctx.cfg.train.jobs)});
  }
  for (const fs::path& ck : checkpoints) {
    if (!fs::exists(ck)) fail(ErrorKind::kMissingArtifact, "no checkpoint at " + ck.string());
    Regressor net(ws.regressor_spec());
    load_checkpoint(ck, net);
    std::string label = ck.stem().string();
    const fs::path sibling = ck.parent_path() / "config.resolved";
    if (fs::exists(sibling)) {
      const RunConfig their = RunConfig::load(sibling);
      label = std::string(to_string(their.train.loss)) + " seed " + std::to_string(their.train.seed);
    }
    rows.push_back({label, evaluate(ws, test, regressor_predictor(ws, net), ctx.cfg.train.jobs)});
    note(ctx, report_row(rows.back().label, rows.back().metrics));
  }
  if (checkpoints.size() > 1) {
    std::vector<double> j, s, p;
    EvalMetrics agg;
    for (std::size_t i = rows.size() - checkpoints.size(); i < rows.size(); ++i) {
      j.push_back(rows[i].metrics.jtfs_mean);
      s.push_back(rows[i].metrics.mss_mean);
      p.push_back(rows[i].metrics.ploss_mean);
      agg.rows += rows[i].metrics.rows;
      agg.failures += rows[i].metrics.failures;
    }
    agg.jtfs_mean = mean_of(j);
    agg.jtfs_std = std_of(j);
    agg.mss_mean = mean_of(s);
    agg.mss_std = std_of(s);
    agg.ploss_mean = mean_of(p);
    rows.push_back({"mean over " + std::to_string(checkpoints.size()) + " runs", agg});
  }
  return rows;
}

std::string format_report(const std::vector<EvalRow>& rows) {
  std::string out = report_header() + "\n";
  for (const EvalRow& r : rows) out += report_row(r.label, r.metrics) + "\n";
  out += std::string(kBackboneDisclaimer) + "\n";
  return out;
}

AudioBuffer cmd_render(SynthId synth, const std::vector<double>& natural, const fs::path& out) {
  const ScalingSpec s = default_scaling(synth);
  ParamVector p{natural, Space::kNatural, synth};
  if (natural.empty()) {
    p = unscale(ParamVector{std::vector<double>(s.size(), 0.0), Space::kNormalized, synth}, s);
  } else {
    require(natural.size() == s.size(), ErrorKind::kConfig,
            std::string(to_string(synth)) + " takes " + std::to_string(s.size()) + " parameters");
    (void)scale(p, s);
  }
  AudioBuffer x = render(p);
  write_wav(out, x);
  return x;
}

std::vector<AuditRow> cmd_audit(const RunContext& ctx, std::size_t count, std::uint64_t seed) {
  const DatasetManifest m = load_dataset(ctx);
  if (!fs::exists(ctx.kernels_path())) {
    fail(ErrorKind::kMissingArtifact, "no kernel cache at " + ctx.kernels_path().string() + "; run the precompute command");
  }
  const KernelCache kc = read_kernel_cache(ctx.kernels_path(), ctx.cfg.kernel_hash(m.hash()));
  require(!kc.kernels.empty(), ErrorKind::kMissingArtifact, "kernel cache is empty");
  std::vector<std::size_t> row_of_id(m.rows.size());
  for (std::size_t r = 0; r < m.rows.size(); ++r) row_of_id[m.rows[r].id] = r;

  Rng rng(seed);
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < std::min(count, kc.kernels.size()); ++i) picks.push_back(rng.below(kc.kernels.size()));
  const auto phi = feature_map(ctx.cfg);
  std::vector<AuditRow> out(picks.size());
  parallel_for(picks.size(), resolve_jobs(ctx.cfg.train.jobs), [&](std::size_t i, std::size_t) {
    const PNPKernel& k = kc.kernels[picks[i]];
    const Matrix fresh = metric(jacobian_fd(m.normalized(row_of_id.at(k.id)), *phi, ctx.cfg.fd_step));
    out[i].id = k.id;
    out[i].max_abs = (fresh - k.m).cwiseAbs().maxCoeff();
    out[i].rel = (fresh - k.m).norm() / std::max(k.m.norm(), 1e-300);
  });
  return out;
}

}  // namespace pnp
