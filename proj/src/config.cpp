#include "pnp/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "pnp/binary_io.hpp"
#include "pnp/errors.hpp"

namespace pnp {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) fail(ErrorKind::kConfig, key + ": expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) fail(ErrorKind::kConfig, key + ": expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  fail(ErrorKind::kConfig, key + ": expected a boolean, got '" + v + "'");
}

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const char* to_string(FinetuneOptimizer f) {
  switch (f) {
    case FinetuneOptimizer::kAuto: return "auto";
    case FinetuneOptimizer::kAdam: return "adam";
    case FinetuneOptimizer::kClipped: return "clipped";
  }
  return "?";
}

}  // namespace

std::vector<std::string> config_keys() {
  return {"synth",        "steps",           "dataset_seed",      "use_log",        "use_minmax",
          "jtfs_q1",      "jtfs_octaves",    "jtfs_rate_min",     "jtfs_n_rates",   "jtfs_scale_min",
          "jtfs_n_scales", "fd_step",        "loss",              "epochs",         "pretrain_epochs",
          "batch_size",   "samples_per_epoch", "eta0",            "plateau_patience", "lr_factor",
          "damping_decay", "damping_floor",  "lambda_init",       "finetune_optimizer", "val_perceptual_rows",
          "mss_fd_step",  "seed",            "jobs",              "data_dir"};
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "synth") {
    synth = parse_synth(v);
    const JtfsConfig d = default_jtfs_config(synth);
    jtfs.sample_rate = d.sample_rate;
    jtfs.length = d.length;
  } else if (key == "steps") {
    steps.clear();
    std::istringstream in(v);
    for (std::string part; std::getline(in, part, ',');) {
      const long long s = to_int(key, trim(part));
      if (s < 1 || s > 100000) fail(ErrorKind::kConfig, "steps: out of range");
      steps.push_back(static_cast<int>(s));
    }
    if (steps.empty()) fail(ErrorKind::kConfig, "steps: empty");
  } else if (key == "dataset_seed") {
    dataset_seed = static_cast<std::uint64_t>(to_int(key, v));
  } else if (key == "use_log") {
    use_log = to_bool(key, v);
  } else if (key == "use_minmax") {
    use_minmax = to_bool(key, v);
  } else if (key == "jtfs_q1") {
    jtfs.q1 = static_cast<int>(to_int(key, v));
  } else if (key == "jtfs_octaves") {
    jtfs.octaves1 = static_cast<int>(to_int(key, v));
  } else if (key == "jtfs_rate_min") {
    jtfs.rate_min_hz = to_double(key, v);
  } else if (key == "jtfs_n_rates") {
    jtfs.n_rates = static_cast<int>(to_int(key, v));
  } else if (key == "jtfs_scale_min") {
    jtfs.scale_min_cpo = to_double(key, v);
  } else if (key == "jtfs_n_scales") {
    jtfs.n_scales = static_cast<int>(to_int(key, v));
  } else if (key == "fd_step") {
    fd_step = to_double(key, v);
    if (!(fd_step > 0)) fail(ErrorKind::kConfig, "fd_step must be positive");
  } else if (key == "loss") {
    train.loss = parse_loss(v);
  } else if (key == "epochs") {
    train.epochs = static_cast<int>(to_int(key, v));
  } else if (key == "pretrain_epochs") {
    train.pretrain_epochs = static_cast<int>(to_int(key, v));
  } else if (key == "batch_size") {
    const long long b = to_int(key, v);
    if (b < 1) fail(ErrorKind::kConfig, "batch_size must be >= 1");
    train.batch_size = static_cast<std::size_t>(b);
  } else if (key == "samples_per_epoch") {
    const long long s = to_int(key, v);
    if (s < 1) fail(ErrorKind::kConfig, "samples_per_epoch must be >= 1");
    train.samples_per_epoch = static_cast<std::size_t>(s);
  } else if (key == "eta0") {
    train.eta0 = to_double(key, v);
  } else if (key == "plateau_patience") {
    train.plateau_patience = static_cast<int>(to_int(key, v));
  } else if (key == "lr_factor") {
    train.lr_factor = to_double(key, v);
  } else if (key == "damping_decay") {
    train.damping_decay = to_double(key, v);
  } else if (key == "damping_floor") {
    train.damping_floor = to_double(key, v);
  } else if (key == "lambda_init") {
    train.lambda_init = v == "auto" ? -1.0 : to_double(key, v);
  } else if (key == "finetune_optimizer") {
    if (v == "auto") train.finetune_optimizer = FinetuneOptimizer::kAuto;
    else if (v == "adam") train.finetune_optimizer = FinetuneOptimizer::kAdam;
    else if (v == "clipped") train.finetune_optimizer = FinetuneOptimizer::kClipped;
    else fail(ErrorKind::kConfig, "finetune_optimizer: expected auto, adam or clipped");
  } else if (key == "val_perceptual_rows") {
    train.val_perceptual_rows = static_cast<std::size_t>(std::max(0LL, to_int(key, v)));
  } else if (key == "mss_fd_step") {
    train.mss_fd_step = to_double(key, v);
  } else if (key == "seed") {
    train.seed = static_cast<std::uint64_t>(to_int(key, v));
  } else if (key == "jobs") {
    train.jobs = static_cast<int>(to_int(key, v));
  } else if (key == "data_dir") {
    data_dir = v;
  } else {
    fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
  }
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  const JtfsConfig d = default_jtfs_config(cfg.synth);
  cfg.jtfs = d;
  std::vector<std::pair<std::string, std::string>> entries;
  std::set<std::string> seen;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kConfig, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (!seen.insert(key).second) fail(ErrorKind::kConfig, "duplicate key '" + key + "'");
    entries.emplace_back(key, t.substr(eq + 1));
  }
  // synth first: it resets the JTFS sample rate and length.
  std::stable_partition(entries.begin(), entries.end(), [](const auto& e) { return e.first == "synth"; });
  for (const auto& [k, v] : entries) cfg.set(k, v);
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kConfig, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ScalingSpec RunConfig::scaling() const {
  ScalingSpec s = default_scaling(synth);
  s.use_log = use_log;
  s.use_minmax = use_minmax;
  return s;
}

GridSpec RunConfig::grid() const {
  GridSpec g = default_grid(synth, dataset_seed);
  const std::size_t J = scaling().size();
  if (steps.size() == 1) g.steps.assign(J, steps[0]);
  else if (!steps.empty()) g.steps = steps;
  if (g.steps.size() != J) fail(ErrorKind::kConfig, "steps needs 1 or " + std::to_string(J) + " values");
  return g;
}

ImageSpec RunConfig::image() const { return default_image_spec(synth); }

std::string RunConfig::resolved() const {
  std::ostringstream s;
  const GridSpec g = grid();
  s << "synth = " << to_string(synth) << '\n' << "steps = ";
  for (std::size_t i = 0; i < g.steps.size(); ++i) s << (i ? "," : "") << g.steps[i];
  s << '\n'
    << "dataset_seed = " << dataset_seed << '\n'
    << "use_log = " << (use_log ? "true" : "false") << '\n'
    << "use_minmax = " << (use_minmax ? "true" : "false") << '\n'
    << "jtfs_q1 = " << jtfs.q1 << '\n'
    << "jtfs_octaves = " << jtfs.octaves1 << '\n'
    << "jtfs_rate_min = " << num(jtfs.rate_min_hz) << '\n'
    << "jtfs_n_rates = " << jtfs.n_rates << '\n'
    << "jtfs_scale_min = " << num(jtfs.scale_min_cpo) << '\n'
    << "jtfs_n_scales = " << jtfs.n_scales << '\n'
    << "fd_step = " << num(fd_step) << '\n'
    << "loss = " << to_string(train.loss) << '\n'
    << "epochs = " << train.epochs << '\n'
    << "pretrain_epochs = " << train.pretrain_epochs << '\n'
    << "batch_size = " << train.batch_size << '\n'
    << "samples_per_epoch = " << train.samples_per_epoch << '\n'
    << "eta0 = " << num(train.eta0) << '\n'
    << "plateau_patience = " << train.plateau_patience << '\n'
    << "lr_factor = " << num(train.lr_factor) << '\n'
    << "damping_decay = " << num(train.damping_decay) << '\n'
    << "damping_floor = " << num(train.damping_floor) << '\n'
    << "lambda_init = " << (train.lambda_init < 0 ? std::string("auto") : num(train.lambda_init)) << '\n'
    << "finetune_optimizer = " << to_string(train.finetune_optimizer) << '\n'
    << "val_perceptual_rows = " << train.val_perceptual_rows << '\n'
    << "mss_fd_step = " << num(train.mss_fd_step) << '\n'
    << "seed = " << train.seed << '\n'
    << "jobs = " << train.jobs << '\n'
    << "data_dir = " << data_dir << '\n';
  return s.str();
}

std::uint64_t RunConfig::hash() const {
  // worker count never changes results
  std::string text = resolved();
  const auto pos = text.find("jobs = ");
  text.erase(pos, text.find('\n', pos) + 1 - pos);
  return fnv1a64(text);
}

std::uint64_t RunConfig::dataset_hash() const {
  std::ostringstream s;
  s << "dataset " << scaling().describe() << " steps=";
  for (int v : grid().steps) s << v << ',';
  s << " seed=" << dataset_seed;
  return fnv1a64(s.str());
}

std::uint64_t RunConfig::feature_hash(std::uint64_t manifest_hash) const {
  return fnv1a64("features " + hex64(manifest_hash) + " " + jtfs.describe());
}

std::uint64_t RunConfig::kernel_hash(std::uint64_t manifest_hash) const {
  return fnv1a64("kernels " + hex64(feature_hash(manifest_hash)) + " step=" + num(fd_step));
}

}  // namespace pnp
