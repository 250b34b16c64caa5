// pnp: dataset / precompute / train / eval / render / audit

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pnp/binary_io.hpp"
#include "pnp/commands.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"perceptual-neural-physical sound matching lab"};
  app.require_subcommand(1);

  std::string config_path, run_dir = "run";
  std::vector<std::string> overrides;
  long long seed = -1;
  int jobs = 0;
  bool quiet = false;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--seed", seed, "training seed (overrides `seed`)");
  app.add_option("--jobs", jobs, "worker threads, 0 = all cores");
  app.add_option("--run-dir", run_dir, "run directory");
  app.add_option("--set", overrides, "key=value override, repeatable")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_flag("-q,--quiet", quiet, "no progress lines");

  auto* dataset = app.add_subcommand("dataset", "generate the parameter grid manifest");
  auto* precompute = app.add_subcommand("precompute", "fill feature and kernel caches");
  auto* train = app.add_subcommand("train", "fit the regressor");

  auto* eval = app.add_subcommand("eval", "report test-set distances");
  std::vector<std::string> checkpoints;
  bool oracle = false;
  eval->add_option("--checkpoint", checkpoints, "checkpoint(s); default <run-dir>/best.pnpw")->take_all();
  eval->add_flag("--oracle", oracle, "evaluate the ground-truth stub instead");

  auto* render = app.add_subcommand("render", "write one synth output as WAV");
  std::string synth_name = "chirp", out = "out.wav";
  std::vector<double> params;
  render->add_option("--synth", synth_name, "chirp or drum");
  render->add_option("-o,--out", out, "output WAV path");
  render->add_option("params", params, "natural parameters (default: centre of the box)");

  auto* audit = app.add_subcommand("audit", "recompute random cached kernels");
  std::size_t audit_rows = 4;
  double audit_tol = 1e-12;
  audit->add_option("--rows", audit_rows, "rows to check");
  audit->add_option("--tol", audit_tol, "relative tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (render->parsed()) {
      const pnp::AudioBuffer x = pnp::cmd_render(pnp::parse_synth(synth_name), params, out);
      std::printf("%s: %.4f s at %g Hz\n", out.c_str(), x.duration(), x.sample_rate);
      return 0;
    }

    pnp::RunContext ctx;
    ctx.cfg = config_path.empty() ? pnp::RunConfig::parse("") : pnp::RunConfig::load(config_path);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) pnp::fail(pnp::ErrorKind::kConfig, "--set expects key=value, got '" + kv + "'");
      ctx.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed >= 0) ctx.cfg.train.seed = static_cast<std::uint64_t>(seed);
    ctx.cfg.train.jobs = jobs;
    ctx.run_dir = run_dir;
    if (!quiet) ctx.log = &std::cerr;

    pnp::RunLock lock(ctx.run_dir);
    pnp::prepare_run_dir(ctx);

    if (dataset->parsed()) {
      const pnp::DatasetManifest m = pnp::cmd_dataset(ctx);
      std::printf("%zu rows, %zu val, manifest %s\n", m.rows.size(), m.indices(pnp::Split::kVal).size(),
                  pnp::hex64(m.hash()).c_str());
    } else if (precompute->parsed()) {
      const pnp::PrecomputeStats s = pnp::cmd_precompute(ctx);
      std::printf("features %zu computed %zu kept, kernels %zu computed %zu kept\n", s.features_computed,
                  s.features_kept, s.kernels_computed, s.kernels_kept);
    } else if (train->parsed()) {
      const pnp::TrainResult r = pnp::cmd_train(ctx);
      std::printf("best epoch %d, weights %s\n", r.history.best_epoch, pnp::hex64(r.weights).c_str());
    } else if (eval->parsed()) {
      std::vector<fs::path> paths(checkpoints.begin(), checkpoints.end());
      if (paths.empty() && !oracle) paths.push_back(ctx.best_path());
      std::fputs(pnp::format_report(pnp::cmd_eval(ctx, paths, oracle)).c_str(), stdout);
    } else if (audit->parsed()) {
      bool ok = true;
      for (const pnp::AuditRow& r : pnp::cmd_audit(ctx, audit_rows, ctx.cfg.train.seed)) {
        std::printf("row %u max|dM| %.3g rel %.3g\n", r.id, r.max_abs, r.rel);
        ok = ok && r.rel <= audit_tol;
      }
      if (!ok) pnp::fail(pnp::ErrorKind::kCacheMismatch, "kernel cache disagrees with recomputation");
    }
  } catch (const pnp::Error& e) {
    std::fprintf(stderr, "pnp: %s\n", e.what());
    return pnp::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pnp: %s\n", e.what());
    return 1;
  }
  return 0;
}
