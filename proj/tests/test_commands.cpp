#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pnp/binary_io.hpp"
#include "pnp/commands.hpp"

using namespace pnp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunContext small_run(const fs::path& dir, const std::string& extra = "") {
  RunContext ctx;
  ctx.cfg = RunConfig::parse("steps = 4\nepochs = 2\nbatch_size = 8\nsamples_per_epoch = 16\nval_perceptual_rows = 2\n");
  std::istringstream in(extra);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    ctx.cfg.set(line.substr(0, eq - 1), line.substr(eq + 1));
  }
  ctx.run_dir = dir;
  return ctx;
}

// One prepared data directory shared by the cases below.
const RunContext& prepared() {
  static const RunContext ctx = [] {
    RunContext c = small_run(testing::temp_dir("cmd_data"), "loss = pnp_after_ploss\n");
    prepare_run_dir(c);
    cmd_dataset(c);
    cmd_precompute(c);
    return c;
  }();
  return ctx;
}

RunContext training_run(const std::string& name, const std::string& extra) {
  RunContext c = small_run(testing::temp_dir(name), extra + "data_dir = " + prepared().data_dir().string() + "\n");
  prepare_run_dir(c);
  return c;
}

}  // namespace

TEST_SUITE("commands") {
  TEST_CASE("exit codes") {
    CHECK(exit_code(ErrorKind::kConfig) == 2);
    CHECK(exit_code(ErrorKind::kRangeError) == 2);
    CHECK(exit_code(ErrorKind::kInvalidSpec) == 2);
    CHECK(exit_code(ErrorKind::kCacheMismatch) == 3);
    CHECK(exit_code(ErrorKind::kTrainingDivergence) == 4);
    CHECK(exit_code(ErrorKind::kMissingArtifact) == 5);
    CHECK(exit_code(ErrorKind::kIo) == 1);
  }

  TEST_CASE("dataset is byte-stable and refuses steps 3") {
    const RunContext a = small_run(testing::temp_dir("cmd_ds_a"));
    const RunContext b = small_run(testing::temp_dir("cmd_ds_b"));
    cmd_dataset(a);
    cmd_dataset(b);
    CHECK(slurp(a.manifest_path()) == slurp(b.manifest_path()));
    const RunContext bad = small_run(testing::temp_dir("cmd_ds_bad"), "steps = 3\n");
    CHECK(testing::error_kind([&] { cmd_dataset(bad); }) == ErrorKind::kInvalidSpec);
    CHECK(exit_code(ErrorKind::kInvalidSpec) == 2);
  }

  TEST_CASE("run directory lock and config hash") {
    const fs::path dir = testing::temp_dir("cmd_lock");
    {
      RunLock lock(dir);
      CHECK(testing::error_kind([&] { RunLock again(dir); }) == ErrorKind::kInvalidState);
    }
    RunLock after(dir);

    RunContext c = small_run(dir);
    prepare_run_dir(c);
    CHECK(slurp(dir / "config.resolved") == c.cfg.resolved());
    CHECK(slurp(dir / "config.hash") == hex64(c.cfg.hash()) + "\n");
    c.cfg.train.jobs = 3;
    prepare_run_dir(c);
    c.cfg.set("epochs", "5");
    CHECK(testing::error_kind([&] { prepare_run_dir(c); }) == ErrorKind::kCacheMismatch);
  }

  TEST_CASE("precompute is idempotent and covers train and val rows") {
    const RunContext& c = prepared();
    const DatasetManifest m = load_dataset(c);
    const PrecomputeStats again = cmd_precompute(c);
    CHECK(again.features_computed == 0);
    CHECK(again.kernels_computed == 0);
    CHECK(again.features_kept == m.rows.size());
    CHECK(again.kernels_kept == m.indices(Split::kTrain).size() + m.indices(Split::kVal).size());
    for (const AuditRow& r : cmd_audit(c, 3, 5)) CHECK(r.rel <= 1e-12);
  }

  TEST_CASE("caches from other keys are refused") {
    RunContext c = prepared();
    c.cfg.set("fd_step", "2e-3");
    CHECK(testing::error_kind([&] { cmd_audit(c, 1, 0); }) == ErrorKind::kCacheMismatch);
    RunContext d = prepared();
    d.cfg.set("dataset_seed", "9");
    CHECK(testing::error_kind([&] { load_dataset(d); }) == ErrorKind::kCacheMismatch);
  }

  TEST_CASE("train: history is reproducible and lambda starts at lambda_max") {
    const RunContext a = training_run("cmd_train_a", "loss = pnp_after_ploss\n");
    const RunContext b = training_run("cmd_train_b", "loss = pnp_after_ploss\n");
    const TrainResult ra = cmd_train(a);
    const TrainResult rb = cmd_train(b);
    CHECK(slurp(a.history_path()) == slurp(b.history_path()));
    CHECK(ra.weights == rb.weights);
    CHECK(fs::exists(a.best_path()));
    CHECK(slurp(a.run_dir / "best").find("best.pnpw") == 0);
    REQUIRE(ra.history.epochs.size() == 2);
    CHECK(ra.history.epochs[0].lambda == 0.0);
    CHECK(ra.history.epochs[1].lambda == ra.history.lambda_max);
    CHECK(ra.history.lambda_max > 0.0);
  }

  TEST_CASE("train: pnp without kernels names the precompute step") {
    RunContext c = small_run(testing::temp_dir("cmd_nokernels"), "loss = pnp\n");
    cmd_dataset(c);
    try {
      cmd_train(c);
      FAIL("expected missing-artifact");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kMissingArtifact);
      CHECK(std::string(e.what()).find("precompute") != std::string::npos);
    }
  }

  TEST_CASE("eval: oracle rows, seeds and disclaimer") {
    const RunContext& data = prepared();
    const std::vector<EvalRow> oracle = cmd_eval(data, {}, true);
    REQUIRE(oracle.size() == 1);
    CHECK(oracle[0].metrics.jtfs_mean == 0.0);
    CHECK(oracle[0].metrics.mss_mean == 0.0);
    CHECK(oracle[0].metrics.ploss_mean == 0.0);

    std::vector<fs::path> cks;
    for (int seed = 0; seed < 5; ++seed) {
      const RunContext r = training_run("cmd_seed" + std::to_string(seed), "loss = ploss\nepochs = 1\nseed = " +
                                                                               std::to_string(seed) + "\n");
      cmd_train(r);
      cks.push_back(r.best_path());
    }
    const std::vector<EvalRow> rows = cmd_eval(data, cks, false);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].label == "ploss seed 0");
    double sum = 0.0;
    for (int i = 0; i < 5; ++i) sum += rows[i].metrics.jtfs_mean;
    CHECK(rows[5].metrics.jtfs_mean == doctest::Approx(sum / 5).epsilon(1e-12));
    const std::string report = format_report(rows);
    CHECK(report.find(kBackboneDisclaimer) != std::string::npos);
    CHECK(report.find("mean over 5 runs") != std::string::npos);
  }

  TEST_CASE("eval: missing feature cache exits 5") {
    RunContext c = small_run(testing::temp_dir("cmd_nofeat"));
    cmd_dataset(c);
    CHECK(testing::error_kind([&] { cmd_eval(c, {}, true); }) == ErrorKind::kMissingArtifact);
  }

  TEST_CASE("render: defaults and range refusal") {
    const fs::path dir = testing::temp_dir("cmd_render");
    const AudioBuffer d = cmd_render(SynthId::kDrum, {}, dir / "d.wav");
    CHECK(d.sample_rate == 22050);
    CHECK(d.duration() == doctest::Approx(2.972).epsilon(1e-3));
    CHECK(read_wav(dir / "d.wav").length() == d.length());
    const AudioBuffer c = cmd_render(SynthId::kChirp, {}, dir / "c.wav");
    CHECK(c.sample_rate == 8192);
    CHECK(c.duration() == 4.0);
    try {
      cmd_render(SynthId::kChirp, {100, 8, 1}, dir / "bad.wav");
      FAIL("expected range-error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kRangeError);
      CHECK(std::string(e.what()).find("512") != std::string::npos);
    }
    CHECK(!fs::exists(dir / "bad.wav"));
  }
}
