#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "pnp/binary_io.hpp"
#include "pnp/cache.hpp"
#include "pnp/config.hpp"
#include "pnp/random.hpp"

using namespace pnp;

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults and overrides") {
    const RunConfig d = RunConfig::parse("");
    CHECK(d.synth == SynthId::kChirp);
    CHECK(d.grid().steps == std::vector<int>{12, 12, 12});
    CHECK(d.train.batch_size == 64);
    CHECK(d.train.epochs == 32);

    const RunConfig c = RunConfig::parse(
        "# drum run\nsteps = 5\nsynth = drum\nloss = pnp_after_ploss\nlambda_init = 2.5\nuse_minmax = off\n");
    CHECK(c.synth == SynthId::kDrum);
    CHECK(c.grid().steps == std::vector<int>(5, 5));
    CHECK(c.jtfs.sample_rate == 22050.0);
    CHECK(c.train.loss == LossKind::kPnpAfterPloss);
    CHECK(c.train.lambda_init == 2.5);
    CHECK_FALSE(c.scaling().use_minmax);
  }

  TEST_CASE("rejections") {
    using testing::error_kind;
    CHECK(error_kind([] { RunConfig::parse("colour = red\n"); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { RunConfig::parse("seed = 1\nseed = 2\n"); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { RunConfig::parse("epochs = many\n"); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { RunConfig::parse("just words\n"); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { RunConfig::parse("steps = 4,4\n").grid(); }) == ErrorKind::kConfig);
    CHECK(error_kind([] { RunConfig::parse("synth = piano\n"); }) == ErrorKind::kConfig);
  }

  TEST_CASE("resolved text round trips and hashes") {
    const RunConfig a = RunConfig::parse("synth = drum\nseed = 4\nloss = mss\n");
    const RunConfig b = RunConfig::parse(a.resolved());
    CHECK(b.resolved() == a.resolved());
    CHECK(b.hash() == a.hash());
    for (const std::string& k : config_keys()) CHECK(a.resolved().find(k + " = ") != std::string::npos);

    RunConfig c = a;
    c.set("seed", "5");
    CHECK(c.hash() != a.hash());
    CHECK(c.dataset_hash() == a.dataset_hash());
    c.set("dataset_seed", "1");
    CHECK(c.dataset_hash() != a.dataset_hash());
    RunConfig f = a;
    f.set("jtfs_n_scales", "4");
    CHECK(f.feature_hash(1) != a.feature_hash(1));
    CHECK(a.feature_hash(1) != a.feature_hash(2));
    RunConfig k = a;
    k.set("fd_step", "0.002");
    CHECK(k.kernel_hash(1) != a.kernel_hash(1));
    CHECK(k.feature_hash(1) == a.feature_hash(1));
  }
}

TEST_SUITE("caches") {
  TEST_CASE("feature cache round trip and hash refusal") {
    const auto dir = testing::temp_dir("fcache");
    FeatureCache c;
    c.hash = 0x1234;
    c.layout.paths = {{1, 0, 3, 440.0, 0.0, 0.0}, {2, 1, -1, 0.0, 4.0, 0.5}, {2, -1, 7, 880.0, 8.0, 1.0}};
    c.layout.hash = 99;
    Rng r(1);
    for (std::uint32_t id : {4u, 9u, 2u}) {
      c.ids.push_back(id);
      c.coeffs.push_back({r.normal(), r.normal() * 1e-300, r.normal() * 1e300});
    }
    write_feature_cache(dir / "f.pnpf", c);
    const FeatureCache back = read_feature_cache(dir / "f.pnpf", 0x1234);
    CHECK(back.layout.paths == c.layout.paths);
    CHECK(back.layout.hash == c.layout.hash);
    CHECK(back.ids == c.ids);
    CHECK(back.coeffs == c.coeffs);
    CHECK(back.find(9) == 1);
    CHECK(back.find(5) == -1);
    CHECK(testing::error_kind([&] { read_feature_cache(dir / "f.pnpf", 0x1235); }) == ErrorKind::kCacheMismatch);
    CHECK(testing::error_kind([&] { read_feature_cache(dir / "nope.pnpf", 0x1234); }) == ErrorKind::kMissingArtifact);

    const auto bytes = slurp(dir / "f.pnpf");
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PNPF");
    CHECK(bytes[4] == 1);
    CHECK(bytes[5] == 0);
    {
      std::ofstream out(dir / "g.pnpf", std::ios::binary);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      out.put('x');
    }
    CHECK(testing::error_kind([&] { read_feature_cache(dir / "g.pnpf", 0x1234); }) == ErrorKind::kIo);
  }

  TEST_CASE("kernel cache round trip is bit exact") {
    const auto dir = testing::temp_dir("kcache");
    KernelCache c;
    c.hash = 77;
    Rng r(2);
    for (std::uint32_t id = 0; id < 5; ++id) {
      Matrix j(7, 5);
      for (int a = 0; a < 7; ++a)
        for (int b = 0; b < 5; ++b) j(a, b) = r.normal();
      c.kernels.push_back(make_kernel(id * 3, metric(j)));
    }
    c.kernels.push_back(make_kernel(100, Matrix::Zero(5, 5)));
    write_kernel_cache(dir / "k.pnpk", c);
    const KernelCache back = read_kernel_cache(dir / "k.pnpk", 77);
    REQUIRE(back.kernels.size() == c.kernels.size());
    for (std::size_t i = 0; i < c.kernels.size(); ++i) {
      CHECK(back.kernels[i].id == c.kernels[i].id);
      CHECK(back.kernels[i].m == c.kernels[i].m);
      CHECK(back.kernels[i].eigvals == c.kernels[i].eigvals);
      CHECK(back.kernels[i].eigvecs == c.kernels[i].eigvecs);
      if (std::isnan(c.kernels[i].cond)) CHECK(std::isnan(back.kernels[i].cond));
      else CHECK(back.kernels[i].cond == c.kernels[i].cond);
    }
    CHECK(back.find(6) == 2);
    CHECK(testing::error_kind([&] { read_kernel_cache(dir / "k.pnpk", 78); }) == ErrorKind::kCacheMismatch);
    const auto bytes = slurp(dir / "k.pnpk");
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PNPK");
  }

  TEST_CASE("binary primitives") {
    BinaryWriter w;
    w.u16(0x0102);
    w.f64(-0.0);
    w.i32(-5);
    CHECK(w.data()[0] == 0x02);
    BinaryReader r(w.data());
    CHECK(r.u16() == 0x0102);
    CHECK(std::signbit(r.f64()));
    CHECK(r.i32() == -5);
    CHECK(r.at_end());
    CHECK(testing::error_kind([&] { r.u8(); }) == ErrorKind::kIo);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("wav export") {
    const auto dir = testing::temp_dir("wav");
    AudioBuffer x{{0.0, 0.5, -1.0, 0.25}, 8192};
    write_wav(dir / "x.wav", x);
    const AudioBuffer y = read_wav(dir / "x.wav");
    CHECK(y.sample_rate == 8192.0);
    REQUIRE(y.length() == 4);
    CHECK(y.samples[2] == doctest::Approx(-kWavPeak).epsilon(1e-4));
    CHECK(y.samples[1] == doctest::Approx(kWavPeak / 2).epsilon(1e-3));
    CHECK(std::filesystem::file_size(dir / "x.wav") == 44 + 8);
    AudioBuffer silent{{0.0, 0.0}, 100};
    write_wav(dir / "s.wav", silent);
    CHECK(read_wav(dir / "s.wav").samples == std::vector<double>{0.0, 0.0});
  }
}
