#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "pnp/param_space.hpp"
#include "pnp/pipeline.hpp"
#include "pnp/random.hpp"

using namespace pnp;

namespace {

ParamVector natural(SynthId s, std::vector<double> v) { return {std::move(v), Space::kNatural, s}; }
ParamVector normalized(SynthId s, std::vector<double> v) { return {std::move(v), Space::kNormalized, s}; }

}  // namespace

TEST_SUITE("param_space") {
  TEST_CASE("endpoints and log midpoints") {
    const ScalingSpec chirp = default_scaling(SynthId::kChirp);
    CHECK(scale(natural(SynthId::kChirp, {512, 4, 0.5}), chirp).values == std::vector<double>{-1, -1, -1});
    CHECK(scale(natural(SynthId::kChirp, {1024, 16, 4}), chirp).values == std::vector<double>{1, 1, 1});
    CHECK(scale(natural(SynthId::kChirp, {std::sqrt(512.0 * 1024), 8, 1}), chirp)[0] == doctest::Approx(0).scale(1));

    const ParamVector mid = unscale(normalized(SynthId::kChirp, {0, 0, 0}), chirp);
    CHECK(mid[0] == doctest::Approx(std::sqrt(512.0 * 1024)).epsilon(1e-14));
    CHECK(mid[1] == doctest::Approx(8).epsilon(1e-14));
    CHECK(mid[2] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    const ParamVector top = unscale(normalized(SynthId::kChirp, {1, 1, 1}), chirp);
    CHECK(top[0] == doctest::Approx(1024).epsilon(1e-14));
    CHECK(top[1] == doctest::Approx(16).epsilon(1e-14));
    CHECK(top[2] == doctest::Approx(4).epsilon(1e-14));
    CHECK(mid.space == Space::kNatural);

    const ParamVector low = unscale(normalized(SynthId::kDrum, {-1, -1, -1, -1, -1}), default_scaling(SynthId::kDrum));
    CHECK(low[0] / (2 * std::numbers::pi) == doctest::Approx(40).epsilon(1e-14));
    CHECK(low[1] == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(low[2] == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(low[3] == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(low[4] == doctest::Approx(1e-5).epsilon(1e-12));
  }

  TEST_CASE("log flags") {
    const ScalingSpec drum = default_scaling(SynthId::kDrum);
    CHECK(drum.dims[0].log);
    CHECK_FALSE(drum.dims[1].log);
    CHECK(drum.dims[2].log);
    CHECK(drum.dims[3].log);
    CHECK_FALSE(drum.dims[4].log);
    for (const DimScaling& d : default_scaling(SynthId::kChirp).dims) CHECK(d.log);
  }

  TEST_CASE("round trip over 1e4 draws, both synths, all ablations") {
    Rng r(5);
    for (SynthId s : {SynthId::kChirp, SynthId::kDrum}) {
      for (bool lg : {true, false}) {
        for (bool mm : {true, false}) {
          ScalingSpec spec = default_scaling(s);
          spec.use_log = lg;
          spec.use_minmax = mm;
          for (int i = 0; i < 10000; ++i) {
            ParamVector t{{}, Space::kNatural, s};
            for (const DimScaling& d : spec.dims) t.values.push_back(d.log ? std::exp(r.uniform(std::log(d.lo), std::log(d.hi))) : r.uniform(d.lo, d.hi));
            const ParamVector tb = scale(t, spec);
            for (std::size_t d = 0; d < tb.size(); ++d) {
              CHECK(tb[d] >= spec.box_lo(d));
              CHECK(tb[d] <= spec.box_hi(d));
            }
            const ParamVector back = unscale(tb, spec);
            for (std::size_t d = 0; d < t.size(); ++d) CHECK(testing::rel_err(back[d], t[d]) < 1e-12);
          }
        }
      }
    }
  }

  TEST_CASE("monotone per dimension") {
    const ScalingSpec spec = default_scaling(SynthId::kDrum);
    ParamVector a = unscale(normalized(SynthId::kDrum, {0, 0, 0, 0, 0}), spec);
    for (std::size_t d = 0; d < 5; ++d) {
      ParamVector b = a;
      b.values[d] *= 1.01;
      CHECK(scale(b, spec)[d] > scale(a, spec)[d]);
    }
  }

  TEST_CASE("out of range names the dimension") {
    const ScalingSpec spec = default_scaling(SynthId::kChirp);
    try {
      scale(natural(SynthId::kChirp, {724, 20, 1}), spec);
      FAIL("expected range error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kRangeError);
      CHECK(std::string(e.what()).find("fm") != std::string::npos);
    }
  }

  TEST_CASE("validation side rule") {
    CHECK(validation_side(30, 3) == 14);
    CHECK(validation_side(4, 3) == 2);
    CHECK(validation_side(12, 3) == 6);
    CHECK(validation_side(6, 5) == 4);
  }

  TEST_CASE("grid sizes and splits") {
    const ScalingSpec spec = default_scaling(SynthId::kChirp);
    SUBCASE("steps 30") {
      const DatasetManifest m = generate_grid({{30, 30, 30}, 1}, spec);
      CHECK(m.rows.size() == 27000);
      CHECK(m.indices(Split::kVal).size() == 2744);
      const double rest = 27000 - 2744;
      CHECK(std::abs(m.indices(Split::kTest).size() - rest / 9) <= 1);
    }
    SUBCASE("steps 4") {
      const DatasetManifest m = generate_grid({{4, 4, 4}, 1}, spec);
      CHECK(m.rows.size() == 64);
      CHECK(m.indices(Split::kVal).size() == 8);
    }
    CHECK(testing::error_kind([&] { generate_grid({{3, 4, 4}, 1}, spec); }) == ErrorKind::kInvalidSpec);
  }

  TEST_CASE("containment, centered val block, coverage") {
    const ScalingSpec spec = default_scaling(SynthId::kChirp);
    const int steps = 12;
    const DatasetManifest m = generate_grid({{steps, steps, steps}, 9}, spec);
    const int side = validation_side(steps, 3);
    const int start = (steps - side) / 2;
    std::set<std::uint32_t> ids;
    for (const ManifestRow& row : m.rows) {
      ids.insert(row.id);
      int cell[3] = {static_cast<int>(row.id / (steps * steps)), static_cast<int>(row.id / steps % steps),
                     static_cast<int>(row.id % steps)};
      bool inside = true;
      for (int d = 0; d < 3; ++d) {
        const double w = (spec.warped_hi(d) - spec.warped_lo(d)) / steps;
        const double lo = spec.warped_lo(d) + w * cell[d];
        const double v = std::log(row.natural[d]);
        CHECK(v >= lo - 1e-12);
        CHECK(v <= lo + w + 1e-12);
        CHECK(row.normalized[d] >= -1.0);
        CHECK(row.normalized[d] <= 1.0);
        inside = inside && cell[d] >= start && cell[d] < start + side;
      }
      CHECK((row.split == Split::kVal) == inside);
    }
    CHECK(ids.size() == m.rows.size());
    CHECK(*ids.rbegin() == steps * steps * steps - 1);
  }

  TEST_CASE("determinism and manifest round trip") {
    const ScalingSpec spec = default_scaling(SynthId::kChirp);
    const DatasetManifest a = generate_grid({{5, 5, 5}, 42}, spec);
    const DatasetManifest b = generate_grid({{5, 5, 5}, 42}, spec);
    const DatasetManifest c = generate_grid({{5, 5, 5}, 43}, spec);
    CHECK(manifest_csv(a) == manifest_csv(b));
    CHECK(manifest_csv(a) != manifest_csv(c));

    const auto dir = testing::temp_dir("manifest");
    write_manifest(dir / "m.csv", a);
    const DatasetManifest r = read_manifest(dir / "m.csv");
    CHECK(manifest_csv(r) == manifest_csv(a));
    CHECK(r.hash() == a.hash());
    REQUIRE(r.rows.size() == a.rows.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      CHECK(r.rows[i].natural == a.rows[i].natural);
      CHECK(r.rows[i].normalized == a.rows[i].normalized);
      CHECK(r.rows[i].split == a.rows[i].split);
    }
    CHECK(testing::error_kind([&] { read_manifest(dir / "nope.csv"); }) == ErrorKind::kMissingArtifact);
  }

  TEST_CASE("drum grid rows are feasible with their probes") {
    const ScalingSpec spec = default_scaling(SynthId::kDrum);
    const DatasetManifest m = generate_grid({{5, 5, 5, 5, 5}, 3}, spec, default_feasibility(spec, 1e-3));
    CHECK(m.rows.size() == 3125);
    CHECK(m.indices(Split::kVal).size() == 243);
    for (std::size_t i = 0; i < m.rows.size(); i += 41) CHECK_NOTHROW(render(m.natural(i)));
  }
}
