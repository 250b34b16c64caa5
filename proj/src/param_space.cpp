#include "pnp/param_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pnp/binary_io.hpp"
#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {
namespace {

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::kIo, "bad number in manifest: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

void check_space(const ParamVector& v, Space space, const ScalingSpec& spec, const char* what) {
  require(v.space == space, ErrorKind::kInvalidArgument, std::string(what) + ": wrong parameter space");
  require(v.synth == spec.synth, ErrorKind::kInvalidArgument, std::string(what) + ": synth mismatch");
  require(v.size() == spec.size(), ErrorKind::kInvalidArgument, std::string(what) + ": dimension mismatch");
}

}  // namespace

const char* to_string(SynthId id) { return id == SynthId::kChirp ? "chirp" : "drum"; }

SynthId parse_synth(const std::string& name) {
  if (name == "chirp") return SynthId::kChirp;
  if (name == "drum") return SynthId::kDrum;
  fail(ErrorKind::kConfig, "unknown synth '" + name + "' (expected chirp or drum)");
}

const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

double ScalingSpec::warped_lo(std::size_t d) const { return logged(d) ? std::log(dims[d].lo) : dims[d].lo; }
double ScalingSpec::warped_hi(std::size_t d) const { return logged(d) ? std::log(dims[d].hi) : dims[d].hi; }
double ScalingSpec::box_lo(std::size_t d) const { return use_minmax ? -1.0 : warped_lo(d); }
double ScalingSpec::box_hi(std::size_t d) const { return use_minmax ? 1.0 : warped_hi(d); }

std::string ScalingSpec::describe() const {
  std::ostringstream s;
  s << to_string(synth) << " log=" << use_log << " minmax=" << use_minmax;
  for (const auto& d : dims) s << ' ' << d.name << (d.log ? ":log[" : ":lin[") << fmt(d.lo) << ',' << fmt(d.hi) << ']';
  return s.str();
}

ScalingSpec default_scaling(SynthId synth) {
  ScalingSpec s;
  s.synth = synth;
  if (synth == SynthId::kChirp) {
    s.dims = {{"fc", true, 512.0, 1024.0}, {"fm", true, 4.0, 16.0}, {"gamma", true, 0.5, 4.0}};
  } else {
    const double tau = 2.0 * std::numbers::pi;
    s.dims = {{"omega1", true, tau * 40.0, tau * 1000.0},
              {"tau1", false, 0.4, 3.0},
              {"p", true, 1e-5, 0.2},
              {"D", true, 1e-5, 0.3},
              {"alpha", false, 1e-5, 1.0}};
  }
  return s;
}

ParamVector to_log(const ParamVector& theta, const ScalingSpec& spec) {
  check_space(theta, Space::kNatural, spec, "to_log");
  ParamVector out{theta.values, Space::kLog, theta.synth};
  for (std::size_t d = 0; d < spec.size(); ++d) {
    if (!spec.logged(d)) continue;
    require(theta[d] > 0.0, ErrorKind::kRangeError, spec.dims[d].name + " must be positive for log scaling");
    out.values[d] = std::log(theta[d]);
  }
  return out;
}

ParamVector scale(const ParamVector& theta, const ScalingSpec& spec) {
  check_space(theta, Space::kNatural, spec, "scale");
  ParamVector out{theta.values, Space::kNormalized, theta.synth};
  for (std::size_t d = 0; d < spec.size(); ++d) {
    const DimScaling& dim = spec.dims[d];
    const double v = theta[d];
    const double slack = 1e-12 * std::max(std::abs(dim.lo), std::abs(dim.hi));
    if (!(std::isfinite(v) && v >= dim.lo - slack && v <= dim.hi + slack)) {
      fail(ErrorKind::kRangeError, dim.name + " = " + fmt(v) + " outside [" + fmt(dim.lo) + ", " + fmt(dim.hi) + "]");
    }
    const double w = spec.logged(d) ? std::log(v) : v;
    if (spec.use_minmax) {
      const double lo = spec.warped_lo(d), hi = spec.warped_hi(d);
      out.values[d] = std::clamp(-1.0 + 2.0 * (w - lo) / (hi - lo), -1.0, 1.0);
    } else {
      out.values[d] = w;
    }
  }
  return out;
}

ParamVector unscale(const ParamVector& theta_bar, const ScalingSpec& spec) {
  check_space(theta_bar, Space::kNormalized, spec, "unscale");
  ParamVector out{theta_bar.values, Space::kNatural, theta_bar.synth};
  for (std::size_t d = 0; d < spec.size(); ++d) {
    double w = theta_bar[d];
    require(std::isfinite(w), ErrorKind::kInvalidArgument, spec.dims[d].name + " is not finite");
    if (spec.use_minmax) {
      const double lo = spec.warped_lo(d), hi = spec.warped_hi(d);
      w = lo + 0.5 * (w + 1.0) * (hi - lo);
    }
    out.values[d] = spec.logged(d) ? std::exp(w) : w;
  }
  return out;
}

std::size_t GridSpec::cells() const {
  std::size_t n = 1;
  for (int s : steps) n *= static_cast<std::size_t>(s);
  return n;
}

GridSpec default_grid(SynthId synth, std::uint64_t seed) {
  GridSpec g;
  g.steps = synth == SynthId::kChirp ? std::vector<int>(3, 12) : std::vector<int>(5, 6);
  g.seed = seed;
  return g;
}

int validation_side(int steps, std::size_t dims) {
  const double side = std::round(std::pow(0.1, 1.0 / static_cast<double>(dims)) * steps);
  return std::max(1, static_cast<int>(side));
}

DatasetManifest generate_grid(const GridSpec& grid, const ScalingSpec& scaling, const Feasibility& feasible) {
  const std::size_t J = scaling.size();
  require(grid.steps.size() == J, ErrorKind::kInvalidSpec, "grid has " + std::to_string(grid.steps.size()) +
                                                               " dimensions, scaling has " + std::to_string(J));
  std::vector<int> block_lo(J), block_hi(J);
  for (std::size_t d = 0; d < J; ++d) {
    const int s = grid.steps[d];
    require(s >= 4, ErrorKind::kInvalidSpec, "grid steps must be >= 4 (got " + std::to_string(s) + " on " +
                                                 scaling.dims[d].name + "): no interior validation block");
    const int side = validation_side(s, J);
    block_lo[d] = (s - side) / 2;
    block_hi[d] = block_lo[d] + side;
    require(block_lo[d] >= 1 && block_hi[d] <= s - 1, ErrorKind::kInvalidSpec, "validation block is not interior");
  }
  const std::size_t n = grid.cells();
  require(n <= 0xffffffffULL, ErrorKind::kInvalidSpec, "grid too large");

  DatasetManifest m;
  m.scaling = scaling;
  m.grid = grid;
  m.rows.resize(n);
  Rng draw = Rng::derive(grid.seed, 1);
  std::vector<std::size_t> outer;
  std::vector<int> cell(J);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rest = i;
    for (std::size_t d = J; d-- > 0;) {
      cell[d] = static_cast<int>(rest % grid.steps[d]);
      rest /= grid.steps[d];
    }
    ManifestRow& row = m.rows[i];
    row.id = static_cast<std::uint32_t>(i);
    bool inside = true;
    for (std::size_t d = 0; d < J; ++d) inside = inside && cell[d] >= block_lo[d] && cell[d] < block_hi[d];
    ParamVector nat{std::vector<double>(J), Space::kNatural, scaling.synth};
    ParamVector bar;
    for (int attempt = 0;; ++attempt) {
      require(attempt < 1000, ErrorKind::kInvalidSpec, "grid cell " + std::to_string(i) + " has no feasible draw");
      for (std::size_t d = 0; d < J; ++d) {
        const double lo = scaling.warped_lo(d), hi = scaling.warped_hi(d);
        const double w = lo + (cell[d] + draw.uniform()) / grid.steps[d] * (hi - lo);
        nat.values[d] = std::clamp(scaling.logged(d) ? std::exp(w) : w, scaling.dims[d].lo, scaling.dims[d].hi);
      }
      bar = scale(nat, scaling);
      if (!feasible || feasible(bar)) break;
    }
    row.natural = nat.values;
    row.normalized = bar.values;
    row.split = Split::kVal;
    if (!inside) outer.push_back(i);
  }
  Rng shuffler = Rng::derive(grid.seed, 2);
  shuffler.shuffle(std::span<std::size_t>(outer));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(outer.size()) / 9.0));
  for (std::size_t k = 0; k < outer.size(); ++k) m.rows[outer[k]].split = k < n_test ? Split::kTest : Split::kTrain;
  return m;
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].split == s) out.push_back(i);
  return out;
}

ParamVector DatasetManifest::natural(std::size_t row) const {
  return ParamVector{rows.at(row).natural, Space::kNatural, scaling.synth};
}

ParamVector DatasetManifest::normalized(std::size_t row) const {
  return ParamVector{rows.at(row).normalized, Space::kNormalized, scaling.synth};
}

std::uint64_t DatasetManifest::hash() const { return fnv1a64(manifest_csv(*this)); }

std::string manifest_csv(const DatasetManifest& m) {
  std::ostringstream out;
  out << "# pnp-manifest synth=" << to_string(m.scaling.synth) << " steps=";
  for (std::size_t d = 0; d < m.grid.steps.size(); ++d) out << (d ? "," : "") << m.grid.steps[d];
  out << " seed=" << m.grid.seed << " log=" << m.scaling.use_log << " minmax=" << m.scaling.use_minmax
      << " config_hash=" << (m.config_hash.empty() ? "-" : m.config_hash)
      << " config=" << (m.config_path.empty() ? "-" : m.config_path) << '\n';
  out << "id,split";
  for (const auto& d : m.scaling.dims) out << ',' << d.name;
  for (const auto& d : m.scaling.dims) out << ',' << d.name << "_bar";
  out << '\n';
  for (const ManifestRow& r : m.rows) {
    out << r.id << ',' << to_string(r.split);
    for (double v : r.natural) out << ',' << fmt(v);
    for (double v : r.normalized) out << ',' << fmt(v);
    out << '\n';
  }
  return out.str();
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  BinaryWriter w;
  w.bytes(manifest_csv(m));
  w.save(path);
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingArtifact, "manifest not found: " + path.string() + " (run the dataset command)");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("# pnp-manifest ", 0) == 0, ErrorKind::kIo,
          "not a manifest file: " + path.string());

  DatasetManifest m;
  const std::string body = line.substr(15);
  const auto cfg_pos = body.find(" config=");
  const std::string head = body.substr(0, cfg_pos);
  if (cfg_pos != std::string::npos) m.config_path = body.substr(cfg_pos + 8);
  if (m.config_path == "-") m.config_path.clear();
  const std::vector<std::string> tokens = split(head, ' ');
  auto value_of = [&](const std::string& key) -> std::string {
    for (const std::string& tok : tokens)
      if (tok.rfind(key + "=", 0) == 0) return tok.substr(key.size() + 1);
    fail(ErrorKind::kIo, "manifest header lacks " + key);
  };
  m.scaling = default_scaling(parse_synth(value_of("synth")));
  for (const auto& s : split(value_of("steps"), ',')) m.grid.steps.push_back(std::stoi(s));
  m.grid.seed = std::stoull(value_of("seed"));
  m.scaling.use_log = value_of("log") == "1";
  m.scaling.use_minmax = value_of("minmax") == "1";
  m.config_hash = value_of("config_hash");
  if (m.config_hash == "-") m.config_hash.clear();
  const std::size_t J = m.scaling.size();
  require(std::getline(in, line) && split(line, ',').size() == 2 + 2 * J, ErrorKind::kIo, "bad manifest column header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    require(f.size() == 2 + 2 * J, ErrorKind::kIo, "bad manifest row: " + line);
    ManifestRow r;
    r.id = static_cast<std::uint32_t>(std::stoul(f[0]));
    if (f[1] == "train") r.split = Split::kTrain;
    else if (f[1] == "val") r.split = Split::kVal;
    else if (f[1] == "test") r.split = Split::kTest;
    else fail(ErrorKind::kIo, "bad split tag: " + f[1]);
    for (std::size_t d = 0; d < J; ++d) r.natural.push_back(parse_double(f[2 + d]));
    for (std::size_t d = 0; d < J; ++d) r.normalized.push_back(parse_double(f[2 + J + d]));
    m.rows.push_back(std::move(r));
  }
  return m;
}

}  // namespace pnp
