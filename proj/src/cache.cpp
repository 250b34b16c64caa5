#include "pnp/cache.hpp"

#include "pnp/binary_io.hpp"
#include "pnp/errors.hpp"

namespace pnp {
namespace {

void check_hash(std::uint64_t stored, std::uint64_t expected, const std::filesystem::path& path) {
  if (stored != expected) {
    fail(ErrorKind::kCacheMismatch, path.string() + " was produced by config " + hex64(stored) + ", expected " +
                                        hex64(expected) + "; rerun precompute");
  }
}

void write_matrix(BinaryWriter& w, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
}

Matrix read_matrix(BinaryReader& r, Eigen::Index n) {
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = r.f64();
  return m;
}

template <class Rows>
std::ptrdiff_t find_id(const Rows& rows, std::uint32_t id, auto key) {
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (key(rows[i]) == id) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

}  // namespace

std::ptrdiff_t FeatureCache::find(std::uint32_t id) const {
  return find_id(ids, id, [](std::uint32_t v) { return v; });
}

std::ptrdiff_t KernelCache::find(std::uint32_t id) const {
  return find_id(kernels, id, [](const PNPKernel& k) { return k.id; });
}

void write_feature_cache(const std::filesystem::path& path, const FeatureCache& cache) {
  require(cache.ids.size() == cache.coeffs.size(), ErrorKind::kInvalidArgument, "feature cache id/row mismatch");
  const std::size_t p = cache.layout.paths.size();
  BinaryWriter w;
  w.bytes("PNPF");
  w.u16(kFeatureCacheVersion);
  w.u64(cache.hash);
  w.u32(static_cast<std::uint32_t>(p));
  w.u64(cache.layout.hash);
  for (const PathInfo& info : cache.layout.paths) {
    w.u8(info.order);
    w.u8(static_cast<std::uint8_t>(info.spin));
    w.u16(static_cast<std::uint16_t>(info.lambda));
    w.f64(info.center_hz);
    w.f64(info.rate_hz);
    w.f64(info.scale_cpo);
  }
  w.u32(static_cast<std::uint32_t>(cache.ids.size()));
  for (std::size_t i = 0; i < cache.ids.size(); ++i) {
    require(cache.coeffs[i].size() == p, ErrorKind::kInvalidArgument, "feature row length differs from path table");
    w.u32(cache.ids[i]);
    for (double c : cache.coeffs[i]) w.f64(c);
  }
  w.save(path);
}

FeatureCache read_feature_cache(const std::filesystem::path& path, std::uint64_t expected) {
  BinaryReader r = BinaryReader::open(path);
  r.expect_bytes("PNPF");
  const std::uint16_t version = r.u16();
  require(version == kFeatureCacheVersion, ErrorKind::kCacheMismatch, "unsupported feature cache version");
  FeatureCache c;
  c.hash = r.u64();
  check_hash(c.hash, expected, path);
  const std::uint32_t p = r.u32();
  c.layout.hash = r.u64();
  c.layout.paths.resize(p);
  for (PathInfo& info : c.layout.paths) {
    info.order = r.u8();
    info.spin = static_cast<std::int8_t>(r.u8());
    info.lambda = static_cast<std::int16_t>(r.u16());
    info.center_hz = r.f64();
    info.rate_hz = r.f64();
    info.scale_cpo = r.f64();
  }
  const std::uint32_t rows = r.u32();
  c.ids.resize(rows);
  c.coeffs.assign(rows, std::vector<double>(p));
  for (std::uint32_t i = 0; i < rows; ++i) {
    c.ids[i] = r.u32();
    for (double& v : c.coeffs[i]) v = r.f64();
  }
  require(r.at_end(), ErrorKind::kIo, "trailing bytes in " + path.string());
  return c;
}

void write_kernel_cache(const std::filesystem::path& path, const KernelCache& cache) {
  const Eigen::Index J = cache.kernels.empty() ? 0 : cache.kernels.front().m.rows();
  BinaryWriter w;
  w.bytes("PNPK");
  w.u16(kKernelCacheVersion);
  w.u64(cache.hash);
  w.u8(static_cast<std::uint8_t>(J));
  w.u32(static_cast<std::uint32_t>(cache.kernels.size()));
  for (const PNPKernel& k : cache.kernels) {
    require(k.m.rows() == J && k.m.cols() == J && k.eigvals.size() == J && k.eigvecs.rows() == J,
            ErrorKind::kInvalidArgument, "kernel dimension mismatch");
    w.u32(k.id);
    write_matrix(w, k.m);
    for (Eigen::Index j = 0; j < J; ++j) w.f64(k.eigvals(j));
    write_matrix(w, k.eigvecs);
    w.f64(k.cond);
  }
  w.save(path);
}

KernelCache read_kernel_cache(const std::filesystem::path& path, std::uint64_t expected) {
  BinaryReader r = BinaryReader::open(path);
  r.expect_bytes("PNPK");
  const std::uint16_t version = r.u16();
  require(version == kKernelCacheVersion, ErrorKind::kCacheMismatch, "unsupported kernel cache version");
  KernelCache c;
  c.hash = r.u64();
  check_hash(c.hash, expected, path);
  const Eigen::Index J = r.u8();
  const std::uint32_t rows = r.u32();
  c.kernels.resize(rows);
  for (PNPKernel& k : c.kernels) {
    k.id = r.u32();
    k.m = read_matrix(r, J);
    k.eigvals.resize(J);
    for (Eigen::Index j = 0; j < J; ++j) k.eigvals(j) = r.f64();
    k.eigvecs = read_matrix(r, J);
    k.cond = r.f64();
  }
  require(r.at_end(), ErrorKind::kIo, "trailing bytes in " + path.string());
  return c;
}

}  // namespace pnp
