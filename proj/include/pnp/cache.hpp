#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pnp/features.hpp"
#include "pnp/kernel.hpp"

namespace pnp {

inline constexpr std::uint16_t kFeatureCacheVersion = 1;
inline constexpr std::uint16_t kKernelCacheVersion = 1;

/// Log-compressed JTFS of dataset rows. `hash` identifies the producing configuration (feature
/// config + manifest); loads with a different expected hash are refused.
struct FeatureCache {
  std::uint64_t hash = 0;
  PathLayout layout;
  std::vector<std::uint32_t> ids;
  std::vector<std::vector<double>> coeffs;

  /// Row position of manifest id, or -1.
  std::ptrdiff_t find(std::uint32_t id) const;
};

/// "PNPF" u16 version, u64 hash, u32 coefficient count, u64 layout hash, path table, u32 row count,
/// then per row u32 id and f64 coefficients; little-endian.
void write_feature_cache(const std::filesystem::path& path, const FeatureCache& cache);
/// Throws missing-artifact if absent and cache-mismatch if the stored hash differs from `expected`.
FeatureCache read_feature_cache(const std::filesystem::path& path, std::uint64_t expected);

struct KernelCache {
  std::uint64_t hash = 0;
  std::vector<PNPKernel> kernels;

  std::ptrdiff_t find(std::uint32_t id) const;
};

/// "PNPK" u16 version, u64 hash, u8 J, u32 rows, then per row u32 id, J x J m (row-major), J
/// eigenvalues, J x J eigenvectors (row-major), f64 cond; little-endian.
void write_kernel_cache(const std::filesystem::path& path, const KernelCache& cache);
KernelCache read_kernel_cache(const std::filesystem::path& path, std::uint64_t expected);

}  // namespace pnp
