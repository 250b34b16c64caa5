#include "pnp/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "pnp/errors.hpp"

namespace pnp {
namespace {

enum class Kind { kForward, kInverse, kReal, kInverse2d, kRealBatch };

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(Kind kind, std::size_t n0, std::size_t n1 = 1) {
    std::lock_guard lock(mu_);
    const auto key = std::make_tuple(kind, n0, n1);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const std::size_t total = n0 * n1;
    auto* a = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (total + 1)));
    auto* b = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (total + 1)));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    const int n = static_cast<int>(n0);
    fftw_plan plan = nullptr;
    switch (kind) {
      case Kind::kForward: plan = fftw_plan_dft_1d(n, a, b, FFTW_FORWARD, flags); break;
      case Kind::kInverse: plan = fftw_plan_dft_1d(n, a, b, FFTW_BACKWARD, flags); break;
      case Kind::kReal: plan = fftw_plan_dft_r2c_1d(n, reinterpret_cast<double*>(a), b, flags); break;
      case Kind::kInverse2d:
        plan = fftw_plan_dft_2d(n, static_cast<int>(n1), a, b, FFTW_BACKWARD, flags);
        break;
      case Kind::kRealBatch: {
        const int half = n / 2 + 1;
        plan = fftw_plan_many_dft_r2c(1, &n, static_cast<int>(n1), reinterpret_cast<double*>(a), nullptr, 1, n, b,
                                      nullptr, 1, half, flags);
        break;
      }
    }
    fftw_free(a);
    fftw_free(b);
    require(plan != nullptr, ErrorKind::kNumericFailure, "FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<Kind, std::size_t, std::size_t>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

fftw_complex* raw(std::span<cplx> s) { return reinterpret_cast<fftw_complex*>(s.data()); }
fftw_complex* raw(std::span<const cplx> s) {
  return reinterpret_cast<fftw_complex*>(const_cast<cplx*>(s.data()));
}

}  // namespace

void fft_forward(std::span<const cplx> in, std::span<cplx> out) {
  require(in.size() == out.size() && !in.empty(), ErrorKind::kInvalidArgument, "fft size mismatch");
  fftw_execute_dft(cache().get(Kind::kForward, in.size()), raw(in), raw(out));
}

void fft_inverse(std::span<const cplx> in, std::span<cplx> out) {
  require(in.size() == out.size() && !in.empty(), ErrorKind::kInvalidArgument, "fft size mismatch");
  fftw_execute_dft(cache().get(Kind::kInverse, in.size()), raw(in), raw(out));
}

void fft_real(std::span<const double> in, std::span<cplx> out) {
  require(!in.empty() && out.size() == in.size() / 2 + 1, ErrorKind::kInvalidArgument, "rfft size mismatch");
  fftw_execute_dft_r2c(cache().get(Kind::kReal, in.size()), const_cast<double*>(in.data()), raw(out));
}

void fft_real_batch(std::span<const double> in, std::span<cplx> out, std::size_t n, std::size_t count) {
  require(n > 0 && count > 0 && in.size() == n * count && out.size() == (n / 2 + 1) * count,
          ErrorKind::kInvalidArgument, "batched rfft size mismatch");
  fftw_execute_dft_r2c(cache().get(Kind::kRealBatch, n, count), const_cast<double*>(in.data()), raw(out));
}

void fft_inverse_2d(std::span<const cplx> in, std::span<cplx> out, std::size_t rows, std::size_t cols) {
  require(in.size() == rows * cols && out.size() == in.size() && !in.empty(), ErrorKind::kInvalidArgument,
          "2-D fft size mismatch");
  fftw_execute_dft(cache().get(Kind::kInverse2d, rows, cols), raw(in), raw(out));
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace pnp
