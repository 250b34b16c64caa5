#include "pnp/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "pnp/errors.hpp"

namespace pnp {
namespace {

std::string format_theta(std::span<const double> t) {
  std::ostringstream s;
  s.precision(17);
  s << '(';
  for (std::size_t i = 0; i < t.size(); ++i) s << (i ? ", " : "") << t[i];
  s << ')';
  return s.str();
}

Vector probe(const ProbeFn& phi, const std::vector<double>& t) {
  std::vector<double> out;
  try {
    out = phi(t);
  } catch (const Error& e) {
    fail(ErrorKind::kKernelProbe, "probe at theta_bar = " + format_theta(t) + " failed: " + e.what());
  }
  for (double v : out) {
    if (!std::isfinite(v)) fail(ErrorKind::kKernelProbe, "non-finite features at theta_bar = " + format_theta(t));
  }
  return Eigen::Map<const Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

}  // namespace

Matrix jacobian_fd(std::span<const double> theta_bar, const ProbeFn& phi, double step, std::span<const double> lo,
                   std::span<const double> hi) {
  const std::size_t J = theta_bar.size();
  require(step > 0, ErrorKind::kInvalidArgument, "finite-difference step must be positive");
  require(lo.empty() || lo.size() == J, ErrorKind::kInvalidArgument, "lower bound size mismatch");
  require(hi.empty() || hi.size() == J, ErrorKind::kInvalidArgument, "upper bound size mismatch");
  Matrix jac;
  std::vector<double> t(theta_bar.begin(), theta_bar.end());
  for (std::size_t j = 0; j < J; ++j) {
    const double a = lo.empty() ? -1.0 : lo[j];
    const double b = hi.empty() ? 1.0 : hi[j];
    const double hp = std::min(step, b - theta_bar[j]);
    const double hm = std::min(step, theta_bar[j] - a);
    require(hp + hm > 0, ErrorKind::kInvalidArgument, "parameter box is degenerate at dimension " + std::to_string(j));
    t[j] = theta_bar[j] + hp;
    const Vector fp = probe(phi, t);
    t[j] = theta_bar[j] - hm;
    const Vector fm = probe(phi, t);
    t[j] = theta_bar[j];
    if (j == 0) jac.resize(fp.size(), static_cast<Eigen::Index>(J));
    require(fp.size() == jac.rows() && fm.size() == jac.rows(), ErrorKind::kKernelProbe, "feature size changed");
    jac.col(static_cast<Eigen::Index>(j)) = (fp - fm) / (hp + hm);
  }
  return jac;
}

Matrix jacobian_fd(const ParamVector& theta_bar, const FeatureMap& phi, double step) {
  require(theta_bar.space == Space::kNormalized, ErrorKind::kInvalidArgument, "jacobian_fd expects normalized parameters");
  const ScalingSpec& s = phi.scaling();
  std::vector<double> lo(s.size()), hi(s.size());
  for (std::size_t d = 0; d < s.size(); ++d) {
    lo[d] = s.box_lo(d);
    hi[d] = s.box_hi(d);
  }
  ProbeFn fn = [&](const std::vector<double>& t) {
    return phi(ParamVector{t, Space::kNormalized, theta_bar.synth}).coeffs;
  };
  return jacobian_fd(theta_bar.values, fn, step, lo, hi);
}

Matrix metric(const Matrix& jac) {
  require(jac.allFinite(), ErrorKind::kInvalidArgument, "Jacobian has non-finite entries");
  Matrix m = jac.transpose() * jac;
  return 0.5 * (m + m.transpose());
}

EigenSystem eig_sym(const Matrix& m_in) {
  require(m_in.rows() == m_in.cols(), ErrorKind::kInvalidArgument, "eig_sym needs a square matrix");
  require(m_in.allFinite(), ErrorKind::kInvalidArgument, "eig_sym input has non-finite entries");
  const Eigen::Index n = m_in.rows();
  const double scale = m_in.norm();
  require(((m_in - m_in.transpose()).norm() <= 1e-10 * std::max(scale, 1e-300)), ErrorKind::kInvalidArgument,
          "eig_sym input is not symmetric");
  Matrix a = 0.5 * (m_in + m_in.transpose());
  Matrix v = Matrix::Identity(n, n);

  auto off = [&] {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  bool converged = off() <= 1e-12 * scale;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off() <= 1e-12 * scale;
  }
  if (!converged) fail(ErrorKind::kNumericFailure, "Jacobi eigensolver did not converge in 100 sweeps");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });
  EigenSystem out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  const double top = n > 0 ? std::max(out.values(0), 0.0) : 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (out.values(k) < 0.0) {
      if (out.values(k) < -1e-8 * top)
        fail(ErrorKind::kNumericFailure, "matrix is not positive semidefinite");
      out.values(k) = 0.0;
    }
  }
  return out;
}

double condition_number(const Vector& eigvals) {
  require(eigvals.size() > 0, ErrorKind::kInvalidArgument, "empty spectrum");
  const double hi = eigvals(0);
  const double lo = eigvals(eigvals.size() - 1);
  if (hi <= 0.0) fail(ErrorKind::kUndefinedConditioning, "all-zero spectrum");
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(hi / lo);
}

PNPKernel make_kernel(std::uint32_t id, const Matrix& m) {
  PNPKernel k;
  k.id = id;
  k.m = m;
  EigenSystem es = eig_sym(m);
  k.eigvals = std::move(es.values);
  k.eigvecs = std::move(es.vectors);
  k.cond = k.eigvals.size() > 0 && k.eigvals(0) > 0.0 ? condition_number(k.eigvals)
                                                      : std::numeric_limits<double>::quiet_NaN();
  return k;
}

PNPKernel identity_kernel(std::uint32_t id, std::size_t dim) {
  return make_kernel(id, Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
}

double pnp_quadratic(const Vector& delta, const PNPKernel& k, double lambda) {
  require(lambda >= 0.0, ErrorKind::kInvalidArgument, "damping must be non-negative");
  require(delta.size() == k.m.rows(), ErrorKind::kInvalidArgument, "delta dimension mismatch");
  // Plain loops: with M = I and lambda = 0 this is bitwise the squared norm summed in index order.
  double quad = 0.0, norm2 = 0.0;
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < delta.size(); ++j) row += k.m(i, j) * delta(j);
    quad += delta(i) * row;
    norm2 += delta(i) * delta(i);
  }
  return quad + lambda * norm2;
}

double pnp_quadratic_eigen(const Vector& delta, const PNPKernel& k, double lambda) {
  require(lambda >= 0.0, ErrorKind::kInvalidArgument, "damping must be non-negative");
  require(delta.size() == k.eigvecs.rows(), ErrorKind::kInvalidArgument, "delta dimension mismatch");
  const Vector proj = k.eigvecs.transpose() * delta;
  double s = 0.0;
  for (Eigen::Index j = 0; j < proj.size(); ++j) s += (k.eigvals(j) + lambda) * proj(j) * proj(j);
  return s;
}

Vector pnp_gradient(const Vector& delta, const PNPKernel& k, double lambda) {
  require(lambda >= 0.0, ErrorKind::kInvalidArgument, "damping must be non-negative");
  require(delta.size() == k.m.rows(), ErrorKind::kInvalidArgument, "delta dimension mismatch");
  Vector g(delta.size());
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < delta.size(); ++j) row += k.m(i, j) * delta(j);
    g(i) = 2.0 * (row + lambda * delta(i));
  }
  return g;
}

double lambda_max(std::span<const PNPKernel> kernels) {
  require(!kernels.empty(), ErrorKind::kInvalidArgument, "lambda_max needs at least one kernel");
  double top = 0.0;
  for (const PNPKernel& k : kernels) top = std::max(top, k.eigvals(0));
  return top;
}

double damped_condition(const PNPKernel& k, double lambda) {
  require(lambda >= 0.0, ErrorKind::kInvalidArgument, "damping must be non-negative");
  const double hi = k.eigvals(0) + lambda;
  const double lo = k.eigvals(k.eigvals.size() - 1) + lambda;
  if (hi <= 0.0) fail(ErrorKind::kUndefinedConditioning, "all-zero damped spectrum");
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(hi / lo);
}

Vector damped_ols(const Vector& theta, const PNPKernel& k, double lambda) {
  require(lambda > 0.0, ErrorKind::kInvalidArgument, "damped_ols needs lambda > 0");
  require(theta.size() == k.m.rows(), ErrorKind::kInvalidArgument, "theta dimension mismatch");
  const Matrix a = k.m + lambda * Matrix::Identity(k.m.rows(), k.m.cols());
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) fail(ErrorKind::kNumericFailure, "damped normal matrix is not positive definite");
  Vector out = llt.solve(k.m * theta);
  if (!out.allFinite()) fail(ErrorKind::kNumericFailure, "damped solve produced non-finite values");
  return out;
}

}  // namespace pnp
