#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pnp/param_space.hpp"
#include "pnp/pipeline.hpp"

namespace pnp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Any map from normalized parameters to a flat feature vector.
using ProbeFn = std::function<std::vector<double>(const std::vector<double>&)>;

/// P x J central-difference Jacobian. Near the box boundary the step shrinks on the side that would
/// leave [lo, hi]: column j = (phi(t + h+ e_j) - phi(t - h- e_j)) / (h+ + h-). Failures at a probe
/// point are rethrown as kernel-probe errors carrying the offending parameters. Empty lo/hi means
/// the [-1, 1] box.
Matrix jacobian_fd(std::span<const double> theta_bar, const ProbeFn& phi, double step = 1e-3,
                   std::span<const double> lo = {}, std::span<const double> hi = {});
Matrix jacobian_fd(const ParamVector& theta_bar, const FeatureMap& phi, double step = 1e-3);

/// J^T J.
Matrix metric(const Matrix& jac);

struct EigenSystem {
  Vector values;   // non-increasing
  Matrix vectors;  // orthonormal columns
};

/// Cyclic Jacobi (tolerance 1e-12 relative to ||m||_F, at most 100 sweeps). Eigenvalues are sorted
/// non-increasing; negatives above -1e-8 * max are round-off and clamped to zero.
EigenSystem eig_sym(const Matrix& m);

/// sqrt(max / min) of a sorted spectrum; +inf if min == 0; undefined-conditioning if all zero.
double condition_number(const Vector& eigvals);

struct PNPKernel {
  std::uint32_t id = 0;  // manifest row id
  Matrix m;
  Vector eigvals;
  Matrix eigvecs;
  double cond = 0.0;     // NaN when the metric is identically zero

  std::size_t dim() const { return static_cast<std::size_t>(m.rows()); }
};

PNPKernel make_kernel(std::uint32_t id, const Matrix& m);
/// M = I (the P-loss special case).
PNPKernel identity_kernel(std::uint32_t id, std::size_t dim);

/// <delta | M + lambda I | delta>, evaluated directly.
double pnp_quadratic(const Vector& delta, const PNPKernel& k, double lambda);
/// sum_j (sigma_j^2 + lambda) <delta, v_j>^2.
double pnp_quadratic_eigen(const Vector& delta, const PNPKernel& k, double lambda);
/// Gradient of pnp_quadratic with respect to delta: 2 (M + lambda I) delta.
Vector pnp_gradient(const Vector& delta, const PNPKernel& k, double lambda);

/// Largest eigenvalue over a non-empty kernel set.
double lambda_max(std::span<const PNPKernel> kernels);

/// sqrt((max + lambda) / (min + lambda)).
double damped_condition(const PNPKernel& k, double lambda);

/// Solves (M + lambda I) theta_tilde = M theta, lambda > 0.
Vector damped_ols(const Vector& theta, const PNPKernel& k, double lambda);

}  // namespace pnp
