#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace etso {

using Vector = Eigen::VectorXd;
/// Point sets are stored one point per row.
using Matrix = Eigen::MatrixXd;

/// Fixed hyperparameters of the Matern-5/2 surrogate. Costs are in normalized units.
struct KernelParams {
  Vector lengthscales;
  double prior_std_dev = 1.0 / 3.0;
  double noise_std_dev = 0.016;
  double prior_mean = -1.0;

  /// Four-gain controller space defaults.
  static KernelParams defaults();

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(lengthscales.size()); }
  void validate() const;
};

struct Observation {
  Vector theta;
  double value = 0.0;
};

/// Conditioning data since the last reset, in insertion order.
struct Dataset {
  std::vector<Observation> points;

  void add(Vector theta, double value) { points.push_back({std::move(theta), value}); }
  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  Matrix inputs() const;
  Vector values() const;
};

/// Per-query posterior. `lower`/`upper` stay empty until confidence_bounds() is applied.
struct Posterior {
  Vector mean;
  Vector std_dev;
  Vector lower;
  Vector upper;

  std::size_t size() const noexcept { return static_cast<std::size_t>(mean.size()); }
  bool has_bounds() const noexcept { return lower.size() == mean.size() && mean.size() > 0; }
};

double kernel_eval(const KernelParams& params, const Eigen::Ref<const Vector>& a,
                   const Eigen::Ref<const Vector>& b);

/// Cross-covariance between the rows of `a` and the rows of `b`.
Matrix kernel_matrix(const KernelParams& params, const Matrix& a, const Matrix& b);

/// Cholesky of `gram` + jitter I, escalating the jitter from 1e-10 to 1e-4 times `variance`.
/// Returns the jitter used; throws NumericalError when every level fails.
double factorize_with_jitter(const Matrix& gram, double variance, Eigen::LLT<Matrix>& llt,
                             const std::string& context);

/// Factorized GP conditioned on a dataset.
///
/// The Gram matrix K + sigma_n^2 I is Cholesky-factorized with a diagonal jitter that
/// starts at 1e-10 sigma_0^2 and grows tenfold per failure up to 1e-4 sigma_0^2.
class GpModel {
 public:
  GpModel(KernelParams params, const Dataset& data);

  Posterior predict(const Matrix& queries) const;

  /// L^{-1} k(X, queries): one column per query. Used for cheap rank-one updates.
  Matrix whitened_cross_covariance(const Matrix& queries) const;

  const KernelParams& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(inputs_.rows()); }
  double jitter() const noexcept { return jitter_; }

 private:
  KernelParams params_;
  Matrix inputs_;
  Eigen::LLT<Matrix> llt_;
  Vector whitened_residuals_;
  double jitter_ = 0.0;
};

Posterior posterior(const KernelParams& params, const Dataset& data, const Matrix& queries);

/// Fills lower = mean - beta std, upper = mean + beta std.
Posterior confidence_bounds(Posterior post, double beta);

}  // namespace etso
