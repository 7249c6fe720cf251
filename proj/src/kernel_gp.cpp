#include "etso/kernel_gp.hpp"

#include "etso/errors.hpp"

#include <cmath>
#include <string>

namespace etso {
namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873128;
constexpr double kInitialJitter = 1e-10;
constexpr double kMaxJitter = 1e-4;

double matern52(double variance, double r) {
  const double s = kSqrt5 * r;
  return variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

void check_dimension(const KernelParams& params, Eigen::Index dim) {
  if (dim != params.lengthscales.size()) {
    throw DomainError("kernel: point dimension " + std::to_string(dim) +
                      " does not match lengthscale dimension " +
                      std::to_string(params.lengthscales.size()));
  }
}

Matrix scaled_rows(const KernelParams& params, const Matrix& points) {
  check_dimension(params, points.cols());
  return points * params.lengthscales.cwiseInverse().asDiagonal();
}

}  // namespace

KernelParams KernelParams::defaults() {
  KernelParams params;
  params.lengthscales = Vector{{0.15, 0.75, 0.025, 0.050}};
  return params;
}

void KernelParams::validate() const {
  if (lengthscales.size() == 0) throw DomainError("kernel: no lengthscales");
  if ((lengthscales.array() <= 0.0).any() || !lengthscales.allFinite()) {
    throw DomainError("kernel: lengthscales must be positive");
  }
  if (!(prior_std_dev > 0.0) || !std::isfinite(prior_std_dev)) {
    throw DomainError("kernel: prior standard deviation must be positive");
  }
  if (!(noise_std_dev >= 0.0) || !std::isfinite(noise_std_dev)) {
    throw DomainError("kernel: noise standard deviation must be nonnegative");
  }
  if (!std::isfinite(prior_mean)) throw DomainError("kernel: prior mean must be finite");
}

Matrix Dataset::inputs() const {
  if (points.empty()) return {};
  Matrix out(static_cast<Eigen::Index>(points.size()), points.front().theta.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points[i].theta.transpose();
  }
  return out;
}

Vector Dataset::values() const {
  Vector out(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) out[static_cast<Eigen::Index>(i)] = points[i].value;
  return out;
}

double kernel_eval(const KernelParams& params, const Eigen::Ref<const Vector>& a,
                   const Eigen::Ref<const Vector>& b) {
  check_dimension(params, a.size());
  check_dimension(params, b.size());
  const double r = ((a - b).array() / params.lengthscales.array()).matrix().norm();
  return matern52(params.prior_std_dev * params.prior_std_dev, r);
}

Matrix kernel_matrix(const KernelParams& params, const Matrix& a, const Matrix& b) {
  // Column-per-point copies keep the inner loop contiguous.
  const Matrix sa = scaled_rows(params, a).transpose();
  const Matrix sb = scaled_rows(params, b).transpose();
  const double variance = params.prior_std_dev * params.prior_std_dev;
  Matrix out(sa.cols(), sb.cols());
  for (Eigen::Index j = 0; j < sb.cols(); ++j) {
    for (Eigen::Index i = 0; i < sa.cols(); ++i) {
      out(i, j) = matern52(variance, (sa.col(i) - sb.col(j)).norm());
    }
  }
  return out;
}

double factorize_with_jitter(const Matrix& gram, double variance, Eigen::LLT<Matrix>& llt,
                             const std::string& context) {
  double jitter = kInitialJitter * variance;
  while (true) {
    Matrix stabilized = gram;
    stabilized.diagonal().array() += jitter;
    llt.compute(stabilized);
    if (llt.info() == Eigen::Success) return jitter;
    jitter *= 10.0;
    if (jitter > kMaxJitter * variance * (1.0 + 1e-9)) {
      const auto n = static_cast<std::size_t>(gram.rows());
      throw NumericalError(context + ": factorization failed for a " + std::to_string(n) + "x" +
                               std::to_string(n) + " covariance at jitter " +
                               std::to_string(jitter / 10.0),
                           n, jitter / 10.0);
    }
  }
}

GpModel::GpModel(KernelParams params, const Dataset& data) : params_(std::move(params)) {
  params_.validate();
  if (data.empty()) throw DomainError("posterior: dataset is empty");
  inputs_ = data.inputs();
  check_dimension(params_, inputs_.cols());

  const double variance = params_.prior_std_dev * params_.prior_std_dev;
  Matrix gram = kernel_matrix(params_, inputs_, inputs_);
  gram.diagonal().array() += params_.noise_std_dev * params_.noise_std_dev;

  jitter_ = factorize_with_jitter(gram, variance, llt_, "posterior");

  Vector residuals = data.values().array() - params_.prior_mean;
  whitened_residuals_ = llt_.matrixL().solve(residuals);
}

Matrix GpModel::whitened_cross_covariance(const Matrix& queries) const {
  Matrix cross = kernel_matrix(params_, inputs_, queries);
  llt_.matrixL().solveInPlace(cross);
  return cross;
}

Posterior GpModel::predict(const Matrix& queries) const {
  if (queries.rows() == 0) throw DomainError("posterior: query list is empty");
  const Matrix whitened = whitened_cross_covariance(queries);
  const double variance = params_.prior_std_dev * params_.prior_std_dev;

  Posterior post;
  post.mean = (whitened.transpose() * whitened_residuals_).array() + params_.prior_mean;
  post.std_dev =
      (variance - whitened.colwise().squaredNorm().array()).max(0.0).sqrt().matrix().transpose();
  return post;
}

Posterior posterior(const KernelParams& params, const Dataset& data, const Matrix& queries) {
  return GpModel(params, data).predict(queries);
}

Posterior confidence_bounds(Posterior post, double beta) {
  if (!(beta > 0.0)) throw DomainError("confidence_bounds: beta must be positive");
  post.lower = post.mean - beta * post.std_dev;
  post.upper = post.mean + beta * post.std_dev;
  return post;
}

}  // namespace etso
