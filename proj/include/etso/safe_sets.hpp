#pragma once

#include "etso/kernel_gp.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace etso {

using Mask = std::vector<bool>;

/// Cartesian grid over the parameter box, indexed in row-major order
/// (the last dimension varies fastest).
class GridDomain {
 public:
  GridDomain() = default;
  GridDomain(std::vector<double> lower, std::vector<double> upper, std::vector<std::size_t> counts);

  /// Box [0, 10]^dimension with `points_per_dim` points per axis.
  static GridDomain uniform(std::size_t dimension, std::size_t points_per_dim, double lower = 0.0,
                            double upper = 10.0);

  std::size_t dimension() const noexcept { return counts_.size(); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }
  const std::vector<std::size_t>& counts() const noexcept { return counts_; }

  const Matrix& points() const noexcept { return points_; }
  Vector point(std::size_t index) const { return points_.row(static_cast<Eigen::Index>(index)).transpose(); }

  std::vector<std::size_t> coordinates(std::size_t index) const;
  std::size_t index_of(const std::vector<std::size_t>& coordinates) const;

  /// Indices that differ by one step along exactly one axis.
  std::vector<std::size_t> neighbors(std::size_t index) const;

  /// Nearest grid point under the range-normalized Euclidean distance.
  std::size_t nearest(const Vector& theta) const;

  bool contains(const Vector& theta) const;

 private:
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> strides_;
  Matrix points_;
};

struct SetMasks {
  Mask safe;
  Mask maximizers;
  Mask expanders;
};

std::size_t count(const Mask& mask);

/// S_t: points whose lower confidence bound reaches the safety threshold.
Mask compute_safe_set(const Posterior& post, double j_min);

/// M_t: safe points whose upper bound reaches the best safe lower bound.
Mask compute_maximizers(const Posterior& post, const Mask& safe);

/// G_t: safe points whose optimistic hypothetical observation would certify at least one
/// currently unsafe point. Only safe points with an axis-adjacent unsafe neighbour are
/// evaluated. The hypothetical observation carries the model noise and is folded in with an
/// exact rank-one posterior update.
Mask compute_expanders(const GpModel& model, const Posterior& post, const Mask& safe,
                       const GridDomain& grid, double j_min, double beta);

Mask compute_expanders(const KernelParams& params, const Dataset& data, const Posterior& post,
                       const Mask& safe, const GridDomain& grid, double j_min, double beta);

/// All three masks for one round.
SetMasks compute_sets(const GpModel& model, const Posterior& post, const GridDomain& grid,
                      double j_min, double beta);

/// argmax of u - l over G_t union M_t; lowest index wins ties. Empty union gives nullopt.
std::optional<std::size_t> acquire_explore(const Posterior& post, const SetMasks& masks);

/// argmax of the posterior mean over the safe set; lowest index wins ties.
std::optional<std::size_t> acquire_exploit(const Posterior& post, const Mask& safe);

}  // namespace etso
