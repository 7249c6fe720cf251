#include "etso/safe_sets.hpp"

#include "etso/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace etso {
namespace {

constexpr Eigen::Index kCandidateBlock = 64;

void require_bounds(const Posterior& post) {
  if (!post.has_bounds()) throw DomainError("set computation requires confidence bounds");
}

void require_size(const Mask& mask, const Posterior& post) {
  if (mask.size() != post.size()) throw DomainError("mask size does not match posterior size");
}

}  // namespace

GridDomain::GridDomain(std::vector<double> lower, std::vector<double> upper,
                       std::vector<std::size_t> counts)
    : lower_(std::move(lower)), upper_(std::move(upper)), counts_(std::move(counts)) {
  const std::size_t d = counts_.size();
  if (d == 0 || lower_.size() != d || upper_.size() != d) {
    throw DomainError("grid: bounds and counts must have the same nonzero dimension");
  }
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) {
    if (!(lower_[k] < upper_[k]) || !std::isfinite(lower_[k]) || !std::isfinite(upper_[k])) {
      throw DomainError("grid: lower bound must be below upper bound in dimension " +
                        std::to_string(k));
    }
    if (counts_[k] < 2) throw DomainError("grid: need at least two points per dimension");
    total *= counts_[k];
  }

  strides_.assign(d, 1);
  for (std::size_t k = d - 1; k > 0; --k) strides_[k - 1] = strides_[k] * counts_[k];

  points_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < total; ++i) {
    const auto coords = coordinates(i);
    for (std::size_t k = 0; k < d; ++k) {
      const double step = (upper_[k] - lower_[k]) / static_cast<double>(counts_[k] - 1);
      // Pin the last point exactly to the upper bound.
      points_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          coords[k] + 1 == counts_[k] ? upper_[k] : lower_[k] + step * static_cast<double>(coords[k]);
    }
  }
}

GridDomain GridDomain::uniform(std::size_t dimension, std::size_t points_per_dim, double lower,
                               double upper) {
  return GridDomain(std::vector<double>(dimension, lower), std::vector<double>(dimension, upper),
                    std::vector<std::size_t>(dimension, points_per_dim));
}

std::vector<std::size_t> GridDomain::coordinates(std::size_t index) const {
  std::vector<std::size_t> coords(dimension());
  for (std::size_t k = 0; k < dimension(); ++k) {
    coords[k] = index / strides_[k];
    index %= strides_[k];
  }
  return coords;
}

std::size_t GridDomain::index_of(const std::vector<std::size_t>& coordinates) const {
  if (coordinates.size() != dimension()) throw DomainError("grid: coordinate dimension mismatch");
  std::size_t index = 0;
  for (std::size_t k = 0; k < dimension(); ++k) {
    if (coordinates[k] >= counts_[k]) throw DomainError("grid: coordinate out of range");
    index += coordinates[k] * strides_[k];
  }
  return index;
}

std::vector<std::size_t> GridDomain::neighbors(std::size_t index) const {
  std::vector<std::size_t> out;
  out.reserve(2 * dimension());
  const auto coords = coordinates(index);
  for (std::size_t k = 0; k < dimension(); ++k) {
    if (coords[k] > 0) out.push_back(index - strides_[k]);
    if (coords[k] + 1 < counts_[k]) out.push_back(index + strides_[k]);
  }
  return out;
}

std::size_t GridDomain::nearest(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dimension()) {
    throw DomainError("grid: parameter dimension mismatch");
  }
  // The grid is a product set, so the nearest point is the per-axis nearest coordinate.
  std::vector<std::size_t> coords(dimension());
  for (std::size_t k = 0; k < dimension(); ++k) {
    const double step = (upper_[k] - lower_[k]) / static_cast<double>(counts_[k] - 1);
    const double pos = std::round((theta[static_cast<Eigen::Index>(k)] - lower_[k]) / step);
    coords[k] = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(counts_[k] - 1)));
  }
  return index_of(coords);
}

bool GridDomain::contains(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dimension()) return false;
  for (std::size_t k = 0; k < dimension(); ++k) {
    const double v = theta[static_cast<Eigen::Index>(k)];
    if (!(v >= lower_[k] && v <= upper_[k])) return false;
  }
  return true;
}

std::size_t count(const Mask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

Mask compute_safe_set(const Posterior& post, double j_min) {
  require_bounds(post);
  Mask safe(post.size());
  for (std::size_t i = 0; i < post.size(); ++i) safe[i] = post.lower[static_cast<Eigen::Index>(i)] >= j_min;
  return safe;
}

Mask compute_maximizers(const Posterior& post, const Mask& safe) {
  require_bounds(post);
  require_size(safe, post);
  double best_lower = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < safe.size(); ++i) {
    if (!safe[i]) continue;
    any = true;
    best_lower = std::max(best_lower, post.lower[static_cast<Eigen::Index>(i)]);
  }
  if (!any) throw DomainError("compute_maximizers: safe set is empty");

  Mask maximizers(safe.size());
  for (std::size_t i = 0; i < safe.size(); ++i) {
    maximizers[i] = safe[i] && post.upper[static_cast<Eigen::Index>(i)] >= best_lower;
  }
  return maximizers;
}

Mask compute_expanders(const GpModel& model, const Posterior& post, const Mask& safe,
                       const GridDomain& grid, double j_min, double beta) {
  require_bounds(post);
  require_size(safe, post);
  if (grid.size() != post.size()) throw DomainError("compute_expanders: grid/posterior size mismatch");
  if (count(safe) == 0) throw DomainError("compute_expanders: safe set is empty");

  Mask expanders(safe.size(), false);

  std::vector<Eigen::Index> candidates;
  for (std::size_t i = 0; i < safe.size(); ++i) {
    if (!safe[i]) continue;
    const auto nbrs = grid.neighbors(i);
    if (std::any_of(nbrs.begin(), nbrs.end(), [&](std::size_t n) { return !safe[n]; })) {
      candidates.push_back(static_cast<Eigen::Index>(i));
    }
  }

  // An optimistic observation can lift the mean at x by at most beta sigma(x), so an unsafe point
  // whose upper bound is below the threshold can never be certified.
  std::vector<Eigen::Index> reachable;
  for (std::size_t i = 0; i < safe.size(); ++i) {
    if (!safe[i] && post.upper[static_cast<Eigen::Index>(i)] >= j_min) {
      reachable.push_back(static_cast<Eigen::Index>(i));
    }
  }
  if (candidates.empty() || reachable.empty()) return expanders;

  const Matrix& points = grid.points();
  const Matrix unsafe_points = points(reachable, Eigen::all);
  const Matrix unsafe_whitened = model.whitened_cross_covariance(unsafe_points);
  const double noise_var = model.params().noise_std_dev * model.params().noise_std_dev;
  const double min_innovation = 1e-14 * model.params().prior_std_dev * model.params().prior_std_dev;

  Vector unsafe_mean(static_cast<Eigen::Index>(reachable.size()));
  Vector unsafe_var(static_cast<Eigen::Index>(reachable.size()));
  for (std::size_t r = 0; r < reachable.size(); ++r) {
    unsafe_mean[static_cast<Eigen::Index>(r)] = post.mean[reachable[r]];
    unsafe_var[static_cast<Eigen::Index>(r)] = post.std_dev[reachable[r]] * post.std_dev[reachable[r]];
  }

  const auto n_cand = static_cast<Eigen::Index>(candidates.size());
  for (Eigen::Index start = 0; start < n_cand; start += kCandidateBlock) {
    const Eigen::Index len = std::min(kCandidateBlock, n_cand - start);
    const std::vector<Eigen::Index> block(candidates.begin() + start, candidates.begin() + start + len);
    const Matrix cand_points = points(block, Eigen::all);
    // Posterior covariance between every reachable unsafe point and every candidate.
    Matrix cov = kernel_matrix(model.params(), unsafe_points, cand_points);
    cov.noalias() -= unsafe_whitened.transpose() * model.whitened_cross_covariance(cand_points);

    for (Eigen::Index j = 0; j < len; ++j) {
      const Eigen::Index c = block[static_cast<std::size_t>(j)];
      const double sd = post.std_dev[c];
      const double innovation = sd * sd + noise_var;
      if (innovation <= min_innovation) continue;
      const double gain = (post.upper[c] - post.mean[c]) / innovation;
      for (Eigen::Index r = 0; r < cov.rows(); ++r) {
        const double k = cov(r, j);
        const double mean = unsafe_mean[r] + k * gain;
        const double var = std::max(unsafe_var[r] - k * k / innovation, 0.0);
        if (mean - beta * std::sqrt(var) >= j_min) {
          expanders[static_cast<std::size_t>(c)] = true;
          break;
        }
      }
    }
  }
  return expanders;
}

Mask compute_expanders(const KernelParams& params, const Dataset& data, const Posterior& post,
                       const Mask& safe, const GridDomain& grid, double j_min, double beta) {
  return compute_expanders(GpModel(params, data), post, safe, grid, j_min, beta);
}

SetMasks compute_sets(const GpModel& model, const Posterior& post, const GridDomain& grid,
                      double j_min, double beta) {
  SetMasks masks;
  masks.safe = compute_safe_set(post, j_min);
  if (count(masks.safe) == 0) {
    masks.maximizers.assign(post.size(), false);
    masks.expanders.assign(post.size(), false);
    return masks;
  }
  masks.maximizers = compute_maximizers(post, masks.safe);
  masks.expanders = compute_expanders(model, post, masks.safe, grid, j_min, beta);
  return masks;
}

std::optional<std::size_t> acquire_explore(const Posterior& post, const SetMasks& masks) {
  require_bounds(post);
  std::optional<std::size_t> best;
  double best_width = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < post.size(); ++i) {
    if (!(masks.maximizers[i] || masks.expanders[i])) continue;
    const double width = post.upper[static_cast<Eigen::Index>(i)] - post.lower[static_cast<Eigen::Index>(i)];
    if (!best || width > best_width) {
      best = i;
      best_width = width;
    }
  }
  return best;
}

std::optional<std::size_t> acquire_exploit(const Posterior& post, const Mask& safe) {
  require_size(safe, post);
  std::optional<std::size_t> best;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < post.size(); ++i) {
    if (!safe[i]) continue;
    const double mean = post.mean[static_cast<Eigen::Index>(i)];
    if (!best || mean > best_mean) {
      best = i;
      best_mean = mean;
    }
  }
  return best;
}

}  // namespace etso
