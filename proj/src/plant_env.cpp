#include "etso/plant_env.hpp"

#include "etso/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace etso {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Fixed gust spectrum: sum of sinusoids with incommensurate frequencies, one phase
// offset per horizontal axis so x and y gusts are decorrelated.
constexpr std::array<double, 8> kGustFrequency{0.7, 1.3, 2.1, 2.9, 3.7, 4.6, 5.5, 6.5};
constexpr std::array<double, 8> kGustPhase{0.3, 1.9, 4.1, 2.2, 5.0, 0.8, 3.3, 1.1};
constexpr std::array<double, 2> kGustAxisPhase{0.0, 1.7};

Vector3 wind(const Plant& plant, double time) {
  Vector3 w = plant.wind_bias;
  if (plant.gust_amplitude == 0.0) return w;
  const double norm = plant.gust_amplitude / std::sqrt(static_cast<double>(kGustFrequency.size()));
  for (int axis = 0; axis < 2; ++axis) {
    double s = 0.0;
    for (std::size_t j = 0; j < kGustFrequency.size(); ++j) {
      s += std::sin(kGustFrequency[j] * time + kGustPhase[j] + kGustAxisPhase[axis]);
    }
    w[axis] += norm * s;
  }
  return w;
}

struct State {
  Vector3 position;
  Vector3 velocity;
  Vector3 integral;  // integral of the position error
};

struct Gains {
  Vector3 kp;
  Vector3 ki;
  Vector3 lead;
};

State derivative(const Plant& plant, const Gains& g, const ReferenceTrajectory& ref, double time,
                 const State& s) {
  const Vector3 error = ref.position(time) - s.position;
  const Vector3 error_rate = ref.velocity(time) - s.velocity;
  Vector3 force = plant.gain_factor * (g.kp.cwiseProduct(error + g.lead.cwiseProduct(error_rate)) +
                                       g.ki.cwiseProduct(s.integral));
  force = force.cwiseMax(-plant.actuation_limit).cwiseMin(plant.actuation_limit);
  const Vector3 accel = (force - plant.drag * s.velocity + wind(plant, time)) / plant.mass;
  return {s.velocity, accel, error};
}

State axpy(const State& s, double h, const State& d) {
  return {s.position + h * d.position, s.velocity + h * d.velocity, s.integral + h * d.integral};
}

bool finite(const State& s) {
  return s.position.allFinite() && s.velocity.allFinite() && s.integral.allFinite();
}

void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) throw ConfigError(std::string(name) + " must be finite");
}

}  // namespace

void Plant::validate() const {
  require_finite(mass, "plant.mass");
  require_finite(time_step, "plant.time_step");
  require_finite(gain_factor, "plant.gain_factor");
  if (mass <= 0.0) throw ConfigError("plant.mass must be positive");
  if (time_step <= 0.0) throw ConfigError("plant.time_step must be positive");
  if (gain_factor <= 0.0) throw ConfigError("plant.gain_factor must be positive");
  if (!(actuation_limit > 0.0)) throw ConfigError("plant.actuation_limit must be positive");
  if (!(crash_bound > 0.0)) throw ConfigError("plant.crash_bound must be positive");
  if (!(drag >= 0.0)) throw ConfigError("plant.drag must be non-negative");
  if (!(lead_time_xy >= 0.0) || !(lead_time_z >= 0.0)) {
    throw ConfigError("plant lead times must be non-negative");
  }
  if (!gain_units.allFinite() || (gain_units.array() <= 0.0).any()) {
    throw ConfigError("plant.gain_units must be positive");
  }
  if (!start_offset.allFinite() || !wind_bias.allFinite() || !std::isfinite(gust_amplitude)) {
    throw ConfigError("plant disturbance terms must be finite");
  }
}

const char* to_string(ReferenceShape shape) {
  switch (shape) {
    case ReferenceShape::FigureEightPlanar: return "figure-eight-planar";
    case ReferenceShape::Hourglass: return "hourglass";
    case ReferenceShape::FigureEightAltitude: return "figure-eight-altitude";
  }
  return "unknown";
}

ReferenceShape parse_shape(const std::string& name) {
  if (name == "figure-eight-planar") return ReferenceShape::FigureEightPlanar;
  if (name == "hourglass") return ReferenceShape::Hourglass;
  if (name == "figure-eight-altitude") return ReferenceShape::FigureEightAltitude;
  throw ConfigError("unknown reference shape '" + name + "'");
}

ReferenceTrajectory ReferenceTrajectory::make(ReferenceShape shape, std::size_t waypoint_count,
                                              double duration, double amplitude, double altitude,
                                              double altitude_amplitude, int altitude_frequency,
                                              double waist) {
  ReferenceTrajectory ref;
  ref.shape = shape;
  ref.duration = duration;
  ref.amplitude = amplitude;
  ref.altitude = altitude;
  ref.altitude_amplitude = shape == ReferenceShape::FigureEightAltitude ? altitude_amplitude : 0.0;
  ref.altitude_frequency = altitude_frequency;
  ref.waist = waist;
  ref.fill_waypoints(waypoint_count);
  return ref;
}

Vector3 ReferenceTrajectory::position(double time) const {
  const double s = kTwoPi * time / duration;
  const double a = amplitude * std::sin(s);
  const double b = 0.5 * amplitude * std::sin(2.0 * s);
  switch (shape) {
    case ReferenceShape::FigureEightPlanar: return {a, b, altitude};
    case ReferenceShape::Hourglass: return {waist * b, a, altitude};
    case ReferenceShape::FigureEightAltitude:
      return {a, b, altitude + altitude_amplitude * std::sin(altitude_frequency * s)};
  }
  return Vector3::Zero();
}

Vector3 ReferenceTrajectory::velocity(double time) const {
  const double rate = kTwoPi / duration;
  const double s = rate * time;
  const double a = rate * amplitude * std::cos(s);
  const double b = rate * amplitude * std::cos(2.0 * s);
  switch (shape) {
    case ReferenceShape::FigureEightPlanar: return {a, b, 0.0};
    case ReferenceShape::Hourglass: return {waist * b, a, 0.0};
    case ReferenceShape::FigureEightAltitude:
      return {a, b,
              rate * altitude_frequency * altitude_amplitude * std::cos(altitude_frequency * s)};
  }
  return Vector3::Zero();
}

void ReferenceTrajectory::fill_waypoints(std::size_t count) {
  waypoints.clear();
  waypoints.reserve(count);
  for (std::size_t q = 0; q < count; ++q) {
    waypoints.push_back(position(duration * static_cast<double>(q + 1) / static_cast<double>(count)));
  }
}

void ReferenceTrajectory::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) {
    throw ConfigError("reference duration must be positive");
  }
  if (waypoints.size() < 2) throw ConfigError("reference needs at least 2 waypoints");
  for (const auto& w : waypoints) {
    if (!w.allFinite()) throw ConfigError("reference waypoints must be finite");
  }
  if (altitude_frequency < 0) throw ConfigError("altitude_frequency must be non-negative");
}

EpisodeResult simulate_episode(const Plant& plant, const Vector& theta,
                               const ReferenceTrajectory& reference, std::size_t measurements) {
  plant.validate();
  if (theta.size() != 4) throw DomainError("simulate_episode: theta must have 4 gains");
  if (!theta.allFinite() || (theta.array() < 0.0).any()) {
    throw DomainError("simulate_episode: gains must be finite and non-negative");
  }
  if (measurements == 0) throw DomainError("simulate_episode: need at least one measurement");

  const Gains g{{plant.gain_units[0] * theta[0], plant.gain_units[0] * theta[0],
                 plant.gain_units[1] * theta[1]},
                {plant.gain_units[2] * theta[2], plant.gain_units[2] * theta[2],
                 plant.gain_units[3] * theta[3]},
                {plant.lead_time_xy, plant.lead_time_xy, plant.lead_time_z}};

  const auto steps =
      static_cast<std::size_t>(std::llround(reference.duration / plant.time_step));
  if (steps == 0) throw DomainError("simulate_episode: episode shorter than one time step");
  const double h = reference.duration / static_cast<double>(steps);

  std::vector<std::size_t> sample_steps(measurements);
  for (std::size_t k = 0; k < measurements; ++k) {
    sample_steps[k] = static_cast<std::size_t>(
        std::llround(static_cast<double>((k + 1) * steps) / static_cast<double>(measurements)));
  }

  EpisodeResult out;
  out.trajectory.reserve(measurements);
  State s{reference.position(0.0) + plant.start_offset, Vector3::Zero(), Vector3::Zero()};
  std::size_t next_sample = 0;

  for (std::size_t step = 1; step <= steps; ++step) {
    const double t = h * static_cast<double>(step - 1);
    const State k1 = derivative(plant, g, reference, t, s);
    const State k2 = derivative(plant, g, reference, t + 0.5 * h, axpy(s, 0.5 * h, k1));
    const State k3 = derivative(plant, g, reference, t + 0.5 * h, axpy(s, 0.5 * h, k2));
    const State k4 = derivative(plant, g, reference, t + h, axpy(s, h, k3));
    s.position += h / 6.0 * (k1.position + 2.0 * k2.position + 2.0 * k3.position + k4.position);
    s.velocity += h / 6.0 * (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity);
    s.integral += h / 6.0 * (k1.integral + 2.0 * k2.integral + 2.0 * k3.integral + k4.integral);

    if (!finite(s) ||
        (reference.position(h * static_cast<double>(step)) - s.position).norm() > plant.crash_bound) {
      out.crashed = true;
    }
    while (next_sample < measurements && sample_steps[next_sample] == step) {
      out.trajectory.push_back(s.position);
      ++next_sample;
    }
    if (out.crashed) break;
  }
  // A crashed episode keeps flying at its last state for the remaining samples.
  while (out.trajectory.size() < measurements) out.trajectory.push_back(s.position);
  return out;
}

double episode_cost(const std::vector<Vector3>& trajectory, const std::vector<Vector3>& waypoints,
                    double exponent) {
  if (trajectory.empty() || waypoints.empty()) {
    throw DomainError("episode_cost: trajectory and waypoints must be nonempty");
  }
  double cost = 0.0;
  for (const auto& w : waypoints) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : trajectory) best = std::min(best, (p - w).norm());
    cost -= std::pow(best, exponent);
  }
  return cost;
}

std::size_t ModeSchedule::mode_at(int round) const {
  if (entries.empty()) throw ConfigError("mode schedule is empty");
  std::size_t mode = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].start_round <= round) mode = i;
  }
  return mode;
}

void ModeSchedule::validate() const {
  if (entries.empty()) throw ConfigError("mode schedule needs at least one mode");
  if (entries.front().start_round != 1) throw ConfigError("first mode must start at round 1");
  if (dwell_rounds < 1) throw ConfigError("dwell_rounds must be at least 1");
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].start_round - entries[i - 1].start_round < dwell_rounds) {
      throw ConfigError("mode " + std::to_string(i) + " starts before the dwell time elapsed");
    }
  }
  for (const auto& e : entries) {
    if (!(e.mode.gain_factor > 0.0)) throw ConfigError("mode gain_factor must be positive");
  }
}

const Vector& SyntheticObjective::at_round(int round) const {
  std::size_t idx = 0;
  for (std::size_t i = 1; i < starts.size(); ++i) {
    if (starts[i] <= round) idx = i;
  }
  return values.at(idx);
}

SyntheticObjective sample_synthetic_objective(const KernelParams& kernel, const GridDomain& grid,
                                              std::uint64_t seed,
                                              const std::optional<SyntheticChange>& change) {
  kernel.validate();
  if (grid.size() == 0 || grid.size() > 5000) {
    throw DomainError("sample_synthetic_objective: grid must hold 1..5000 points");
  }
  if (grid.dimension() != kernel.dimension()) {
    throw DomainError("sample_synthetic_objective: grid and kernel dimensions differ");
  }
  const double variance = kernel.prior_std_dev * kernel.prior_std_dev;
  const Matrix cov = kernel_matrix(kernel, grid.points(), grid.points());
  Eigen::LLT<Matrix> llt;
  factorize_with_jitter(cov, variance, llt, "sample_synthetic_objective");
  const Matrix lower = llt.matrixL();

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    0x5eedu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    Vector z(static_cast<Eigen::Index>(grid.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    Vector f = lower * z;
    f.array() += kernel.prior_mean;
    return f;
  };

  SyntheticObjective out;
  out.starts.push_back(1);
  out.values.push_back(draw());
  if (change) {
    if (change->round < 2) throw ConfigError("synthetic change round must be at least 2");
    out.starts.push_back(change->round);
    if (change->kind == SyntheticChange::Kind::Resample) {
      out.values.push_back(draw());
    } else {
      out.values.push_back(out.values.front().array() + change->shift);
    }
  }
  return out;
}

Environment::Environment(EnvironmentConfig config, GridDomain grid, const Vector& backup,
                         std::uint64_t objective_seed)
    : config_(std::move(config)), grid_(std::move(grid)) {
  if (!(config_.observation_noise >= 0.0) || !std::isfinite(config_.observation_noise)) {
    throw ConfigError("observation noise must be a non-negative number");
  }
  if (!std::isfinite(config_.critical_cost)) throw ConfigError("critical cost must be finite");
  if (config_.horizon < 1) throw ConfigError("environment horizon must be at least 1");

  double scale = 1.0;
  if (config_.kind == EnvironmentConfig::Kind::PlantTracking) {
    config_.plant.validate();
    config_.schedule.validate();
    if (config_.measurements_per_episode == 0) {
      throw ConfigError("measurements_per_episode must be positive");
    }
    if (config_.cost_exponent != 0.5 && config_.cost_exponent != 0.25) {
      throw ConfigError("cost exponent must be 1/2 or 1/4");
    }
    for (auto& [name, ref] : config_.references) ref.validate();
    for (const auto& e : config_.schedule.entries) {
      if (!config_.references.count(e.mode.reference)) {
        throw ConfigError("mode references unknown trajectory '" + e.mode.reference + "'");
      }
    }
    const Evaluation backup_eval = true_cost(1, backup);
    scale = std::max(std::ceil(std::abs(backup_eval.true_cost)), 1.0);
  } else {
    if (config_.change && config_.change->round > config_.horizon) {
      throw ConfigError("synthetic change round lies beyond the horizon");
    }
    objective_ = sample_synthetic_objective(config_.synthetic_kernel, grid_, objective_seed,
                                            config_.change);
  }
  noise_std_raw_ = config_.observation_noise * scale;
}

std::size_t Environment::mode_at(int round) const {
  if (config_.kind == EnvironmentConfig::Kind::PlantTracking) {
    return config_.schedule.mode_at(std::max(round, 1));
  }
  return config_.change && round >= config_.change->round ? 1 : 0;
}

std::size_t Environment::mode_count() const {
  if (config_.kind == EnvironmentConfig::Kind::PlantTracking) {
    return config_.schedule.entries.size();
  }
  return config_.change ? 2 : 1;
}

std::optional<int> Environment::next_change_after(int round) const {
  if (config_.kind == EnvironmentConfig::Kind::PlantTracking) {
    for (const auto& e : config_.schedule.entries) {
      if (e.start_round > round) return e.start_round;
    }
    return std::nullopt;
  }
  if (config_.change && config_.change->round > round) return config_.change->round;
  return std::nullopt;
}

Evaluation Environment::true_cost(int round, const Vector& theta) const {
  if (round < 0) throw DomainError("evaluate: round must be non-negative");
  if (round > config_.horizon) {
    throw DomainError("evaluate: round " + std::to_string(round) + " exceeds the horizon " +
                      std::to_string(config_.horizon));
  }
  Evaluation out;
  out.mode = mode_at(round);
  if (config_.kind == EnvironmentConfig::Kind::PlantTracking) {
    const ModeSpec& mode = config_.schedule.entries[out.mode].mode;
    Plant plant = config_.plant;
    plant.gain_factor = mode.gain_factor;
    const ReferenceTrajectory& ref = config_.references.at(mode.reference);
    const EpisodeResult ep =
        simulate_episode(plant, theta, ref, config_.measurements_per_episode);
    out.crashed = ep.crashed;
    out.true_cost = ep.crashed ? config_.critical_cost
                               : episode_cost(ep.trajectory, ref.waypoints, config_.cost_exponent);
  } else {
    const Vector& table = objective_->at_round(std::max(round, 1));
    out.true_cost = table[static_cast<Eigen::Index>(grid_.nearest(theta))];
  }
  return out;
}

Evaluation Environment::evaluate(int round, const Vector& theta, std::mt19937_64& noise_rng) const {
  Evaluation out = true_cost(round, theta);
  // Always consume exactly one draw so the stream position does not depend on crashes.
  std::normal_distribution<double> normal(0.0, 1.0);
  const double w = normal(noise_rng);
  out.noisy_cost = out.crashed ? config_.critical_cost : out.true_cost + noise_std_raw_ * w;
  return out;
}

}  // namespace etso
