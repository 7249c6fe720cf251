#pragma once

#include "etso/kernel_gp.hpp"
#include "etso/safe_sets.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace etso {

using Vector3 = Eigen::Vector3d;

/// Point mass tracking a reference under a PI position controller.
///
/// Controller parameters are [P_xy, P_z, I_xy, I_z]; `gain_units` maps them to physical gains.
/// Per axis the command is Kp (e + T_d de/dt) + Ki integral(e): the proportional path carries a
/// fixed lead time T_d so damping scales with P and all gains zero means no force at all.
/// The command is scaled by `gain_factor` (C) and clipped per axis at the actuation limit.
/// With unit mass the loop is stable iff Ki < (drag + C T_d Kp) Kp, so lowering C shrinks the
/// stable region from the high-I side.
struct Plant {
  double mass = 1.0;
  double gain_factor = 1.0;
  double drag = 0.2;
  double lead_time_xy = 0.3;
  double lead_time_z = 0.5;
  Eigen::Vector4d gain_units{25.0, 4.0, 200.0, 4.0};
  double actuation_limit = 50.0;
  double time_step = 0.01;
  double crash_bound = 2.0;
  Vector3 start_offset = Vector3::Zero();
  Vector3 wind_bias = Vector3::Zero();
  double gust_amplitude = 0.0;  // horizontal gusts only

  void validate() const;
};

enum class ReferenceShape { FigureEightPlanar, Hourglass, FigureEightAltitude };

const char* to_string(ReferenceShape shape);
ReferenceShape parse_shape(const std::string& name);

/// Closed reference curve traversed once per episode, phase s = 2 pi t / T.
///
///   FigureEightPlanar:   (A sin s, A sin 2s / 2, H)
///   Hourglass:           (w A sin 2s / 2, A sin s, H)
///   FigureEightAltitude: (A sin s, A sin 2s / 2, H + h sin(f s))
struct ReferenceTrajectory {
  ReferenceShape shape = ReferenceShape::FigureEightPlanar;
  double amplitude = 1.0;
  double altitude = 1.0;
  double altitude_amplitude = 0.0;
  int altitude_frequency = 1;
  double waist = 1.0;
  double duration = 10.0;
  std::vector<Vector3> waypoints;  // positions at (q + 1) T / Q

  /// Shape with `waypoint_count` equally spaced waypoints filled in.
  static ReferenceTrajectory make(ReferenceShape shape, std::size_t waypoint_count,
                                  double duration = 10.0, double amplitude = 1.0,
                                  double altitude = 1.0, double altitude_amplitude = 1.0,
                                  int altitude_frequency = 2, double waist = 1.0);

  Vector3 position(double time) const;
  Vector3 velocity(double time) const;
  void fill_waypoints(std::size_t count);
  void validate() const;
};

struct EpisodeResult {
  std::vector<Vector3> trajectory;  // positions at the measurement steps
  bool crashed = false;
};

/// Integrates one episode with explicit fixed-step updates. Deterministic.
/// Positions are sampled `measurements` times at (k + 1) T / K.
EpisodeResult simulate_episode(const Plant& plant, const Vector& theta,
                               const ReferenceTrajectory& reference, std::size_t measurements);

/// -sum_q (min_k |p_k - w_q|)^exponent.
double episode_cost(const std::vector<Vector3>& trajectory, const std::vector<Vector3>& waypoints,
                    double exponent);

struct ModeSpec {
  std::string reference;     // key into EnvironmentConfig::references
  double gain_factor = 1.0;  // plant gain factor C in this mode
};

struct ModeSchedule {
  struct Entry {
    int start_round = 1;
    ModeSpec mode;
  };
  std::vector<Entry> entries;
  int dwell_rounds = 1;

  /// Zero-based index of the mode active at `round` (rounds start at 1).
  std::size_t mode_at(int round) const;
  void validate() const;
};

struct SyntheticChange {
  enum class Kind { Resample, Shift };
  int round = 0;
  Kind kind = Kind::Resample;
  double shift = 0.0;
};

struct EnvironmentConfig {
  enum class Kind { PlantTracking, GpSampleSynthetic };
  Kind kind = Kind::PlantTracking;

  // PlantTracking
  Plant plant;
  std::map<std::string, ReferenceTrajectory> references;
  ModeSchedule schedule;
  std::size_t measurements_per_episode = 10;
  double cost_exponent = 0.5;

  // GpSampleSynthetic (objective values are normalized costs)
  KernelParams synthetic_kernel;
  std::optional<SyntheticChange> change;

  double observation_noise = 0.016;  // normalized units
  double critical_cost = -100.0;     // raw J_crit
  int horizon = 60;
};

/// Frozen draws of a GP over a grid. Row r of `values` is the objective from `starts[r]` on.
struct SyntheticObjective {
  std::vector<int> starts;
  std::vector<Vector> values;

  const Vector& at_round(int round) const;
};

/// Exact multivariate normal draw(s) of GP(mu_0, k) over the grid. Deterministic per seed.
SyntheticObjective sample_synthetic_objective(const KernelParams& kernel, const GridDomain& grid,
                                              std::uint64_t seed,
                                              const std::optional<SyntheticChange>& change);

struct Evaluation {
  double noisy_cost = 0.0;
  bool crashed = false;
  double true_cost = 0.0;
  std::size_t mode = 0;
};

/// Immutable time-varying environment. evaluate() is pure given the RNG stream position.
class Environment {
 public:
  /// `objective_seed` only matters for synthetic environments.
  Environment(EnvironmentConfig config, GridDomain grid, const Vector& backup,
              std::uint64_t objective_seed = 0);

  Evaluation evaluate(int round, const Vector& theta, std::mt19937_64& noise_rng) const;

  /// Noise-free cost and crash flag; for auditing and scenario validation only.
  Evaluation true_cost(int round, const Vector& theta) const;

  std::size_t mode_at(int round) const;
  std::size_t mode_count() const;
  std::optional<int> next_change_after(int round) const;
  double noise_std_raw() const noexcept { return noise_std_raw_; }
  const EnvironmentConfig& config() const noexcept { return config_; }
  const GridDomain& grid() const noexcept { return grid_; }

 private:
  EnvironmentConfig config_;
  GridDomain grid_;
  std::optional<SyntheticObjective> objective_;
  double noise_std_raw_ = 0.0;
};

}  // namespace etso
