#pragma once

#include "etso/change_trigger.hpp"
#include "etso/kernel_gp.hpp"
#include "etso/safe_sets.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace etso {

enum class PolicyKind {
  Etso,             // SafeOpt with the event trigger and reset-to-backup
  SafeOptBudget,    // learn for T_L rounds, then exploit; no trigger
  SafeOptInfinite,  // learn forever; no trigger
  BackupOnly,       // always query the backup controller
};

std::string_view to_string(PolicyKind policy);
PolicyKind parse_policy(std::string_view name);

/// Exploration weight schedule. Logarithmic grows as sqrt(beta^2 + 2 ln t').
struct BetaSchedule {
  enum class Kind { Constant, Logarithmic };
  Kind kind = Kind::Constant;
  double base = 2.0;

  double at(int t_prime) const;
};

struct EtsoConfig {
  Vector backup_controller = Vector{{0.4, 1.25, 0.05, 0.05}};
  int learn_rounds = 15;
  BetaSchedule beta;
  double epsilon = 0.2;
  TriggerConfig trigger;
  /// prior_std_dev is derived at initialization; the value stored here is ignored.
  KernelParams kernel = KernelParams::defaults();
  GridDomain grid;
  bool recompute_safe_set_in_exploit = false;
  /// Replaces the ceil(|J_B|) normalization divisor when set.
  std::optional<double> fixed_scale;
  /// Raw critical cost J_crit. Crashes are reported at this value.
  std::optional<double> critical_cost;

  void validate() const;
};

enum class Phase { Learning, Exploiting };

struct PendingReset {
  Vector theta;
  double raw_cost = 0.0;
};

struct EtsoState {
  Dataset dataset;  // normalized costs
  int t = 0;
  int t_prime = 1;
  double j_min_t = 0.0;  // normalized
  double scale = 1.0;
  double prior_std_dev = 1.0 / 3.0;
  Phase phase = Phase::Learning;
  std::optional<std::size_t> last_query;
  bool awaiting_observation = false;
  std::optional<PendingReset> pending_reset_observation;
  Mask frozen_safe;  // safe set computed at t' = T_L, used while exploiting
};

/// Details of the most recent next_query() call, for auditing.
struct Selection {
  std::size_t index = 0;
  Vector theta;
  bool exploring = false;
  bool backup = false;
  bool fallback = false;           // G union M was empty, exploited S instead
  bool safe_set_collapse = false;  // S was empty, returned the backup
  bool in_safe_set = false;        // member of the mask the selection was drawn from
  double lower = 0.0;
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t safe_set_size = 0;
};

struct StepEvents {
  bool reset_requested = false;
  bool crash = false;
  double psi = 0.0;
  double kappa = 0.0;
};

/// ceil(|raw_backup_cost|), floored at 1.
double normalization_scale(double raw_backup_cost);

/// J_min,t = mu_0 - beta sigma_n - epsilon (normalized units).
double safety_threshold(double prior_mean, double beta, double noise_std_dev, double epsilon);

/// sigma_0 = max((mu_0 - J_min,t + epsilon) / beta, 1/3).
double prior_std_dev_for(double prior_mean, double j_min, double beta, double epsilon);

/// (J_B,initial - J_current) / J_B,initial: zero at backup level, positive when better.
double normalized_performance(double j_backup_initial, double j_current);

/// Algorithm state machine behind a step interface:
/// next_query() -> theta, observe(cost) -> events, reset_commit(backup_cost).
class EtsoOptimizer {
 public:
  EtsoOptimizer(EtsoConfig config, PolicyKind policy, double raw_backup_cost);

  /// Raw parameter vector (a grid point) to evaluate next.
  Vector next_query();

  /// Feeds the cost of the last query. Non-finite costs count as crashes.
  StepEvents observe(double raw_cost, bool crashed = false);

  /// Completes a reset after the environment re-evaluated the backup controller.
  void reset_commit(double raw_backup_cost_new);

  const EtsoConfig& config() const noexcept { return config_; }
  PolicyKind policy() const noexcept { return policy_; }
  const EtsoState& state() const noexcept { return state_; }
  const Selection& last_selection() const noexcept { return selection_; }
  bool reset_pending() const noexcept { return state_.pending_reset_observation.has_value(); }

  std::size_t backup_index() const noexcept { return backup_index_; }
  /// theta_B snapped to the grid.
  const Vector& backup_point() const noexcept { return backup_theta_; }
  bool backup_snapped() const noexcept { return backup_snapped_; }
  /// Safety threshold in raw cost units.
  double raw_j_min() const noexcept { return state_.j_min_t * state_.scale; }

  /// Posterior over the grid from the most recent next_query(), with confidence bounds.
  const Posterior& grid_posterior() const noexcept { return posterior_; }

  nlohmann::json checkpoint() const;
  static EtsoOptimizer restore(EtsoConfig config, const nlohmann::json& doc);

 private:
  EtsoOptimizer(EtsoConfig config, PolicyKind policy);

  void start_epoch(double raw_backup_cost);
  KernelParams model_params() const;
  void refresh_posterior(double beta);
  void select(std::size_t index, const Mask* from);
  void select_backup();
  double critical_or_throw() const;

  EtsoConfig config_;
  PolicyKind policy_;
  EtsoState state_;
  std::size_t backup_index_ = 0;
  Vector backup_theta_;
  bool backup_snapped_ = false;
  Posterior posterior_;
  bool posterior_current_ = false;
  Selection selection_;
};

}  // namespace etso
