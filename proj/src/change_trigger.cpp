#include "etso/change_trigger.hpp"

#include "etso/errors.hpp"

#include <cmath>
#include <numbers>

namespace etso {

void TriggerConfig::validate() const {
  if (!(delta_b > 0.0 && delta_b < 1.0)) throw ConfigError("trigger: delta_b must lie in (0, 1)");
  if (!(noise_std_dev >= 0.0) || !std::isfinite(noise_std_dev)) {
    throw ConfigError("trigger: noise standard deviation must be nonnegative");
  }
}

double pi_series(int t_prime) {
  if (t_prime < 1) throw DomainError("trigger: t' must be at least 1");
  const double t = static_cast<double>(t_prime);
  return std::numbers::pi * std::numbers::pi / 6.0 * t * t;
}

double rho(int t_prime, double delta_b) {
  return 2.0 * std::log(2.0 * pi_series(t_prime) / delta_b);
}

double noise_bound(int t_prime, double delta_b, double sigma_n) {
  return sigma_n * std::sqrt(rho(t_prime, delta_b));
}

double test_statistic(double posterior_mean_at_query, double observation) {
  return std::abs(observation - posterior_mean_at_query);
}

double threshold(const TriggerConfig& cfg, const TriggerState& state, double posterior_std_at_query) {
  const double root_rho = std::sqrt(rho(state.t_prime, cfg.delta_b));
  const double noise = noise_bound(state.t_prime, cfg.delta_b, cfg.noise_std_dev);
  if (cfg.scaling == ThresholdScaling::Scaled) {
    return 0.75 * root_rho * posterior_std_at_query + 0.25 * noise;
  }
  return root_rho * posterior_std_at_query + noise;
}

bool check(double psi, double kappa) { return psi > kappa; }

}  // namespace etso
