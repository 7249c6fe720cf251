#pragma once

namespace etso {

/// Weights of the threshold: Scaled uses 3/4 and 1/4, Unscaled uses 1 and 1.
enum class ThresholdScaling { Scaled, Unscaled };

struct TriggerConfig {
  double delta_b = 0.1;
  double noise_std_dev = 0.016;
  ThresholdScaling scaling = ThresholdScaling::Scaled;

  void validate() const;
};

struct TriggerState {
  int t_prime = 1;  // rounds since the last reset
};

/// pi_{t'} = (pi^2 / 6) t'^2, so that the reciprocals sum to one.
double pi_series(int t_prime);

/// rho_{t'} = 2 ln(2 pi_{t'} / delta_B).
double rho(int t_prime, double delta_b);

/// Noise allowance w_{t'} = sigma_n sqrt(rho_{t'}).
double noise_bound(int t_prime, double delta_b, double sigma_n);

/// |observation - mean|, both on the pre-update posterior and in normalized units.
double test_statistic(double posterior_mean_at_query, double observation);

double threshold(const TriggerConfig& cfg, const TriggerState& state, double posterior_std_at_query);

/// Reset iff psi strictly exceeds kappa.
bool check(double psi, double kappa);

}  // namespace etso
