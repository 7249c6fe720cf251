#include "etso/optimizer.hpp"

#include "etso/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace etso {
namespace {

using nlohmann::json;

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string_view to_string(PolicyKind policy) {
  switch (policy) {
    case PolicyKind::Etso: return "etso";
    case PolicyKind::SafeOptBudget: return "safeopt";
    case PolicyKind::SafeOptInfinite: return "safeopt-inf";
    case PolicyKind::BackupOnly: return "backup";
  }
  return "unknown";
}

PolicyKind parse_policy(std::string_view name) {
  if (name == "etso") return PolicyKind::Etso;
  if (name == "safeopt" || name == "safeopt-budget") return PolicyKind::SafeOptBudget;
  if (name == "safeopt-inf" || name == "safeopt-infinite") return PolicyKind::SafeOptInfinite;
  if (name == "backup" || name == "backup-only") return PolicyKind::BackupOnly;
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

double BetaSchedule::at(int t_prime) const {
  if (kind == Kind::Constant) return base;
  return std::sqrt(base * base + 2.0 * std::log(static_cast<double>(std::max(t_prime, 1))));
}

void EtsoConfig::validate() const {
  if (learn_rounds <= 1) throw ConfigError("learn_rounds must exceed 1");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(beta.base > 0.0)) throw ConfigError("beta must be positive");
  trigger.validate();
  KernelParams k = kernel;
  k.validate();
  if (grid.size() == 0) throw ConfigError("grid is empty");
  if (grid.dimension() != kernel.dimension()) {
    throw ConfigError("grid dimension does not match kernel lengthscales");
  }
  if (static_cast<std::size_t>(backup_controller.size()) != grid.dimension()) {
    throw ConfigError("backup controller dimension does not match grid");
  }
  if (!grid.contains(backup_controller)) throw ConfigError("backup controller lies outside the grid box");
  if (fixed_scale && !(*fixed_scale > 0.0)) throw ConfigError("fixed_scale must be positive");
}

double normalization_scale(double raw_backup_cost) {
  if (!std::isfinite(raw_backup_cost)) throw DomainError("normalization: backup cost is not finite");
  return std::max(std::ceil(std::abs(raw_backup_cost)), 1.0);
}

double safety_threshold(double prior_mean, double beta, double noise_std_dev, double epsilon) {
  return prior_mean - beta * noise_std_dev - epsilon;
}

double prior_std_dev_for(double prior_mean, double j_min, double beta, double epsilon) {
  return std::max((prior_mean - j_min + epsilon) / beta, 1.0 / 3.0);
}

double normalized_performance(double j_backup_initial, double j_current) {
  if (j_backup_initial == 0.0) throw DomainError("normalized_performance: initial backup cost is zero");
  const double p = (j_backup_initial - j_current) / j_backup_initial;
  return p == 0.0 ? 0.0 : p;  // no -0.0 in records
}

EtsoOptimizer::EtsoOptimizer(EtsoConfig config, PolicyKind policy)
    : config_(std::move(config)), policy_(policy) {
  config_.validate();
  backup_index_ = config_.grid.nearest(config_.backup_controller);
  backup_theta_ = config_.grid.point(backup_index_);
  backup_snapped_ = (backup_theta_ - config_.backup_controller).norm() > 0.0;

  const double beta = config_.beta.base;
  state_.j_min_t = safety_threshold(config_.kernel.prior_mean, beta, config_.kernel.noise_std_dev,
                                    config_.epsilon);
  state_.prior_std_dev =
      prior_std_dev_for(config_.kernel.prior_mean, state_.j_min_t, beta, config_.epsilon);
}

EtsoOptimizer::EtsoOptimizer(EtsoConfig config, PolicyKind policy, double raw_backup_cost)
    : EtsoOptimizer(std::move(config), policy) {
  start_epoch(raw_backup_cost);
  state_.t_prime = 1;
}

void EtsoOptimizer::start_epoch(double raw_backup_cost) {
  if (!std::isfinite(raw_backup_cost)) throw AssumptionViolation("backup controller cost is not finite");
  if (config_.critical_cost && raw_backup_cost <= *config_.critical_cost) {
    throw AssumptionViolation("backup controller cost " + std::to_string(raw_backup_cost) +
                              " does not clear the critical cost " +
                              std::to_string(*config_.critical_cost));
  }
  state_.scale = config_.fixed_scale ? *config_.fixed_scale : normalization_scale(raw_backup_cost);
  state_.dataset = Dataset{};
  state_.dataset.add(backup_theta_, raw_backup_cost / state_.scale);
  state_.j_min_t = safety_threshold(config_.kernel.prior_mean, config_.beta.base,
                                    config_.kernel.noise_std_dev, config_.epsilon);
  state_.prior_std_dev =
      prior_std_dev_for(config_.kernel.prior_mean, state_.j_min_t, config_.beta.base, config_.epsilon);
  state_.frozen_safe.clear();
  state_.phase = Phase::Learning;
  posterior_current_ = false;
}

KernelParams EtsoOptimizer::model_params() const {
  KernelParams params = config_.kernel;
  params.prior_std_dev = state_.prior_std_dev;
  return params;
}

void EtsoOptimizer::refresh_posterior(double beta) {
  const GpModel model(model_params(), state_.dataset);
  posterior_ = confidence_bounds(model.predict(config_.grid.points()), beta);
  posterior_current_ = true;
}

void EtsoOptimizer::select(std::size_t index, const Mask* from) {
  selection_.index = index;
  selection_.theta = config_.grid.point(index);
  selection_.backup = index == backup_index_;
  selection_.in_safe_set = from != nullptr && (*from)[index];
  if (posterior_current_) {
    const auto i = static_cast<Eigen::Index>(index);
    selection_.lower = posterior_.lower[i];
    selection_.mean = posterior_.mean[i];
    selection_.std_dev = posterior_.std_dev[i];
  }
}

void EtsoOptimizer::select_backup() { select(backup_index_, nullptr); }

Vector EtsoOptimizer::next_query() {
  if (reset_pending()) throw DomainError("next_query: a reset is pending; call reset_commit first");
  if (state_.awaiting_observation) throw DomainError("next_query: previous query not yet observed");

  ++state_.t;
  selection_ = Selection{};

  if (policy_ == PolicyKind::BackupOnly) {
    posterior_current_ = false;
    select_backup();
    selection_.in_safe_set = true;
    state_.phase = Phase::Exploiting;
  } else {
    const double beta = config_.beta.at(state_.t_prime);
    const GpModel model(model_params(), state_.dataset);
    posterior_ = confidence_bounds(model.predict(config_.grid.points()), beta);
    posterior_current_ = true;

    const int learn = config_.learn_rounds;
    const bool forever = policy_ == PolicyKind::SafeOptInfinite;
    const bool exploring = forever || state_.t_prime < learn;

    if (forever || state_.t_prime <= learn) {
      const SetMasks masks = compute_sets(model, posterior_, config_.grid, state_.j_min_t, beta);
      selection_.safe_set_size = count(masks.safe);
      if (!forever && state_.t_prime == learn) state_.frozen_safe = masks.safe;

      std::optional<std::size_t> pick;
      if (exploring) {
        pick = acquire_explore(posterior_, masks);
        if (pick) {
          selection_.exploring = true;
        } else {
          selection_.fallback = true;
        }
      }
      if (!pick) pick = acquire_exploit(posterior_, masks.safe);
      if (pick) {
        select(*pick, &masks.safe);
      } else {
        select_backup();
        selection_.safe_set_collapse = true;
      }
    } else {
      Mask safe = config_.recompute_safe_set_in_exploit
                      ? compute_safe_set(posterior_, state_.j_min_t)
                      : state_.frozen_safe;
      if (safe.size() != config_.grid.size()) safe.assign(config_.grid.size(), false);
      const std::size_t size = count(safe);
      if (const auto pick = acquire_exploit(posterior_, safe)) {
        select(*pick, &safe);
      } else {
        select_backup();
        selection_.safe_set_collapse = true;
      }
      selection_.safe_set_size = size;
    }
    state_.phase = exploring ? Phase::Learning : Phase::Exploiting;
  }

  state_.last_query = selection_.index;
  state_.awaiting_observation = true;
  return selection_.theta;
}

double EtsoOptimizer::critical_or_throw() const {
  if (!config_.critical_cost) throw DomainError("observe: non-finite cost and no critical cost configured");
  return *config_.critical_cost;
}

StepEvents EtsoOptimizer::observe(double raw_cost, bool crashed) {
  if (!state_.awaiting_observation || !state_.last_query) {
    throw DomainError("observe: no query is pending");
  }
  StepEvents events;
  if (!std::isfinite(raw_cost)) {
    crashed = true;
    raw_cost = critical_or_throw();
  }
  events.crash = crashed;
  state_.awaiting_observation = false;

  const std::size_t index = *state_.last_query;
  const Vector theta = config_.grid.point(index);
  const double value = raw_cost / state_.scale;

  if (policy_ == PolicyKind::Etso) {
    if (!posterior_current_) refresh_posterior(config_.beta.at(state_.t_prime));
    const auto i = static_cast<Eigen::Index>(index);
    events.psi = test_statistic(posterior_.mean[i], value);
    events.kappa = threshold(config_.trigger, TriggerState{state_.t_prime}, posterior_.std_dev[i]);
    if (check(events.psi, events.kappa) || crashed) {
      events.reset_requested = true;
      state_.pending_reset_observation = PendingReset{theta, raw_cost};
      posterior_current_ = false;
      return events;
    }
  }

  if (policy_ != PolicyKind::BackupOnly) state_.dataset.add(theta, value);
  ++state_.t_prime;
  posterior_current_ = false;
  return events;
}

void EtsoOptimizer::reset_commit(double raw_backup_cost_new) {
  if (!state_.pending_reset_observation) throw DomainError("reset_commit: no reset is pending");
  const PendingReset pending = *state_.pending_reset_observation;
  start_epoch(raw_backup_cost_new);
  state_.dataset.add(pending.theta, pending.raw_cost / state_.scale);
  state_.pending_reset_observation.reset();
  state_.t_prime = 2;
}

nlohmann::json EtsoOptimizer::checkpoint() const {
  json doc = json::object();
  doc["schema"] = "etso-state/1";
  doc["policy"] = std::string(to_string(policy_));
  json data = json::array();
  for (const auto& obs : state_.dataset.points) {
    data.push_back({{"theta", vector_to_json(obs.theta)}, {"value", obs.value}});
  }
  doc["dataset"] = std::move(data);
  doc["t"] = state_.t;
  doc["t_prime"] = state_.t_prime;
  doc["j_min_t"] = state_.j_min_t;
  doc["scale"] = state_.scale;
  doc["prior_std_dev"] = state_.prior_std_dev;
  doc["phase"] = state_.phase == Phase::Learning ? "learning" : "exploiting";
  doc["last_query"] = state_.last_query ? json(*state_.last_query) : json(nullptr);
  doc["awaiting_observation"] = state_.awaiting_observation;
  if (state_.pending_reset_observation) {
    doc["pending_reset_observation"] = {{"theta", vector_to_json(state_.pending_reset_observation->theta)},
                                        {"raw_cost", state_.pending_reset_observation->raw_cost}};
  } else {
    doc["pending_reset_observation"] = nullptr;
  }
  json frozen = json::array();
  for (std::size_t i = 0; i < state_.frozen_safe.size(); ++i) {
    if (state_.frozen_safe[i]) frozen.push_back(i);
  }
  doc["frozen_safe"] = std::move(frozen);
  return doc;
}

EtsoOptimizer EtsoOptimizer::restore(EtsoConfig config, const nlohmann::json& doc) {
  try {
    if (doc.at("schema") != "etso-state/1") throw SchemaError("checkpoint: unsupported schema");
    EtsoOptimizer opt(std::move(config), parse_policy(doc.at("policy").get<std::string>()));
    EtsoState& s = opt.state_;
    for (const auto& obs : doc.at("dataset")) s.dataset.add(vector_from_json(obs.at("theta")), obs.at("value"));
    if (s.dataset.empty()) throw SchemaError("checkpoint: dataset is empty");
    s.t = doc.at("t");
    s.t_prime = doc.at("t_prime");
    s.j_min_t = doc.at("j_min_t");
    s.scale = doc.at("scale");
    s.prior_std_dev = doc.at("prior_std_dev");
    s.phase = doc.at("phase") == "learning" ? Phase::Learning : Phase::Exploiting;
    if (!doc.at("last_query").is_null()) s.last_query = doc.at("last_query").get<std::size_t>();
    s.awaiting_observation = doc.at("awaiting_observation");
    if (const auto& p = doc.at("pending_reset_observation"); !p.is_null()) {
      s.pending_reset_observation = PendingReset{vector_from_json(p.at("theta")), p.at("raw_cost")};
    }
    const auto& frozen = doc.at("frozen_safe");
    if (!frozen.empty()) {
      s.frozen_safe.assign(opt.config_.grid.size(), false);
      for (const auto& i : frozen) s.frozen_safe.at(i.get<std::size_t>()) = true;
    }
    if (s.last_query) opt.select(*s.last_query, nullptr);
    return opt;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace etso
