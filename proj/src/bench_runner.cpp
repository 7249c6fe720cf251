#include "etso/bench_runner.hpp"

#include "etso/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <thread>
#include <tuple>

namespace etso {

void RunConfig::validate() const {
  if (policies.empty()) throw ConfigError("at least one policy is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (std::set<PolicyKind>(policies.begin(), policies.end()).size() != policies.size()) {
    throw ConfigError("policies must be distinct");
  }
  if (learn_rounds && *learn_rounds < 2) throw ConfigError("learn_rounds must be at least 2");
  if (horizon && learn_rounds && *horizon < *learn_rounds) {
    throw ConfigError("horizon must be at least learn_rounds");
  }
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["scenario"] = scenario;
  auto& p = j["policies"] = nlohmann::ordered_json::array();
  for (auto k : policies) p.push_back(std::string(to_string(k)));
  j["horizon"] = horizon ? nlohmann::ordered_json(*horizon) : nlohmann::ordered_json(nullptr);
  j["learn_rounds"] =
      learn_rounds ? nlohmann::ordered_json(*learn_rounds) : nlohmann::ordered_json(nullptr);
  j["seeds"] = seeds;
  j["overrides"] = overrides;
  j["free_backup_requery"] = free_backup_requery;
  return j;
}

std::uint64_t stream_seed(std::uint64_t root, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Scenario resolve_scenario(const RunConfig& config) {
  config.validate();
  nlohmann::json doc = load_scenario_document(config.scenario);
  for (const auto& o : config.overrides) apply_override(doc, o);
  if (config.horizon) doc["horizon"] = *config.horizon;
  if (config.learn_rounds) doc["learn_rounds"] = *config.learn_rounds;
  return parse_scenario(doc);
}

std::vector<ExperimentRecord> run_single(const Scenario& sc, PolicyKind policy, std::uint64_t seed,
                                         bool free_backup_requery, RunOutcome* outcome) {
  RunOutcome local;
  RunOutcome& out = outcome ? *outcome : local;
  out = RunOutcome{};
  out.policy = policy;
  out.seed = seed;

  std::vector<ExperimentRecord> records;
  const EtsoConfig& cfg = sc.etso;
  const Environment env(sc.environment, cfg.grid, cfg.backup_controller,
                        stream_seed(seed, Stream::Objective));
  std::mt19937_64 noise(stream_seed(seed, Stream::EnvironmentNoise));
  const double j_min_norm =
      safety_threshold(cfg.kernel.prior_mean, cfg.beta.base, cfg.kernel.noise_std_dev, cfg.epsilon);

  double backup_initial = 0.0;
  auto make = [&](int round, const Vector& theta, const Evaluation& ev) {
    ExperimentRecord r;
    r.scenario = sc.id;
    r.policy = policy;
    r.seed = seed;
    r.round = round;
    r.theta.assign(theta.data(), theta.data() + theta.size());
    r.noisy_cost = ev.noisy_cost;
    r.true_cost = ev.true_cost;
    r.crashed = ev.crashed;
    r.mode = ev.mode;
    r.normalized_performance =
        backup_initial != 0.0 ? normalized_performance(backup_initial, ev.true_cost) : 0.0;
    ++out.evaluations;
    if (ev.crashed) ++out.crashes;
    return r;
  };

  try {
    const Vector backup = cfg.grid.point(cfg.grid.nearest(cfg.backup_controller));
    const Evaluation init = env.evaluate(0, backup, noise);
    backup_initial = init.true_cost;
    if (init.crashed) throw AssumptionViolation("backup controller crashes in the initial mode");
    EtsoOptimizer opt(cfg, policy, init.noisy_cost);
    {
      ExperimentRecord r = make(0, backup, init);
      r.t_prime = opt.state().t_prime;
      r.backup_requery = false;
      r.in_safe_set = true;
      r.j_min = j_min_norm * opt.state().scale;
      records.push_back(std::move(r));
    }

    auto requery = [&](int round) {
      const Evaluation ev = env.evaluate(round, opt.backup_point(), noise);
      if (ev.crashed) throw AssumptionViolation("backup controller crashes after a change");
      opt.reset_commit(ev.noisy_cost);
      ExperimentRecord r = make(round, opt.backup_point(), ev);
      r.backup_requery = true;
      r.in_safe_set = true;
      r.t_prime = opt.state().t_prime;
      r.j_min = j_min_norm * opt.state().scale;
      records.push_back(std::move(r));
    };

    for (int t = 1; t <= sc.horizon; ++t) {
      if (opt.reset_pending()) {
        requery(t);
        continue;
      }
      const int t_prime = opt.state().t_prime;
      const double j_min_raw = j_min_norm * opt.state().scale;
      const Vector theta = opt.next_query();
      const Selection sel = opt.last_selection();
      const Evaluation ev = env.evaluate(t, theta, noise);
      const StepEvents events = opt.observe(ev.noisy_cost, ev.crashed);
      ExperimentRecord r = make(t, theta, ev);
      r.t_prime = t_prime;
      r.reset = events.reset_requested;
      r.safe_set_size = sel.safe_set_size;
      r.j_min = j_min_raw;
      r.in_safe_set = sel.in_safe_set;
      records.push_back(std::move(r));
      if (events.reset_requested) {
        ++out.resets;
        if (free_backup_requery) requery(t);
      }
    }
  } catch (const AssumptionViolation& e) {
    out.valid = false;
    out.error = e.what();
  }
  return records;
}

void canonical_sort(std::vector<ExperimentRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.scenario, a.policy, a.seed, a.round, a.backup_requery) <
           std::tie(b.scenario, b.policy, b.seed, b.round, b.backup_requery);
  });
}

MatrixResult run_matrix(const RunConfig& config) { return run_matrix(resolve_scenario(config), config); }

MatrixResult run_matrix(const Scenario& scenario, const RunConfig& config) {
  config.validate();
  struct Job {
    PolicyKind policy;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto p : config.policies) {
    for (auto s : config.seeds) jobs.push_back({p, s});
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return std::tie(a.policy, a.seed) < std::tie(b.policy, b.seed);
  });

  std::vector<std::vector<ExperimentRecord>> per_job(jobs.size());
  std::vector<RunOutcome> outcomes(jobs.size());
  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        per_job[i] = run_single(scenario, jobs[i].policy, jobs[i].seed, config.free_backup_requery,
                                &outcomes[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  MatrixResult result{scenario, config, {}, std::move(outcomes)};
  for (auto& recs : per_job) {
    result.records.insert(result.records.end(), std::make_move_iterator(recs.begin()),
                          std::make_move_iterator(recs.end()));
  }
  canonical_sort(result.records);
  return result;
}

std::vector<PolicySummary> summarize(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw DomainError("summarize: no records");
  std::map<std::pair<std::string, PolicyKind>, std::map<std::uint64_t, std::vector<const ExperimentRecord*>>>
      groups;
  for (const auto& r : records) groups[{r.scenario, r.policy}][r.seed].push_back(&r);

  std::vector<PolicySummary> out;
  for (const auto& [key, runs] : groups) {
    PolicySummary s;
    s.scenario = key.first;
    s.policy = key.second;
    s.runs = runs.size();
    int horizon = 0;
    for (const auto& [seed, recs] : runs) {
      for (const auto* r : recs) horizon = std::max(horizon, r->round);
    }
    const auto rounds = static_cast<std::size_t>(horizon) + 1;
    std::vector<std::vector<double>> perf(rounds);
    s.crashes.assign(rounds, 0);
    s.resets.assign(rounds, 0);
    std::vector<double> finals;
    for (const auto& [seed, recs] : runs) {
      std::vector<const ExperimentRecord*> primary(rounds, nullptr);
      bool crashed = false;
      for (const auto* r : recs) {
        auto& slot = primary[static_cast<std::size_t>(r->round)];
        if (!slot || (slot->backup_requery && !r->backup_requery)) slot = r;
        if (r->crashed) {
          ++s.crashes[static_cast<std::size_t>(r->round)];
          ++s.total_crashes;
          crashed = true;
        }
        if (r->reset) {
          ++s.resets[static_cast<std::size_t>(r->round)];
          ++s.reset_histogram[r->round];
          ++s.total_resets;
        }
      }
      if (crashed) ++s.crashed_runs;
      double tail = 0.0;
      int tail_n = 0;
      for (std::size_t t = 0; t < rounds; ++t) {
        if (!primary[t]) continue;
        perf[t].push_back(primary[t]->normalized_performance);
        if (t >= 1 && static_cast<int>(t) > horizon - 10) {
          tail += primary[t]->normalized_performance;
          ++tail_n;
        }
      }
      if (tail_n) finals.push_back(tail / tail_n);
    }
    s.mean.assign(rounds, 0.0);
    s.std.assign(rounds, 0.0);
    for (std::size_t t = 0; t < rounds; ++t) {
      const auto& v = perf[t];
      if (v.empty()) continue;
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      s.mean[t] = m;
      s.std[t] = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    for (double f : finals) s.final_mean += f;
    if (!finals.empty()) s.final_mean /= static_cast<double>(finals.size());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace etso
