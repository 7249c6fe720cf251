#include "etso/errors.hpp"
#include "etso/optimizer.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>

using namespace etso;

namespace {

EtsoConfig small_config(int learn_rounds = 6) {
  EtsoConfig c;
  c.grid = GridDomain({0.0}, {1.0}, {21});
  c.kernel.lengthscales = Vector{{0.2}};
  c.backup_controller = Vector{{0.5}};
  c.learn_rounds = learn_rounds;
  c.critical_cost = -50.0;
  return c;
}

// Smooth objective with its maximum at 0.75, raw units.
double smooth_cost(const Vector& theta) { return -3.0 + 2.0 * std::exp(-std::pow((theta[0] - 0.75) / 0.3, 2)); }

}  // namespace

TEST_CASE("default constant chain") {
  const double j_min = safety_threshold(-1.0, 2.0, 0.016, 0.2);
  CHECK(std::abs(j_min - (-1.232)) < 1e-12);
  const double sigma0 = prior_std_dev_for(-1.0, j_min, 2.0, 0.2);
  CHECK(std::abs(sigma0 - 1.0 / 3.0) < 1e-12);
  CHECK(std::abs((-1.0 - 2.0 * sigma0) - (-5.0 / 3.0)) < 1e-12);
  CHECK(-5.0 / 3.0 < j_min);
}

TEST_CASE("normalization and performance arithmetic") {
  CHECK(normalization_scale(-3.7) == 4.0);
  CHECK(normalization_scale(-7.2) == 8.0);
  CHECK(normalization_scale(-0.2) == 1.0);
  CHECK(normalization_scale(-3.0) == 3.0);
  CHECK(normalized_performance(-4.0, -2.0) == doctest::Approx(0.5));
  CHECK(normalized_performance(-4.0, -4.0) == 0.0);
  CHECK_THROWS_AS(normalization_scale(NAN), DomainError);
  CHECK_THROWS_AS(normalized_performance(0.0, -1.0), DomainError);
}

TEST_CASE("initial state and the sandwich at the backup") {
  for (double raw : {-0.95, -1.8, -3.7, -12.4}) {
    EtsoOptimizer opt(small_config(), PolicyKind::Etso, raw);
    const double scale = normalization_scale(raw);
    CHECK(opt.state().scale == scale);
    REQUIRE(opt.state().dataset.size() == 1);
    CHECK(opt.state().dataset.points[0].value == doctest::Approx(raw / scale));
    CHECK(opt.state().t_prime == 1);
    CHECK(std::abs(opt.state().j_min_t - (-1.232)) < 1e-12);
    CHECK(std::abs(opt.state().prior_std_dev - 1.0 / 3.0) < 1e-12);
    opt.next_query();
    const auto b = static_cast<Eigen::Index>(opt.backup_index());
    CHECK(-5.0 / 3.0 < opt.state().j_min_t);
    CHECK(opt.state().j_min_t < opt.grid_posterior().lower[b]);
  }
  EtsoOptimizer opt(small_config(), PolicyKind::Etso, -3.7);
  CHECK(opt.state().dataset.points[0].value == doctest::Approx(-0.925));
}

TEST_CASE("learning then exploiting, every selection inside the safe set") {
  const int learn = 6;
  EtsoOptimizer opt(small_config(learn), PolicyKind::SafeOptBudget, smooth_cost(Vector{{0.5}}));
  for (int t = 1; t <= 20; ++t) {
    const int t_prime = opt.state().t_prime;
    const Vector theta = opt.next_query();
    const Selection& s = opt.last_selection();
    CHECK(s.in_safe_set);
    CHECK(s.lower >= opt.state().j_min_t);
    CHECK(s.exploring == (t_prime < learn));
    if (t_prime == learn) CHECK(opt.state().frozen_safe.size() == 21);
    opt.observe(smooth_cost(theta));
  }
  CHECK(opt.state().dataset.size() == 21);
  CHECK(opt.state().phase == Phase::Exploiting);
  // Exploit keeps using the safe set frozen at t' = T_L.
  CHECK(opt.last_selection().safe_set_size == count(opt.state().frozen_safe));
}

TEST_CASE("trigger, two-phase reset and the next learning phase") {
  const int learn = 6;
  EtsoOptimizer opt(small_config(learn), PolicyKind::Etso, smooth_cost(Vector{{0.5}}));
  for (int t = 0; t < 3; ++t) opt.observe(smooth_cost(opt.next_query()));
  CHECK(opt.state().t_prime == 4);
  const std::size_t before = opt.state().dataset.size();

  const Vector theta = opt.next_query();
  const StepEvents ev = opt.observe(smooth_cost(theta) - 5.0);
  CHECK(ev.reset_requested);
  CHECK(ev.psi > ev.kappa);
  CHECK(opt.reset_pending());
  CHECK(opt.state().dataset.size() == before);
  CHECK_THROWS_AS(opt.next_query(), DomainError);

  opt.reset_commit(-7.2);
  CHECK(opt.state().scale == 8.0);
  CHECK(opt.state().t_prime == 2);
  REQUIRE(opt.state().dataset.size() == 2);
  CHECK(opt.state().dataset.points[0].theta == opt.backup_point());
  CHECK(opt.state().dataset.points[1].theta == theta);
  CHECK(opt.state().dataset.points[1].value == doctest::Approx((smooth_cost(theta) - 5.0) / 8.0));

  int exploring = 0;
  for (int t_prime = 2; t_prime <= learn; ++t_prime) {
    const Vector q = opt.next_query();
    exploring += opt.last_selection().exploring ? 1 : 0;
    const StepEvents e = opt.observe(opt.last_selection().mean * 8.0);
    REQUIRE_FALSE(e.reset_requested);
  }
  CHECK(exploring == learn - 2);
  CHECK(opt.state().frozen_safe.size() == 21);
}

TEST_CASE("an exact prediction never fires the trigger") {
  EtsoOptimizer opt(small_config(), PolicyKind::Etso, -1.0);
  for (int t = 0; t < 12; ++t) {
    opt.next_query();
    const StepEvents e = opt.observe(opt.last_selection().mean * opt.state().scale);
    CHECK(e.psi == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(e.reset_requested);
  }
  CHECK(opt.state().dataset.size() == 13);
}

TEST_CASE("crashes force a reset for etso and are absorbed by safeopt") {
  EtsoOptimizer etso(small_config(), PolicyKind::Etso, -1.0);
  etso.next_query();
  CHECK(etso.observe(NAN).reset_requested);
  EtsoOptimizer inf(small_config(), PolicyKind::SafeOptInfinite, -1.0);
  inf.next_query();
  const StepEvents e = inf.observe(-40.0, true);
  CHECK(e.crash);
  CHECK_FALSE(e.reset_requested);
  CHECK(inf.state().dataset.size() == 2);
}

TEST_CASE("backup-only policy always returns the backup") {
  EtsoOptimizer opt(small_config(), PolicyKind::BackupOnly, -1.5);
  for (int t = 0; t < 5; ++t) {
    CHECK(opt.next_query() == opt.backup_point());
    opt.observe(-9.0);
  }
  CHECK(opt.state().dataset.size() == 1);
}

TEST_CASE("backup is snapped to the grid") {
  EtsoConfig c = small_config();
  c.backup_controller = Vector{{0.51}};
  EtsoOptimizer opt(c, PolicyKind::Etso, -1.0);
  CHECK(opt.backup_snapped());
  CHECK(opt.backup_point()[0] == doctest::Approx(0.5));
}

TEST_CASE("backup below the critical cost violates the assumption") {
  CHECK_THROWS_AS(EtsoOptimizer(small_config(), PolicyKind::Etso, -60.0), AssumptionViolation);
}

TEST_CASE("call order is enforced") {
  EtsoOptimizer opt(small_config(), PolicyKind::Etso, -1.0);
  CHECK_THROWS_AS(opt.observe(-1.0), DomainError);
  CHECK_THROWS_AS(opt.reset_commit(-1.0), DomainError);
  opt.next_query();
  CHECK_THROWS_AS(opt.next_query(), DomainError);
}

TEST_CASE("checkpoint round trip continues identically") {
  EtsoOptimizer a(small_config(), PolicyKind::Etso, smooth_cost(Vector{{0.5}}));
  for (int t = 0; t < 4; ++t) a.observe(smooth_cost(a.next_query()));
  const nlohmann::json doc = a.checkpoint();
  EtsoOptimizer b = EtsoOptimizer::restore(small_config(), doc);
  CHECK(b.checkpoint() == doc);
  for (int t = 0; t < 8; ++t) {
    const Vector qa = a.next_query();
    const Vector qb = b.next_query();
    REQUIRE(qa == qb);
    a.observe(smooth_cost(qa));
    b.observe(smooth_cost(qb));
  }
  nlohmann::json bad = doc;
  bad["schema"] = "other";
  CHECK_THROWS_AS(EtsoOptimizer::restore(small_config(), bad), SchemaError);
}

TEST_CASE("policy names") {
  for (auto p : {PolicyKind::Etso, PolicyKind::SafeOptBudget, PolicyKind::SafeOptInfinite, PolicyKind::BackupOnly}) {
    CHECK(parse_policy(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_policy("bogus"), ConfigError);
}

TEST_CASE("logarithmic beta schedule") {
  BetaSchedule b{BetaSchedule::Kind::Logarithmic, 2.0};
  CHECK(b.at(1) == doctest::Approx(2.0));
  CHECK(b.at(10) == doctest::Approx(std::sqrt(4.0 + 2.0 * std::log(10.0))));
  BetaSchedule c;
  CHECK(c.at(100) == 2.0);
}
