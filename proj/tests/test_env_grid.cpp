#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "emtree/env_core.hpp"
#include "emtree/env_grid.hpp"
#include "emtree/rng.hpp"

using namespace emtree;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const GridConfig> default_cfg() {
  return make_grid_config(GridConfig::defaults());
}

std::vector<double> zero_actions() { return {0, 0, 0, 0, 0, 0}; }

double load_q_at(const GridEnv& env, std::int64_t step, const GridConfig& cfg) {
  const auto exo = env.exogenous_at(step);
  return (exo.industrial_mw + exo.residential_mw + exo.ev_mw) * cfg.load_reactive_ratio;
}

}  // namespace

TEST_CASE("observe exposes exactly the 18 documented features") {
  GridEnv env(default_cfg());
  CHECK(env.features().size() == 18);
  CHECK(env.actions().size() == 6);
  EpisodeConfig cfg;
  cfg.seed = 0;
  env.reset(cfg);
  CHECK(env.observe().values.size() == 18);
}

TEST_CASE("profile interpolation hits the period anchors and ramps between them") {
  GridEnv env(default_cfg());

  // 14:00 sits inside the working-hours period.
  const auto work = env.exogenous_at(14 * 4);
  CHECK(work.pv_potential_mw == doctest::Approx(24.0));
  CHECK(work.wind_potential_mw == doctest::Approx(20.0));
  CHECK(work.industrial_mw == doctest::Approx(20.0));
  CHECK(work.ev_mw == doctest::Approx(0.0));

  // 03:00 is deep in the windy night.
  const auto night = env.exogenous_at(3 * 4);
  CHECK(night.wind_potential_mw == doctest::Approx(28.0));
  CHECK(night.industrial_mw == doctest::Approx(4.0));

  // 07:00 ramps halfway from the night to the commute period.
  const auto ramp = env.exogenous_at(7 * 4);
  CHECK(ramp.industrial_mw == doctest::Approx(7.0));
  CHECK(ramp.ev_mw == doctest::Approx(12.5));
  CHECK(ramp.wind_potential_mw == doctest::Approx(17.0));
}

TEST_CASE("reset: deterministic seed mapping, distinct starts, half-full battery") {
  auto cfg = default_cfg();
  GridEnv a(cfg), b(cfg);
  EpisodeConfig ec;
  ec.seed = 4;
  a.reset(ec);
  b.reset(ec);
  CHECK(a.observe().values == b.observe().values);
  CHECK(a.state().soc_mwh == doctest::Approx(0.5 * cfg->battery_capacity_mwh));

  std::set<std::int64_t> starts;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    starts.insert(GridEnv::start_step_for_seed(seed));
  CHECK(starts.size() == 10);  // seeds 0..9 land on 10 distinct start steps
  for (std::int64_t s : starts) {
    CHECK(s >= 0);
    CHECK(s < kGridStepsPerDay);
  }

  // Previous-step powers start from the uncurtailed profile values.
  ec.start_step = 14 * 4;
  a.reset(ec);
  const Observation obs = a.observe();
  CHECK(obs.values[0] == doctest::Approx(20.0));   // industrial P
  CHECK(obs.values[6] == doctest::Approx(24.0));   // pv P = potential
  CHECK(obs.values[8] == doctest::Approx(20.0));   // wind P = potential
  CHECK(obs.values[10] == doctest::Approx(0.0));   // battery idle
  CHECK(obs.values[17] == doctest::Approx(14.0));  // time of day
}

TEST_CASE("idle devices and zero loads produce a zero reward") {
  GridConfig cfg = GridConfig::defaults();
  cfg.profile = {GridProfilePoint{0.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
  GridEnv env(make_grid_config(std::move(cfg)));
  EpisodeConfig ec;
  ec.start_step = 0;
  env.reset(ec);
  for (int t = 0; t < 96; ++t) {
    const StepOutcome out = env.step(zero_actions());
    CHECK(out.energy_loss == 0.0);
    CHECK(out.penalty == 0.0);
    CHECK(clipped_reward(out.energy_loss, out.penalty, out.collapsed) == 0.0);
  }
}

TEST_CASE("branch flow at twice its limit scores an overload term of exactly 1") {
  GridConfig cfg = GridConfig::defaults();
  cfg.profile = {GridProfilePoint{0.0, 0.0, 0.0, 0.0, 0.0, 20.0}};
  cfg.branch_limit_mva[kWind] = 10.0;  // delivered 20 MW = 2 * S_max
  cfg.branch_limit_mva[kSlack] = 60.0;
  cfg.loss_coefficient.fill(0.0);
  GridEnv env(make_grid_config(std::move(cfg)));
  EpisodeConfig ec;
  ec.start_step = 0;
  env.reset(ec);
  const StepOutcome out = env.step({0.0, 0.0, 20.0, 0.0, 0.0, 0.0});
  CHECK(out.penalty == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("battery honours its energy conservation identity") {
  auto cfg = default_cfg();
  const double eta = cfg->step_efficiency();
  const double dt = cfg->timestep_hours;
  GridEnv env(cfg);
  EpisodeConfig ec;
  ec.seed = 7;
  env.reset(ec);

  Rng rng(123);
  for (int t = 0; t < 500; ++t) {
    const double soc_before = env.state().soc_mwh;
    const double setpoint = rng.uniform(-cfg->battery_power_mw, cfg->battery_power_mw);
    env.step({10.0, 0.0, 10.0, 0.0, setpoint, 0.0});
    const double realized = env.observe().values[10];  // previous-step battery P
    const double charge_mwh = std::max(0.0, -realized) * dt;
    const double discharge_mwh = std::max(0.0, realized) * dt;
    const double expected = eta * charge_mwh - discharge_mwh / eta;
    CHECK(env.state().soc_mwh - soc_before == doctest::Approx(expected).epsilon(1e-9));
    CHECK(env.state().soc_mwh >= -1e-9);
    CHECK(env.state().soc_mwh <= cfg->battery_capacity_mwh + 1e-9);
  }

  // Round trip: eta_charge * eta_discharge equals the configured value.
  CHECK(eta * eta == doctest::Approx(cfg->round_trip_efficiency));
}

TEST_CASE("battery power is limited by the stored and storable energy") {
  GridConfig cfg = GridConfig::defaults();
  cfg.profile = {GridProfilePoint{0.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
  cfg.battery_capacity_mwh = 2.0;  // tiny battery so limits bind fast
  GridEnv env(make_grid_config(std::move(cfg)));
  EpisodeConfig ec;
  ec.start_step = 0;
  env.reset(ec);

  // Drain: soc 1.0 MWh supports at most eta*soc/dt of discharge power.
  const double eta = env.state().soc_mwh > 0 ? std::sqrt(0.92) : 0.0;
  env.step({0, 0, 0, 0, 30.0, 0});
  const double realized = env.observe().values[10];
  CHECK(realized == doctest::Approx(eta * 1.0 / 0.25));
  CHECK(env.state().soc_mwh == doctest::Approx(0.0).epsilon(1e-12));

  // Nothing left: discharge now realizes zero power.
  env.step({0, 0, 0, 0, 30.0, 0});
  CHECK(env.observe().values[10] == doctest::Approx(0.0));
}

TEST_CASE("lowering a curtailment setpoint never increases delivered power") {
  auto cfg = default_cfg();
  Rng rng(88);
  for (int rep = 0; rep < 100; ++rep) {
    const std::int64_t start = static_cast<std::int64_t>(rng.next_u64() % 96);
    const double hi_set = rng.uniform(0.0, cfg->wind_power_mw);
    const double lo_set = rng.uniform(0.0, hi_set);
    GridEnv lo_env(cfg), hi_env(cfg);
    EpisodeConfig ec;
    ec.start_step = start;
    lo_env.reset(ec);
    hi_env.reset(ec);
    lo_env.step({0, 0, lo_set, 0, 0, 0});
    hi_env.step({0, 0, hi_set, 0, 0, 0});
    CHECK(lo_env.observe().values[8] <= hi_env.observe().values[8] + 1e-12);
  }
}

TEST_CASE("exogenous features repeat with the 24-hour period") {
  auto cfg = default_cfg();
  GridEnv env(cfg);
  EpisodeConfig ec;
  ec.start_step = 10;
  env.reset(ec);
  // Constant (reactive-balanced) actions; record two days of observations.
  std::vector<Observation> observations;
  for (int t = 0; t < 2 * 96; ++t) {
    observations.push_back(env.observe());
    env.step({15.0, 0.0, 20.0, 0.0, 0.0, 6.0});
  }
  for (int t = 0; t < 96; ++t) {
    const Observation& now = observations[t];
    const Observation& tomorrow = observations[t + 96];
    for (int idx : {0, 1, 2, 3, 4, 5, 14, 15, 17}) {  // loads, potentials, time
      CHECK(now.values[idx] == doctest::Approx(tomorrow.values[idx]).epsilon(1e-12));
    }
  }
}

TEST_CASE("with zero loss coefficients and balanced reactive power r_t stays 0") {
  GridConfig base = GridConfig::defaults();
  base.loss_coefficient.fill(0.0);
  auto cfg = make_grid_config(std::move(base));
  GridEnv env(cfg);
  EpisodeConfig ec;
  ec.start_step = 0;
  env.reset(ec);
  for (int t = 0; t < 3 * 96; ++t) {
    // Compensate the load reactive power through the battery channel.
    const double q = load_q_at(env, env.state().step_index, *cfg);
    const StepOutcome out = env.step({24.0, 0.0, 28.0, 0.0, 0.0, q});
    CHECK(clipped_reward(out.energy_loss, out.penalty, out.collapsed) == 0.0);
  }
}

TEST_CASE("sustained violations collapse the grid") {
  auto cfg = default_cfg();

  SUBCASE("random per-step actions collapse and record the terminal reward") {
    int collapses = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      GridEnv env(cfg);
      EpisodeConfig ec;
      ec.length = 3000;
      ec.seed = seed;
      Rng rng(mix_seed(99, seed));
      const auto& specs = env.actions();
      const Controller controller = [&](const Observation&) {
        std::vector<double> a(specs.size());
        for (std::size_t i = 0; i < specs.size(); ++i)
          a[i] = rng.uniform(specs[i].lo, specs[i].hi);
        return a;
      };
      const EvalReport report = evaluate_episode(env, controller, ec);
      if (report.collapsed) {
        ++collapses;
        CHECK(report.trace.back().reward == kCollapseReward);
        CHECK(report.trace.size() <= 3000);
      }
    }
    CHECK(collapses >= 15);  // the random policy loses the grid almost always
  }

  SUBCASE("the collapse rule needs the configured number of consecutive steps") {
    GridConfig tight = GridConfig::defaults();
    tight.profile = {GridProfilePoint{0.0, 0.0, 0.0, 0.0, 0.0, 0.0}};
    tight.collapse_steps = 3;
    GridEnv env(make_grid_config(std::move(tight)));
    EpisodeConfig ec;
    ec.start_step = 0;
    env.reset(ec);
    // |Q_slack| = 25 -> phi = 4 * (25-10)/10 = 6 > 5.
    const std::vector<double> bad = {0, 25.0, 0, 0, 0, 0};
    CHECK(!env.step(bad).collapsed);
    CHECK(!env.step(bad).collapsed);
    CHECK(env.step(zero_actions()).collapsed == false);  // streak resets
    CHECK(!env.step(bad).collapsed);
    CHECK(!env.step(bad).collapsed);
    CHECK(env.step(bad).collapsed);  // third consecutive violation
    CHECK_THROWS_AS(env.step(bad), EvalError);  // stepping past collapse
  }
}

TEST_CASE("out-of-range actions are clamped and flagged") {
  GridEnv env(default_cfg());
  EpisodeConfig ec;
  ec.start_step = 0;
  env.reset(ec);
  const StepOutcome out = env.step({1000.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  CHECK(out.action_clamped);
  const StepOutcome ok = env.step(zero_actions());
  CHECK(!ok.action_clamped);
}

TEST_CASE("profile CSV round-trips through the reader") {
  const fs::path file = fs::temp_directory_path() / "emtree_test_profile.csv";
  {
    std::ofstream out(file);
    out << "hour,industrial_mw,residential_mw,ev_mw,pv_potential_mw,wind_potential_mw\n";
    out << "6,4,2,0,0,28\n8,10,12,25,4,6\n";
  }
  const auto points = read_profile_csv(file);
  REQUIRE(points.size() == 2);
  CHECK(points[0].hour == 6.0);
  CHECK(points[1].ev_mw == 25.0);
  fs::remove(file);

  {
    std::ofstream out(file);
    out << "hour,industrial_mw\n6,4\n";
  }
  CHECK_THROWS_AS(read_profile_csv(file), ConfigError);
  fs::remove(file);
}
