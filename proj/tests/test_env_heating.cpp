#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "emtree/env_heating.hpp"
#include "emtree/rng.hpp"

using namespace emtree;

namespace {

std::shared_ptr<const HeatingConfig> default_cfg() {
  return make_heating_config(HeatingConfig::defaults());
}

// Constant-weather variant so closed-form checks are exact.
std::shared_ptr<const HeatingConfig> constant_weather_cfg(double t_out, double solar) {
  HeatingConfig cfg = HeatingConfig::defaults();
  cfg.weather_temp_c.assign(kHeatStepsPerYear, t_out);
  cfg.weather_solar_kw.assign(kHeatStepsPerYear, solar);
  return make_heating_config(std::move(cfg));
}

EpisodeConfig at_step(std::int64_t step) {
  EpisodeConfig cfg;
  cfg.start_step = step;
  return cfg;
}

}  // namespace

TEST_CASE("observe exposes exactly the five documented features") {
  HeatingEnv env(default_cfg());
  CHECK(env.features().size() == 5);
  CHECK(env.features()[0].name == "price_eur_per_kwh");
  CHECK(env.features()[1].name == "indoor_temp_c");
  CHECK(env.features()[2].name == "lower_comfort_c");
  CHECK(env.features()[3].name == "upper_comfort_c");
  CHECK(env.features()[4].name == "time_of_week_h");
  env.reset(at_step(0));
  CHECK(env.observe().values.size() == 5);
}

TEST_CASE("occupancy schedule: weekends always, weekdays outside 07:00-20:00") {
  HeatingEnv env(default_cfg());

  // Saturday 03:00 (day 5 of the Monday-started week).
  const std::int64_t saturday_3am = 5 * kHeatStepsPerDay + 12;
  env.reset(at_step(saturday_3am));
  CHECK(env.observe().values[2] == 21.0);
  CHECK(env.observe().values[3] == 24.0);

  // Tuesday 12:00 is unoccupied.
  const std::int64_t tuesday_noon = 1 * kHeatStepsPerDay + 48;
  env.reset(at_step(tuesday_noon));
  CHECK(env.observe().values[2] == 15.0);
  CHECK(env.observe().values[3] == 30.0);

  // Weekday boundary behaviour: 06:45 occupied, 07:00 not, 20:00 again.
  CHECK(env.occupied_at(1 * kHeatStepsPerDay + 27));
  CHECK(!env.occupied_at(1 * kHeatStepsPerDay + 28));
  CHECK(env.occupied_at(1 * kHeatStepsPerDay + 80));

  // Time-of-week feature wraps over the week.
  env.reset(at_step(saturday_3am));
  CHECK(env.observe().values[4] == doctest::Approx(123.0));
}

TEST_CASE("pricing scenarios") {
  SUBCASE("constant price everywhere") {
    HeatingEnv env(default_cfg());
    for (std::int64_t step : {0L, 1234L, 50000L})
      CHECK(env.price_at(step) == doctest::Approx(0.2535));
  }

  SUBCASE("dynamic on/off peak switches at 07:00 and 22:00") {
    HeatingConfig cfg = HeatingConfig::defaults();
    cfg.pricing = PricingKind::Dynamic;
    HeatingEnv env(make_heating_config(std::move(cfg)));
    CHECK(env.price_at(0) == doctest::Approx(0.2383));              // 00:00
    CHECK(env.price_at(27) == doctest::Approx(0.2383));             // 06:45
    CHECK(env.price_at(28) == doctest::Approx(0.2666));             // 07:00
    CHECK(env.price_at(87) == doctest::Approx(0.2666));             // 21:45
    CHECK(env.price_at(88) == doctest::Approx(0.2383));             // 22:00
  }

  SUBCASE("synthetic highly dynamic series hits the target quartiles") {
    const std::vector<double> prices = synthetic_hourly_prices();
    REQUIRE(prices.size() == 8760);
    std::vector<double> sorted = prices;
    std::sort(sorted.begin(), sorted.end());
    const double q1 = sorted[sorted.size() / 4];
    const double median = sorted[sorted.size() / 2];
    const double q3 = sorted[3 * sorted.size() / 4];
    CHECK(std::abs(median - 0.2389) < 0.002);
    CHECK(std::abs(q1 - 0.2317) < 0.002);
    CHECK(std::abs(q3 - 0.2392) < 0.002);
    for (double p : prices) CHECK(p > 0.0);
  }

  SUBCASE("highly dynamic lookups index by hour of year") {
    HeatingConfig cfg = HeatingConfig::defaults();
    cfg.pricing = PricingKind::HighlyDynamic;
    cfg.hourly_prices.assign(8760, 0.1);
    cfg.hourly_prices[5] = 0.31;
    HeatingEnv env(make_heating_config(std::move(cfg)));
    CHECK(env.price_at(5 * 4) == doctest::Approx(0.31));
    CHECK(env.price_at(5 * 4 + 3) == doctest::Approx(0.31));
    CHECK(env.price_at(6 * 4) == doctest::Approx(0.1));
  }
}

TEST_CASE("equilibrium: no heat, no solar, T = T_out stays put") {
  auto cfg = constant_weather_cfg(-5.0, 0.0);
  HeatingConfig copy = *cfg;
  copy.initial_temp_c = -5.0;
  HeatingEnv env(make_heating_config(std::move(copy)));
  env.reset(at_step(0));
  for (int t = 0; t < 20; ++t) {
    env.step(std::vector<double>{0.0});
    CHECK(env.state().indoor_temp_c == doctest::Approx(-5.0).epsilon(1e-12));
  }
}

TEST_CASE("steady state: T - T_out = R * Q_hp is a fixed point") {
  const double t_out = -10.0;
  const double u = 0.4;
  HeatingConfig cfg = HeatingConfig::defaults();
  cfg.weather_temp_c.assign(kHeatStepsPerYear, t_out);
  cfg.weather_solar_kw.assign(kHeatStepsPerYear, 0.0);
  cfg.initial_temp_c = t_out + cfg.resistance_k_per_kw * u * cfg.nominal_heat_kw;
  HeatingEnv env(make_heating_config(std::move(cfg)));
  env.reset(at_step(0));
  for (int t = 0; t < 50; ++t) {
    env.step(std::vector<double>{u});
    const double residual =
        env.state().indoor_temp_c - t_out - 5.0 * u * 15.0;
    CHECK(std::abs(residual) < 1e-9);
  }
}

TEST_CASE("constant-modulation rollout matches the analytic RC response over 14 days") {
  const double t_out = -2.0;
  const double solar = 0.3;
  const double u = 0.3;
  auto cfg = constant_weather_cfg(t_out, solar);
  HeatingEnv env(cfg);
  env.reset(at_step(0));

  const double r = cfg->resistance_k_per_kw;
  const double tau = r * cfg->capacitance_kwh_per_k;
  const double t_eq = t_out + r * (u * cfg->nominal_heat_kw + solar);
  const double t0 = cfg->initial_temp_c;

  for (int t = 1; t <= 14 * kHeatStepsPerDay; ++t) {
    env.step(std::vector<double>{u});
    const double hours = t * cfg->timestep_hours;
    const double analytic = t_eq + (t0 - t_eq) * std::exp(-hours / tau);
    CHECK(env.state().indoor_temp_c ==
          doctest::Approx(analytic).epsilon(1e-6));
  }
}

TEST_CASE("temperature increment is linear in the net heat input") {
  auto base = constant_weather_cfg(0.0, 0.0);

  // Arrange two configurations whose net input doubles: same T0 = T_out, so
  // conduction starts at zero and the increment comes from Q_hp alone.
  HeatingConfig c1 = *base;
  c1.initial_temp_c = 0.0;
  HeatingConfig c2 = *base;
  c2.initial_temp_c = 0.0;

  HeatingEnv e1(make_heating_config(std::move(c1)));
  HeatingEnv e2(make_heating_config(std::move(c2)));
  e1.reset(at_step(0));
  e2.reset(at_step(0));
  e1.step(std::vector<double>{0.3});
  e2.step(std::vector<double>{0.6});
  const double d1 = e1.state().indoor_temp_c - 0.0;
  const double d2 = e2.state().indoor_temp_c - 0.0;
  CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-12));
}

TEST_CASE("pointwise-higher modulation yields pointwise-higher temperatures") {
  Rng rng(64);
  auto cfg = default_cfg();
  HeatingEnv lo_env(cfg), hi_env(cfg);
  lo_env.reset(at_step(1536));
  hi_env.reset(at_step(1536));
  for (int t = 0; t < 400; ++t) {
    const int lo_level = static_cast<int>(rng.next_u64() % 10);
    const int hi_level = lo_level + static_cast<int>(rng.next_u64() % (11 - lo_level));
    lo_env.step(std::vector<double>{lo_level / 10.0});
    hi_env.step(std::vector<double>{hi_level / 10.0});
    CHECK(lo_env.state().indoor_temp_c <= hi_env.state().indoor_temp_c + 1e-12);
  }
}

TEST_CASE("discomfort is zero inside the band and continuous at its edges") {
  auto cfg = constant_weather_cfg(21.0, 0.0);  // T stays wherever it starts

  const auto discomfort_with_initial = [&](double t0) {
    HeatingConfig c = *cfg;
    c.initial_temp_c = t0;
    c.weather_temp_c.assign(kHeatStepsPerYear, t0);  // equilibrium at t0
    HeatingEnv env(make_heating_config(std::move(c)));
    env.reset(at_step(0));  // Monday 00:00, occupied, band [21,24]
    return env.step(std::vector<double>{0.0}).discomfort_kh;
  };

  CHECK(discomfort_with_initial(22.0) == 0.0);
  CHECK(discomfort_with_initial(21.0) == 0.0);
  CHECK(discomfort_with_initial(24.0) == 0.0);
  // 0.4 K below the band for a 15-minute step = 0.1 Kh.
  CHECK(discomfort_with_initial(20.6) == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(discomfort_with_initial(24.4) == doctest::Approx(0.1).epsilon(1e-9));
  // Continuity: shrinking violations vanish smoothly.
  CHECK(discomfort_with_initial(20.999) == doctest::Approx(0.001 * 0.25).epsilon(1e-6));
}

TEST_CASE("electric energy accounts for COP and the auxiliary draw") {
  HeatingConfig cfg = HeatingConfig::defaults();
  cfg.weather_temp_c.assign(kHeatStepsPerYear, 0.0);
  cfg.weather_solar_kw.assign(kHeatStepsPerYear, 0.0);
  HeatingEnv env(make_heating_config(std::move(cfg)));
  env.reset(at_step(0));

  StepOutcome out = env.step(std::vector<double>{0.0});
  CHECK(out.energy_kwh == 0.0);  // no aux draw when the pump is off

  out = env.step(std::vector<double>{1.0});
  CHECK(out.energy_kwh == doctest::Approx((15.0 / 3.0 + 0.1) * 0.25));

  SUBCASE("affine COP clamps at 1") {
    HeatingConfig affine = HeatingConfig::defaults();
    affine.cop.affine = true;
    affine.weather_temp_c.assign(kHeatStepsPerYear, -60.0);
    affine.weather_solar_kw.assign(kHeatStepsPerYear, 0.0);
    HeatingEnv cold(make_heating_config(std::move(affine)));
    cold.reset(at_step(0));
    const StepOutcome o = cold.step(std::vector<double>{1.0});
    CHECK(o.energy_kwh == doctest::Approx((15.0 / 1.0 + 0.1) * 0.25));
  }
  CHECK(CopModel{true, 3.0, 6.0, 0.1}.at(10.0) == doctest::Approx(7.0));
}

TEST_CASE("off-grid modulation values snap to the nearest level and are flagged") {
  HeatingEnv env(default_cfg());
  env.reset(at_step(0));
  const StepOutcome out = env.step(std::vector<double>{0.34});
  CHECK(out.action_clamped);
  CHECK(out.energy_kwh == doctest::Approx((0.3 * 15.0 / 3.0 + 0.1) * 0.25));
  const StepOutcome exact = env.step(std::vector<double>{0.3});
  CHECK(!exact.action_clamped);
  const StepOutcome wild = env.step(std::vector<double>{7.0});
  CHECK(wild.action_clamped);  // clamps to 1.0
}

TEST_CASE("validation and training windows") {
  const EpisodeConfig peak_val = heating_validation_window(HeatingPeriod::Peak);
  CHECK(peak_val.start_step + peak_val.warmup == 16 * kHeatStepsPerDay);  // Jan 17
  CHECK(peak_val.warmup == kHeatStepsPerDay);
  CHECK(peak_val.length == 14 * kHeatStepsPerDay);

  const EpisodeConfig typical_val = heating_validation_window(HeatingPeriod::Typical);
  CHECK(typical_val.start_step + typical_val.warmup == 108 * kHeatStepsPerDay);  // Apr 19

  // Training starts 15 days before the validation period and its scored
  // window ends exactly where validation begins.
  const EpisodeConfig peak_train = heating_training_window(HeatingPeriod::Peak);
  CHECK(peak_train.start_step == 1 * kHeatStepsPerDay);  // 15 days before Jan 17
  CHECK(peak_train.start_step + peak_train.warmup + peak_train.length ==
        16 * kHeatStepsPerDay);
  CHECK(peak_train.warmup == kHeatStepsPerDay);
}

TEST_CASE("reset is deterministic per (period, start)") {
  auto cfg = default_cfg();
  HeatingEnv a(cfg), b(cfg);
  a.reset(at_step(1536));
  b.reset(at_step(1536));
  CHECK(a.observe().values == b.observe().values);

  // Default reset lands on the configured period's training window.
  HeatingEnv c(cfg);
  EpisodeConfig auto_start;
  auto_start.start_step = -1;
  c.reset(auto_start);
  CHECK(c.observe().step == heating_training_window(HeatingPeriod::Peak).start_step);
}

TEST_CASE("peak period is materially colder than the typical period") {
  HeatingEnv env(default_cfg());
  const auto mean_temp = [&](const EpisodeConfig& w) {
    double sum = 0.0;
    for (std::int64_t t = 0; t < w.length; ++t)
      sum += env.outdoor_temp_c(w.start_step + w.warmup + t);
    return sum / static_cast<double>(w.length);
  };
  const double peak = mean_temp(heating_validation_window(HeatingPeriod::Peak));
  const double typical = mean_temp(heating_validation_window(HeatingPeriod::Typical));
  CHECK(peak < 5.0);
  CHECK(typical > peak + 5.0);
}
