#include "emtree/env_heating.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "emtree/rng.hpp"

namespace emtree {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kModulationLevels = 11;

// Day indices (0 = Monday, January 1st) of the two validation period starts.
constexpr std::int64_t kPeakStartDay = 16;     // January 17th
constexpr std::int64_t kTypicalStartDay = 108; // April 19th
constexpr std::int64_t kValidationDays = 14;

std::vector<double> modulation_levels() {
  std::vector<double> levels(kModulationLevels);
  for (int i = 0; i < kModulationLevels; ++i) levels[i] = i / 10.0;
  return levels;
}

}  // namespace

const char* to_string(PricingKind kind) {
  switch (kind) {
    case PricingKind::Constant: return "constant";
    case PricingKind::Dynamic: return "dynamic";
    case PricingKind::HighlyDynamic: return "highly_dynamic";
  }
  return "?";
}

const char* to_string(HeatingPeriod period) {
  return period == HeatingPeriod::Peak ? "peak" : "typical";
}

PricingKind pricing_from_string(const std::string& s) {
  if (s == "constant") return PricingKind::Constant;
  if (s == "dynamic") return PricingKind::Dynamic;
  if (s == "highly_dynamic") return PricingKind::HighlyDynamic;
  throw ConfigError("unknown pricing scenario '" + s + "'");
}

HeatingPeriod period_from_string(const std::string& s) {
  if (s == "peak") return HeatingPeriod::Peak;
  if (s == "typical") return HeatingPeriod::Typical;
  throw ConfigError("unknown validation period '" + s + "'");
}

double CopModel::at(double t_out_c) const {
  if (!affine) return constant;
  return std::max(1.0, intercept + slope * t_out_c);
}

HeatingConfig HeatingConfig::defaults() {
  HeatingConfig cfg;
  cfg.hourly_prices = synthetic_hourly_prices();
  return cfg;
}

std::vector<double> synthetic_hourly_prices() {
  // Tight interquartile band (cheap night hours form the bottom quartile)
  // with sparse daytime spikes.
  std::vector<double> prices(8760);
  Rng rng(20190101u);
  for (std::size_t h = 0; h < prices.size(); ++h) {
    const int hour_of_day = static_cast<int>(h % 24);
    double p;
    if (hour_of_day >= 23 || hour_of_day < 6) {
      p = 0.2280 + 0.0037 * rng.uniform01();
    } else {
      p = 0.2386 + 0.0006 * rng.uniform01();
      if (rng.uniform01() < 0.03) p += 0.02 + 0.06 * rng.uniform01();
    }
    prices[h] = p;
  }
  return prices;
}

std::shared_ptr<const HeatingConfig> make_heating_config(HeatingConfig cfg) {
  if (!(cfg.resistance_k_per_kw > 0.0) || !(cfg.capacitance_kwh_per_k > 0.0))
    throw ConfigError("heating: R and C must be positive");
  if (cfg.cop.at(0.0) < 1.0) throw ConfigError("heating: COP must be >= 1");
  if (!(cfg.occupied_lower_c < cfg.occupied_upper_c) ||
      !(cfg.unoccupied_lower_c < cfg.unoccupied_upper_c))
    throw ConfigError("heating: comfort band bounds must satisfy lower < upper");
  if (cfg.hourly_prices.empty()) cfg.hourly_prices = synthetic_hourly_prices();
  if (cfg.hourly_prices.size() < 8760)
    throw ConfigError("heating: hourly price series must cover a year (8760 values)");
  for (double p : cfg.hourly_prices)
    if (!(p > 0.0)) throw ConfigError("heating: prices must be positive");
  return std::make_shared<const HeatingConfig>(std::move(cfg));
}

HeatingEnv::HeatingEnv(std::shared_ptr<const HeatingConfig> config)
    : cfg_(std::move(config)) {
  features_ = {
      FeatureSpec{"price_eur_per_kwh", 0.05, 0.45},
      FeatureSpec{"indoor_temp_c", 10.0, 35.0},
      FeatureSpec{"lower_comfort_c", 14.0, 22.0},
      FeatureSpec{"upper_comfort_c", 23.0, 31.0},
      FeatureSpec{"time_of_week_h", 0.0, 168.0},
  };
  actions_ = {ActionSpec::discrete("heat_pump_modulation", modulation_levels())};
}

const std::vector<FeatureSpec>& HeatingEnv::features() const { return features_; }
const std::vector<ActionSpec>& HeatingEnv::actions() const { return actions_; }

void HeatingEnv::reset(const EpisodeConfig& cfg) {
  state_.step_index =
      cfg.start_step >= 0 ? cfg.start_step : heating_training_window(cfg_->period).start_step;
  state_.indoor_temp_c = cfg_->initial_temp_c;
}

bool HeatingEnv::occupied_at(std::int64_t step) const {
  const std::int64_t day = step / kHeatStepsPerDay;
  const int day_of_week = static_cast<int>(day % 7);  // 0 = Monday
  if (day_of_week >= 5) return true;                  // weekends
  const double hour = (step % kHeatStepsPerDay) * cfg_->timestep_hours;
  return hour < 7.0 || hour >= 20.0;
}

HeatingEnv::Band HeatingEnv::comfort_band(std::int64_t step) const {
  if (occupied_at(step)) return {cfg_->occupied_lower_c, cfg_->occupied_upper_c};
  return {cfg_->unoccupied_lower_c, cfg_->unoccupied_upper_c};
}

double HeatingEnv::price_at(std::int64_t step) const {
  switch (cfg_->pricing) {
    case PricingKind::Constant:
      return cfg_->constant_price;
    case PricingKind::Dynamic: {
      const double hour = (step % kHeatStepsPerDay) * cfg_->timestep_hours;
      return (hour >= 7.0 && hour < 22.0) ? cfg_->dynamic_on_peak : cfg_->dynamic_off_peak;
    }
    case PricingKind::HighlyDynamic: {
      const std::int64_t hour_of_year = (step / 4) % 8760;
      return cfg_->hourly_prices[static_cast<std::size_t>(hour_of_year)];
    }
  }
  return cfg_->constant_price;
}

double HeatingEnv::outdoor_temp_c(std::int64_t step) const {
  if (!cfg_->weather_temp_c.empty()) {
    const auto idx = static_cast<std::size_t>(step % kHeatStepsPerYear);
    if (idx < cfg_->weather_temp_c.size()) return cfg_->weather_temp_c[idx];
    throw EvalError("heating: weather series does not cover step " + std::to_string(step));
  }
  const std::int64_t day = (step / kHeatStepsPerDay) % 365;
  const double hour = (step % kHeatStepsPerDay) * cfg_->timestep_hours;
  const double seasonal =
      10.0 - 8.5 * std::cos(2.0 * kPi * (static_cast<double>(day) + hour / 24.0 - 25.0) / 365.0);
  const double diurnal = 3.5 * std::sin(2.0 * kPi * (hour - 9.0) / 24.0);
  return seasonal + diurnal;
}

double HeatingEnv::solar_gain_kw(std::int64_t step) const {
  if (!cfg_->weather_solar_kw.empty()) {
    const auto idx = static_cast<std::size_t>(step % kHeatStepsPerYear);
    if (idx < cfg_->weather_solar_kw.size()) return cfg_->weather_solar_kw[idx];
    throw EvalError("heating: solar series does not cover step " + std::to_string(step));
  }
  const std::int64_t day = (step / kHeatStepsPerDay) % 365;
  const double hour = (step % kHeatStepsPerDay) * cfg_->timestep_hours;
  if (hour <= 7.0 || hour >= 17.0) return 0.0;
  const double amplitude =
      2.0 + 1.2 * std::cos(2.0 * kPi * (static_cast<double>(day) - 172.0) / 365.0);
  return amplitude * std::sin(kPi * (hour - 7.0) / 10.0);
}

Observation HeatingEnv::observe() const {
  const Band band = comfort_band(state_.step_index);
  Observation obs;
  obs.step = state_.step_index;
  obs.values = {
      price_at(state_.step_index),
      state_.indoor_temp_c,
      band.lower,
      band.upper,
      static_cast<double>(state_.step_index % (7 * kHeatStepsPerDay)) * cfg_->timestep_hours,
  };
  return obs;
}

StepOutcome HeatingEnv::step(std::span<const double> actions) {
  if (actions.size() != 1)
    throw EvalError("heating: expected 1 action, got " + std::to_string(actions.size()));
  StepOutcome out;

  int level = static_cast<int>(std::lround(actions[0] * 10.0));
  if (level < 0 || level > 10) {
    level = std::clamp(level, 0, 10);
    out.action_clamped = true;
  }
  const double u = level / 10.0;
  if (std::abs(u - actions[0]) > 1e-9) out.action_clamped = true;

  const double dt = cfg_->timestep_hours;
  const double t_out = outdoor_temp_c(state_.step_index);
  const double q_hp = u * cfg_->nominal_heat_kw;
  const double q_sol = solar_gain_kw(state_.step_index);
  const double cop = cfg_->cop.at(t_out);

  out.price_eur_per_kwh = price_at(state_.step_index);
  out.energy_kwh = (q_hp / cop + (u > 0.0 ? cfg_->aux_load_kw : 0.0)) * dt;

  // Exact step response of C dT/dt = Q_hp + Q_solar - (T - T_out)/R with the
  // exogenous inputs held constant over the step.
  const double tau = cfg_->resistance_k_per_kw * cfg_->capacitance_kwh_per_k;
  const double t_eq = t_out + cfg_->resistance_k_per_kw * (q_hp + q_sol);
  const double t_new = t_eq + (state_.indoor_temp_c - t_eq) * std::exp(-dt / tau);

  const Band band = comfort_band(state_.step_index);
  double dist = 0.0;
  if (t_new < band.lower) dist = band.lower - t_new;
  else if (t_new > band.upper) dist = t_new - band.upper;
  out.discomfort_kh = dist * dt;

  state_.indoor_temp_c = t_new;
  ++state_.step_index;
  return out;
}

double HeatingEnv::cost_area_m2() const { return cfg_->floor_area_m2; }

EpisodeConfig heating_validation_window(HeatingPeriod period) {
  const std::int64_t val_start =
      (period == HeatingPeriod::Peak ? kPeakStartDay : kTypicalStartDay) * kHeatStepsPerDay;
  EpisodeConfig cfg;
  cfg.start_step = val_start - kHeatStepsPerDay;  // one warmup day before
  cfg.warmup = kHeatStepsPerDay;
  cfg.length = kValidationDays * kHeatStepsPerDay;
  return cfg;
}

EpisodeConfig heating_training_window(HeatingPeriod period) {
  // Warmup day plus 14 scored days that end exactly at the validation start.
  EpisodeConfig cfg = heating_validation_window(period);
  cfg.start_step -= kValidationDays * kHeatStepsPerDay;
  return cfg;
}

std::vector<double> read_price_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::vector<double> prices;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with("hour")) continue;
    std::stringstream ss(line);
    std::string hour, value;
    if (!std::getline(ss, hour, ',') || !std::getline(ss, value, ','))
      throw ConfigError("price file " + file.string() + ": expected hour,price rows");
    try {
      prices.push_back(std::stod(value));
    } catch (const std::exception&) {
      throw ConfigError("price file " + file.string() + ": bad number '" + value + "'");
    }
  }
  return prices;
}

void read_weather_csv(const std::filesystem::path& file, std::vector<double>& temp_c,
                      std::vector<double>& solar_kw) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  temp_c.clear();
  solar_kw.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with("step")) continue;
    std::stringstream ss(line);
    std::string step, temp, solar;
    if (!std::getline(ss, step, ',') || !std::getline(ss, temp, ',') ||
        !std::getline(ss, solar, ','))
      throw ConfigError("weather file " + file.string() +
                        ": expected step,outdoor_temp_c,solar_gain_kw rows");
    try {
      temp_c.push_back(std::stod(temp));
      solar_kw.push_back(std::stod(solar));
    } catch (const std::exception&) {
      throw ConfigError("weather file " + file.string() + ": bad row '" + line + "'");
    }
  }
}

}  // namespace emtree
