#pragma once

#include <cstdint>
#include <memory>

#include "emtree/env_core.hpp"

namespace emtree {

// Desk-scale surrogate of a hydronic-heat-pump household: a single-node RC
// thermal model driven by synthetic (or CSV) weather, a modulating 15 kW
// heat pump commanded on 11 levels, three electricity pricing scenarios and
// an occupancy-dependent comfort band. The simulated year starts on Monday,
// January 1st, 00:00, with 15-minute steps.

inline constexpr int kHeatStepsPerDay = 96;
inline constexpr int kHeatStepsPerYear = 365 * kHeatStepsPerDay;

enum class PricingKind { Constant, Dynamic, HighlyDynamic };
enum class HeatingPeriod { Peak, Typical };

const char* to_string(PricingKind kind);
const char* to_string(HeatingPeriod period);
PricingKind pricing_from_string(const std::string& s);
HeatingPeriod period_from_string(const std::string& s);

struct CopModel {
  bool affine = false;
  double constant = 3.0;
  // affine variant: max(1, intercept + slope * t_out)
  double intercept = 6.0;
  double slope = 0.1;

  double at(double t_out_c) const;
};

struct HeatingConfig {
  PricingKind pricing = PricingKind::Constant;
  HeatingPeriod period = HeatingPeriod::Peak;

  double resistance_k_per_kw = 5.0;    // R
  double capacitance_kwh_per_k = 10.0; // C (time constant R*C = 50 h)
  double nominal_heat_kw = 15.0;
  CopModel cop;
  double aux_load_kw = 0.1;  // fan + circulation pump draw whenever u > 0
  double floor_area_m2 = 192.0;
  double initial_temp_c = 21.0;

  double occupied_lower_c = 21.0;
  double occupied_upper_c = 24.0;
  double unoccupied_lower_c = 15.0;
  double unoccupied_upper_c = 30.0;

  double constant_price = 0.2535;
  double dynamic_on_peak = 0.2666;   // 07:00-22:00
  double dynamic_off_peak = 0.2383;

  double timestep_hours = 0.25;

  // Hourly series for the highly dynamic scenario; defaults to the synthetic
  // generator, replaceable from CSV.
  std::vector<double> hourly_prices;

  // Optional per-step weather overrides (length >= episode span when set);
  // empty means the built-in synthetic generator.
  std::vector<double> weather_temp_c;
  std::vector<double> weather_solar_kw;

  static HeatingConfig defaults();
};

struct HeatingState {
  std::int64_t step_index = 0;
  double indoor_temp_c = 21.0;
};

class HeatingEnv : public Environment {
 public:
  explicit HeatingEnv(std::shared_ptr<const HeatingConfig> config);

  EnvKind kind() const override { return EnvKind::Heating; }
  const std::vector<FeatureSpec>& features() const override;
  const std::vector<ActionSpec>& actions() const override;

  void reset(const EpisodeConfig& cfg) override;

  // 5 features: electricity price, indoor temperature, lower and upper
  // comfort bounds, time of week (hours since Monday 00:00).
  Observation observe() const override;

  // Single channel: heat pump modulation u in {0.0, 0.1, ..., 1.0}. Values
  // off the grid snap to the nearest level and are flagged. The temperature
  // update is the exact step response of the linear RC node with the
  // exogenous inputs held constant over the step.
  StepOutcome step(std::span<const double> actions) override;
  using Environment::step;

  double cost_area_m2() const override;

  const HeatingState& state() const { return state_; }

  bool occupied_at(std::int64_t step) const;
  struct Band {
    double lower, upper;
  };
  Band comfort_band(std::int64_t step) const;
  double price_at(std::int64_t step) const;
  double outdoor_temp_c(std::int64_t step) const;
  double solar_gain_kw(std::int64_t step) const;

 private:
  std::shared_ptr<const HeatingConfig> cfg_;
  std::vector<FeatureSpec> features_;
  std::vector<ActionSpec> actions_;
  HeatingState state_;
};

std::shared_ptr<const HeatingConfig> make_heating_config(HeatingConfig cfg);

// Validation windows: Jan 17-31 (peak) and Apr 19 - May 3 (typical), 14 days
// each with one warmup day before. Training runs over the 14 days that end
// at the validation start, again after one warmup day, i.e. it begins 15
// days before the validation period.
EpisodeConfig heating_validation_window(HeatingPeriod period);
EpisodeConfig heating_training_window(HeatingPeriod period);

// Deterministic synthetic hourly day-ahead-style price series (8760 values)
// shaped to a tight interquartile band with occasional spikes.
std::vector<double> synthetic_hourly_prices();

// CSV ingestion: `hour,price_eur_per_kwh` rows (8760 of them) and
// `step,outdoor_temp_c,solar_gain_kw` rows for weather.
std::vector<double> read_price_csv(const std::filesystem::path& file);
void read_weather_csv(const std::filesystem::path& file,
                      std::vector<double>& temp_c, std::vector<double>& solar_kw);

}  // namespace emtree
