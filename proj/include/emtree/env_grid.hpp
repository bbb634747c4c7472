#pragma once

#include <array>
#include <cstdint>
#include <memory>

#include "emtree/env_core.hpp"

namespace emtree {

// Desk-scale surrogate of a six-device feeder: three passive loads
// (industrial, residential, EV garage), curtailable PV and wind plants, one
// battery, and a slack generator balancing the feeder. The same day repeats
// with three characteristic periods and linear ramps between them. Losses
// are quadratic per branch; constraint violations combine apparent-power
// overloads with a reactive-imbalance voltage surrogate; sustained violation
// collapses the grid.

inline constexpr int kGridStepsPerDay = 96;  // 15-minute steps

// Device order used for branches, previous-step features and loss terms.
enum GridDevice : int {
  kIndustrial = 0,
  kResidential = 1,
  kEvGarage = 2,
  kPv = 3,
  kWind = 4,
  kBattery = 5,
  kSlack = 6,
  kGridDeviceCount = 7,
};

// One cyclic breakpoint of the daily exogenous profile. Values between
// breakpoints are linearly interpolated (wrapping over midnight); a constant
// period is expressed by repeating its value at both period edges.
struct GridProfilePoint {
  double hour = 0.0;  // in [0, 24)
  double industrial_mw = 0.0;
  double residential_mw = 0.0;
  double ev_mw = 0.0;
  double pv_potential_mw = 0.0;
  double wind_potential_mw = 0.0;
};

struct GridConfig {
  std::vector<GridProfilePoint> profile;
  double load_reactive_ratio = 0.25;  // Q = ratio * P for the passive loads

  double battery_capacity_mwh = 50.0;
  double battery_power_mw = 30.0;
  double battery_reactive_mvar = 25.0;
  double round_trip_efficiency = 0.92;  // charge*discharge efficiency product

  double pv_power_mw = 30.0;
  double pv_reactive_mvar = 25.0;
  double wind_power_mw = 40.0;
  double wind_reactive_mvar = 25.0;

  std::array<double, kGridDeviceCount> branch_limit_mva{25, 16, 30, 32, 42, 33, 60};
  std::array<double, kGridDeviceCount> loss_coefficient{0.15, 0.15, 0.15, 0.15,
                                                        0.15, 0.15, 0.15};

  // Voltage surrogate: penalty_coeff * max(0, (|Q_slack| - deadband)/deadband).
  double voltage_penalty_coeff = 4.0;
  double reactive_deadband_mvar = 10.0;

  double collapse_threshold = 5.0;  // phi above this ...
  int collapse_steps = 3;           // ... for this many consecutive steps collapses

  double base_power_mva = 100.0;
  double timestep_hours = 0.25;

  static GridConfig defaults();

  // Charge efficiency; the same factor divides discharged energy, so the
  // round trip multiplies to round_trip_efficiency.
  double step_efficiency() const;
};

struct GridState {
  std::int64_t step_index = 0;  // absolute step; hour of day = (step % 96) / 4
  double soc_mwh = 0.0;
  // Previous-step P and Q per device, interleaved [P0,Q0,P1,Q1,...].
  std::array<double, 2 * kGridDeviceCount> prev_pq{};
  int violation_streak = 0;
  bool collapsed = false;
};

class GridEnv : public Environment {
 public:
  explicit GridEnv(std::shared_ptr<const GridConfig> config);

  EnvKind kind() const override { return EnvKind::Grid; }
  const std::vector<FeatureSpec>& features() const override;
  const std::vector<ActionSpec>& actions() const override;

  // Seed (or an explicit cfg.start_step) selects the start time of day; the
  // battery starts at half capacity and previous-step powers take the
  // uncurtailed profile values.
  void reset(const EpisodeConfig& cfg) override;

  // 18 features: previous-step P/Q of all seven devices, the two uncurtailed
  // renewable potentials, the state of charge, and the time of day.
  Observation observe() const override;

  // Actions: [pv curtail MW, pv Q MVAr, wind curtail MW, wind Q MVAr,
  // battery P MW (positive discharges), battery Q MVAr].
  StepOutcome step(std::span<const double> actions) override;
  using Environment::step;

  const GridState& state() const { return state_; }

  struct Exogenous {
    double industrial_mw, residential_mw, ev_mw, pv_potential_mw, wind_potential_mw;
  };
  Exogenous exogenous_at(std::int64_t step) const;

  // Deterministic seed -> start-of-day step assignment used by reset.
  static std::int64_t start_step_for_seed(std::uint64_t seed);

 private:
  std::shared_ptr<const GridConfig> cfg_;
  std::vector<FeatureSpec> features_;
  std::vector<ActionSpec> actions_;
  GridState state_;
};

std::shared_ptr<const GridConfig> make_grid_config(GridConfig cfg);

// CSV ingestion for the daily profiles; columns
// hour,industrial_mw,residential_mw,ev_mw,pv_potential_mw,wind_potential_mw.
std::vector<GridProfilePoint> read_profile_csv(const std::filesystem::path& file);

}  // namespace emtree
