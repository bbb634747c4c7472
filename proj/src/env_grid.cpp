#include "emtree/env_grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "emtree/rng.hpp"

namespace emtree {

GridConfig GridConfig::defaults() {
  GridConfig cfg;
  // Three characteristic daily regimes: a windy low-demand night, two
  // commute peaks driven by the EV garage, and sunny working hours with high
  // industrial demand. Repeated hours at the period edges hold the values
  // constant inside a period; the gaps ramp linearly.
  const auto night = [](double h) {
    return GridProfilePoint{h, 4.0, 2.0, 0.0, 0.0, 28.0};
  };
  const auto commute = [](double h) {
    return GridProfilePoint{h, 10.0, 12.0, 25.0, 4.0, 6.0};
  };
  const auto work = [](double h) {
    return GridProfilePoint{h, 20.0, 4.0, 0.0, 24.0, 20.0};
  };
  cfg.profile = {night(6.0),   commute(8.0), commute(11.0), work(13.0),
                 work(16.0),  commute(18.0), commute(21.0), night(23.0)};
  return cfg;
}

double GridConfig::step_efficiency() const { return std::sqrt(round_trip_efficiency); }

std::shared_ptr<const GridConfig> make_grid_config(GridConfig cfg) {
  if (cfg.profile.empty()) throw ConfigError("grid: profile must have breakpoints");
  for (const GridProfilePoint& p : cfg.profile)
    if (p.hour < 0.0 || p.hour >= 24.0)
      throw ConfigError("grid: profile hours must lie in [0, 24)");
  if (!std::is_sorted(cfg.profile.begin(), cfg.profile.end(),
                      [](const auto& a, const auto& b) { return a.hour < b.hour; }))
    throw ConfigError("grid: profile breakpoints must be sorted by hour");
  for (double lim : cfg.branch_limit_mva)
    if (!(lim > 0.0)) throw ConfigError("grid: branch limits must be positive");
  if (!(cfg.battery_capacity_mwh > 0.0) || !(cfg.battery_power_mw > 0.0))
    throw ConfigError("grid: battery capacity and power must be positive");
  if (!(cfg.round_trip_efficiency > 0.0 && cfg.round_trip_efficiency <= 1.0))
    throw ConfigError("grid: round-trip efficiency must be in (0, 1]");
  if (!(cfg.reactive_deadband_mvar > 0.0))
    throw ConfigError("grid: reactive deadband must be positive");
  if (cfg.collapse_steps < 1) throw ConfigError("grid: collapse_steps must be >= 1");
  return std::make_shared<const GridConfig>(std::move(cfg));
}

GridEnv::GridEnv(std::shared_ptr<const GridConfig> config) : cfg_(std::move(config)) {
  const GridConfig& c = *cfg_;
  const double qr = c.load_reactive_ratio;
  double ind_max = 0, res_max = 0, ev_max = 0;
  for (const GridProfilePoint& p : c.profile) {
    ind_max = std::max(ind_max, p.industrial_mw);
    res_max = std::max(res_max, p.residential_mw);
    ev_max = std::max(ev_max, p.ev_mw);
  }
  const double slack_p = ind_max + res_max + ev_max + c.battery_power_mw +
                         c.pv_power_mw + c.wind_power_mw;
  const double slack_q = (ind_max + res_max + ev_max) * qr + c.pv_reactive_mvar +
                         c.wind_reactive_mvar + c.battery_reactive_mvar;
  features_ = {
      FeatureSpec{"p_industrial_mw", 0.0, std::max(1.0, ind_max)},
      FeatureSpec{"q_industrial_mvar", 0.0, std::max(0.5, ind_max * qr)},
      FeatureSpec{"p_residential_mw", 0.0, std::max(1.0, res_max)},
      FeatureSpec{"q_residential_mvar", 0.0, std::max(0.5, res_max * qr)},
      FeatureSpec{"p_ev_mw", 0.0, std::max(1.0, ev_max)},
      FeatureSpec{"q_ev_mvar", 0.0, std::max(0.5, ev_max * qr)},
      FeatureSpec{"p_pv_mw", 0.0, c.pv_power_mw},
      FeatureSpec{"q_pv_mvar", -c.pv_reactive_mvar, c.pv_reactive_mvar},
      FeatureSpec{"p_wind_mw", 0.0, c.wind_power_mw},
      FeatureSpec{"q_wind_mvar", -c.wind_reactive_mvar, c.wind_reactive_mvar},
      FeatureSpec{"p_battery_mw", -c.battery_power_mw, c.battery_power_mw},
      FeatureSpec{"q_battery_mvar", -c.battery_reactive_mvar, c.battery_reactive_mvar},
      FeatureSpec{"p_slack_mw", -slack_p, slack_p},
      FeatureSpec{"q_slack_mvar", -slack_q, slack_q},
      FeatureSpec{"p_pv_potential_mw", 0.0, c.pv_power_mw},
      FeatureSpec{"p_wind_potential_mw", 0.0, c.wind_power_mw},
      FeatureSpec{"battery_soc_mwh", 0.0, c.battery_capacity_mwh},
      FeatureSpec{"time_of_day_h", 0.0, 24.0},
  };
  actions_ = {
      ActionSpec::continuous("pv_curtail_mw", 0.0, c.pv_power_mw),
      ActionSpec::continuous("pv_q_mvar", -c.pv_reactive_mvar, c.pv_reactive_mvar),
      ActionSpec::continuous("wind_curtail_mw", 0.0, c.wind_power_mw),
      ActionSpec::continuous("wind_q_mvar", -c.wind_reactive_mvar, c.wind_reactive_mvar),
      ActionSpec::continuous("battery_p_mw", -c.battery_power_mw, c.battery_power_mw),
      ActionSpec::continuous("battery_q_mvar", -c.battery_reactive_mvar,
                             c.battery_reactive_mvar),
  };
}

const std::vector<FeatureSpec>& GridEnv::features() const { return features_; }
const std::vector<ActionSpec>& GridEnv::actions() const { return actions_; }

GridEnv::Exogenous GridEnv::exogenous_at(std::int64_t step) const {
  const auto& pts = cfg_->profile;
  const double hour =
      static_cast<double>(step % kGridStepsPerDay) * cfg_->timestep_hours;
  // Cyclic linear interpolation between the bracketing breakpoints.
  std::size_t next = 0;
  while (next < pts.size() && pts[next].hour <= hour) ++next;
  const std::size_t hi = next % pts.size();
  const std::size_t lo = (next + pts.size() - 1) % pts.size();
  double span = pts[hi].hour - pts[lo].hour;
  double offset = hour - pts[lo].hour;
  if (span <= 0.0) span += 24.0;
  if (offset < 0.0) offset += 24.0;
  const double w = span > 0.0 ? offset / span : 0.0;
  const auto lerp = [w](double a, double b) { return a + w * (b - a); };
  return Exogenous{
      lerp(pts[lo].industrial_mw, pts[hi].industrial_mw),
      lerp(pts[lo].residential_mw, pts[hi].residential_mw),
      lerp(pts[lo].ev_mw, pts[hi].ev_mw),
      lerp(pts[lo].pv_potential_mw, pts[hi].pv_potential_mw),
      lerp(pts[lo].wind_potential_mw, pts[hi].wind_potential_mw),
  };
}

std::int64_t GridEnv::start_step_for_seed(std::uint64_t seed) {
  return static_cast<std::int64_t>(splitmix64(seed) % kGridStepsPerDay);
}

void GridEnv::reset(const EpisodeConfig& cfg) {
  state_ = GridState{};
  state_.step_index = cfg.start_step >= 0 ? cfg.start_step % kGridStepsPerDay
                                          : start_step_for_seed(cfg.seed);
  state_.soc_mwh = 0.5 * cfg_->battery_capacity_mwh;

  // Previous-step powers start from the uncurtailed profile values.
  const Exogenous exo = exogenous_at(state_.step_index);
  const double qr = cfg_->load_reactive_ratio;
  auto& pq = state_.prev_pq;
  pq[2 * kIndustrial] = exo.industrial_mw;
  pq[2 * kIndustrial + 1] = exo.industrial_mw * qr;
  pq[2 * kResidential] = exo.residential_mw;
  pq[2 * kResidential + 1] = exo.residential_mw * qr;
  pq[2 * kEvGarage] = exo.ev_mw;
  pq[2 * kEvGarage + 1] = exo.ev_mw * qr;
  pq[2 * kPv] = exo.pv_potential_mw;
  pq[2 * kPv + 1] = 0.0;
  pq[2 * kWind] = exo.wind_potential_mw;
  pq[2 * kWind + 1] = 0.0;
  pq[2 * kBattery] = 0.0;
  pq[2 * kBattery + 1] = 0.0;
  pq[2 * kSlack] = exo.industrial_mw + exo.residential_mw + exo.ev_mw -
                   exo.pv_potential_mw - exo.wind_potential_mw;
  pq[2 * kSlack + 1] = (exo.industrial_mw + exo.residential_mw + exo.ev_mw) * qr;
}

Observation GridEnv::observe() const {
  const Exogenous exo = exogenous_at(state_.step_index);
  Observation obs;
  obs.step = state_.step_index;
  obs.values.reserve(18);
  for (double v : state_.prev_pq) obs.values.push_back(v);
  obs.values.push_back(exo.pv_potential_mw);
  obs.values.push_back(exo.wind_potential_mw);
  obs.values.push_back(state_.soc_mwh);
  obs.values.push_back(static_cast<double>(state_.step_index % kGridStepsPerDay) *
                       cfg_->timestep_hours);
  return obs;
}

StepOutcome GridEnv::step(std::span<const double> actions) {
  if (state_.collapsed) throw EvalError("grid: stepping a collapsed grid");
  if (actions.size() != actions_.size())
    throw EvalError("grid: expected " + std::to_string(actions_.size()) + " actions, got " +
                    std::to_string(actions.size()));
  StepOutcome out;

  double a[6];
  for (int i = 0; i < 6; ++i) {
    const ActionSpec& spec = actions_[i];
    a[i] = std::clamp(actions[i], spec.lo, spec.hi);
    if (std::abs(a[i] - actions[i]) > 1e-12) out.action_clamped = true;
  }

  const GridConfig& c = *cfg_;
  const double dt = c.timestep_hours;
  const double eta = c.step_efficiency();
  const Exogenous exo = exogenous_at(state_.step_index);

  // Renewables deliver the curtailed potential; loads follow the profile.
  const double pv_p = std::min(exo.pv_potential_mw, a[0]);
  const double pv_q = a[1];
  const double wind_p = std::min(exo.wind_potential_mw, a[2]);
  const double wind_q = a[3];

  // Battery setpoint, positive discharges into the feeder. Realized power is
  // limited by the converter rating and the energy available / storable.
  double discharge = 0.0, charge = 0.0;
  if (a[4] >= 0.0) {
    discharge = std::min(a[4], eta * state_.soc_mwh / dt);
  } else {
    charge = std::min(-a[4], (c.battery_capacity_mwh - state_.soc_mwh) / (eta * dt));
  }
  const double batt_p = discharge - charge;
  const double batt_q = a[5];
  state_.soc_mwh += eta * charge * dt - discharge * dt / eta;

  const double qr = c.load_reactive_ratio;
  const double load_p = exo.industrial_mw + exo.residential_mw + exo.ev_mw;
  const double load_q = load_p * qr;
  const double slack_p = load_p + charge - pv_p - wind_p - discharge;
  const double slack_q = load_q - pv_q - wind_q - batt_q;

  const double pq[2 * kGridDeviceCount] = {
      exo.industrial_mw, exo.industrial_mw * qr,
      exo.residential_mw, exo.residential_mw * qr,
      exo.ev_mw, exo.ev_mw * qr,
      pv_p, pv_q,
      wind_p, wind_q,
      batt_p, batt_q,
      slack_p, slack_q,
  };

  double loss = 0.0;
  double phi = 0.0;
  for (int d = 0; d < kGridDeviceCount; ++d) {
    const double p_pu = pq[2 * d] / c.base_power_mva;
    const double q_pu = pq[2 * d + 1] / c.base_power_mva;
    loss += c.loss_coefficient[d] * (p_pu * p_pu + q_pu * q_pu);
    const double apparent = std::hypot(pq[2 * d], pq[2 * d + 1]);
    phi += std::max(0.0, (apparent - c.branch_limit_mva[d]) / c.branch_limit_mva[d]);
  }
  // Voltage surrogate: net reactive imbalance beyond the deadband.
  phi += c.voltage_penalty_coeff *
         std::max(0.0, (std::abs(slack_q) - c.reactive_deadband_mvar) /
                           c.reactive_deadband_mvar);

  out.energy_loss = loss;
  out.penalty = phi;

  state_.violation_streak = phi > c.collapse_threshold ? state_.violation_streak + 1 : 0;
  if (state_.violation_streak >= c.collapse_steps) {
    state_.collapsed = true;
    out.collapsed = true;
  }

  std::copy(std::begin(pq), std::end(pq), state_.prev_pq.begin());
  ++state_.step_index;
  return out;
}

std::vector<GridProfilePoint> read_profile_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::vector<GridProfilePoint> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with("hour")) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("profile file " + file.string() + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != 6)
      throw ConfigError("profile file " + file.string() +
                        ": expected hour,industrial_mw,residential_mw,ev_mw,"
                        "pv_potential_mw,wind_potential_mw rows");
    points.push_back(GridProfilePoint{row[0], row[1], row[2], row[3], row[4], row[5]});
  }
  return points;
}

}  // namespace emtree
