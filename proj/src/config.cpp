#include "emtree/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace emtree {

using json = nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

// Byte offset -> 1-based line number for parse errors.
int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.contains(key))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

void parse_grid(const json& j, GridConfig& cfg, const std::filesystem::path& base_dir) {
  require_keys(j, "grid",
               {"profiles_csv", "load_reactive_ratio", "battery_capacity_mwh",
                "battery_power_mw", "battery_reactive_mvar", "round_trip_efficiency",
                "pv_power_mw", "pv_reactive_mvar", "wind_power_mw", "wind_reactive_mvar",
                "branch_limits_mva", "loss_coefficients", "voltage_penalty_coeff",
                "reactive_deadband_mvar", "collapse_threshold", "collapse_steps"});
  if (j.contains("profiles_csv"))
    cfg.profile = read_profile_csv(base_dir / j.at("profiles_csv").get<std::string>());
  cfg.load_reactive_ratio = get_or(j, "load_reactive_ratio", cfg.load_reactive_ratio);
  cfg.battery_capacity_mwh = get_or(j, "battery_capacity_mwh", cfg.battery_capacity_mwh);
  cfg.battery_power_mw = get_or(j, "battery_power_mw", cfg.battery_power_mw);
  cfg.battery_reactive_mvar =
      get_or(j, "battery_reactive_mvar", cfg.battery_reactive_mvar);
  cfg.round_trip_efficiency =
      get_or(j, "round_trip_efficiency", cfg.round_trip_efficiency);
  cfg.pv_power_mw = get_or(j, "pv_power_mw", cfg.pv_power_mw);
  cfg.pv_reactive_mvar = get_or(j, "pv_reactive_mvar", cfg.pv_reactive_mvar);
  cfg.wind_power_mw = get_or(j, "wind_power_mw", cfg.wind_power_mw);
  cfg.wind_reactive_mvar = get_or(j, "wind_reactive_mvar", cfg.wind_reactive_mvar);
  cfg.voltage_penalty_coeff =
      get_or(j, "voltage_penalty_coeff", cfg.voltage_penalty_coeff);
  cfg.reactive_deadband_mvar =
      get_or(j, "reactive_deadband_mvar", cfg.reactive_deadband_mvar);
  cfg.collapse_threshold = get_or(j, "collapse_threshold", cfg.collapse_threshold);
  cfg.collapse_steps = get_or(j, "collapse_steps", cfg.collapse_steps);

  static const char* device_names[kGridDeviceCount] = {
      "industrial", "residential", "ev", "pv", "wind", "battery", "slack"};
  if (j.contains("branch_limits_mva")) {
    const json& b = j.at("branch_limits_mva");
    require_keys(b, "grid.branch_limits_mva",
                 {"industrial", "residential", "ev", "pv", "wind", "battery", "slack"});
    for (int d = 0; d < kGridDeviceCount; ++d)
      cfg.branch_limit_mva[d] = get_or(b, device_names[d], cfg.branch_limit_mva[d]);
  }
  if (j.contains("loss_coefficients")) {
    const json& l = j.at("loss_coefficients");
    if (l.is_number()) {
      cfg.loss_coefficient.fill(l.get<double>());
    } else {
      require_keys(l, "grid.loss_coefficients",
                   {"industrial", "residential", "ev", "pv", "wind", "battery", "slack"});
      for (int d = 0; d < kGridDeviceCount; ++d)
        cfg.loss_coefficient[d] = get_or(l, device_names[d], cfg.loss_coefficient[d]);
    }
  }
}

void parse_heating(const json& j, HeatingConfig& cfg,
                   const std::filesystem::path& base_dir) {
  require_keys(j, "heating",
               {"scenario", "period", "resistance_k_per_kw", "capacitance_kwh_per_k",
                "nominal_heat_kw", "cop", "aux_load_kw", "floor_area_m2",
                "initial_temp_c", "price_csv", "weather_csv"});
  if (j.contains("scenario"))
    cfg.pricing = pricing_from_string(j.at("scenario").get<std::string>());
  if (j.contains("period"))
    cfg.period = period_from_string(j.at("period").get<std::string>());
  cfg.resistance_k_per_kw = get_or(j, "resistance_k_per_kw", cfg.resistance_k_per_kw);
  cfg.capacitance_kwh_per_k =
      get_or(j, "capacitance_kwh_per_k", cfg.capacitance_kwh_per_k);
  cfg.nominal_heat_kw = get_or(j, "nominal_heat_kw", cfg.nominal_heat_kw);
  cfg.aux_load_kw = get_or(j, "aux_load_kw", cfg.aux_load_kw);
  cfg.floor_area_m2 = get_or(j, "floor_area_m2", cfg.floor_area_m2);
  cfg.initial_temp_c = get_or(j, "initial_temp_c", cfg.initial_temp_c);
  if (j.contains("cop")) {
    const json& c = j.at("cop");
    require_keys(c, "heating.cop", {"kind", "value", "intercept", "slope"});
    const std::string kind = c.at("kind").get<std::string>();
    if (kind == "constant") {
      cfg.cop.affine = false;
      cfg.cop.constant = get_or(c, "value", cfg.cop.constant);
    } else if (kind == "affine") {
      cfg.cop.affine = true;
      cfg.cop.intercept = get_or(c, "intercept", cfg.cop.intercept);
      cfg.cop.slope = get_or(c, "slope", cfg.cop.slope);
    } else {
      throw ConfigError("heating.cop: unknown kind '" + kind + "'");
    }
  }
  if (j.contains("price_csv"))
    cfg.hourly_prices = read_price_csv(base_dir / j.at("price_csv").get<std::string>());
  if (j.contains("weather_csv"))
    read_weather_csv(base_dir / j.at("weather_csv").get<std::string>(),
                     cfg.weather_temp_c, cfg.weather_solar_kw);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& origin,
                                         const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ":" + std::to_string(line_of(text, e.byte)) + ": " +
                      e.what());
  }
  try {
    require_keys(j, origin,
                 {"schema_version", "environment", "experiment", "grid", "heating"});
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion)
      throw ConfigError(origin + ": unsupported schema_version (expected " +
                        std::to_string(kSchemaVersion) + ")");
    ExperimentConfig cfg;
    cfg.environment = j.at("environment").get<std::string>();
    if (cfg.environment != "grid" && cfg.environment != "heating")
      throw ConfigError(origin + ": environment must be \"grid\" or \"heating\"");

    if (j.contains("experiment")) {
      const json& e = j.at("experiment");
      require_keys(e, "experiment",
                   {"tree_nodes", "lambda", "generations", "restarts", "master_seed",
                    "per_generation_schedule", "training_steps", "validation_steps"});
      cfg.tree_nodes = get_or(e, "tree_nodes", cfg.tree_nodes);
      cfg.lambda_override = get_or(e, "lambda", cfg.lambda_override);
      cfg.generations = get_or(e, "generations", cfg.generations);
      cfg.restarts = get_or(e, "restarts", cfg.restarts);
      cfg.master_seed = get_or(e, "master_seed", cfg.master_seed);
      cfg.per_generation_schedule =
          get_or(e, "per_generation_schedule", cfg.per_generation_schedule);
      cfg.training_steps = get_or(e, "training_steps", cfg.training_steps);
      cfg.validation_steps = get_or(e, "validation_steps", cfg.validation_steps);
    }
    if (cfg.tree_nodes < 1) throw ConfigError(origin + ": tree_nodes must be >= 1");
    if (cfg.generations < 1) throw ConfigError(origin + ": generations must be >= 1");
    if (cfg.restarts < 1) throw ConfigError(origin + ": restarts must be >= 1");
    if (cfg.training_steps < 1) throw ConfigError(origin + ": training_steps must be >= 1");

    cfg.grid = GridConfig::defaults();
    cfg.heating = HeatingConfig::defaults();
    if (j.contains("grid")) {
      if (cfg.environment != "grid")
        throw ConfigError(origin + ": 'grid' section in a heating experiment");
      parse_grid(j.at("grid"), cfg.grid, base_dir);
    }
    if (j.contains("heating")) {
      if (cfg.environment != "heating")
        throw ConfigError(origin + ": 'heating' section in a grid experiment");
      parse_heating(j.at("heating"), cfg.heating, base_dir);
    }
    // Run the cross-field validations once so broken configs fail at load.
    if (cfg.environment == "grid") make_grid_config(cfg.grid);
    else make_heating_config(cfg.heating);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), file.string(), file.parent_path());
}

}  // namespace emtree
