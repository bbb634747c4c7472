#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "emtree/env_core.hpp"
#include "emtree/rng.hpp"
#include "emtree/trainer.hpp"
#include "emtree/version.hpp"

namespace fs = std::filesystem;
using emtree::ConfigError;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitRuntime = 4;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

// The manifest goes to disk before any long computation starts.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::string& config_path, std::uint64_t master_seed) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config"] = config_path;
  j["out_dir"] = out_dir.string();
  j["master_seed"] = master_seed;
  j["started_at"] = iso_timestamp();
  j["tool_version"] = emtree::kVersion;
  write_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  // "0..9", "0-9" or a single integer.
  const auto parse_one = [&](const std::string& s) {
    try {
      return static_cast<std::uint64_t>(std::stoull(s));
    } catch (const std::exception&) {
      throw ConfigError("bad seed range '" + text + "'");
    }
  };
  for (const std::string& sep : {std::string(".."), std::string("-")}) {
    const auto pos = text.find(sep);
    if (pos != std::string::npos) {
      const std::uint64_t lo = parse_one(text.substr(0, pos));
      const std::uint64_t hi = parse_one(text.substr(pos + sep.size()));
      if (hi < lo) throw ConfigError("bad seed range '" + text + "'");
      std::vector<std::uint64_t> seeds;
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
      return seeds;
    }
  }
  return {parse_one(text)};
}

emtree::ExperimentConfig load_config(const std::string& path, std::int64_t seed_flag) {
  emtree::ExperimentConfig cfg = emtree::load_experiment_config(path);
  if (seed_flag >= 0) cfg.master_seed = static_cast<std::uint64_t>(seed_flag);
  return cfg;
}

void write_validation_outputs(const fs::path& out_dir, const emtree::ExperimentConfig& cfg,
                              emtree::TreeEnsemble& ems,
                              const std::vector<std::uint64_t>& seeds) {
  const emtree::ValidationSummary summary = emtree::validate(cfg, ems, seeds);
  write_file(out_dir / "validation.json", emtree::validation_to_json(summary));

  // Per-episode traces alongside the summary.
  if (cfg.is_grid()) {
    const auto grid_cfg = emtree::make_grid_config(cfg.grid);
    for (std::uint64_t seed : summary.grid.seeds) {
      emtree::GridEnv env(grid_cfg);
      emtree::EpisodeConfig episode;
      episode.length = cfg.validation_steps;
      episode.seed = seed;
      const emtree::EvalReport report = emtree::evaluate_episode(env, ems, episode);
      std::ofstream out(out_dir / ("trace_seed" + std::to_string(seed) + ".csv"));
      emtree::write_trace_csv(out, report, env.features(), env.actions());
    }
  } else {
    for (const emtree::HeatingCase& c : summary.heating) {
      emtree::HeatingConfig hc = cfg.heating;
      hc.pricing = c.scenario;
      hc.period = c.period;
      emtree::HeatingEnv env(emtree::make_heating_config(std::move(hc)));
      const emtree::EvalReport report =
          emtree::evaluate_episode(env, ems, emtree::heating_validation_window(c.period));
      std::ofstream out(out_dir / (std::string("trace_") + emtree::to_string(c.scenario) +
                                   "_" + emtree::to_string(c.period) + ".csv"));
      emtree::write_trace_csv(out, report, env.features(), env.actions());
    }
  }
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::int64_t seed_flag, int workers) {
  const emtree::ExperimentConfig cfg = load_config(config_path, seed_flag);
  fs::create_directories(out_dir);
  write_manifest(out_dir, "train", config_path, cfg.master_seed);

  const emtree::TrainedEms trained = emtree::train(cfg, workers);

  emtree::save_ensemble(trained.winner, fs::path(out_dir) / "winner.json");
  write_file(fs::path(out_dir) / "winner.dot", emtree::to_dot(trained.winner));
  emtree::write_genome_csv(fs::path(out_dir) / "winner_genome.csv", trained.winner_genome);
  for (std::size_t r = 0; r < trained.restarts.size(); ++r) {
    std::ofstream out(fs::path(out_dir) / ("restart_" + std::to_string(r) + "_history.csv"));
    emtree::write_history_csv(out, trained.restarts[r].history);
  }
  nlohmann::ordered_json scores = nlohmann::ordered_json::array();
  for (const auto& r : trained.restarts) scores.push_back(r.score);
  nlohmann::ordered_json j;
  j["winner_restart"] = trained.winner_restart;
  j["restart_best_scores"] = scores;
  write_file(fs::path(out_dir) / "training.json", j.dump(2) + "\n");
  write_file(fs::path(out_dir) / "validation.json",
             emtree::validation_to_json(trained.validation));
  std::cout << "winner: restart " << trained.winner_restart << ", training score "
            << trained.restarts[trained.winner_restart].score << "\n"
            << "artifacts written to " << out_dir << "\n";
  return 0;
}

int cmd_validate(const std::string& ems_path, const std::string& config_path,
                 const std::string& out_dir, std::int64_t seed_flag,
                 const std::string& seeds_text) {
  const emtree::ExperimentConfig cfg = load_config(config_path, seed_flag);
  emtree::TreeEnsemble ems = emtree::load_ensemble(ems_path);
  fs::create_directories(out_dir);
  write_manifest(out_dir, "validate", config_path, cfg.master_seed);
  const std::vector<std::uint64_t> seeds = parse_seed_range(seeds_text);
  write_validation_outputs(out_dir, cfg, ems, seeds);
  std::cout << "validation summary written to " << out_dir << "\n";
  return 0;
}

int cmd_export(const std::string& ems_path, const std::string& format,
               const std::string& out_path) {
  const emtree::TreeEnsemble ems = emtree::load_ensemble(ems_path);
  if (format == "dot") {
    write_file(out_path, emtree::to_dot(ems));
  } else if (format == "json") {
    write_file(out_path, emtree::ensemble_to_json(ems));
  } else {
    throw ConfigError("unknown export format '" + format + "'");
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_baseline(const std::string& name, const std::string& config_path,
                 const std::string& out_dir, std::int64_t seed_flag,
                 const std::string& seeds_text) {
  const emtree::ExperimentConfig cfg = load_config(config_path, seed_flag);
  fs::create_directories(out_dir);
  write_manifest(out_dir, "baseline:" + name, config_path, cfg.master_seed);

  nlohmann::ordered_json j;
  if (cfg.is_grid()) {
    if (name == "thermostat")
      throw ConfigError("the thermostat baseline requires the heating environment");
    const auto grid_cfg = emtree::make_grid_config(cfg.grid);
    const std::vector<std::uint64_t> seeds = parse_seed_range(seeds_text);
    std::vector<double> scores;
    int collapses = 0;
    for (std::uint64_t seed : seeds) {
      emtree::GridEnv env(grid_cfg);
      emtree::EpisodeConfig episode;
      episode.length = cfg.validation_steps;
      episode.seed = seed;
      // Fresh uniform action draw every step.
      emtree::Rng rng(emtree::mix_seed(cfg.master_seed, seed));
      const auto& specs = env.actions();
      const emtree::Controller controller = [&](const emtree::Observation&) {
        std::vector<double> actions(specs.size());
        for (std::size_t i = 0; i < specs.size(); ++i)
          actions[i] = rng.uniform(specs[i].lo, specs[i].hi);
        return actions;
      };
      const emtree::EvalReport report = emtree::evaluate_episode(env, controller, episode);
      scores.push_back(report.discounted);
      collapses += report.collapsed ? 1 : 0;
    }
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double ss = 0.0;
    for (double s : scores) ss += (s - mean) * (s - mean);
    j["environment"] = "grid";
    j["policy"] = name;
    j["seeds"] = seeds;
    j["scores"] = scores;
    j["mean"] = mean;
    j["stddev"] = scores.size() > 1
                      ? std::sqrt(ss / static_cast<double>(scores.size() - 1))
                      : 0.0;
    j["collapses"] = collapses;
  } else {
    if (name != "random" && name != "thermostat")
      throw ConfigError("unknown baseline '" + name + "'");
    j["environment"] = "heating";
    j["policy"] = name;
    nlohmann::ordered_json cases = nlohmann::ordered_json::array();
    for (emtree::PricingKind scenario :
         {emtree::PricingKind::Constant, emtree::PricingKind::Dynamic,
          emtree::PricingKind::HighlyDynamic}) {
      for (emtree::HeatingPeriod period :
           {emtree::HeatingPeriod::Peak, emtree::HeatingPeriod::Typical}) {
        emtree::HeatingConfig hc = cfg.heating;
        hc.pricing = scenario;
        hc.period = period;
        emtree::HeatingEnv env(emtree::make_heating_config(std::move(hc)));
        emtree::Rng rng(emtree::mix_seed(cfg.master_seed,
                                         static_cast<std::uint64_t>(period) * 16 +
                                             static_cast<std::uint64_t>(scenario)));
        // Bang-bang just above the occupied lower band; the random policy
        // draws one of the 11 modulation levels each step.
        const double setpoint = cfg.heating.occupied_lower_c + 0.2;
        const emtree::Controller controller = [&](const emtree::Observation& obs) {
          double u;
          if (name == "thermostat") {
            u = obs.values[1] < setpoint ? 1.0 : 0.0;
          } else {
            u = static_cast<double>(rng.next_u64() % 11) / 10.0;
          }
          return std::vector<double>{u};
        };
        const emtree::EvalReport report = emtree::evaluate_episode(
            env, controller, emtree::heating_validation_window(period));
        cases.push_back({{"scenario", emtree::to_string(scenario)},
                         {"period", emtree::to_string(period)},
                         {"electricity_cost_eur", report.electricity_cost_eur},
                         {"electricity_cost_eur_per_m2", report.electricity_cost_eur_per_m2},
                         {"discomfort_kh", report.discomfort_kh},
                         {"weighted_objective", report.weighted}});
      }
    }
    j["cases"] = cases;
  }
  write_file(fs::path(out_dir) / "baseline.json", j.dump(2) + "\n");
  std::cout << "baseline summary written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesizes interpretable tree-based energy management controllers"};
  app.set_version_flag("--version", std::string(emtree::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir = "results", ems_path, format = "dot";
  std::string out_path, baseline_name, seeds_text = "0..9";
  std::int64_t seed_flag = -1;
  int workers = 0;

  CLI::App* train = app.add_subcommand("train", "Train an EMS from a config file");
  train->add_option("--config", config_path, "experiment config (JSON)")->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--seed", seed_flag, "master seed (overrides the config)");
  train->add_option("--workers", workers, "evaluation threads (0 = all cores)");

  CLI::App* validate = app.add_subcommand("validate", "Validate a saved EMS");
  validate->add_option("--ems", ems_path, "ensemble JSON file")->required();
  validate->add_option("--config", config_path, "experiment config (JSON)")->required();
  validate->add_option("--out", out_dir, "output directory");
  validate->add_option("--seed", seed_flag, "master seed (overrides the config)");
  validate->add_option("--seeds", seeds_text, "validation seed range, e.g. 0..9");
  validate->add_option("--workers", workers, "evaluation threads");

  CLI::App* exp = app.add_subcommand("export", "Export a saved EMS as DOT or JSON");
  exp->add_option("--ems", ems_path, "ensemble JSON file")->required();
  exp->add_option("--format", format, "dot|json")
      ->check(CLI::IsMember({"dot", "json"}));
  exp->add_option("--out", out_path, "output file")->required();

  CLI::App* baseline = app.add_subcommand("baseline", "Run a trivial baseline policy");
  baseline->add_option("--name", baseline_name, "random|thermostat")
      ->required()
      ->check(CLI::IsMember({"random", "thermostat"}));
  baseline->add_option("--config", config_path, "experiment config (JSON)")->required();
  baseline->add_option("--out", out_dir, "output directory");
  baseline->add_option("--seed", seed_flag, "master seed (overrides the config)");
  baseline->add_option("--seeds", seeds_text, "episode seed range, e.g. 0..49");
  baseline->add_option("--workers", workers, "evaluation threads");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(config_path, out_dir, seed_flag, workers);
    if (validate->parsed())
      return cmd_validate(ems_path, config_path, out_dir, seed_flag, seeds_text);
    if (exp->parsed()) return cmd_export(ems_path, format, out_path);
    if (baseline->parsed())
      return cmd_baseline(baseline_name, config_path, out_dir, seed_flag, seeds_text);
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
