#pragma once

#include <filesystem>
#include <string>

#include "emtree/env_grid.hpp"
#include "emtree/env_heating.hpp"

namespace emtree {

// Experiment definition loaded from a JSON config file (schema_version 1).
// Unknown keys are rejected so typos fail fast.
struct ExperimentConfig {
  std::string environment;  // "grid" | "heating"
  int tree_nodes = 20;      // split nodes N per tree
  int lambda_override = 0;  // 0 uses the population-size formula
  int generations = 1;
  int restarts = 5;
  std::uint64_t master_seed = 1;
  bool per_generation_schedule = false;  // grid: fresh start time every generation

  std::int64_t training_steps = 300;    // grid training episode length
  std::int64_t validation_steps = 3000; // grid validation episode length

  GridConfig grid;
  HeatingConfig heating;

  bool is_grid() const { return environment == "grid"; }
};

// Parse from text; `origin` names the source in error messages and
// `base_dir` anchors relative CSV paths referenced by the config.
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& origin,
                                         const std::filesystem::path& base_dir);

ExperimentConfig load_experiment_config(const std::filesystem::path& file);

}  // namespace emtree
