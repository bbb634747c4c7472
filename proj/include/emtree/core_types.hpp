#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace emtree {

// A genome is a flat vector of reals in [0,1]; one tree occupies 3N+1 genes
// and an ensemble genome is the concatenation of one block per action channel.
using Genome = std::vector<double>;

// Genome <-> tree translation failures (wrong block length, bad specs).
struct CodecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failures while evaluating a controller against an environment.
struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or unsupported configuration / persisted files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One environment snapshot handed to the controller. `values` is aligned
// with the environment's feature catalog (same order, same length).
struct Observation {
  std::vector<double> values;
  std::int64_t step = 0;
};

// Cost terms produced by one simulation step. Grid episodes fill
// energy_loss/penalty/collapsed, heating episodes fill price/energy/
// discomfort; unused terms stay zero.
struct StepOutcome {
  double energy_loss = 0.0;       // per-unit energy lost in the step
  double penalty = 0.0;           // constraint violation term, >= 0
  double price_eur_per_kwh = 0.0;
  double energy_kwh = 0.0;        // electric energy drawn in the step
  double discomfort_kh = 0.0;     // out-of-band Kelvin-hours in the step
  bool collapsed = false;
  bool action_clamped = false;    // an action was outside its channel range
};

struct EpisodeConfig {
  std::int64_t start_step = -1;  // absolute start; -1 lets the env derive it from seed
  std::int64_t length = 1;       // scored steps
  std::int64_t warmup = 0;       // simulated before scoring starts, excluded from objectives
  std::uint64_t seed = 0;
};

}  // namespace emtree
