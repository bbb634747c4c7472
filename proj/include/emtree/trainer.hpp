#pragma once

#include <memory>
#include <span>

#include "emtree/cmaes.hpp"
#include "emtree/config.hpp"

namespace emtree {

// Full pipeline: R independent CMA-ES runs over the ensemble genome, winner
// selection by training score, pruning on a recorded replay, validation.

struct RestartResult {
  Genome best;
  double score = 0.0;
  std::vector<GenerationRecord> history;
  EpisodeConfig episode;  // training episode the restart was scored on
};

struct GridValidation {
  std::vector<std::uint64_t> seeds;
  std::vector<double> scores;  // discounted score per seed
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  int collapses = 0;
};

struct HeatingCase {
  PricingKind scenario;
  HeatingPeriod period;
  double cost_eur = 0.0;
  double cost_eur_per_m2 = 0.0;
  double discomfort_kh = 0.0;
  double weighted = 0.0;
};

struct ValidationSummary {
  EnvKind kind = EnvKind::Grid;
  GridValidation grid;
  std::vector<HeatingCase> heating;  // 3 scenarios x 2 periods
};

struct TrainedEms {
  TreeEnsemble winner;  // pruned
  Genome winner_genome;
  int winner_restart = 0;
  std::vector<RestartResult> restarts;
  ValidationSummary validation;
};

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg);

// Training episode shared by every individual of a generation. Grid runs
// draw their start time from the restart seed (or per generation when the
// config says so); heating runs use the fixed training window of the
// configured validation period.
EpisodeConfig schedule_episode(const ExperimentConfig& cfg, std::int64_t generation,
                               std::uint64_t restart_seed);

// Runs the experiment with `workers` evaluation threads (0 = hardware
// concurrency). The result is identical for any worker count.
TrainedEms train(const ExperimentConfig& cfg, int workers = 0);

// Grid: discounted score over validation seeds (default 0..9); heating: one
// (E, D) pair per pricing scenario and validation period.
ValidationSummary validate(const ExperimentConfig& cfg, TreeEnsemble& ems,
                           std::span<const std::uint64_t> seeds = {});

std::string validation_to_json(const ValidationSummary& summary);

// Objective used during training: undiscounted reward sum for grid episodes,
// weighted discomfort+cost for heating episodes.
double training_score(EnvKind kind, const EvalReport& report);

}  // namespace emtree
