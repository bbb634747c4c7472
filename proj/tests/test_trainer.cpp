#include <doctest.h>

#include <cmath>

#include "emtree/rng.hpp"
#include "emtree/trainer.hpp"

using namespace emtree;

namespace {

ExperimentConfig small_grid(int restarts, int generations) {
  ExperimentConfig cfg;
  cfg.environment = "grid";
  cfg.grid = GridConfig::defaults();
  cfg.heating = HeatingConfig::defaults();
  cfg.tree_nodes = 3;
  cfg.lambda_override = 6;
  cfg.generations = generations;
  cfg.restarts = restarts;
  cfg.master_seed = 11;
  cfg.training_steps = 96;
  cfg.validation_steps = 300;
  return cfg;
}

ExperimentConfig small_heating(int restarts, int generations) {
  ExperimentConfig cfg;
  cfg.environment = "heating";
  cfg.grid = GridConfig::defaults();
  cfg.heating = HeatingConfig::defaults();
  cfg.tree_nodes = 3;
  cfg.lambda_override = 6;
  cfg.generations = generations;
  cfg.restarts = restarts;
  cfg.master_seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("R=1, G=1 reduces to a single generation plus pruning") {
  const ExperimentConfig cfg = small_grid(1, 1);
  const TrainedEms trained = train(cfg, 2);
  REQUIRE(trained.restarts.size() == 1);
  REQUIRE(trained.restarts[0].history.size() == 1);
  CHECK(trained.restarts[0].score == trained.restarts[0].history[0].best_score);
  CHECK(trained.winner_restart == 0);
  // Every channel of the winner is pruned: all remaining leaves were visited.
  for (const TreeChannel& ch : trained.winner.channels()) {
    for (const TreeNode& nd : ch.tree.nodes())
      if (nd.leaf()) CHECK(nd.visits >= 1);
  }
}

TEST_CASE("the winner's training score is the minimum over restarts") {
  const ExperimentConfig cfg = small_grid(3, 2);
  const TrainedEms trained = train(cfg, 4);
  REQUIRE(trained.restarts.size() == 3);
  for (const RestartResult& r : trained.restarts)
    CHECK(trained.restarts[trained.winner_restart].score <= r.score);
}

TEST_CASE("episode schedule: shared within a run, distinct across restarts") {
  const ExperimentConfig cfg = small_grid(2, 2);
  const std::uint64_t seed_a = mix_seed(cfg.master_seed, 0x10);
  const std::uint64_t seed_b = mix_seed(cfg.master_seed, 0x11);

  // Fixed-per-run mode: every generation of a run sees the same episode.
  CHECK(schedule_episode(cfg, 0, seed_a).seed == schedule_episode(cfg, 1, seed_a).seed);
  // Different restarts draw different episodes.
  CHECK(schedule_episode(cfg, 0, seed_a).seed != schedule_episode(cfg, 0, seed_b).seed);
  // Deterministic mapping.
  CHECK(schedule_episode(cfg, 0, seed_a).seed == schedule_episode(cfg, 0, seed_a).seed);

  ExperimentConfig per_gen = cfg;
  per_gen.per_generation_schedule = true;
  CHECK(schedule_episode(per_gen, 0, seed_a).seed !=
        schedule_episode(per_gen, 1, seed_a).seed);

  // Heating training windows are fixed by the validation period.
  const ExperimentConfig heat = small_heating(1, 1);
  const EpisodeConfig train_window = schedule_episode(heat, 0, seed_a);
  CHECK(train_window.start_step == heating_training_window(HeatingPeriod::Peak).start_step);
  CHECK(train_window.warmup == 96);
}

TEST_CASE("training is deterministic regardless of the worker count") {
  const ExperimentConfig cfg = small_grid(2, 3);
  const TrainedEms a = train(cfg, 1);
  const TrainedEms b = train(cfg, 8);
  CHECK(a.winner_restart == b.winner_restart);
  CHECK(a.winner_genome == b.winner_genome);
  CHECK(ensemble_to_json(a.winner) == ensemble_to_json(b.winner));
  CHECK(validation_to_json(a.validation) == validation_to_json(b.validation));
  for (std::size_t r = 0; r < a.restarts.size(); ++r) {
    CHECK(a.restarts[r].score == b.restarts[r].score);
    for (std::size_t g = 0; g < a.restarts[r].history.size(); ++g)
      CHECK(a.restarts[r].history[g].best_score == b.restarts[r].history[g].best_score);
  }
}

TEST_CASE("the pruned winner is replay-equivalent to the unpruned winner") {
  const ExperimentConfig cfg = small_grid(2, 2);
  const TrainedEms trained = train(cfg, 4);

  const auto env_cfg = make_grid_config(cfg.grid);
  GridEnv env_full(env_cfg), env_pruned(env_cfg);
  TreeEnsemble full = ensemble_decode(trained.winner_genome, env_full.features(),
                                      env_full.actions(), cfg.tree_nodes);
  TreeEnsemble pruned = trained.winner;

  const EpisodeConfig episode = trained.restarts[trained.winner_restart].episode;
  const EvalReport a = evaluate_episode(env_full, full, episode);
  const EvalReport b = evaluate_episode(env_pruned, pruned, episode);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t)
    CHECK(a.trace[t].actions == b.trace[t].actions);
  CHECK(a.reward_sum == b.reward_sum);
}

TEST_CASE("heating training selects by the weighted objective") {
  const ExperimentConfig cfg = small_heating(2, 3);
  const TrainedEms trained = train(cfg, 4);
  // The stored score is the weighted objective of the winner on its training
  // episode; re-evaluating must reproduce it.
  const auto hcfg = make_heating_config(cfg.heating);
  HeatingEnv env(hcfg);
  TreeEnsemble ems = ensemble_decode(trained.winner_genome, env.features(),
                                     env.actions(), cfg.tree_nodes);
  const EvalReport report =
      evaluate_episode(env, ems, trained.restarts[trained.winner_restart].episode);
  CHECK(trained.restarts[trained.winner_restart].score ==
        doctest::Approx(report.weighted).epsilon(1e-12));
}

TEST_CASE("grid validation summarizes seeds 0..9 by default") {
  const ExperimentConfig cfg = small_grid(1, 1);
  Rng rng(2);
  Genome g(6 * genes_per_tree(cfg.tree_nodes), 0.5);
  const auto env_cfg = make_grid_config(cfg.grid);
  GridEnv env(env_cfg);
  TreeEnsemble ems = ensemble_decode(g, env.features(), env.actions(), cfg.tree_nodes);

  const ValidationSummary summary = validate(cfg, ems);
  CHECK(summary.kind == EnvKind::Grid);
  REQUIRE(summary.grid.scores.size() == 10);
  CHECK(summary.grid.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  double mean = 0.0;
  for (double s : summary.grid.scores) mean += s;
  mean /= 10.0;
  CHECK(summary.grid.mean == doctest::Approx(mean).epsilon(1e-12));

  // Identical inputs give identical summaries.
  const ValidationSummary again = validate(cfg, ems);
  CHECK(validation_to_json(again) == validation_to_json(summary));
}

TEST_CASE("random ensembles collapse the grid in a majority of validation seeds") {
  const ExperimentConfig cfg = small_grid(1, 1);
  const auto env_cfg = make_grid_config(cfg.grid);
  GridEnv env(env_cfg);
  Rng rng(424242);
  int majority_count = 0;
  for (int rep = 0; rep < 10; ++rep) {
    Genome g(6 * genes_per_tree(20));
    for (double& v : g) v = rng.uniform01();
    TreeEnsemble ems = ensemble_decode(g, env.features(), env.actions(), 20);
    ExperimentConfig wide = cfg;
    wide.validation_steps = 3000;
    const ValidationSummary summary = validate(wide, ems);
    if (summary.grid.collapses >= 6) ++majority_count;
  }
  CHECK(majority_count >= 7);
}

TEST_CASE("heating validation reports all six scenario-period cases") {
  const ExperimentConfig cfg = small_heating(1, 1);
  const auto hcfg = make_heating_config(cfg.heating);
  HeatingEnv env(hcfg);
  const Genome g(genes_per_tree(cfg.tree_nodes), 0.5);
  TreeEnsemble ems = ensemble_decode(g, env.features(), env.actions(), cfg.tree_nodes);

  const ValidationSummary summary = validate(cfg, ems);
  CHECK(summary.kind == EnvKind::Heating);
  REQUIRE(summary.heating.size() == 6);
  int constant_cases = 0;
  for (const HeatingCase& c : summary.heating) {
    if (c.scenario == PricingKind::Constant) ++constant_cases;
    CHECK(c.weighted ==
          doctest::Approx(100.0 * c.discomfort_kh + 192.0 * c.cost_eur_per_m2));
    CHECK(c.cost_eur_per_m2 == doctest::Approx(c.cost_eur / 192.0));
  }
  CHECK(constant_cases == 2);

  const std::string json = validation_to_json(summary);
  CHECK(json.find("\"constant\"") != std::string::npos);
  CHECK(json.find("\"highly_dynamic\"") != std::string::npos);
  CHECK(json.find("\"typical\"") != std::string::npos);
}
