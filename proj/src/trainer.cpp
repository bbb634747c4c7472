#include "emtree/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "emtree/rng.hpp"

namespace emtree {

namespace {

// Fixed-size pool; tasks are queued FIFO. Determinism does not depend on
// scheduling because results are written back by candidate index.
class ThreadPool {
 public:
  explicit ThreadPool(int threads) {
    threads = std::max(1, threads);
    workers_.reserve(threads);
    for (int i = 0; i < threads; ++i) {
      workers_.emplace_back([this] { work(); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      done_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  std::future<void> submit(std::function<void()> task) {
    std::packaged_task<void()> wrapped(std::move(task));
    std::future<void> fut = wrapped.get_future();
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(wrapped));
    }
    cv_.notify_one();
    return fut;
  }

 private:
  void work() {
    for (;;) {
      std::packaged_task<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return done_ || !queue_.empty(); });
        if (queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::packaged_task<void()>> queue_;
  std::vector<std::thread> workers_;
  bool done_ = false;
};

// Seed streams derived from the master seed; keeping them disjoint makes the
// run reproducible end to end.
constexpr std::uint64_t kRestartStream = 0x10;
constexpr std::uint64_t kAskStream = 0x20;
constexpr std::uint64_t kScheduleStream = 0x30;

std::unique_ptr<Environment> instantiate(const ExperimentConfig& cfg,
                                         const std::shared_ptr<const GridConfig>& grid,
                                         const std::shared_ptr<const HeatingConfig>& heating) {
  if (cfg.is_grid()) return std::make_unique<GridEnv>(grid);
  return std::make_unique<HeatingEnv>(heating);
}

}  // namespace

std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg) {
  if (cfg.is_grid()) return std::make_unique<GridEnv>(make_grid_config(cfg.grid));
  return std::make_unique<HeatingEnv>(make_heating_config(cfg.heating));
}

EpisodeConfig schedule_episode(const ExperimentConfig& cfg, std::int64_t generation,
                               std::uint64_t restart_seed) {
  if (cfg.is_grid()) {
    EpisodeConfig episode;
    episode.length = cfg.training_steps;
    episode.warmup = 0;
    episode.seed = cfg.per_generation_schedule
                       ? mix_seed(restart_seed, kScheduleStream + generation)
                       : mix_seed(restart_seed, kScheduleStream);
    return episode;
  }
  return heating_training_window(cfg.heating.period);
}

double training_score(EnvKind kind, const EvalReport& report) {
  return kind == EnvKind::Grid ? report.reward_sum : report.weighted;
}

TrainedEms train(const ExperimentConfig& cfg, int workers) {
  if (workers <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    workers = hw > 0 ? static_cast<int>(hw) : 1;
  }

  const auto grid_cfg = cfg.is_grid() ? make_grid_config(cfg.grid) : nullptr;
  const auto heating_cfg = cfg.is_grid() ? nullptr : make_heating_config(cfg.heating);

  const auto probe = instantiate(cfg, grid_cfg, heating_cfg);
  const std::vector<FeatureSpec> features = probe->features();
  const std::vector<ActionSpec> actions = probe->actions();
  const EnvKind kind = probe->kind();
  const int n = static_cast<int>(actions.size()) * genes_per_tree(cfg.tree_nodes);

  const CmaesParams params = default_params(n, cfg.lambda_override);
  const int lambda = params.population_size;

  ThreadPool pool(workers);

  auto evaluate = [&](const Genome& genome, const EpisodeConfig& episode) {
    TreeEnsemble ensemble = ensemble_decode(genome, features, actions, cfg.tree_nodes);
    const auto env = instantiate(cfg, grid_cfg, heating_cfg);
    const EvalReport report = evaluate_episode(*env, ensemble, episode, false);
    if (!report.error.empty()) throw EvalError(report.error);
    return training_score(kind, report);
  };

  auto run_restart = [&](int restart) {
    RestartResult result;
    const std::uint64_t restart_seed =
        mix_seed(cfg.master_seed, kRestartStream + static_cast<std::uint64_t>(restart));
    CmaesState state = initial_state(params);
    result.episode = schedule_episode(cfg, 0, restart_seed);
    result.history.reserve(cfg.generations);

    std::vector<ScoredCandidate> scored(lambda);
    std::vector<double> scores(lambda);
    EpisodeConfig episode = result.episode;

    for (int g = 0; g < cfg.generations; ++g) {
      if (cfg.per_generation_schedule) episode = schedule_episode(cfg, g, restart_seed);
      const auto population =
          ask(state, params, mix_seed(restart_seed, kAskStream + static_cast<std::uint64_t>(g)));

      std::vector<std::future<void>> futures;
      futures.reserve(lambda);
      std::vector<std::exception_ptr> errors(lambda);
      for (int k = 0; k < lambda; ++k) {
        futures.push_back(pool.submit([&, k] {
          try {
            scores[k] = evaluate(population[k], episode);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        }));
      }
      for (auto& f : futures) f.wait();
      for (int k = 0; k < lambda; ++k)
        if (errors[k]) std::rethrow_exception(errors[k]);

      for (int k = 0; k < lambda; ++k) scored[k] = ScoredCandidate{population[k], scores[k]};
      tell(state, params, scored);

      std::vector<double> ordered(scores);
      std::sort(ordered.begin(), ordered.end());
      const double median = (lambda % 2 == 1)
                                ? ordered[lambda / 2]
                                : 0.5 * (ordered[lambda / 2 - 1] + ordered[lambda / 2]);
      result.history.push_back(
          GenerationRecord{g, ordered.front(), median, state.sigma});
    }
    result.best = state.best_genome;
    result.score = state.best_score;
    // The last scheduled episode is the recording episode used for pruning.
    result.episode = episode;
    return result;
  };

  TrainedEms trained;
  trained.restarts.resize(cfg.restarts);
  {
    std::vector<std::thread> runners;
    std::vector<std::exception_ptr> errors(cfg.restarts);
    runners.reserve(cfg.restarts);
    for (int r = 0; r < cfg.restarts; ++r) {
      runners.emplace_back([&, r] {
        try {
          trained.restarts[r] = run_restart(r);
        } catch (...) {
          errors[r] = std::current_exception();
        }
      });
    }
    for (auto& t : runners) t.join();
    for (int r = 0; r < cfg.restarts; ++r) {
      if (errors[r]) {
        try {
          std::rethrow_exception(errors[r]);
        } catch (const std::exception& e) {
          throw EvalError("restart " + std::to_string(r) + " failed: " + e.what());
        }
      }
    }
  }

  trained.winner_restart = 0;
  for (int r = 1; r < cfg.restarts; ++r) {
    if (trained.restarts[r].score < trained.restarts[trained.winner_restart].score)
      trained.winner_restart = r;
  }
  const RestartResult& winner = trained.restarts[trained.winner_restart];
  trained.winner_genome = winner.best;

  // Record visits by replaying the winner over its training episode, then
  // prune the unvisited structure away.
  TreeEnsemble full =
      ensemble_decode(trained.winner_genome, features, actions, cfg.tree_nodes);
  {
    const auto env = instantiate(cfg, grid_cfg, heating_cfg);
    const EvalReport report = evaluate_episode(*env, full, winner.episode, true);
    if (!report.error.empty())
      throw EvalError("pruning replay failed: " + report.error);
  }
  trained.winner = full.pruned();

  trained.validation = validate(cfg, trained.winner);
  return trained;
}

ValidationSummary validate(const ExperimentConfig& cfg, TreeEnsemble& ems,
                           std::span<const std::uint64_t> seeds) {
  ValidationSummary summary;
  if (cfg.is_grid()) {
    summary.kind = EnvKind::Grid;
    std::vector<std::uint64_t> default_seeds;
    if (seeds.empty()) {
      default_seeds.resize(10);
      for (int i = 0; i < 10; ++i) default_seeds[i] = static_cast<std::uint64_t>(i);
      seeds = default_seeds;
    }
    const auto grid_cfg = make_grid_config(cfg.grid);
    double sum = 0.0;
    for (std::uint64_t seed : seeds) {
      GridEnv env(grid_cfg);
      EpisodeConfig episode;
      episode.length = cfg.validation_steps;
      episode.seed = seed;
      const EvalReport report = evaluate_episode(env, ems, episode, false);
      if (!report.error.empty()) throw EvalError(report.error);
      summary.grid.seeds.push_back(seed);
      summary.grid.scores.push_back(report.discounted);
      summary.grid.collapses += report.collapsed ? 1 : 0;
      sum += report.discounted;
    }
    const std::size_t count = summary.grid.scores.size();
    summary.grid.mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (double s : summary.grid.scores) ss += (s - summary.grid.mean) * (s - summary.grid.mean);
    summary.grid.stddev =
        count > 1 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
    return summary;
  }

  summary.kind = EnvKind::Heating;
  for (PricingKind scenario :
       {PricingKind::Constant, PricingKind::Dynamic, PricingKind::HighlyDynamic}) {
    for (HeatingPeriod period : {HeatingPeriod::Peak, HeatingPeriod::Typical}) {
      HeatingConfig hc = cfg.heating;
      hc.pricing = scenario;
      hc.period = period;
      HeatingEnv env(make_heating_config(std::move(hc)));
      const EvalReport report =
          evaluate_episode(env, ems, heating_validation_window(period), false);
      if (!report.error.empty()) throw EvalError(report.error);
      summary.heating.push_back(HeatingCase{scenario, period, report.electricity_cost_eur,
                                            report.electricity_cost_eur_per_m2,
                                            report.discomfort_kh, report.weighted});
    }
  }
  return summary;
}

std::string validation_to_json(const ValidationSummary& summary) {
  nlohmann::ordered_json j;
  if (summary.kind == EnvKind::Grid) {
    j["environment"] = "grid";
    j["seeds"] = summary.grid.seeds;
    j["scores"] = summary.grid.scores;
    j["mean"] = summary.grid.mean;
    j["stddev"] = summary.grid.stddev;
    j["collapses"] = summary.grid.collapses;
  } else {
    j["environment"] = "heating";
    nlohmann::ordered_json cases = nlohmann::ordered_json::array();
    for (const HeatingCase& c : summary.heating) {
      cases.push_back({{"scenario", to_string(c.scenario)},
                       {"period", to_string(c.period)},
                       {"electricity_cost_eur", c.cost_eur},
                       {"electricity_cost_eur_per_m2", c.cost_eur_per_m2},
                       {"discomfort_kh", c.discomfort_kh},
                       {"weighted_objective", c.weighted}});
    }
    j["cases"] = cases;
  }
  return j.dump(2) + "\n";
}

}  // namespace emtree
