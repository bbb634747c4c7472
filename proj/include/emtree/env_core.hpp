#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "emtree/core_types.hpp"
#include "emtree/tree.hpp"

namespace emtree {

inline constexpr double kRewardClip = 100.0;
inline constexpr double kPenaltyWeight = 1000.0;
inline constexpr double kCollapseReward = 20000.0;
inline constexpr double kScoreDiscount = 0.995;
inline constexpr int kScoreHorizon = 3000;
inline constexpr double kDiscomfortWeight = 100.0;  // w1
inline constexpr double kCostWeight = 192.0;        // w2

// r_t = clip(-100, energy_loss + 1000*penalty, 100); a collapsed step costs
// exactly 20000. Cost convention: lower is better.
double clipped_reward(double energy_loss, double penalty, bool collapsed = false);

// S = sum over t < 3000 of r_t * 0.995^t.
double discounted_score(std::span<const double> rewards);

// Plain undiscounted sum.
double training_sum(std::span<const double> rewards);

// O = w1*D + w2*E.
double weighted_objective(double discomfort_kh, double cost,
                          double w1 = kDiscomfortWeight, double w2 = kCostWeight);

enum class EnvKind { Grid, Heating };

// Environment contract: a named feature catalog, one ActionSpec per channel,
// and a reset/step loop producing per-step cost terms. Instances are cheap;
// concurrent evaluations use one instance each.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual EnvKind kind() const = 0;
  virtual const std::vector<FeatureSpec>& features() const = 0;
  virtual const std::vector<ActionSpec>& actions() const = 0;
  virtual void reset(const EpisodeConfig& cfg) = 0;
  virtual Observation observe() const = 0;
  virtual StepOutcome step(std::span<const double> actions) = 0;
  StepOutcome step(std::initializer_list<double> actions) {
    return step(std::span<const double>(actions.begin(), actions.size()));
  }
  // Floor area used to normalize electricity cost in the weighted objective;
  // environments without one return 1.
  virtual double cost_area_m2() const { return 1.0; }
};

struct StepRecord {
  Observation obs;
  std::vector<double> actions;
  StepOutcome outcome;
  double reward = 0.0;
};

// Closed-loop episode result. Aggregates are recomputable from the trace;
// `weighted` pairs the spec weights with the per-m2 normalized cost.
struct EvalReport {
  std::vector<StepRecord> trace;  // scored steps only (warmup excluded)
  double reward_sum = 0.0;        // undiscounted sum of rewards
  double discounted = 0.0;        // discounted score S
  double electricity_cost_eur = 0.0;
  double electricity_cost_eur_per_m2 = 0.0;
  double discomfort_kh = 0.0;
  double weighted = 0.0;          // w1*D + w2*(E/area)
  bool collapsed = false;
  std::string error;              // non-empty when the episode aborted
};

double electricity_cost(std::span<const StepRecord> trace);
double total_discomfort(std::span<const StepRecord> trace);

using Controller = std::function<std::vector<double>(const Observation&)>;

// Rolls the ensemble through one episode: simulate `warmup` steps (unscored),
// then `length` scored steps or until collapse. Deterministic for a fixed
// (environment config, genome, cfg). A step failure yields a report with the
// partial trace and the error message.
EvalReport evaluate_episode(Environment& env, TreeEnsemble& ensemble,
                            const EpisodeConfig& cfg, bool record = false);

// Same loop driven by an arbitrary controller (used by baselines).
EvalReport evaluate_episode(Environment& env, const Controller& controller,
                            const EpisodeConfig& cfg);

// One row per scored step: step index, features, actions, outcome, reward.
void write_trace_csv(std::ostream& out, const EvalReport& report,
                     const std::vector<FeatureSpec>& features,
                     const std::vector<ActionSpec>& actions);

// Aggregates only, as a stable JSON object.
std::string report_summary_json(const EvalReport& report);

}  // namespace emtree
