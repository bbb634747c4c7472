#include "emtree/env_core.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "emtree/format.hpp"

namespace emtree {

double clipped_reward(double energy_loss, double penalty, bool collapsed) {
  if (collapsed) return kCollapseReward;
  return std::clamp(energy_loss + kPenaltyWeight * penalty, -kRewardClip, kRewardClip);
}

double discounted_score(std::span<const double> rewards) {
  double score = 0.0;
  double factor = 1.0;
  const std::size_t horizon =
      std::min(rewards.size(), static_cast<std::size_t>(kScoreHorizon));
  for (std::size_t t = 0; t < horizon; ++t) {
    score += rewards[t] * factor;
    factor *= kScoreDiscount;
  }
  return score;
}

double training_sum(std::span<const double> rewards) {
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum;
}

double weighted_objective(double discomfort_kh, double cost, double w1, double w2) {
  return w1 * discomfort_kh + w2 * cost;
}

double electricity_cost(std::span<const StepRecord> trace) {
  double total = 0.0;
  for (const StepRecord& rec : trace)
    total += rec.outcome.price_eur_per_kwh * rec.outcome.energy_kwh;
  return total;
}

double total_discomfort(std::span<const StepRecord> trace) {
  double total = 0.0;
  for (const StepRecord& rec : trace) total += rec.outcome.discomfort_kh;
  return total;
}

namespace {

void finalize(EvalReport& report, double area_m2) {
  std::vector<double> rewards;
  rewards.reserve(report.trace.size());
  for (const StepRecord& rec : report.trace) rewards.push_back(rec.reward);
  report.reward_sum = training_sum(rewards);
  report.discounted = discounted_score(rewards);
  report.electricity_cost_eur = electricity_cost(report.trace);
  report.electricity_cost_eur_per_m2 = report.electricity_cost_eur / area_m2;
  report.discomfort_kh = total_discomfort(report.trace);
  report.weighted =
      weighted_objective(report.discomfort_kh, report.electricity_cost_eur_per_m2);
}

EvalReport run_episode(Environment& env, const EpisodeConfig& cfg,
                       const std::function<std::vector<double>(const Observation&)>& act) {
  EvalReport report;
  try {
    env.reset(cfg);
    for (std::int64_t w = 0; w < cfg.warmup; ++w) {
      const Observation obs = env.observe();
      env.step(act(obs));
    }
    report.trace.reserve(static_cast<std::size_t>(cfg.length));
    for (std::int64_t t = 0; t < cfg.length; ++t) {
      StepRecord rec;
      rec.obs = env.observe();
      rec.actions = act(rec.obs);
      rec.outcome = env.step(rec.actions);
      rec.reward = clipped_reward(rec.outcome.energy_loss, rec.outcome.penalty,
                                  rec.outcome.collapsed);
      report.trace.push_back(std::move(rec));
      if (report.trace.back().outcome.collapsed) {
        report.collapsed = true;
        break;
      }
    }
  } catch (const std::exception& e) {
    report.error = e.what();
  }
  finalize(report, env.cost_area_m2());
  return report;
}

}  // namespace

EvalReport evaluate_episode(Environment& env, TreeEnsemble& ensemble,
                            const EpisodeConfig& cfg, bool record) {
  if (ensemble.channel_count() != env.actions().size())
    throw EvalError("evaluate: ensemble has " + std::to_string(ensemble.channel_count()) +
                    " channels, environment expects " +
                    std::to_string(env.actions().size()));
  return run_episode(env, cfg,
                     [&](const Observation& obs) { return ensemble.act(obs, record); });
}

EvalReport evaluate_episode(Environment& env, const Controller& controller,
                            const EpisodeConfig& cfg) {
  return run_episode(env, cfg, controller);
}

void write_trace_csv(std::ostream& out, const EvalReport& report,
                     const std::vector<FeatureSpec>& features,
                     const std::vector<ActionSpec>& actions) {
  out << "step";
  for (const FeatureSpec& f : features) out << ',' << f.name;
  for (const ActionSpec& a : actions) out << ',' << a.name;
  out << ",energy_loss,penalty,price_eur_per_kwh,energy_kwh,discomfort_kh,collapsed,"
         "action_clamped,reward\n";
  for (const StepRecord& rec : report.trace) {
    out << rec.obs.step;
    for (double v : rec.obs.values) out << ',' << format_double(v);
    for (double a : rec.actions) out << ',' << format_double(a);
    const StepOutcome& o = rec.outcome;
    out << ',' << format_double(o.energy_loss) << ',' << format_double(o.penalty) << ','
        << format_double(o.price_eur_per_kwh) << ',' << format_double(o.energy_kwh)
        << ',' << format_double(o.discomfort_kh) << ',' << (o.collapsed ? 1 : 0) << ','
        << (o.action_clamped ? 1 : 0) << ',' << format_double(rec.reward) << '\n';
  }
}

std::string report_summary_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["steps"] = report.trace.size();
  j["reward_sum"] = report.reward_sum;
  j["discounted_score"] = report.discounted;
  j["electricity_cost_eur"] = report.electricity_cost_eur;
  j["electricity_cost_eur_per_m2"] = report.electricity_cost_eur_per_m2;
  j["discomfort_kh"] = report.discomfort_kh;
  j["weighted_objective"] = report.weighted;
  j["collapsed"] = report.collapsed;
  if (!report.error.empty()) j["error"] = report.error;
  return j.dump(2) + "\n";
}

}  // namespace emtree
