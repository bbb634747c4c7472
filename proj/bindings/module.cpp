#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "emtree/cmaes.hpp"
#include "emtree/env_core.hpp"
#include "emtree/trainer.hpp"
#include "emtree/version.hpp"

namespace py = pybind11;
using namespace emtree;

namespace {

ExperimentConfig config_from_json(const std::string& text) {
  return parse_experiment_config(text, "<config>", std::filesystem::current_path());
}

}  // namespace

PYBIND11_MODULE(_emtree, m) {
  m.doc() = "Evolves interpretable decision-tree energy management controllers";
  m.attr("__version__") = kVersion;

  py::register_exception<CodecError>(m, "CodecError");
  py::register_exception<EvalError>(m, "EvalError");
  py::register_exception<ConfigError>(m, "ConfigError");

  py::class_<CmaesParams>(m, "CmaesParams")
      .def_readonly("dimension", &CmaesParams::dimension)
      .def_readonly("population_size", &CmaesParams::population_size)
      .def_readonly("parent_count", &CmaesParams::parent_count)
      .def_readonly("weights", &CmaesParams::weights)
      .def_readonly("mu_eff", &CmaesParams::mu_eff)
      .def_readonly("c_sigma", &CmaesParams::c_sigma)
      .def_readonly("d_sigma", &CmaesParams::d_sigma)
      .def_readonly("c_c", &CmaesParams::c_c)
      .def_readonly("c_1", &CmaesParams::c_1)
      .def_readonly("c_mu", &CmaesParams::c_mu);

  m.def("default_params", &default_params, py::arg("n"), py::arg("lambda_override") = 0);

  py::class_<GenerationRecord>(m, "GenerationRecord")
      .def_readonly("generation", &GenerationRecord::generation)
      .def_readonly("best_score", &GenerationRecord::best_score)
      .def_readonly("median_score", &GenerationRecord::median_score)
      .def_readonly("sigma", &GenerationRecord::sigma);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("best", &RunResult::best)
      .def_readonly("best_score", &RunResult::best_score)
      .def_readonly("history", &RunResult::history);

  m.def(
      "cmaes_run",
      [](const std::function<double(const Genome&)>& objective, int n, int generations,
         std::uint64_t seed, int lambda_override) {
        return run(objective, n, generations, seed, lambda_override);
      },
      py::arg("objective"), py::arg("n"), py::arg("generations"), py::arg("seed") = 0,
      py::arg("lambda_override") = 0);

  py::class_<FeatureSpec>(m, "FeatureSpec")
      .def(py::init<std::string, double, double>(), py::arg("name"), py::arg("lower"),
           py::arg("upper"))
      .def_readonly("name", &FeatureSpec::name)
      .def_readonly("lower", &FeatureSpec::lower)
      .def_readonly("upper", &FeatureSpec::upper);

  py::class_<ActionSpec>(m, "ActionSpec")
      .def_static("continuous", &ActionSpec::continuous, py::arg("name"), py::arg("lo"),
                  py::arg("hi"))
      .def_static("discrete", &ActionSpec::discrete, py::arg("name"), py::arg("values"))
      .def_readonly("name", &ActionSpec::name)
      .def("from_gene", &ActionSpec::from_gene, py::arg("gene"));

  py::class_<Observation>(m, "Observation")
      .def(py::init([](std::vector<double> values, std::int64_t step) {
             return Observation{std::move(values), step};
           }),
           py::arg("values"), py::arg("step") = 0)
      .def_readwrite("values", &Observation::values)
      .def_readwrite("step", &Observation::step);

  py::class_<StepOutcome>(m, "StepOutcome")
      .def_readonly("energy_loss", &StepOutcome::energy_loss)
      .def_readonly("penalty", &StepOutcome::penalty)
      .def_readonly("price_eur_per_kwh", &StepOutcome::price_eur_per_kwh)
      .def_readonly("energy_kwh", &StepOutcome::energy_kwh)
      .def_readonly("discomfort_kh", &StepOutcome::discomfort_kh)
      .def_readonly("collapsed", &StepOutcome::collapsed)
      .def_readonly("action_clamped", &StepOutcome::action_clamped);

  py::class_<EpisodeConfig>(m, "EpisodeConfig")
      .def(py::init([](std::int64_t start_step, std::int64_t length, std::int64_t warmup,
                       std::uint64_t seed) {
             return EpisodeConfig{start_step, length, warmup, seed};
           }),
           py::arg("start_step") = -1, py::arg("length") = 1, py::arg("warmup") = 0,
           py::arg("seed") = 0)
      .def_readwrite("start_step", &EpisodeConfig::start_step)
      .def_readwrite("length", &EpisodeConfig::length)
      .def_readwrite("warmup", &EpisodeConfig::warmup)
      .def_readwrite("seed", &EpisodeConfig::seed);

  py::class_<DecisionTree>(m, "DecisionTree")
      .def("act", &DecisionTree::act, py::arg("obs"), py::arg("record") = false)
      .def("pruned", &DecisionTree::pruned)
      .def("leaf_count", &DecisionTree::leaf_count)
      .def("max_depth", &DecisionTree::max_depth)
      .def("total_visits", &DecisionTree::total_visits);

  py::class_<TreeEnsemble>(m, "TreeEnsemble")
      .def("act", &TreeEnsemble::act, py::arg("obs"), py::arg("record") = false)
      .def("pruned", &TreeEnsemble::pruned)
      .def_property_readonly("channel_count", &TreeEnsemble::channel_count)
      .def("to_json", [](const TreeEnsemble& e) { return ensemble_to_json(e); })
      .def("to_dot", [](const TreeEnsemble& e) { return to_dot(e); })
      .def("leaf_counts", [](const TreeEnsemble& e) {
        std::vector<int> counts;
        for (const TreeChannel& ch : e.channels()) counts.push_back(ch.tree.leaf_count());
        return counts;
      });

  m.def("decode", &decode, py::arg("genome_block"), py::arg("features"),
        py::arg("action"), py::arg("n_splits"));
  m.def("ensemble_decode", &ensemble_decode, py::arg("genome"), py::arg("features"),
        py::arg("actions"), py::arg("n_splits"));
  m.def("ensemble_from_json", &ensemble_from_json, py::arg("text"));
  m.def("save_ensemble", &save_ensemble, py::arg("ensemble"), py::arg("file"));
  m.def("load_ensemble", &load_ensemble, py::arg("file"));
  m.def("genes_per_tree", &genes_per_tree, py::arg("n_splits"));

  m.def("clipped_reward", &clipped_reward, py::arg("energy_loss"), py::arg("penalty"),
        py::arg("collapsed") = false);
  m.def("discounted_score", [](const std::vector<double>& rewards) {
    return discounted_score(rewards);
  });
  m.def("training_sum", [](const std::vector<double>& rewards) {
    return training_sum(rewards);
  });
  m.def("weighted_objective", &weighted_objective, py::arg("discomfort_kh"),
        py::arg("cost"), py::arg("w1") = kDiscomfortWeight, py::arg("w2") = kCostWeight);

  py::class_<Environment>(m, "Environment")
      .def("reset", &Environment::reset, py::arg("cfg"))
      .def("observe", &Environment::observe)
      .def("step",
           [](Environment& env, const std::vector<double>& actions) {
             return env.step(actions);
           },
           py::arg("actions"))
      .def_property_readonly("features",
                             [](const Environment& env) { return env.features(); })
      .def_property_readonly("actions",
                             [](const Environment& env) { return env.actions(); });

  m.def("make_environment", [](const std::string& config_json) {
    return make_environment(config_from_json(config_json));
  });

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("reward_sum", &EvalReport::reward_sum)
      .def_readonly("discounted", &EvalReport::discounted)
      .def_readonly("electricity_cost_eur", &EvalReport::electricity_cost_eur)
      .def_readonly("electricity_cost_eur_per_m2", &EvalReport::electricity_cost_eur_per_m2)
      .def_readonly("discomfort_kh", &EvalReport::discomfort_kh)
      .def_readonly("weighted", &EvalReport::weighted)
      .def_readonly("collapsed", &EvalReport::collapsed)
      .def_readonly("error", &EvalReport::error)
      .def("step_count", [](const EvalReport& r) { return r.trace.size(); })
      .def("rewards", [](const EvalReport& r) {
        std::vector<double> rewards;
        rewards.reserve(r.trace.size());
        for (const StepRecord& rec : r.trace) rewards.push_back(rec.reward);
        return rewards;
      });

  m.def(
      "evaluate_episode",
      [](Environment& env, TreeEnsemble& ensemble, const EpisodeConfig& cfg, bool record) {
        return evaluate_episode(env, ensemble, cfg, record);
      },
      py::arg("env"), py::arg("ensemble"), py::arg("cfg"), py::arg("record") = false);

  py::class_<ValidationSummary>(m, "ValidationSummary")
      .def("to_json", [](const ValidationSummary& s) { return validation_to_json(s); });

  py::class_<TrainedEms>(m, "TrainedEms")
      .def_readonly("winner", &TrainedEms::winner)
      .def_readonly("winner_genome", &TrainedEms::winner_genome)
      .def_readonly("winner_restart", &TrainedEms::winner_restart)
      .def_readonly("validation", &TrainedEms::validation)
      .def("restart_scores", [](const TrainedEms& t) {
        std::vector<double> scores;
        for (const RestartResult& r : t.restarts) scores.push_back(r.score);
        return scores;
      });

  m.def(
      "train",
      [](const std::string& config_json, int workers) {
        const ExperimentConfig cfg = config_from_json(config_json);
        py::gil_scoped_release release;
        return train(cfg, workers);
      },
      py::arg("config_json"), py::arg("workers") = 0);

  m.def(
      "validate",
      [](const std::string& config_json, TreeEnsemble& ems,
         const std::vector<std::uint64_t>& seeds) {
        return validate(config_from_json(config_json), ems, seeds);
      },
      py::arg("config_json"), py::arg("ems"),
      py::arg("seeds") = std::vector<std::uint64_t>{});
}
