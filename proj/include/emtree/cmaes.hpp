#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "emtree/core_types.hpp"

namespace emtree {

// CMA-ES over the unit box [0,1]^n, minimization convention. Samples are
// repaired into the box by clamping before they are handed out; the
// distribution update uses the raw (unclamped) samples.

struct CmaesParams {
  int dimension = 0;
  int population_size = 0;  // lambda
  int parent_count = 0;     // mu
  std::vector<double> weights;  // w_1..w_mu, positive, non-increasing, sum 1
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;

  void validate() const;  // throws std::invalid_argument on a broken invariant
};

// Standard parameterization: lambda = 4 + 3*floor(ln n), mu = lambda/2,
// w_i proportional to ln(mu + 1/2) - ln(i), and the usual cumulation /
// learning rates derived from mu_eff. `lambda_override` (when > 0) replaces
// the population-size formula; everything downstream follows the override.
CmaesParams default_params(int n, int lambda_override = 0);

struct ScoredCandidate {
  Genome genome;
  double score = 0.0;
};

struct CmaesState {
  Eigen::VectorXd mean;
  double sigma = 0.3;
  Eigen::MatrixXd cov;          // C, symmetric PSD
  Eigen::VectorXd path_sigma;   // p_sigma
  Eigen::VectorXd path_c;       // p_c
  Eigen::MatrixXd eigen_basis;  // B, orthonormal columns
  Eigen::VectorXd eigen_scales; // D, sqrt of C's eigenvalues
  std::int64_t generation = 0;
  Genome best_genome;
  double best_score = std::numeric_limits<double>::infinity();

  // Raw samples from the most recent ask (one column per candidate); tell
  // consumes them by candidate index.
  Eigen::MatrixXd pending;
};

// Fresh state at m = (0.5,...,0.5), sigma = 0.3, C = I.
CmaesState initial_state(const CmaesParams& params);

// Samples lambda candidates m + sigma*B*D*z and returns them clamped into
// [0,1]^n. Deterministic for a fixed (state, seed). The unclamped samples
// are kept in state.pending for the matching tell.
std::vector<Genome> ask(CmaesState& state, const CmaesParams& params,
                        std::uint64_t seed);

// Rank-based mean/path/covariance/step-size update from the scored
// population of the last ask. Scores must be finite; lower is better.
void tell(CmaesState& state, const CmaesParams& params,
          const std::vector<ScoredCandidate>& scored);

// Recomputes B and D from C (eigendecomposition, eigenvalues floored at
// kEigenvalueFloor) and restores exact symmetry. Throws on asymmetry drift
// beyond 1e-12.
void eigen_refresh(CmaesState& state);

inline constexpr double kEigenvalueFloor = 1e-12;

struct GenerationRecord {
  std::int64_t generation = 0;
  double best_score = 0.0;    // best score within the generation's population
  double median_score = 0.0;  // median of the generation's population
  double sigma = 0.0;         // step size after the update
};

struct RunResult {
  Genome best;        // best-ever candidate over the whole run
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<GenerationRecord> history;  // one record per generation
};

// Full generation loop: ask, evaluate, tell, for `generations` iterations.
// Returns the best-ever candidate (not the final mean). Throws EvalError
// naming the generation if the objective returns a non-finite score.
RunResult run(const std::function<double(const Genome&)>& objective, int n,
              int generations, std::uint64_t seed, int lambda_override = 0);

// CSV with header `generation,best_score,median_score,sigma`.
void write_history_csv(std::ostream& out, std::span<const GenerationRecord> history);

}  // namespace emtree
