#include "emtree/cmaes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "emtree/format.hpp"
#include "emtree/rng.hpp"

namespace emtree {

namespace {

constexpr double kInitialSigma = 0.3;
constexpr double kInitialMean = 0.5;
constexpr double kSymmetryDrift = 1e-12;

// E||N(0,I)|| for an n-dimensional standard normal.
double chi_n(int n) {
  const double nn = static_cast<double>(n);
  return std::sqrt(nn) * (1.0 - 1.0 / (4.0 * nn) + 1.0 / (21.0 * nn * nn));
}

}  // namespace

void CmaesParams::validate() const {
  if (dimension < 1) throw std::invalid_argument("cmaes: dimension must be >= 1");
  if (population_size < 4)
    throw std::invalid_argument("cmaes: population size must be >= 4");
  if (parent_count < 1 || parent_count > population_size / 2)
    throw std::invalid_argument("cmaes: parent count must be in [1, lambda/2]");
  if (static_cast<int>(weights.size()) != parent_count)
    throw std::invalid_argument("cmaes: weight count must equal parent count");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) throw std::invalid_argument("cmaes: weights must be positive");
    if (i > 0 && weights[i] > weights[i - 1] + 1e-15)
      throw std::invalid_argument("cmaes: weights must be non-increasing");
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("cmaes: weights must sum to 1");
  auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!in_unit(c_sigma) || !in_unit(c_c) || !in_unit(c_1) || !in_unit(c_mu))
    throw std::invalid_argument("cmaes: learning rates must lie in (0,1)");
  if (c_1 + c_mu > 1.0) throw std::invalid_argument("cmaes: c_1 + c_mu must be <= 1");
  if (d_sigma < 1.0) throw std::invalid_argument("cmaes: d_sigma must be >= 1");
}

CmaesParams default_params(int n, int lambda_override) {
  if (n < 1) throw std::invalid_argument("cmaes: dimension must be >= 1");
  CmaesParams p;
  p.dimension = n;
  p.population_size =
      lambda_override > 0
          ? lambda_override
          : 4 + 3 * static_cast<int>(std::floor(std::log(static_cast<double>(n))));
  if (p.population_size < 4)
    throw std::invalid_argument("cmaes: population override must be >= 4");
  p.parent_count = p.population_size / 2;

  p.weights.resize(p.parent_count);
  double sum = 0.0;
  for (int i = 0; i < p.parent_count; ++i) {
    p.weights[i] = std::log(p.parent_count + 0.5) - std::log(i + 1.0);
    sum += p.weights[i];
  }
  double sq = 0.0;
  for (double& w : p.weights) {
    w /= sum;
    sq += w * w;
  }
  p.mu_eff = 1.0 / sq;

  const double nn = static_cast<double>(n);
  p.c_sigma = (p.mu_eff + 2.0) / (nn + p.mu_eff + 5.0);
  p.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (nn + 1.0)) - 1.0) +
              p.c_sigma;
  p.c_c = (4.0 + p.mu_eff / nn) / (nn + 4.0 + 2.0 * p.mu_eff / nn);
  p.c_1 = 2.0 / ((nn + 1.3) * (nn + 1.3) + p.mu_eff);
  p.c_mu = std::min(1.0 - p.c_1, 2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) /
                                     ((nn + 2.0) * (nn + 2.0) + p.mu_eff));
  p.validate();
  return p;
}

CmaesState initial_state(const CmaesParams& params) {
  params.validate();
  const int n = params.dimension;
  CmaesState s;
  s.mean = Eigen::VectorXd::Constant(n, kInitialMean);
  s.sigma = kInitialSigma;
  s.cov = Eigen::MatrixXd::Identity(n, n);
  s.path_sigma = Eigen::VectorXd::Zero(n);
  s.path_c = Eigen::VectorXd::Zero(n);
  s.eigen_basis = Eigen::MatrixXd::Identity(n, n);
  s.eigen_scales = Eigen::VectorXd::Ones(n);
  return s;
}

std::vector<Genome> ask(CmaesState& state, const CmaesParams& params,
                        std::uint64_t seed) {
  const int n = params.dimension;
  if (state.mean.size() != n) throw std::invalid_argument("cmaes: state/params mismatch");
  if (!(state.sigma > 0.0)) throw std::invalid_argument("cmaes: sigma must be positive");

  Rng rng(seed);
  const int lambda = params.population_size;
  state.pending.resize(n, lambda);
  std::vector<Genome> out(lambda, Genome(n));
  Eigen::VectorXd z(n);
  for (int k = 0; k < lambda; ++k) {
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    const Eigen::VectorXd x =
        state.mean + state.sigma * (state.eigen_basis *
                                    (state.eigen_scales.array() * z.array()).matrix());
    state.pending.col(k) = x;
    for (int i = 0; i < n; ++i) out[k][i] = std::clamp(x[i], 0.0, 1.0);
  }
  return out;
}

void eigen_refresh(CmaesState& state) {
  const Eigen::Index n = state.cov.rows();
  const double cmax = state.cov.cwiseAbs().maxCoeff();
  const double drift = (state.cov - state.cov.transpose()).cwiseAbs().maxCoeff();
  if (drift > kSymmetryDrift * std::max(1.0, cmax))
    throw std::runtime_error("cmaes: covariance lost symmetry");

  state.cov = ((state.cov + state.cov.transpose()) * 0.5).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(state.cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("cmaes: eigendecomposition failed");

  Eigen::VectorXd evals = solver.eigenvalues();
  bool floored = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (evals[i] < kEigenvalueFloor) {
      evals[i] = kEigenvalueFloor;
      floored = true;
    }
  }
  state.eigen_basis = solver.eigenvectors();
  state.eigen_scales = evals.cwiseSqrt();
  if (floored) {
    state.cov = state.eigen_basis * evals.asDiagonal() * state.eigen_basis.transpose();
    state.cov = ((state.cov + state.cov.transpose()) * 0.5).eval();
  }
}

void tell(CmaesState& state, const CmaesParams& params,
          const std::vector<ScoredCandidate>& scored) {
  const int n = params.dimension;
  const int lambda = params.population_size;
  const int mu = params.parent_count;
  if (static_cast<int>(scored.size()) != lambda)
    throw std::invalid_argument("cmaes: tell expects exactly lambda candidates");
  if (state.pending.cols() != lambda || state.pending.rows() != n)
    throw std::invalid_argument("cmaes: tell called without a matching ask");
  for (int k = 0; k < lambda; ++k) {
    if (!std::isfinite(scored[k].score))
      throw std::invalid_argument("cmaes: non-finite score for candidate " +
                                  std::to_string(k));
    if (static_cast<int>(scored[k].genome.size()) != n)
      throw std::invalid_argument("cmaes: genome length mismatch for candidate " +
                                  std::to_string(k));
  }

  std::vector<int> order(lambda);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scored[a].score < scored[b].score;
  });

  const Eigen::VectorXd mean_old = state.mean;
  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < mu; ++i) {
    y_w += params.weights[i] * (state.pending.col(order[i]) - mean_old);
  }
  y_w /= state.sigma;
  state.mean = mean_old + state.sigma * y_w;

  // C^(-1/2) * y_w through the cached eigensystem.
  const Eigen::VectorXd c_inv_sqrt_yw =
      state.eigen_basis *
      (state.eigen_basis.transpose() * y_w).cwiseQuotient(state.eigen_scales);

  const double chi = chi_n(n);
  const std::int64_t gen = state.generation + 1;
  state.path_sigma = (1.0 - params.c_sigma) * state.path_sigma +
                     std::sqrt(params.c_sigma * (2.0 - params.c_sigma) * params.mu_eff) *
                         c_inv_sqrt_yw;

  const double ps_norm = state.path_sigma.norm();
  const double denom =
      std::sqrt(1.0 - std::pow(1.0 - params.c_sigma, 2.0 * static_cast<double>(gen)));
  const bool h_sigma =
      ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * chi;

  state.path_c = (1.0 - params.c_c) * state.path_c;
  if (h_sigma) {
    state.path_c += std::sqrt(params.c_c * (2.0 - params.c_c) * params.mu_eff) * y_w;
  }

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < mu; ++i) {
    const Eigen::VectorXd y = (state.pending.col(order[i]) - mean_old) / state.sigma;
    rank_mu.noalias() += params.weights[i] * (y * y.transpose());
  }
  const double hs_correction = h_sigma ? 0.0 : params.c_c * (2.0 - params.c_c);
  state.cov = (1.0 - params.c_1 - params.c_mu) * state.cov +
              params.c_1 * (state.path_c * state.path_c.transpose() +
                            hs_correction * state.cov) +
              params.c_mu * rank_mu;

  state.sigma *= std::exp((params.c_sigma / params.d_sigma) * (ps_norm / chi - 1.0));
  state.generation = gen;

  for (int k = 0; k < lambda; ++k) {
    if (scored[k].score < state.best_score) {
      state.best_score = scored[k].score;
      state.best_genome = scored[k].genome;
    }
  }

  state.pending.resize(0, 0);
  eigen_refresh(state);
}

RunResult run(const std::function<double(const Genome&)>& objective, int n,
              int generations, std::uint64_t seed, int lambda_override) {
  if (generations < 1) throw std::invalid_argument("cmaes: budget must be >= 1");
  const CmaesParams params = default_params(n, lambda_override);
  CmaesState state = initial_state(params);

  RunResult result;
  result.history.reserve(generations);
  std::vector<ScoredCandidate> scored(params.population_size);
  std::vector<double> scores(params.population_size);

  for (int g = 0; g < generations; ++g) {
    const auto population = ask(state, params, mix_seed(seed, static_cast<std::uint64_t>(g)));
    for (int k = 0; k < params.population_size; ++k) {
      const double s = objective(population[k]);
      if (!std::isfinite(s))
        throw EvalError("cmaes: objective returned a non-finite score at generation " +
                        std::to_string(g));
      scored[k] = ScoredCandidate{population[k], s};
      scores[k] = s;
    }
    tell(state, params, scored);

    std::sort(scores.begin(), scores.end());
    const int lambda = params.population_size;
    const double median = (lambda % 2 == 1)
                              ? scores[lambda / 2]
                              : 0.5 * (scores[lambda / 2 - 1] + scores[lambda / 2]);
    result.history.push_back(GenerationRecord{g, scores.front(), median, state.sigma});
  }
  result.best = state.best_genome;
  result.best_score = state.best_score;
  return result;
}

void write_history_csv(std::ostream& out, std::span<const GenerationRecord> history) {
  out << "generation,best_score,median_score,sigma\n";
  for (const auto& rec : history) {
    out << rec.generation << ',' << format_double(rec.best_score) << ','
        << format_double(rec.median_score) << ',' << format_double(rec.sigma) << '\n';
  }
}

}  // namespace emtree
