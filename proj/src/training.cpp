#include "l2o/training.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace l2o {

void TrainConfig::validate() const {
  if (outer_iterations < 1 || inner_iterations < 1)
    throw ConfigError("train config: iteration counts must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("train config: learning rate must be >= 0");
  if (n_sample < 1) throw ConfigError("train config: n_sample must be >= 1");
  if (!(sigma_prior >= 0.0)) throw ConfigError("train config: sigma_prior must be >= 0");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("train config: epsilon must be in (0,1)");
  if (!(r_max > 0.0)) throw ConfigError("train config: r_max must be positive");
  if (t_max < 1) throw ConfigError("train config: t_max must be >= 1");
}

void DiscreteDistribution::validate() const {
  if (support.empty() || static_cast<int>(support.size()) != weights.size())
    throw ShapeError("discrete distribution: support/weight size mismatch");
  double total = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    if (!(weights(i) >= 0.0)) throw ShapeError("discrete distribution: negative weight");
    total += weights(i);
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ShapeError("discrete distribution: weights do not sum to 1");
  for (std::size_t i = 1; i < support.size(); ++i)
    if (support[i].size() != support[0].size())
      throw ShapeError("discrete distribution: support dimensions differ");
}

double training_loss(const Problem& theta, const AlgorithmState& state_t,
                     const AlgorithmState& state_t1) {
  const double loss_t = theta.loss(state_t.x);
  if (!(loss_t > 0.0)) return 0.0;
  if (theta.in_convergence_set(state_t.x)) return 0.0;
  return theta.loss(state_t1.x) / loss_t;
}

namespace {

bool finite_state(const AlgorithmState& state, const Eigen::VectorXd* grad) {
  if (!state.x.allFinite() || !std::isfinite(state.loss)) return false;
  return grad == nullptr || grad->allFinite();
}

}  // namespace

TrainResult train_hyperparameters(const TrainConfig& cfg, const LearnedArchitecture& arch,
                                  std::span<const Problem* const> training_problems,
                                  const Eigen::VectorXd& alpha_init, std::uint64_t seed) {
  cfg.validate();
  if (training_problems.empty()) throw ConfigError("train: empty training set");
  if (alpha_init.size() != arch.layout().param_count())
    throw ShapeError("train: alpha_init does not match the architecture");

  RandomnessStream sampler(seed, kTagTraining);
  TrainResult result;
  result.alpha0 = alpha_init;
  result.history.reserve(static_cast<std::size_t>(cfg.outer_iterations) *
                         static_cast<std::size_t>(cfg.inner_iterations));

  const auto draw_problem = [&]() -> const Problem* {
    const std::size_t index =
        static_cast<std::size_t>(sampler.uniform() * static_cast<double>(training_problems.size()));
    return training_problems[std::min(index, training_problems.size() - 1)];
  };

  int divergent_outer = 0;
  Eigen::VectorXd grad(alpha_init.size());
  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    const Problem* problem = draw_problem();
    AlgorithmState state = initial_state(*problem);
    bool outer_diverged = false;

    for (int inner = 0; inner < cfg.inner_iterations; ++inner) {
      double l_train = 0.0;
      int retries = 0;
      for (;;) {
        AlgorithmState candidate = state;
        l_train = arch.training_step(result.alpha0, *problem, candidate, &grad);
        if (finite_state(candidate, &grad) && std::isfinite(l_train)) {
          state = std::move(candidate);
          break;
        }
        // Divergent inner state: resample the problem, restart its
        // trajectory, and redo this inner iteration.
        ++result.divergence_events;
        outer_diverged = true;
        if (++retries > 100)
          throw TrainingFailure("train: persistent divergence in outer iteration " +
                                std::to_string(outer));
        problem = draw_problem();
        state = initial_state(*problem);
      }
      result.alpha0 -= cfg.learning_rate * grad;
      result.history.push_back({outer, inner, l_train});
    }
    if (outer_diverged) ++divergent_outer;
  }

  if (2 * divergent_outer > cfg.outer_iterations)
    throw TrainingFailure("train: more than 50% of outer iterations diverged (" +
                          std::to_string(divergent_outer) + "/" +
                          std::to_string(cfg.outer_iterations) + ")");
  return result;
}

DiscreteDistribution build_prior(const Eigen::VectorXd& alpha0, int n_sample, double sigma_prior,
                                 RandomnessStream& rng) {
  if (n_sample < 1) throw ConfigError("build_prior: n_sample must be >= 1");
  if (!(sigma_prior >= 0.0)) throw ConfigError("build_prior: sigma_prior must be >= 0");
  DiscreteDistribution prior;
  prior.support.reserve(static_cast<std::size_t>(n_sample));
  prior.support.push_back(alpha0);
  for (int i = 1; i < n_sample; ++i) {
    Eigen::VectorXd point = alpha0;
    for (int j = 0; j < point.size(); ++j) point(j) += sigma_prior * rng.normal();
    prior.support.push_back(std::move(point));
  }
  prior.weights =
      Eigen::VectorXd::Constant(n_sample, 1.0 / static_cast<double>(n_sample));
  prior.validate();
  return prior;
}

DiscreteDistribution gibbs_posterior(const DiscreteDistribution& prior,
                                     const Eigen::VectorXd& scores, double lambda) {
  prior.validate();
  if (scores.size() != prior.weights.size())
    throw ShapeError("gibbs_posterior: one score per support point required");
  if (!(lambda > 0.0)) throw std::invalid_argument("gibbs_posterior: lambda must be positive");

  // Shift by the smallest charged finite score before exponentiating.
  double shift = std::numeric_limits<double>::infinity();
  for (int i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores(i))) throw std::invalid_argument("gibbs_posterior: NaN score");
    if (prior.weights(i) > 0.0 && std::isfinite(scores(i))) shift = std::min(shift, scores(i));
  }
  if (!std::isfinite(shift))
    throw NumericError("gibbs_posterior: all prior mass sits on infinite scores");

  DiscreteDistribution posterior;
  posterior.support = prior.support;
  posterior.weights.resize(prior.weights.size());
  double total = 0.0;
  for (int i = 0; i < scores.size(); ++i) {
    const double w = std::isfinite(scores(i))
                         ? prior.weights(i) * std::exp(-lambda * (scores(i) - shift))
                         : 0.0;
    posterior.weights(i) = w;
    total += w;
  }
  posterior.weights /= total;
  return posterior;
}

int select_alpha_star_index(const DiscreteDistribution& posterior) {
  posterior.validate();
  int best = 0;
  for (int i = 1; i < posterior.weights.size(); ++i)
    if (posterior.weights(i) > posterior.weights(best)) best = i;
  return best;
}

Eigen::VectorXd select_alpha_star(const DiscreteDistribution& posterior) {
  return posterior.support[static_cast<std::size_t>(select_alpha_star_index(posterior))];
}

}  // namespace l2o
