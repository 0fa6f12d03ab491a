#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "l2o/nets.hpp"
#include "l2o/trajectory.hpp"

namespace l2o {

struct TrainConfig {
  int outer_iterations = 300;   // problems sampled from the training set
  int inner_iterations = 50;    // algorithm steps (= alpha updates) per problem
  double learning_rate = 1e-3;  // constant step for plain gradient descent on alpha
  int n_sample = 5;             // prior support size
  double sigma_prior = 0.05;    // scale of the Gaussian perturbations around alpha_0
  double epsilon = 0.05;        // bound confidence parameter
  double r_max = 1.0;           // bounded-rate cutoff
  int t_max = 500;              // iteration budget per rollout
  void validate() const;
};

struct TrainHistoryEntry {
  int outer = 0;
  int inner = 0;
  double loss_train = 0.0;
};

struct TrainResult {
  Eigen::VectorXd alpha0;
  std::vector<TrainHistoryEntry> history;  // one entry per inner iteration
  int divergence_events = 0;               // resampled problems
};

// Distribution with finite support over hyperparameter vectors; used for the
// prior P_H and the PAC-Bayes posterior rho.
struct DiscreteDistribution {
  std::vector<Eigen::VectorXd> support;
  Eigen::VectorXd weights;
  void validate() const;
};

// The per-transition training loss
//   1{l(xi_t) > 0} * l(xi_{t+1}) / l(xi_t) * 1{(theta, xi_t) not in C}.
double training_loss(const Problem& theta, const AlgorithmState& state_t,
                     const AlgorithmState& state_t1);

// Outer loop: sample a problem uniformly from the training set; inner loop:
// one algorithm step, the training loss of that transition, one gradient
// update of alpha. A divergent inner state resamples the problem (counted);
// more than 50% divergent outer iterations raise TrainingFailure.
TrainResult train_hyperparameters(const TrainConfig& cfg, const LearnedArchitecture& arch,
                                  std::span<const Problem* const> training_problems,
                                  const Eigen::VectorXd& alpha_init, std::uint64_t seed);

// Discrete prior: alpha_0 plus n_sample - 1 isotropic Gaussian perturbations
// of scale sigma_prior, uniformly weighted. Uses no certification data.
DiscreteDistribution build_prior(const Eigen::VectorXd& alpha0, int n_sample, double sigma_prior,
                                 RandomnessStream& rng);

// Closed-form Gibbs step: posterior_i proportional to prior_i * exp(-lambda * score_i);
// the exact minimizer of rho[score] + KL(rho || prior) / lambda over the
// support. Scores may be +infinity (those points get zero mass); if every
// prior-charged point has infinite score the step is degenerate.
DiscreteDistribution gibbs_posterior(const DiscreteDistribution& prior,
                                     const Eigen::VectorXd& scores, double lambda);

// Index of the heaviest support point; ties break to the lowest index.
int select_alpha_star_index(const DiscreteDistribution& posterior);
Eigen::VectorXd select_alpha_star(const DiscreteDistribution& posterior);

}  // namespace l2o
