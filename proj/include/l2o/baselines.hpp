#pragma once

#include <Eigen/Dense>
#include <functional>

#include "l2o/problems.hpp"
#include "l2o/trajectory.hpp"

namespace l2o {

// Heavy-ball with friction: x+ = x - beta1 grad f(x) + beta2 (x - x_prev).
struct HbfParams {
  double beta1 = 0.0;  // step size
  double beta2 = 0.0;  // momentum coefficient
  void validate() const;
};

// Worst-case-optimal coefficients on an m-strongly-convex, L-smooth class:
// beta1 = (2 / (sqrt(L) + sqrt(m)))^2, beta2 = ((sqrt(L) - sqrt(m)) / (sqrt(L) + sqrt(m)))^2.
HbfParams hbf_optimal_params(double m_lower, double L_upper);

using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

void hbf_step(const HbfParams& params, const GradFn& grad_fn, AlgorithmState& state);

// Engine adapter; alpha = [beta1, beta2]. Convention: x_prev starts at x_0,
// so the first step is plain gradient descent.
class HbfRule : public UpdateRule {
 public:
  void apply(const Eigen::VectorXd& alpha, const Problem& problem, AlgorithmState& state,
             RandomnessStream& rng) const override;
};

// FISTA on a LassoInstance: extrapolation with beta1_t = (beta2_t - 1) / beta2_{t+1},
// momentum recursion beta2_{t+1} = (1 + sqrt(1 + 4 beta2_t^2)) / 2, then a
// prox-gradient step with step size 1/L. state.aux(0) carries beta2_t,
// initialized to 1 with x_prev = x_0.
void fista_step(const LassoInstance& inst, AlgorithmState& state);

class FistaRule : public UpdateRule {
 public:
  void prepare(const Problem& problem, AlgorithmState& state) const override;
  void apply(const Eigen::VectorXd& alpha, const Problem& problem, AlgorithmState& state,
             RandomnessStream& rng) const override;
};

}  // namespace l2o
