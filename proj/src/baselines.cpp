#include "l2o/baselines.hpp"

#include <cmath>

namespace l2o {

void HbfParams::validate() const {
  if (!(beta1 > 0.0)) throw std::invalid_argument("hbf: beta1 must be positive");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("hbf: need 0 <= beta2 < 1");
}

HbfParams hbf_optimal_params(double m_lower, double L_upper) {
  if (!(0.0 < m_lower && m_lower <= L_upper))
    throw std::invalid_argument("hbf_optimal_params: need 0 < m <= L");
  const double rm = std::sqrt(m_lower);
  const double rL = std::sqrt(L_upper);
  HbfParams p;
  p.beta1 = std::pow(2.0 / (rL + rm), 2);
  p.beta2 = std::pow((rL - rm) / (rL + rm), 2);
  p.validate();
  return p;
}

void hbf_step(const HbfParams& params, const GradFn& grad_fn, AlgorithmState& state) {
  if (state.x.size() != state.x_prev.size()) throw ShapeError("hbf_step: dimension mismatch");
  Eigen::VectorXd next =
      state.x - params.beta1 * grad_fn(state.x) + params.beta2 * (state.x - state.x_prev);
  state.x_prev = state.x;
  state.x = std::move(next);
}

void HbfRule::apply(const Eigen::VectorXd& alpha, const Problem& problem, AlgorithmState& state,
                    RandomnessStream& rng) const {
  (void)rng;
  if (alpha.size() != 2) throw ShapeError("HbfRule: alpha must be [beta1, beta2]");
  const auto* grad_problem = dynamic_cast<const GradientProblem*>(&problem);
  if (grad_problem == nullptr) throw ShapeError("HbfRule: problem exposes no gradient");
  HbfParams params{alpha(0), alpha(1)};
  hbf_step(params, [&](const Eigen::VectorXd& x) { return grad_problem->gradient(x); }, state);
}

void fista_step(const LassoInstance& inst, AlgorithmState& state) {
  if (state.aux.size() < 1 || !(state.aux(0) >= 1.0))
    throw ShapeError("fista_step: aux(0) must carry the momentum scalar >= 1");
  const double beta = 1.0 / inst.lipschitz;
  const double t_momentum = state.aux(0);
  const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
  const double extrapolation = (t_momentum - 1.0) / t_next;

  const Eigen::VectorXd y = state.x + extrapolation * (state.x - state.x_prev);
  Eigen::VectorXd next = soft_threshold(y - beta * lasso_smooth_grad(inst, y), beta * inst.reg);
  state.x_prev = state.x;
  state.x = std::move(next);
  state.aux(0) = t_next;
}

void FistaRule::prepare(const Problem& problem, AlgorithmState& state) const {
  (void)problem;
  state.aux = Eigen::VectorXd::Ones(1);
}

void FistaRule::apply(const Eigen::VectorXd& alpha, const Problem& problem, AlgorithmState& state,
                      RandomnessStream& rng) const {
  (void)alpha, (void)rng;
  const auto* lasso = dynamic_cast<const LassoProblem*>(&problem);
  if (lasso == nullptr) throw ShapeError("FistaRule: expects a LassoProblem");
  fista_step(lasso->instance(), state);
}

}  // namespace l2o
