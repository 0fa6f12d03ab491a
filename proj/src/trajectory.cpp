#include "l2o/trajectory.hpp"

#include <cmath>
#include <cstdio>

namespace l2o {

AlgorithmState initial_state(const Problem& problem) {
  AlgorithmState state;
  state.x = problem.initial_point();
  state.x_prev = state.x;
  state.loss = problem.loss(state.x);
  state.loss_prev = state.loss;
  return state;
}

TrajectoryRecord rollout(const UpdateRule& rule, const Eigen::VectorXd& alpha,
                         const Problem& problem, const AlgorithmState& init, RandomnessStream rng,
                         const StoppingConfig& stop) {
  if (stop.t_max < 1) throw ConfigError("rollout: t_max must be >= 1");
  if (init.x.size() != problem.dim()) throw ShapeError("rollout: init dimension mismatch");

  AlgorithmState state = init;
  if (state.x_prev.size() == 0) state.x_prev = state.x;
  if (state.x_prev.size() != state.x.size())
    throw ShapeError("rollout: x and x_prev dimensions differ");
  rule.prepare(problem, state);
  state.loss = problem.loss(state.x);
  state.loss_prev = problem.loss(state.x_prev);

  const auto converged_now = [&](const AlgorithmState& s) {
    return stop.convergence_test ? stop.convergence_test(problem, s)
                                 : problem.in_convergence_set(s.x);
  };

  TrajectoryRecord record;
  record.losses.reserve(static_cast<std::size_t>(stop.t_max) + 1);
  record.losses.push_back(state.loss);

  int t = 0;
  for (;;) {
    if (converged_now(state)) {
      record.tau = t;
      record.converged = true;
      break;
    }
    if (t == stop.t_max) {
      record.tau = stop.t_max;
      record.converged = false;
      break;
    }
    rule.apply(alpha, problem, state, rng);
    ++t;
    if (!state.x.allFinite())
      throw DivergenceError(t, "rollout: non-finite iterate at iteration " + std::to_string(t));
    state.loss_prev = state.loss;
    state.loss = problem.loss(state.x);
    if (!std::isfinite(state.loss))
      throw DivergenceError(t, "rollout: non-finite loss at iteration " + std::to_string(t));
    record.losses.push_back(state.loss);
  }

  record.rate = rate_sample(record.losses, record.tau);
  record.rate_bounded = bounded_rate(record.rate, stop.r_max);
  record.final_x = state.x;
  return record;
}

double contraction(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double denom = problem.loss(y);
  if (!(denom > 0.0)) return 0.0;
  return problem.loss(x) / denom;
}

double rate_sample(std::span<const double> losses, int tau) {
  if (tau < 0 || static_cast<std::size_t>(tau) >= losses.size())
    throw std::invalid_argument("rate_sample: tau outside recorded losses");
  if (tau == 0) return 0.0;
  const double start = losses[0];
  if (!(start > 0.0)) return 0.0;
  const double ratio = losses[static_cast<std::size_t>(tau)] / start;
  return std::pow(ratio, 1.0 / static_cast<double>(tau));
}

double bounded_rate(double rate, double r_max) {
  if (!(r_max > 0.0)) throw std::invalid_argument("bounded_rate: r_max must be positive");
  return rate <= r_max ? rate : 0.0;
}

EmpiricalStats empirical_statistics(std::span<const TrajectoryRecord> records,
                                    const TrajectoryPredicate& event) {
  if (records.empty()) throw std::invalid_argument("empirical_statistics: empty record list");
  EmpiricalStats stats;
  double sum_tau = 0.0, sum_rb = 0.0, sum_event = 0.0;
  for (const TrajectoryRecord& r : records) {
    sum_tau += static_cast<double>(r.tau);
    sum_rb += r.rate_bounded;
    if (event && event(r)) sum_event += 1.0;
  }
  const double n = static_cast<double>(records.size());
  stats.mean_tau = sum_tau / n;
  stats.mean_rate_bounded = sum_rb / n;
  stats.event_frequency = event ? sum_event / n : 0.0;
  return stats;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record) {
  out << "t,loss\n";
  char buf[64];
  for (std::size_t t = 0; t < record.losses.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", t, record.losses[t]);
    out << buf;
  }
}

}  // namespace l2o
