#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "l2o/errors.hpp"
#include "l2o/random.hpp"

namespace l2o {

// State of an iterative algorithm. The optimization variable x lives inside a
// larger algorithm state that also tracks the previous iterate, rule-specific
// auxiliary scalars (e.g. a momentum counter), and cached loss values. The
// caches are maintained by the rollout so downstream statistics reuse the
// exact loss realizations the rollout saw.
struct AlgorithmState {
  Eigen::VectorXd x;
  Eigen::VectorXd x_prev;
  Eigen::VectorXd aux;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double loss_prev = std::numeric_limits<double>::quiet_NaN();
};

// A parametric problem instance: loss oracle plus membership test for the
// convergence set C. Concrete families live in problems.hpp.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual int dim() const = 0;
  virtual double loss(const Eigen::VectorXd& x) const = 0;
  virtual bool in_convergence_set(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd initial_point() const { return Eigen::VectorXd::Zero(dim()); }
};

// Problems exposing a (smooth-part) gradient, used by gradient-based rules.
class GradientProblem : public Problem {
 public:
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
};

// One iteration of a parametric algorithm: state -> state, reading the flat
// hyperparameter vector alpha. Rules must write both x and x_prev; loss
// caches are the engine's job.
class UpdateRule {
 public:
  virtual ~UpdateRule() = default;
  // Initializes rule-owned scalars in state.aux before the first step.
  virtual void prepare(const Problem& problem, AlgorithmState& state) const { (void)problem, (void)state; }
  virtual void apply(const Eigen::VectorXd& alpha, const Problem& problem, AlgorithmState& state,
                     RandomnessStream& rng) const = 0;
};

struct StoppingConfig {
  int t_max = 1;
  double r_max = 1.0;
  // Membership test for the convergence set. Defaults to the problem's own.
  std::function<bool(const Problem&, const AlgorithmState&)> convergence_test;
};

struct TrajectoryRecord {
  std::vector<double> losses;  // loss at iterates 0..tau
  int tau = 0;                 // stopping time, first entry into C capped at t_max
  bool converged = false;      // tau_conv <= t_max
  double rate = 0.0;           // (loss_tau / loss_0)^{1/tau} * 1{tau >= 1}
  double rate_bounded = 0.0;   // rate * 1{rate <= r_max}
  Eigen::VectorXd final_x;
};

// Canonical start: x = x_prev = problem.initial_point() with loss caches set.
AlgorithmState initial_state(const Problem& problem);

// Iterates the rule from init until the convergence test fires or t_max is
// reached. The test is evaluated on iterates 0..tau only; no iterate beyond
// tau is ever generated. Throws DivergenceError on a non-finite iterate.
TrajectoryRecord rollout(const UpdateRule& rule, const Eigen::VectorXd& alpha,
                         const Problem& problem, const AlgorithmState& init, RandomnessStream rng,
                         const StoppingConfig& stop);

// Loss ratio l(x) / l(y), zero whenever l(y) = 0.
double contraction(const Problem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Realized rate from recorded losses: (losses[tau] / losses[0])^{1/tau} with
// the 1{tau >= 1} and 1{losses[0] > 0} conventions.
double rate_sample(std::span<const double> losses, int tau);

// rate * 1{rate <= r_max}; values above r_max map to zero, not to r_max.
double bounded_rate(double rate, double r_max);

struct EmpiricalStats {
  double mean_tau = 0.0;
  double mean_rate_bounded = 0.0;
  double event_frequency = 0.0;
};

using TrajectoryPredicate = std::function<bool(const TrajectoryRecord&)>;

// Arithmetic means over records; event_frequency is 0 when no predicate is
// registered. Throws on an empty list.
EmpiricalStats empirical_statistics(std::span<const TrajectoryRecord> records,
                                    const TrajectoryPredicate& event = nullptr);

// Dump for plotting: header "t,loss", one row per recorded iterate.
void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record);

}  // namespace l2o
