#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "l2o/errors.hpp"

namespace l2o {

// Exact finite-state realization of the transition-kernel algebra: kernels
// are row-stochastic matrices, measures are weight vectors, and path laws are
// explicit joint distributions over S^horizon. All identities (semigroup,
// composition/product consistency, factorization of product chains) can then
// be asserted to machine precision.

inline constexpr double kStochasticTol = 1e-12;

// Explicit path enumeration stays honest only at toy sizes.
inline constexpr std::size_t kMaxEnumeratedPaths = 100000;

// A probability kernel between finite state spaces: probs(i, j) is the mass
// moved from source state i to target state j. Every row sums to one.
struct FiniteKernel {
  Eigen::MatrixXd probs;

  int rows() const { return static_cast<int>(probs.rows()); }
  int cols() const { return static_cast<int>(probs.cols()); }

  // Throws ShapeError when a row fails to be a probability vector.
  void validate() const;

  static FiniteKernel identity(int n);
};

// A finite (sub-)probability measure as a nonnegative weight vector.
struct FiniteMeasure {
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(weights.size()); }
  double mass() const { return weights.sum(); }

  // probability = true additionally requires unit total mass.
  void validate(bool probability = true) const;

  static FiniteMeasure dirac(int n, int state);
};

// Joint law of a path (x_{t_0}, ..., x_{t_K}) over a finite state space.
// joint is indexed lexicographically with the first time point most
// significant: index = ((x_0 * S + x_1) * S + ...) + x_K.
struct PathDistribution {
  int horizon = 0;     // number of time points K+1
  int num_states = 0;  // |S|
  Eigen::VectorXd joint;

  void validate() const;
  double prob(std::span<const int> path) const;
  std::size_t size() const { return static_cast<std::size_t>(joint.size()); }

  // |S|^horizon with the enumeration guard; throws ShapeError beyond it.
  static std::size_t path_count(int num_states, int horizon);
};

// Composition (mu . nu)(x, B) = sum_y mu(x, y) nu(y, B); a plain matrix
// product of the transition matrices.
FiniteKernel kernel_compose(const FiniteKernel& mu, const FiniteKernel& nu);

// Product (mu (x) nu): source state -> joint law over pairs (y, z) with
// mass mu(x, y) nu(y, z). Pair (y, z) is flattened as y * nu.cols() + z, so
// marginalizing the second slot recovers mu and marginalizing the first
// recovers the composition mu . nu.
FiniteKernel kernel_product(const FiniteKernel& mu, const FiniteKernel& nu);

// t-fold composition; t = 0 is the identity kernel (gamma^0 = delta_x).
FiniteKernel semigroup_power(const FiniteKernel& gamma, int t);

// Law of (xi^{t_0}, ..., xi^{t_K}) built from the initial measure and the
// gap powers gamma^{t_{k+1} - t_k}. Times must be strictly increasing and
// nonnegative; t_0 > 0 pushes init through gamma^{t_0} first.
PathDistribution path_law(const FiniteMeasure& init, const FiniteKernel& gamma,
                          std::span<const int> times);

// Builds the joint path law of N independent chains two ways -- as a single
// product chain on the tuple space versus as the product of per-chain path
// laws -- and returns the maximum absolute discrepancy between them.
double joint_factorization_check(std::span<const FiniteKernel> gammas,
                                 std::span<const FiniteMeasure> inits, int horizon);

// Exact law of tau = min(t_max, first entry time into target) via dynamic
// programming on the absorbing modification. Result has t_max + 1 entries;
// the mass at t_max collects both first entry at t_max and never entering.
Eigen::VectorXd hitting_time_law(const FiniteMeasure& init, const FiniteKernel& gamma,
                                 std::span<const int> target, int t_max);

// Path-level event over a finite window.
using PathPredicate = std::function<bool(std::span<const int>)>;

// Checks the Laplace-transform identity for the empirical frequency of a
// path event A over N i.i.d. chains:
//   E[exp(-(lambda/N) sum_n 1_A(path_n))]  ==  (1 - (1 - e^{-lambda/N}) p)^N.
// The left side is expanded exactly over all N-tuples of paths; the right
// side evaluates the closed form with p the exact event probability.
std::pair<double, double> bernoulli_laplace_check(const FiniteKernel& gamma,
                                                  const FiniteMeasure& init, int horizon,
                                                  const PathPredicate& event, double lambda,
                                                  int num_chains);

}  // namespace l2o
