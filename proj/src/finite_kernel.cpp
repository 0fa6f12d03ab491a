#include "l2o/finite_kernel.hpp"

#include <cmath>
#include <string>

namespace l2o {

void FiniteKernel::validate() const {
  if (probs.rows() == 0 || probs.cols() == 0) throw ShapeError("kernel: empty transition matrix");
  for (int i = 0; i < probs.rows(); ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < probs.cols(); ++j) {
      const double p = probs(i, j);
      if (!(p >= -kStochasticTol && p <= 1.0 + kStochasticTol))
        throw ShapeError("kernel: entry outside [0, 1] at row " + std::to_string(i));
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > kStochasticTol)
      throw ShapeError("kernel: row " + std::to_string(i) + " does not sum to 1");
  }
}

FiniteKernel FiniteKernel::identity(int n) {
  return FiniteKernel{Eigen::MatrixXd::Identity(n, n)};
}

void FiniteMeasure::validate(bool probability) const {
  if (weights.size() == 0) throw ShapeError("measure: empty weight vector");
  for (int i = 0; i < weights.size(); ++i)
    if (!(weights(i) >= -kStochasticTol))
      throw ShapeError("measure: negative weight at state " + std::to_string(i));
  if (probability && std::abs(weights.sum() - 1.0) > kStochasticTol)
    throw ShapeError("measure: total mass is not 1");
}

FiniteMeasure FiniteMeasure::dirac(int n, int state) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  w(state) = 1.0;
  return FiniteMeasure{std::move(w)};
}

std::size_t PathDistribution::path_count(int num_states, int horizon) {
  if (num_states <= 0 || horizon <= 0) throw ShapeError("path law: empty state space or horizon");
  std::size_t count = 1;
  for (int k = 0; k < horizon; ++k) {
    count *= static_cast<std::size_t>(num_states);
    if (count > kMaxEnumeratedPaths)
      throw ShapeError("path law: |S|^horizon exceeds the enumeration guard");
  }
  return count;
}

void PathDistribution::validate() const {
  if (static_cast<std::size_t>(joint.size()) != path_count(num_states, horizon))
    throw ShapeError("path law: joint size does not match |S|^horizon");
  for (int i = 0; i < joint.size(); ++i)
    if (!(joint(i) >= -kStochasticTol)) throw ShapeError("path law: negative path weight");
  if (std::abs(joint.sum() - 1.0) > kStochasticTol)
    throw ShapeError("path law: total mass is not 1");
}

double PathDistribution::prob(std::span<const int> path) const {
  if (static_cast<int>(path.size()) != horizon) throw ShapeError("path law: wrong path length");
  std::size_t index = 0;
  for (int s : path) {
    if (s < 0 || s >= num_states) throw ShapeError("path law: state out of range");
    index = index * static_cast<std::size_t>(num_states) + static_cast<std::size_t>(s);
  }
  return joint(static_cast<Eigen::Index>(index));
}

FiniteKernel kernel_compose(const FiniteKernel& mu, const FiniteKernel& nu) {
  if (mu.cols() != nu.rows()) throw ShapeError("kernel_compose: inner dimensions do not match");
  return FiniteKernel{mu.probs * nu.probs};
}

FiniteKernel kernel_product(const FiniteKernel& mu, const FiniteKernel& nu) {
  if (mu.cols() != nu.rows()) throw ShapeError("kernel_product: inner dimensions do not match");
  const int ny = mu.cols();
  const int nz = nu.cols();
  Eigen::MatrixXd joint(mu.rows(), ny * nz);
  for (int x = 0; x < mu.rows(); ++x)
    for (int y = 0; y < ny; ++y)
      for (int z = 0; z < nz; ++z) joint(x, y * nz + z) = mu.probs(x, y) * nu.probs(y, z);
  return FiniteKernel{std::move(joint)};
}

FiniteKernel semigroup_power(const FiniteKernel& gamma, int t) {
  if (gamma.rows() != gamma.cols()) throw ShapeError("semigroup_power: kernel must be square");
  if (t < 0) throw ShapeError("semigroup_power: negative exponent");
  FiniteKernel result = FiniteKernel::identity(gamma.rows());
  for (int k = 0; k < t; ++k) result = kernel_compose(result, gamma);
  return result;
}

PathDistribution path_law(const FiniteMeasure& init, const FiniteKernel& gamma,
                          std::span<const int> times) {
  if (gamma.rows() != gamma.cols()) throw ShapeError("path_law: kernel must be square");
  if (init.size() != gamma.rows()) throw ShapeError("path_law: init/kernel dimension mismatch");
  if (times.empty()) throw std::invalid_argument("path_law: empty time list");
  if (times.front() < 0) throw std::invalid_argument("path_law: negative time point");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (times[k] <= times[k - 1])
      throw std::invalid_argument("path_law: times must be strictly increasing");

  const int n = gamma.rows();
  const int horizon = static_cast<int>(times.size());
  const std::size_t count = PathDistribution::path_count(n, horizon);

  // First marginal is init pushed through gamma^{t_0}; afterwards each gap
  // contributes one conditional factor gamma^{t_{k+1} - t_k}(x_k, x_{k+1}).
  const Eigen::VectorXd start =
      (init.weights.transpose() * semigroup_power(gamma, times.front()).probs).transpose();
  std::vector<Eigen::MatrixXd> gaps;
  gaps.reserve(times.size() - 1);
  for (std::size_t k = 1; k < times.size(); ++k)
    gaps.push_back(semigroup_power(gamma, times[k] - times[k - 1]).probs);

  PathDistribution law;
  law.horizon = horizon;
  law.num_states = n;
  law.joint.resize(static_cast<Eigen::Index>(count));
  std::vector<int> path(times.size(), 0);
  for (std::size_t index = 0; index < count; ++index) {
    std::size_t rest = index;
    for (int k = horizon - 1; k >= 0; --k) {
      path[k] = static_cast<int>(rest % static_cast<std::size_t>(n));
      rest /= static_cast<std::size_t>(n);
    }
    double w = start(path[0]);
    for (std::size_t k = 0; k + 1 < times.size() && w != 0.0; ++k)
      w *= gaps[k](path[k], path[k + 1]);
    law.joint(static_cast<Eigen::Index>(index)) = w;
  }
  return law;
}

double joint_factorization_check(std::span<const FiniteKernel> gammas,
                                 std::span<const FiniteMeasure> inits, int horizon) {
  if (gammas.size() != inits.size() || gammas.empty())
    throw ShapeError("joint_factorization_check: need one init per kernel");
  const int num_chains = static_cast<int>(gammas.size());
  std::vector<int> sizes(num_chains);
  std::size_t tuple_states = 1;
  for (int c = 0; c < num_chains; ++c) {
    if (gammas[c].rows() != gammas[c].cols())
      throw ShapeError("joint_factorization_check: kernels must be square");
    if (inits[c].size() != gammas[c].rows())
      throw ShapeError("joint_factorization_check: init/kernel dimension mismatch");
    sizes[c] = gammas[c].rows();
    tuple_states *= static_cast<std::size_t>(sizes[c]);
  }

  // Route A: one chain on the tuple space with the product kernel and init.
  const int ts = static_cast<int>(tuple_states);
  Eigen::MatrixXd product_kernel(ts, ts);
  Eigen::VectorXd product_init(ts);
  auto decode = [&](std::size_t index, std::vector<int>& states) {
    for (int c = num_chains - 1; c >= 0; --c) {
      states[c] = static_cast<int>(index % static_cast<std::size_t>(sizes[c]));
      index /= static_cast<std::size_t>(sizes[c]);
    }
  };
  std::vector<int> from(num_chains), to(num_chains);
  for (int i = 0; i < ts; ++i) {
    decode(static_cast<std::size_t>(i), from);
    double w0 = 1.0;
    for (int c = 0; c < num_chains; ++c) w0 *= inits[c].weights(from[c]);
    product_init(i) = w0;
    for (int j = 0; j < ts; ++j) {
      decode(static_cast<std::size_t>(j), to);
      double w = 1.0;
      for (int c = 0; c < num_chains; ++c) w *= gammas[c].probs(from[c], to[c]);
      product_kernel(i, j) = w;
    }
  }
  std::vector<int> times(static_cast<std::size_t>(horizon));
  for (int k = 0; k < horizon; ++k) times[static_cast<std::size_t>(k)] = k;
  const PathDistribution joint =
      path_law(FiniteMeasure{std::move(product_init)}, FiniteKernel{std::move(product_kernel)},
               times);

  // Route B: per-chain path laws, multiplied per tuple path.
  std::vector<PathDistribution> marginals;
  marginals.reserve(gammas.size());
  for (int c = 0; c < num_chains; ++c) marginals.push_back(path_law(inits[c], gammas[c], times));

  double max_dev = 0.0;
  std::vector<int> tuple_path(static_cast<std::size_t>(horizon));
  std::vector<std::vector<int>> chain_paths(gammas.size(),
                                            std::vector<int>(static_cast<std::size_t>(horizon)));
  for (std::size_t index = 0; index < joint.size(); ++index) {
    std::size_t rest = index;
    for (int k = horizon - 1; k >= 0; --k) {
      const int tuple_state = static_cast<int>(rest % tuple_states);
      rest /= tuple_states;
      decode(static_cast<std::size_t>(tuple_state), from);
      for (int c = 0; c < num_chains; ++c) chain_paths[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = from[c];
    }
    double factored = 1.0;
    for (int c = 0; c < num_chains; ++c)
      factored *= marginals[static_cast<std::size_t>(c)].prob(chain_paths[static_cast<std::size_t>(c)]);
    max_dev = std::max(max_dev, std::abs(joint.joint(static_cast<Eigen::Index>(index)) - factored));
  }
  return max_dev;
}

Eigen::VectorXd hitting_time_law(const FiniteMeasure& init, const FiniteKernel& gamma,
                                 std::span<const int> target, int t_max) {
  if (gamma.rows() != gamma.cols()) throw ShapeError("hitting_time_law: kernel must be square");
  if (init.size() != gamma.rows()) throw ShapeError("hitting_time_law: dimension mismatch");
  if (t_max < 0) throw std::invalid_argument("hitting_time_law: t_max must be nonnegative");

  const int n = gamma.rows();
  std::vector<bool> in_target(static_cast<std::size_t>(n), false);
  for (int s : target) {
    if (s < 0 || s >= n) throw ShapeError("hitting_time_law: target state out of range");
    in_target[static_cast<std::size_t>(s)] = true;
  }

  Eigen::VectorXd law = Eigen::VectorXd::Zero(t_max + 1);
  // alive carries the sub-probability of not having entered the target yet.
  Eigen::VectorXd alive = init.weights;
  double entered = 0.0;
  for (int s = 0; s < n; ++s)
    if (in_target[static_cast<std::size_t>(s)]) {
      entered += alive(s);
      alive(s) = 0.0;
    }
  if (t_max == 0) {
    law(0) = 1.0;  // tau = min(0, tau_conv) = 0 regardless of the target
    return law;
  }
  law(0) = entered;
  for (int t = 1; t < t_max; ++t) {
    alive = (alive.transpose() * gamma.probs).transpose();
    entered = 0.0;
    for (int s = 0; s < n; ++s)
      if (in_target[static_cast<std::size_t>(s)]) {
        entered += alive(s);
        alive(s) = 0.0;
      }
    law(t) = entered;
  }
  // Everything still alive after t_max - 1 transitions stops at t_max,
  // whether it enters the target exactly then or never does.
  law(t_max) = alive.sum();
  return law;
}

std::pair<double, double> bernoulli_laplace_check(const FiniteKernel& gamma,
                                                  const FiniteMeasure& init, int horizon,
                                                  const PathPredicate& event, double lambda,
                                                  int num_chains) {
  if (num_chains < 1) throw std::invalid_argument("bernoulli_laplace_check: need N >= 1");
  std::vector<int> times(static_cast<std::size_t>(horizon));
  for (int k = 0; k < horizon; ++k) times[static_cast<std::size_t>(k)] = k;
  const PathDistribution law = path_law(init, gamma, times);

  // Tabulate (weight, indicator) per path once.
  const std::size_t paths = law.size();
  std::size_t tuples = 1;
  for (int c = 0; c < num_chains; ++c) {
    tuples *= paths;
    if (tuples > kMaxEnumeratedPaths)
      throw ShapeError("bernoulli_laplace_check: tuple enumeration exceeds the guard");
  }
  std::vector<double> weight(paths);
  std::vector<int> hit(paths);
  std::vector<int> path(static_cast<std::size_t>(horizon));
  double p = 0.0;
  for (std::size_t index = 0; index < paths; ++index) {
    std::size_t rest = index;
    for (int k = horizon - 1; k >= 0; --k) {
      path[static_cast<std::size_t>(k)] =
          static_cast<int>(rest % static_cast<std::size_t>(law.num_states));
      rest /= static_cast<std::size_t>(law.num_states);
    }
    weight[index] = law.joint(static_cast<Eigen::Index>(index));
    hit[index] = event(path) ? 1 : 0;
    if (hit[index]) p += weight[index];
  }

  // Exact expansion of the left side over all N-tuples of paths.
  const double step_factor = std::exp(-lambda / static_cast<double>(num_chains));
  double lhs = 0.0;
  std::vector<std::size_t> pick(static_cast<std::size_t>(num_chains), 0);
  for (;;) {
    double w = 1.0;
    int hits = 0;
    for (int c = 0; c < num_chains; ++c) {
      w *= weight[pick[static_cast<std::size_t>(c)]];
      hits += hit[pick[static_cast<std::size_t>(c)]];
    }
    lhs += w * std::pow(step_factor, hits);
    int c = num_chains - 1;
    while (c >= 0 && ++pick[static_cast<std::size_t>(c)] == paths) {
      pick[static_cast<std::size_t>(c)] = 0;
      --c;
    }
    if (c < 0) break;
  }

  const double rhs = std::pow(1.0 - (1.0 - step_factor) * p, num_chains);
  return {lhs, rhs};
}

}  // namespace l2o
