#include "l2o/finite_kernel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "l2o/random.hpp"

using namespace l2o;

namespace {

FiniteKernel make_kernel(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  FiniteKernel k{std::move(m)};
  k.validate();
  return k;
}

FiniteKernel random_kernel(int n, RandomnessStream& rng) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j = 0; j < n; ++j) {
      m(i, j) = rng.uniform() + 1e-3;
      total += m(i, j);
    }
    m.row(i) /= total;
  }
  return FiniteKernel{std::move(m)};
}

FiniteMeasure random_measure(int n, RandomnessStream& rng) {
  Eigen::VectorXd w(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    w(i) = rng.uniform() + 1e-3;
    total += w(i);
  }
  return FiniteMeasure{w / total};
}

// Independent oracle: probability of each path by explicit product of the
// initial weight and one transition factor per step.
double path_probability_oracle(const FiniteMeasure& init, const FiniteKernel& gamma,
                               const std::vector<int>& path) {
  double p = init.weights(path[0]);
  for (std::size_t k = 0; k + 1 < path.size(); ++k) p *= gamma.probs(path[k], path[k + 1]);
  return p;
}

void enumerate_paths(int num_states, int length, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> path(static_cast<std::size_t>(length), 0);
  for (;;) {
    fn(path);
    int k = length - 1;
    while (k >= 0 && ++path[static_cast<std::size_t>(k)] == num_states) {
      path[static_cast<std::size_t>(k)] = 0;
      --k;
    }
    if (k < 0) return;
  }
}

}  // namespace

TEST(KernelCompose, IdentityIsNeutral) {
  const FiniteKernel k = make_kernel({{0.5, 0.5}, {0.1, 0.9}});
  const FiniteKernel id = FiniteKernel::identity(2);
  EXPECT_TRUE(kernel_compose(id, k).probs.isApprox(k.probs, 0.0));
  EXPECT_TRUE(kernel_compose(k, id).probs.isApprox(k.probs, 0.0));
}

TEST(KernelCompose, TwoStateSelfComposition) {
  const FiniteKernel k = make_kernel({{0.5, 0.5}, {0.1, 0.9}});
  const FiniteKernel squared = kernel_compose(k, k);
  EXPECT_NEAR(squared.probs(0, 0), 0.30, 1e-15);
  squared.validate();
}

TEST(KernelCompose, ShapeMismatchThrows) {
  const FiniteKernel k2 = make_kernel({{0.5, 0.5}, {0.1, 0.9}});
  FiniteKernel k23{Eigen::MatrixXd(2, 3)};
  k23.probs << 0.2, 0.3, 0.5, 1.0, 0.0, 0.0;
  EXPECT_THROW(kernel_compose(k23, k23), ShapeError);
  EXPECT_NO_THROW(kernel_compose(k2, k23));
}

TEST(KernelProduct, MarginalRecoversFactors) {
  RandomnessStream rng(7, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const FiniteKernel mu = random_kernel(3, rng);
    const FiniteKernel nu = random_kernel(3, rng);
    const FiniteKernel product = kernel_product(mu, nu);
    product.validate();
    const FiniteKernel composed = kernel_compose(mu, nu);
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y) {
        double over_second = 0.0;  // sum_z of (mu x nu)(x, (y, z)) == mu(x, y)
        for (int z = 0; z < 3; ++z) over_second += product.probs(x, y * 3 + z);
        EXPECT_NEAR(over_second, mu.probs(x, y), 1e-12);
      }
    for (int x = 0; x < 3; ++x)
      for (int z = 0; z < 3; ++z) {
        double over_first = 0.0;  // sum_y == composition
        for (int y = 0; y < 3; ++y) over_first += product.probs(x, y * 3 + z);
        EXPECT_NEAR(over_first, composed.probs(x, z), 1e-12);
      }
  }
}

TEST(KernelProduct, DiracSource) {
  // From a deterministic kernel delta_{x -> 0}, the product law is nu(0, .)
  // concentrated on pairs (0, z).
  const FiniteKernel dirac = make_kernel({{1.0, 0.0}, {1.0, 0.0}});
  const FiniteKernel nu = make_kernel({{0.25, 0.75}, {0.6, 0.4}});
  const FiniteKernel product = kernel_product(dirac, nu);
  EXPECT_DOUBLE_EQ(product.probs(0, 0 * 2 + 0), 0.25);
  EXPECT_DOUBLE_EQ(product.probs(0, 0 * 2 + 1), 0.75);
  EXPECT_DOUBLE_EQ(product.probs(0, 1 * 2 + 0), 0.0);
  EXPECT_DOUBLE_EQ(product.probs(0, 1 * 2 + 1), 0.0);
}

TEST(KernelProduct, TwoStatePairEnumeration) {
  const FiniteKernel mu = make_kernel({{0.5, 0.5}, {0.1, 0.9}});
  const FiniteKernel nu = make_kernel({{0.3, 0.7}, {0.8, 0.2}});
  const FiniteKernel product = kernel_product(mu, nu);
  for (int y = 0; y < 2; ++y)
    for (int z = 0; z < 2; ++z)
      EXPECT_NEAR(product.probs(0, y * 2 + z), mu.probs(0, y) * nu.probs(y, z), 1e-15);
  EXPECT_NEAR(product.probs(0, 0 * 2 + 1), mu.probs(0, 0) * nu.probs(0, 1), 1e-15);
}

TEST(SemigroupPower, ZeroIsIdentity) {
  const FiniteKernel gamma = make_kernel({{0.5, 0.5}, {0.1, 0.9}});
  EXPECT_TRUE(semigroup_power(gamma, 0).probs.isApprox(Eigen::MatrixXd::Identity(2, 2), 0.0));
  EXPECT_TRUE(semigroup_power(gamma, 1).probs.isApprox(gamma.probs, 0.0));
}

TEST(SemigroupPower, CubeMatchesMatrixPower) {
  RandomnessStream rng(11, 0);
  const FiniteKernel gamma = random_kernel(4, rng);
  const Eigen::MatrixXd cube = gamma.probs * gamma.probs * gamma.probs;
  EXPECT_LT((semigroup_power(gamma, 3).probs - cube).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SemigroupPower, ChapmanKolmogorov) {
  RandomnessStream rng(13, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const FiniteKernel gamma = random_kernel(4, rng);
    for (int s = 0; s <= 6; ++s)
      for (int t = 0; t <= 6; ++t) {
        const Eigen::MatrixXd lhs = semigroup_power(gamma, s + t).probs;
        const Eigen::MatrixXd rhs =
            kernel_compose(semigroup_power(gamma, s), semigroup_power(gamma, t)).probs;
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
      }
  }
}

TEST(PathLaw, SingleTimePointIsInit) {
  RandomnessStream rng(17, 0);
  const FiniteKernel gamma = random_kernel(3, rng);
  const FiniteMeasure init = random_measure(3, rng);
  const std::vector<int> times{0};
  const PathDistribution law = path_law(init, gamma, times);
  law.validate();
  for (int s = 0; s < 3; ++s) {
    const std::vector<int> path{s};
    EXPECT_NEAR(law.prob(path), init.weights(s), 1e-15);
  }
}

TEST(PathLaw, DeterministicOrbit) {
  // Permutation kernel 0 -> 1 -> 2 -> 0 from a Dirac start: the path law is a
  // point mass on the orbit.
  const FiniteKernel cycle = make_kernel({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
  const FiniteMeasure init = FiniteMeasure::dirac(3, 0);
  const std::vector<int> times{0, 1, 2, 3};
  const PathDistribution law = path_law(init, cycle, times);
  law.validate();
  const std::vector<int> orbit{0, 1, 2, 0};
  EXPECT_DOUBLE_EQ(law.prob(orbit), 1.0);
}

TEST(PathLaw, MarginalAtGapTwoIsInitTimesGammaSquared) {
  RandomnessStream rng(19, 0);
  const FiniteKernel gamma = random_kernel(2, rng);
  const FiniteMeasure init = random_measure(2, rng);
  const std::vector<int> times{0, 2};
  const PathDistribution law = path_law(init, gamma, times);
  const Eigen::VectorXd expected =
      (init.weights.transpose() * semigroup_power(gamma, 2).probs).transpose();
  for (int s = 0; s < 2; ++s) {
    double marginal = 0.0;
    for (int s0 = 0; s0 < 2; ++s0) {
      const std::vector<int> path{s0, s};
      marginal += law.prob(path);
    }
    EXPECT_NEAR(marginal, expected(s), 1e-12);
  }
}

TEST(PathLaw, MarginalsMatchSemigroupAtEveryTime) {
  RandomnessStream rng(23, 0);
  const FiniteKernel gamma = random_kernel(3, rng);
  const FiniteMeasure init = random_measure(3, rng);
  const int horizon = 4;
  std::vector<int> times(horizon);
  for (int t = 0; t < horizon; ++t) times[static_cast<std::size_t>(t)] = t;
  const PathDistribution law = path_law(init, gamma, times);
  for (int t = 0; t < horizon; ++t) {
    const Eigen::VectorXd expected =
        (init.weights.transpose() * semigroup_power(gamma, t).probs).transpose();
    Eigen::VectorXd marginal = Eigen::VectorXd::Zero(3);
    enumerate_paths(3, horizon, [&](const std::vector<int>& path) {
      marginal(path[static_cast<std::size_t>(t)]) += law.prob(path);
    });
    EXPECT_LT((marginal - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PathLaw, AgreesWithExplicitPathProducts) {
  RandomnessStream rng(29, 0);
  const FiniteKernel gamma = random_kernel(3, rng);
  const FiniteMeasure init = random_measure(3, rng);
  std::vector<int> times{0, 1, 2, 3};
  const PathDistribution law = path_law(init, gamma, times);
  enumerate_paths(3, 4, [&](const std::vector<int>& path) {
    EXPECT_NEAR(law.prob(path), path_probability_oracle(init, gamma, path), 1e-14);
  });
}

TEST(PathLaw, RejectsUnsortedTimes) {
  RandomnessStream rng(31, 0);
  const FiniteKernel gamma = random_kernel(2, rng);
  const FiniteMeasure init = random_measure(2, rng);
  const std::vector<int> bad{0, 2, 1};
  EXPECT_THROW(path_law(init, gamma, bad), std::invalid_argument);
  const std::vector<int> dup{0, 1, 1};
  EXPECT_THROW(path_law(init, gamma, dup), std::invalid_argument);
}

TEST(PathLaw, EnumerationGuard) {
  EXPECT_THROW(PathDistribution::path_count(10, 6), ShapeError);
  EXPECT_EQ(PathDistribution::path_count(10, 5), 100000u);
}

TEST(JointFactorization, SingleChainIsExactlyZero) {
  RandomnessStream rng(37, 0);
  std::vector<FiniteKernel> gammas{random_kernel(3, rng)};
  std::vector<FiniteMeasure> inits{random_measure(3, rng)};
  EXPECT_EQ(joint_factorization_check(gammas, inits, 4), 0.0);
}

TEST(JointFactorization, TwoIndependentChains) {
  RandomnessStream rng(41, 0);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<FiniteKernel> gammas{random_kernel(2, rng), random_kernel(2, rng)};
    std::vector<FiniteMeasure> inits{random_measure(2, rng), random_measure(2, rng)};
    EXPECT_LT(joint_factorization_check(gammas, inits, 3), 1e-12);
  }
}

TEST(JointFactorization, ThreeChainsMixedSizes) {
  RandomnessStream rng(43, 0);
  std::vector<FiniteKernel> gammas{random_kernel(2, rng), random_kernel(3, rng),
                                   random_kernel(2, rng)};
  std::vector<FiniteMeasure> inits{random_measure(2, rng), random_measure(3, rng),
                                   random_measure(2, rng)};
  EXPECT_LT(joint_factorization_check(gammas, inits, 4), 1e-12);
}

TEST(JointFactorization, IdenticalDeterministicChains) {
  const FiniteKernel flip = make_kernel({{0, 1}, {1, 0}});
  std::vector<FiniteKernel> gammas{flip, flip};
  std::vector<FiniteMeasure> inits{FiniteMeasure::dirac(2, 0), FiniteMeasure::dirac(2, 0)};
  EXPECT_LT(joint_factorization_check(gammas, inits, 4), 1e-12);
}

TEST(HittingTime, InitInsideTarget) {
  const FiniteKernel gamma = make_kernel({{0.5, 0.5}, {0.1, 0.9}});
  const FiniteMeasure init = FiniteMeasure::dirac(2, 1);
  const std::vector<int> target{1};
  const Eigen::VectorXd law = hitting_time_law(init, gamma, target, 5);
  EXPECT_DOUBLE_EQ(law(0), 1.0);
  EXPECT_NEAR(law.sum(), 1.0, 1e-15);
}

TEST(HittingTime, EmptyTargetMassesAtTmax) {
  RandomnessStream rng(47, 0);
  const FiniteKernel gamma = random_kernel(3, rng);
  const FiniteMeasure init = random_measure(3, rng);
  const std::vector<int> empty;
  const Eigen::VectorXd law = hitting_time_law(init, gamma, empty, 4);
  for (int t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(law(t), 0.0);
  EXPECT_NEAR(law(4), 1.0, 1e-15);
}

TEST(HittingTime, AbsorbingTwoStateMatchesEnumeration) {
  // State 1 absorbs; from state 0 the entry time is geometric.
  const FiniteKernel gamma = make_kernel({{0.7, 0.3}, {0.0, 1.0}});
  const FiniteMeasure init = FiniteMeasure::dirac(2, 0);
  const std::vector<int> target{1};
  const int t_max = 6;
  const Eigen::VectorXd law = hitting_time_law(init, gamma, target, t_max);

  // Oracle: enumerate every path of length t_max + 1 and record its tau.
  Eigen::VectorXd oracle = Eigen::VectorXd::Zero(t_max + 1);
  enumerate_paths(2, t_max + 1, [&](const std::vector<int>& path) {
    const double p = path_probability_oracle(init, gamma, path);
    if (p == 0.0) return;
    int tau = t_max;
    for (int t = 0; t <= t_max; ++t)
      if (path[static_cast<std::size_t>(t)] == 1) {
        tau = t;
        break;
      }
    oracle(tau) += p;
  });
  EXPECT_LT((law - oracle).cwiseAbs().maxCoeff(), 1e-12);
  // Geometric: P(tau = t) = 0.7^{t-1} * 0.3 for 1 <= t < t_max.
  for (int t = 1; t < t_max; ++t) EXPECT_NEAR(law(t), std::pow(0.7, t - 1) * 0.3, 1e-12);
}

TEST(HittingTime, MassAtTmaxIsSurvivalProbability) {
  RandomnessStream rng(53, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const FiniteKernel gamma = random_kernel(3, rng);
    const FiniteMeasure init = random_measure(3, rng);
    const std::vector<int> target{2};
    const int t_max = 5;
    const Eigen::VectorXd law = hitting_time_law(init, gamma, target, t_max);
    for (int t = 0; t <= t_max; ++t) EXPECT_GE(law(t), 0.0);
    EXPECT_NEAR(law.sum(), 1.0, 1e-12);
    // Survival oracle: P(no entry during 0..t_max-1).
    double survival = 0.0;
    enumerate_paths(3, t_max, [&](const std::vector<int>& path) {
      for (int s : path)
        if (s == 2) return;
      survival += path_probability_oracle(init, gamma, path);
    });
    EXPECT_NEAR(law(t_max), survival, 1e-12);
  }
}

TEST(BernoulliLaplace, DegenerateEventProbabilities) {
  RandomnessStream rng(59, 0);
  const FiniteKernel gamma = random_kernel(2, rng);
  const FiniteMeasure init = random_measure(2, rng);
  const PathPredicate never = [](std::span<const int>) { return false; };
  const PathPredicate always = [](std::span<const int>) { return true; };
  const double lambda = 1.3;

  const auto [lhs0, rhs0] = bernoulli_laplace_check(gamma, init, 3, never, lambda, 2);
  EXPECT_NEAR(lhs0, 1.0, 1e-12);
  EXPECT_NEAR(rhs0, 1.0, 1e-12);

  const auto [lhs1, rhs1] = bernoulli_laplace_check(gamma, init, 3, always, lambda, 2);
  EXPECT_NEAR(lhs1, std::exp(-lambda), 1e-12);
  EXPECT_NEAR(rhs1, std::exp(-lambda), 1e-12);
}

TEST(BernoulliLaplace, TwoChainsMatchEnumeration) {
  RandomnessStream rng(61, 0);
  const FiniteKernel gamma = random_kernel(2, rng);
  const FiniteMeasure init = random_measure(2, rng);
  const PathPredicate event = [](std::span<const int> path) {
    return path[1] == 0 && path.back() == 1;
  };
  const auto [lhs, rhs] = bernoulli_laplace_check(gamma, init, 3, event, 1.0, 2);
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(BernoulliLaplace, RandomizedInstances) {
  RandomnessStream rng(67, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const int states = 2 + static_cast<int>(rng.uniform() * 2.0);
    const FiniteKernel gamma = random_kernel(states, rng);
    const FiniteMeasure init = random_measure(states, rng);
    const int threshold = static_cast<int>(rng.uniform() * static_cast<double>(states));
    const PathPredicate event = [threshold](std::span<const int> path) {
      return path.back() >= threshold;
    };
    const double lambda = rng.uniform(0.1, 3.0);
    const int chains = 1 + rep % 3;
    const auto [lhs, rhs] = bernoulli_laplace_check(gamma, init, 3, event, lambda, chains);
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Validation, RowStochasticEnforced) {
  FiniteKernel bad{Eigen::MatrixXd(2, 2)};
  bad.probs << 0.5, 0.6, 0.1, 0.9;
  EXPECT_THROW(bad.validate(), ShapeError);
  FiniteKernel negative{Eigen::MatrixXd(2, 2)};
  negative.probs << -0.1, 1.1, 0.5, 0.5;
  EXPECT_THROW(negative.validate(), ShapeError);
}
