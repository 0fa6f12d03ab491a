#include "l2o/nets.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "l2o/problems.hpp"

using namespace l2o;

namespace {

QuadraticInstance random_quad(RandomnessStream& rng, int d = 5) {
  QuadraticDistributionConfig cfg;
  cfg.dimension = d;
  cfg.m_minus = 0.1;
  cfg.m_plus = 1.0;
  cfg.L_minus = 1.0;
  cfg.L_plus = 10.0;
  return sample_quadratic(cfg, rng);
}

LassoInstance random_lasso(RandomnessStream& rng, int p = 5, int d = 9) {
  auto design = std::make_shared<Eigen::MatrixXd>(p, d);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < d; ++j) (*design)(i, j) = rng.uniform(-0.5, 0.5);
  LassoInstance inst;
  inst.design = design;
  inst.reg = rng.uniform(0.3, 1.5);
  inst.rhs = Eigen::VectorXd(p);
  for (int i = 0; i < p; ++i) inst.rhs(i) = 3.0 * rng.normal();
  inst.lipschitz = largest_eigenvalue_power(design->transpose() * *design);
  return inst;
}

AlgorithmState quad_state(const QuadraticInstance& inst, RandomnessStream& rng) {
  AlgorithmState state;
  state.x = Eigen::VectorXd(inst.dim());
  state.x_prev = Eigen::VectorXd(inst.dim());
  for (int i = 0; i < inst.dim(); ++i) {
    state.x(i) = rng.normal();
    state.x_prev(i) = state.x(i) + 0.3 * rng.normal();
  }
  state.loss = quad_loss(inst, state.x);
  state.loss_prev = quad_loss(inst, state.x_prev);
  return state;
}

AlgorithmState lasso_state(const LassoInstance& inst, RandomnessStream& rng) {
  AlgorithmState state;
  state.x = Eigen::VectorXd(inst.dim());
  state.x_prev = Eigen::VectorXd(inst.dim());
  for (int i = 0; i < inst.dim(); ++i) {
    // Mixed support: roughly a third of the coordinates sit exactly at zero.
    state.x(i) = rng.uniform() < 0.35 ? 0.0 : rng.normal();
    state.x_prev(i) = state.x(i) + 0.2 * rng.normal();
  }
  state.loss = lasso_objective(inst, state.x);
  state.loss_prev = lasso_objective(inst, state.x_prev);
  return state;
}

Eigen::VectorXd random_alpha(const ArchitectureLayout& layout, RandomnessStream& rng,
                             double scale = 0.1) {
  Eigen::VectorXd alpha(layout.param_count());
  for (int i = 0; i < alpha.size(); ++i) alpha(i) = rng.uniform(-scale, scale);
  return alpha;
}

}  // namespace

TEST(ArchitectureLayout, ParameterCounts) {
  // Dense 4-8-8-8-8-1 and per-coordinate 3-10-(10x5)-1 for quadratics;
  // dense 12-30-20-10-8 and per-coordinate 8-20-20-20-2 for LASSO.
  EXPECT_EQ(quad_architecture_layout().dense.weight_count(), 232);
  EXPECT_EQ(quad_architecture_layout().percoord.weight_count(), 540);
  EXPECT_EQ(quad_architecture_layout().param_count(), 772);
  EXPECT_EQ(lasso_architecture_layout().dense.weight_count(), 1240);
  EXPECT_EQ(lasso_architecture_layout().percoord.weight_count(), 1000);
  EXPECT_EQ(lasso_architecture_layout().param_count(), 2240);
}

TEST(FlattenUnflatten, RoundTripIsExact) {
  RandomnessStream rng(1, 0);
  for (const ArchitectureLayout* layout :
       {&quad_architecture_layout(), &lasso_architecture_layout()}) {
    const Eigen::VectorXd flat = random_alpha(*layout, rng, 0.7);
    BlockWeights dense, percoord;
    unflatten(*layout, flat, dense, percoord);
    const Eigen::VectorXd back = flatten(*layout, dense, percoord);
    ASSERT_EQ(back.size(), flat.size());
    for (int i = 0; i < flat.size(); ++i) EXPECT_EQ(back(i), flat(i));
  }
}

TEST(BlockBackward, SingleLinearLayerWeightGradient) {
  // For out = W x the weight gradient is upstream (x) input^T.
  BlockLayout layout{{3, 2}, {Activation::kIdentity}};
  BlockWeights weights{Eigen::MatrixXd::Random(2, 3)};
  Eigen::MatrixXd input(3, 1);
  input << 0.5, -1.0, 2.0;
  BlockCache cache;
  block_forward(layout, weights, input, &cache);
  Eigen::MatrixXd upstream(2, 1);
  upstream << 1.0, -2.0;
  std::vector<Eigen::MatrixXd> grads;
  block_backward(layout, weights, cache, upstream, grads);
  ASSERT_EQ(grads.size(), 1u);
  EXPECT_TRUE(grads[0].isApprox(upstream * input.transpose(), 1e-15));
}

TEST(BlockBackward, ReluKillsNegativePreActivations) {
  BlockLayout layout{{1, 1}, {Activation::kRelu}};
  BlockWeights weights{Eigen::MatrixXd::Constant(1, 1, -1.0)};
  Eigen::MatrixXd input(1, 1);
  input << 2.0;  // pre-activation -2 < 0
  BlockCache cache;
  const Eigen::MatrixXd out = block_forward(layout, weights, input, &cache);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.0);
  Eigen::MatrixXd upstream(1, 1);
  upstream << 1.0;
  std::vector<Eigen::MatrixXd> grads;
  const Eigen::MatrixXd input_grad = block_backward(layout, weights, cache, upstream, grads);
  EXPECT_DOUBLE_EQ(grads[0](0, 0), 0.0);
  EXPECT_DOUBLE_EQ(input_grad(0, 0), 0.0);
}

TEST(BlockBackward, MissingCacheIsUsageError) {
  BlockLayout layout{{2, 2}, {Activation::kIdentity}};
  BlockWeights weights{Eigen::MatrixXd::Identity(2, 2)};
  BlockCache empty;
  std::vector<Eigen::MatrixXd> grads;
  EXPECT_THROW(block_backward(layout, weights, empty, Eigen::MatrixXd::Ones(2, 1), grads),
               std::logic_error);
}

TEST(QuadFeatures, DefinitionCases) {
  RandomnessStream rng(2, 0);
  const QuadraticInstance inst = random_quad(rng);

  // At the global minimum with x == x_prev every feature is log(1 + 0) = 0.
  AlgorithmState at_min;
  at_min.x = inst.rhs.cwiseQuotient(inst.diag);
  at_min.x_prev = at_min.x;
  at_min.loss = quad_loss(inst, at_min.x);
  at_min.loss_prev = at_min.loss;
  const Eigen::VectorXd f0 = quad_features(inst, at_min);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(f0(i), 0.0, 1e-12);

  // Gradient norm e - 1 gives n1 = 1 on a scalar instance.
  QuadraticInstance unit;
  unit.diag = Eigen::VectorXd::Ones(1);
  unit.rhs = Eigen::VectorXd::Zero(1);
  unit.strong_convexity = unit.smoothness = 1.0;
  AlgorithmState s;
  s.x = Eigen::VectorXd::Constant(1, std::exp(1.0) - 1.0);
  s.x_prev = s.x;
  s.loss = quad_loss(unit, s.x);
  s.loss_prev = s.loss;
  EXPECT_NEAR(quad_features(unit, s)(0), 1.0, 1e-12);

  // Features stay finite for huge gradients.
  s.x = Eigen::VectorXd::Constant(1, 1e12);
  s.loss = quad_loss(unit, s.x);
  s.loss_prev = s.loss;
  const Eigen::VectorXd f = quad_features(unit, s);
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(std::isfinite(f(i)));
}

TEST(QuadUpdate, ZeroAlphaIsIdentity) {
  RandomnessStream rng(3, 0);
  const QuadraticInstance inst = random_quad(rng);
  AlgorithmState state = quad_state(inst, rng);
  const Eigen::VectorXd before = state.x;
  const Eigen::VectorXd alpha = Eigen::VectorXd::Zero(quad_architecture_layout().param_count());
  quad_update(alpha, inst, state);
  EXPECT_TRUE(state.x == before);  // exact
  EXPECT_TRUE(state.x_prev == before);
}

TEST(QuadUpdate, PermutationEquivariant) {
  RandomnessStream rng(4, 0);
  QuadraticDistributionConfig cfg;
  cfg.dimension = 6;
  cfg.m_minus = cfg.m_plus = 1.0;  // constant diagonal so permutation keeps the instance valid
  cfg.L_minus = cfg.L_plus = 1.0;
  const QuadraticInstance inst = sample_quadratic(cfg, rng);
  const Eigen::VectorXd alpha = random_alpha(quad_architecture_layout(), rng);
  AlgorithmState state = quad_state(inst, rng);

  // Reversal permutation of all coordinate data.
  QuadraticInstance perm_inst = inst;
  AlgorithmState perm_state = state;
  perm_inst.rhs = inst.rhs.reverse();
  perm_state.x = state.x.reverse();
  perm_state.x_prev = state.x_prev.reverse();
  perm_state.loss = quad_loss(perm_inst, perm_state.x);
  perm_state.loss_prev = quad_loss(perm_inst, perm_state.x_prev);

  quad_update(alpha, inst, state);
  quad_update(alpha, perm_inst, perm_state);
  EXPECT_LT((perm_state.x - state.x.reverse()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QuadUpdate, HandSetWeightsRealizeNormalizedGradientDescent) {
  // Route the gradient channel through the mixing block unchanged except for
  // a sign flip, and set the step-size head so beta is a known constant at
  // the probe state. The update must equal x - beta * grad / ||grad||.
  RandomnessStream rng(5, 0);
  const QuadraticInstance inst = random_quad(rng);
  AlgorithmState state = quad_state(inst, rng);

  const ArchitectureLayout& layout = quad_architecture_layout();
  BlockWeights dense(static_cast<std::size_t>(layout.dense.layer_count()));
  BlockWeights percoord(static_cast<std::size_t>(layout.percoord.layer_count()));
  for (int l = 0; l < layout.dense.layer_count(); ++l)
    dense[static_cast<std::size_t>(l)] =
        Eigen::MatrixXd::Zero(layout.dense.widths[static_cast<std::size_t>(l) + 1],
                              layout.dense.widths[static_cast<std::size_t>(l)]);
  for (int l = 0; l < layout.percoord.layer_count(); ++l)
    percoord[static_cast<std::size_t>(l)] =
        Eigen::MatrixXd::Zero(layout.percoord.widths[static_cast<std::size_t>(l) + 1],
                              layout.percoord.widths[static_cast<std::size_t>(l)]);

  // Mixing head: carry the gradient channel as a (positive, negative) pair so
  // both signs survive the interior ReLUs, then reassemble with a sign flip.
  percoord[0](0, 0) = 1.0;   // channel 1 -> slot 0
  percoord[0](1, 0) = -1.0;  // -channel 1 -> slot 1
  for (std::size_t l = 1; l + 1 < percoord.size(); ++l) {
    percoord[l](0, 0) = 1.0;
    percoord[l](1, 1) = 1.0;
  }
  percoord.back()(0, 0) = -1.0;  // -(positive part)
  percoord.back()(0, 1) = 1.0;   // +(negative part) => output = -d1

  // Step-size head: beta = features . w with ReLU-safe nonnegative routing.
  const Eigen::VectorXd features = quad_features(inst, state);
  ASSERT_GT(features(0), 0.0);
  const double beta_target = 0.37;
  dense[0](0, 0) = 1.0;  // relu(n1) = n1 since n1 >= 0
  for (std::size_t l = 1; l + 1 < dense.size(); ++l) dense[l](0, 0) = 1.0;
  dense.back()(0, 0) = beta_target / features(0);

  const Eigen::VectorXd alpha = flatten(layout, dense, percoord);
  const Eigen::VectorXd grad = quad_grad(inst, state.x);
  const Eigen::VectorXd expected = state.x - beta_target * grad / grad.norm();
  quad_update(alpha, inst, state);
  EXPECT_LT((state.x - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LassoFeatures, DefinitionCases) {
  RandomnessStream rng(6, 0);
  LassoInstance inst = random_lasso(rng);

  // x == x_prev == 0 and b == 0: every norm and difference feature is zero,
  // the regularization weight passes through.
  inst.rhs.setZero();
  AlgorithmState zero;
  zero.x = Eigen::VectorXd::Zero(inst.dim());
  zero.x_prev = zero.x;
  zero.loss = lasso_objective(inst, zero.x);
  zero.loss_prev = zero.loss;
  const Eigen::VectorXd f = lasso_features(inst, zero);
  ASSERT_EQ(f.size(), 12);
  for (int i = 0; i < 11; ++i) EXPECT_NEAR(f(i), 0.0, 1e-15) << "feature " << i;
  EXPECT_DOUBLE_EQ(f(11), inst.reg);
}

TEST(LassoFeatures, SplitNormsArePythagorean) {
  RandomnessStream rng(7, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const LassoInstance inst = random_lasso(rng);
    const AlgorithmState state = lasso_state(inst, rng);
    const Eigen::VectorXd f = lasso_features(inst, state);
    const Eigen::VectorXd grad = lasso_smooth_grad(inst, state.x);
    const Eigen::VectorXd momentum = state.x - state.x_prev;
    const double beta = 1.0 / inst.lipschitz;
    const Eigen::VectorXd prox_point = soft_threshold(state.x - beta * grad, beta * inst.reg);
    const Eigen::VectorXd sources[3] = {grad, momentum, prox_point};
    for (int k = 0; k < 3; ++k) {
      // Invert log1p and check n_>^2 + n_0^2 == ||v||^2.
      const double n_nz = std::expm1(f(2 * k));
      const double n_z = std::expm1(f(2 * k + 1));
      EXPECT_NEAR(n_nz * n_nz + n_z * n_z, sources[k].squaredNorm(), 1e-12) << "source " << k;
    }
  }
}

TEST(LassoFeatures, ObjectiveDifferenceUsesCaches) {
  RandomnessStream rng(8, 0);
  const LassoInstance inst = random_lasso(rng);
  AlgorithmState state = lasso_state(inst, rng);
  const Eigen::VectorXd f = lasso_features(inst, state);
  EXPECT_EQ(f(6), state.loss - state.loss_prev);  // exact, straight from the caches
  // And the cached difference decomposes into the l1 and smooth parts.
  EXPECT_NEAR(f(6), f(7) + f(8), 1e-9);
}

TEST(LassoUpdate, ZeroAlphaIsOneIstaStep) {
  RandomnessStream rng(9, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const LassoInstance inst = random_lasso(rng);
    AlgorithmState state = lasso_state(inst, rng);
    const Eigen::VectorXd x = state.x;
    const Eigen::VectorXd alpha =
        Eigen::VectorXd::Zero(lasso_architecture_layout().param_count());
    lasso_update(alpha, inst, state);
    const Eigen::VectorXd ista = soft_threshold(
        x - lasso_smooth_grad(inst, x) / inst.lipschitz, inst.reg / inst.lipschitz);
    EXPECT_TRUE(state.x == ista);  // exact
  }
}

TEST(LassoUpdate, ProxZerosStayExactlyZero) {
  RandomnessStream rng(10, 0);
  const LassoInstance inst = random_lasso(rng);
  AlgorithmState state = lasso_state(inst, rng);
  const Eigen::VectorXd alpha = random_alpha(lasso_architecture_layout(), rng);
  lasso_update(alpha, inst, state);
  // Every coordinate the prox zeroed is exactly 0.0, never a small residue.
  for (int i = 0; i < state.x.size(); ++i)
    EXPECT_TRUE(state.x(i) == 0.0 || std::abs(state.x(i)) > 1e-12);
}

TEST(LassoUpdate, ZeroAlphaIterationMatchesIstaOracle) {
  // 500 iterations from zero alpha reproduce an independent ISTA loop.
  RandomnessStream rng(11, 0);
  const LassoInstance inst = random_lasso(rng, 8, 14);
  const Eigen::VectorXd alpha = Eigen::VectorXd::Zero(lasso_architecture_layout().param_count());

  AlgorithmState learned;
  learned.x = Eigen::VectorXd::Zero(14);
  learned.x_prev = learned.x;
  learned.loss = lasso_objective(inst, learned.x);
  learned.loss_prev = learned.loss;

  Eigen::VectorXd ista = Eigen::VectorXd::Zero(14);
  for (int t = 0; t < 500; ++t) {
    lasso_update(alpha, inst, learned);
    learned.loss_prev = learned.loss;
    learned.loss = lasso_objective(inst, learned.x);
    ista = soft_threshold(ista - lasso_smooth_grad(inst, ista) / inst.lipschitz,
                          inst.reg / inst.lipschitz);
  }
  EXPECT_LT((learned.x - ista).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(lasso_objective(inst, learned.x), lasso_objective(inst, ista), 1e-10);
}

TEST(NormalizationSafety, DegenerateStatesProduceNoNaN) {
  RandomnessStream rng(12, 0);
  // Quadratic at the exact minimum: zero gradient and zero momentum.
  const QuadraticInstance quad = random_quad(rng);
  AlgorithmState state;
  state.x = quad.rhs.cwiseQuotient(quad.diag);
  state.x_prev = state.x;
  state.loss = quad_loss(quad, state.x);
  state.loss_prev = state.loss;
  const Eigen::VectorXd alpha_q = random_alpha(quad_architecture_layout(), rng);
  quad_update(alpha_q, quad, state);
  EXPECT_TRUE(state.x.allFinite());

  // LASSO with b = 0 at x = 0: zero gradient, momentum and residual.
  LassoInstance lasso = random_lasso(rng);
  lasso.rhs.setZero();
  AlgorithmState lstate;
  lstate.x = Eigen::VectorXd::Zero(lasso.dim());
  lstate.x_prev = lstate.x;
  lstate.loss = lasso_objective(lasso, lstate.x);
  lstate.loss_prev = lstate.loss;
  const Eigen::VectorXd alpha_l = random_alpha(lasso_architecture_layout(), rng);
  lasso_update(alpha_l, lasso, lstate);
  EXPECT_TRUE(lstate.x.allFinite());
}

namespace {

// Central finite differences of the one-step training loss in alpha.
Eigen::VectorXd fd_training_grad(const std::function<double(const Eigen::VectorXd&)>& loss,
                                 const Eigen::VectorXd& alpha, double h) {
  Eigen::VectorXd g(alpha.size());
  Eigen::VectorXd probe = alpha;
  for (int i = 0; i < alpha.size(); ++i) {
    probe(i) = alpha(i) + h;
    const double up = loss(probe);
    probe(i) = alpha(i) - h;
    const double down = loss(probe);
    probe(i) = alpha(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST(TrainingStepGradient, QuadMatchesFiniteDifferences) {
  RandomnessStream rng(13, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const QuadraticInstance inst = random_quad(rng, 4);
    const AlgorithmState state = quad_state(inst, rng);
    const Eigen::VectorXd alpha = random_alpha(quad_architecture_layout(), rng);

    Eigen::VectorXd analytic(alpha.size());
    AlgorithmState advanced = state;
    quad_training_step(alpha, inst, advanced, &analytic);

    const auto loss_of = [&](const Eigen::VectorXd& a) {
      AlgorithmState probe = state;
      return quad_training_step(a, inst, probe, nullptr);
    };
    const Eigen::VectorXd numeric = fd_training_grad(loss_of, alpha, 1e-6);
    const double denom = std::max(numeric.norm(), 1e-8);
    EXPECT_LT((analytic - numeric).norm() / denom, 1e-4) << "config " << rep;
  }
}

TEST(TrainingStepGradient, LassoMatchesFiniteDifferences) {
  RandomnessStream rng(14, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const LassoInstance inst = random_lasso(rng);
    const AlgorithmState state = lasso_state(inst, rng);
    const Eigen::VectorXd alpha = random_alpha(lasso_architecture_layout(), rng);

    Eigen::VectorXd analytic(alpha.size());
    AlgorithmState advanced = state;
    lasso_training_step(alpha, inst, advanced, &analytic);

    const auto loss_of = [&](const Eigen::VectorXd& a) {
      AlgorithmState probe = state;
      return lasso_training_step(a, inst, probe, nullptr);
    };
    const Eigen::VectorXd numeric = fd_training_grad(loss_of, alpha, 1e-6);
    const double denom = std::max(numeric.norm(), 1e-8);
    EXPECT_LT((analytic - numeric).norm() / denom, 1e-4) << "config " << rep;
  }
}

TEST(TrainingStep, ConvergedStateObservesZeroLoss) {
  RandomnessStream rng(15, 0);
  const QuadraticInstance inst = random_quad(rng);
  AlgorithmState state;
  state.x = inst.rhs.cwiseQuotient(inst.diag);  // exact minimizer, inside C
  state.x_prev = state.x;
  state.loss = quad_loss(inst, state.x);
  state.loss_prev = state.loss;
  const Eigen::VectorXd alpha = random_alpha(quad_architecture_layout(), rng);
  Eigen::VectorXd grad(alpha.size());
  const double l_train = quad_training_step(alpha, inst, state, &grad);
  EXPECT_EQ(l_train, 0.0);
  EXPECT_EQ(grad.norm(), 0.0);
}

TEST(InitWeights, FinalLayerScaledDown) {
  RandomnessStream rng(16, 0);
  const ArchitectureLayout& layout = quad_architecture_layout();
  const Eigen::VectorXd alpha = init_weights(layout, rng);
  BlockWeights dense, percoord;
  unflatten(layout, alpha, dense, percoord);
  // Final layers carry the 0.01 shrink; earlier layers use U[-1/sqrt(fan), .].
  EXPECT_LT(dense.back().cwiseAbs().maxCoeff(), 0.01 / std::sqrt(8.0) + 1e-12);
  EXPECT_LT(percoord.back().cwiseAbs().maxCoeff(), 0.01 / std::sqrt(10.0) + 1e-12);
  EXPECT_GT(dense.front().cwiseAbs().maxCoeff(), 0.01);
  for (int i = 0; i < alpha.size(); ++i) EXPECT_TRUE(std::isfinite(alpha(i)));
}

TEST(Hyperparameters, ValidateChecksLayout) {
  Hyperparameters h;
  h.arch = ArchitectureId::kQuadDescent;
  h.flat = Eigen::VectorXd::Zero(10);
  EXPECT_THROW(h.validate(), ShapeError);
  h.flat = Eigen::VectorXd::Zero(quad_architecture_layout().param_count());
  EXPECT_NO_THROW(h.validate());
}
