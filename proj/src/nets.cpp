#include "l2o/nets.hpp"

#include <cmath>
#include <string>

namespace l2o {

int BlockLayout::weight_count() const {
  int count = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) count += widths[l + 1] * widths[l];
  return count;
}

void BlockLayout::validate() const {
  if (widths.size() < 2) throw ShapeError("block layout: need at least one layer");
  if (activations.size() + 1 != widths.size())
    throw ShapeError("block layout: one activation tag per layer required");
  for (int w : widths)
    if (w < 1) throw ShapeError("block layout: widths must be positive");
}

namespace {

Eigen::MatrixXd apply_activation(Activation act, const Eigen::MatrixXd& pre) {
  if (act == Activation::kIdentity) return pre;
  return pre.cwiseMax(0.0);
}

void check_weights(const BlockLayout& layout, const BlockWeights& weights) {
  if (static_cast<int>(weights.size()) != layout.layer_count())
    throw ShapeError("block: weight count does not match layout");
  for (int l = 0; l < layout.layer_count(); ++l)
    if (weights[static_cast<std::size_t>(l)].rows() != layout.widths[static_cast<std::size_t>(l) + 1] ||
        weights[static_cast<std::size_t>(l)].cols() != layout.widths[static_cast<std::size_t>(l)])
      throw ShapeError("block: weight matrix shape mismatch at layer " + std::to_string(l));
}

// Safe direction: v / ||v||, or the zero vector when ||v|| = 0.
Eigen::VectorXd normalized_or_zero(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm > 0.0) return v / norm;
  return Eigen::VectorXd::Zero(v.size());
}

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

Eigen::MatrixXd block_forward(const BlockLayout& layout, const BlockWeights& weights,
                              const Eigen::MatrixXd& input, BlockCache* cache) {
  layout.validate();
  check_weights(layout, weights);
  if (input.rows() != layout.widths.front()) throw ShapeError("block_forward: input width mismatch");
  if (cache) {
    cache->inputs.clear();
    cache->pre_acts.clear();
  }
  Eigen::MatrixXd value = input;
  for (int l = 0; l < layout.layer_count(); ++l) {
    if (cache) cache->inputs.push_back(value);
    Eigen::MatrixXd pre = weights[static_cast<std::size_t>(l)] * value;
    if (cache) cache->pre_acts.push_back(pre);
    value = apply_activation(layout.activations[static_cast<std::size_t>(l)], pre);
  }
  return value;
}

Eigen::MatrixXd block_backward(const BlockLayout& layout, const BlockWeights& weights,
                               const BlockCache& cache, const Eigen::MatrixXd& upstream,
                               std::vector<Eigen::MatrixXd>& weight_grads) {
  check_weights(layout, weights);
  const int layers = layout.layer_count();
  if (static_cast<int>(cache.inputs.size()) != layers ||
      static_cast<int>(cache.pre_acts.size()) != layers)
    throw std::logic_error("block_backward: forward cache missing or stale");

  weight_grads.assign(static_cast<std::size_t>(layers), Eigen::MatrixXd());
  Eigen::MatrixXd grad = upstream;
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& pre = cache.pre_acts[static_cast<std::size_t>(l)];
    if (grad.rows() != pre.rows() || grad.cols() != pre.cols())
      throw ShapeError("block_backward: upstream shape mismatch");
    Eigen::MatrixXd grad_pre = grad;
    if (layout.activations[static_cast<std::size_t>(l)] == Activation::kRelu)
      grad_pre = grad.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    weight_grads[static_cast<std::size_t>(l)] =
        grad_pre * cache.inputs[static_cast<std::size_t>(l)].transpose();
    grad = weights[static_cast<std::size_t>(l)].transpose() * grad_pre;
  }
  return grad;
}

Eigen::VectorXd DenseBlock::forward(const Eigen::VectorXd& input, BlockCache* cache) const {
  return block_forward(layout, weights, input, cache);
}

Eigen::VectorXd DenseBlock::backward(const BlockCache& cache, const Eigen::VectorXd& upstream,
                                     std::vector<Eigen::MatrixXd>& weight_grads) const {
  return block_backward(layout, weights, cache, upstream, weight_grads);
}

Eigen::MatrixXd PerCoordBlock::forward(const Eigen::MatrixXd& channels, BlockCache* cache) const {
  return block_forward(layout, weights, channels, cache);
}

Eigen::MatrixXd PerCoordBlock::backward(const BlockCache& cache, const Eigen::MatrixXd& upstream,
                                        std::vector<Eigen::MatrixXd>& weight_grads) const {
  return block_backward(layout, weights, cache, upstream, weight_grads);
}

const ArchitectureLayout& quad_architecture_layout() {
  // Step-size head: Linear(4,8) ReLU, (8,8) ReLU, (8,8) ReLU, (8,8), (8,1).
  // Direction head: Conv(3,10), Conv(10,10) ReLU x4, Conv(10,10), Conv(10,1);
  // activations follow the reference diagram (none after the first and the
  // last two mixing layers).
  static const ArchitectureLayout layout{
      ArchitectureId::kQuadDescent,
      BlockLayout{{4, 8, 8, 8, 8, 1},
                  {Activation::kRelu, Activation::kRelu, Activation::kRelu, Activation::kIdentity,
                   Activation::kIdentity}},
      BlockLayout{{3, 10, 10, 10, 10, 10, 10, 1},
                  {Activation::kIdentity, Activation::kRelu, Activation::kRelu, Activation::kRelu,
                   Activation::kRelu, Activation::kIdentity, Activation::kIdentity}}};
  return layout;
}

const ArchitectureLayout& lasso_architecture_layout() {
  // Scale head: Linear(12,30) ReLU, (30,20) ReLU, (20,10) ReLU, (10,8).
  // Direction head: Conv(8,20) ReLU, (20,20) ReLU, (20,20) ReLU, (20,2).
  static const ArchitectureLayout layout{
      ArchitectureId::kLassoProx,
      BlockLayout{{12, 30, 20, 10, 8},
                  {Activation::kRelu, Activation::kRelu, Activation::kRelu,
                   Activation::kIdentity}},
      BlockLayout{{8, 20, 20, 20, 2},
                  {Activation::kRelu, Activation::kRelu, Activation::kRelu,
                   Activation::kIdentity}}};
  return layout;
}

const ArchitectureLayout& architecture_layout(ArchitectureId id) {
  return id == ArchitectureId::kQuadDescent ? quad_architecture_layout()
                                            : lasso_architecture_layout();
}

void Hyperparameters::validate() const {
  const ArchitectureLayout& layout = architecture_layout(arch);
  if (flat.size() != layout.param_count())
    throw ShapeError("hyperparameters: flat vector does not match the architecture layout");
  if (!flat.allFinite()) throw ShapeError("hyperparameters: non-finite weight");
}

namespace {

void unflatten_block(const BlockLayout& layout, const Eigen::VectorXd& flat, int& offset,
                     BlockWeights& weights) {
  weights.clear();
  weights.reserve(static_cast<std::size_t>(layout.layer_count()));
  for (int l = 0; l < layout.layer_count(); ++l) {
    const int rows = layout.widths[static_cast<std::size_t>(l) + 1];
    const int cols = layout.widths[static_cast<std::size_t>(l)];
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = flat(offset++);
    weights.push_back(std::move(w));
  }
}

void flatten_block(const BlockWeights& weights, Eigen::VectorXd& flat, int& offset) {
  for (const Eigen::MatrixXd& w : weights)
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) flat(offset++) = w(r, c);
}

}  // namespace

void unflatten(const ArchitectureLayout& layout, const Eigen::VectorXd& flat, BlockWeights& dense,
               BlockWeights& percoord) {
  if (flat.size() != layout.param_count())
    throw ShapeError("unflatten: flat vector size does not match the layout");
  int offset = 0;
  unflatten_block(layout.dense, flat, offset, dense);
  unflatten_block(layout.percoord, flat, offset, percoord);
}

Eigen::VectorXd flatten(const ArchitectureLayout& layout, const BlockWeights& dense,
                        const BlockWeights& percoord) {
  Eigen::VectorXd flat(layout.param_count());
  int offset = 0;
  flatten_block(dense, flat, offset);
  flatten_block(percoord, flat, offset);
  if (offset != layout.param_count()) throw ShapeError("flatten: weight matrices do not match");
  return flat;
}

namespace {

void init_block_weights(const BlockLayout& layout, RandomnessStream& rng, BlockWeights& weights) {
  weights.clear();
  for (int l = 0; l < layout.layer_count(); ++l) {
    const int rows = layout.widths[static_cast<std::size_t>(l) + 1];
    const int cols = layout.widths[static_cast<std::size_t>(l)];
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    const double shrink = (l == layout.layer_count() - 1) ? 0.01 : 1.0;
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = shrink * rng.uniform(-scale, scale);
    weights.push_back(std::move(w));
  }
}

}  // namespace

Eigen::VectorXd init_weights(const ArchitectureLayout& layout, RandomnessStream& rng) {
  BlockWeights dense, percoord;
  init_block_weights(layout.dense, rng, dense);
  init_block_weights(layout.percoord, rng, percoord);
  return flatten(layout, dense, percoord);
}

namespace {

void require_loss_caches(const AlgorithmState& state, const char* who) {
  if (!std::isfinite(state.loss) || !std::isfinite(state.loss_prev))
    throw std::logic_error(std::string(who) + ": state loss caches are unset");
}

}  // namespace

Eigen::VectorXd quad_features(const QuadraticInstance& inst, const AlgorithmState& state) {
  require_loss_caches(state, "quad_features");
  Eigen::VectorXd f(4);
  f(0) = std::log1p(quad_grad(inst, state.x).norm());
  f(1) = std::log1p((state.x - state.x_prev).norm());
  f(2) = std::log1p(state.loss);
  f(3) = std::log1p(state.loss_prev);
  return f;
}

namespace {

Eigen::MatrixXd quad_channels(const QuadraticInstance& inst, const AlgorithmState& state) {
  const int d = inst.dim();
  Eigen::MatrixXd channels(3, d);
  channels.row(0) = normalized_or_zero(quad_grad(inst, state.x)).transpose();
  channels.row(1) = normalized_or_zero(state.x - state.x_prev).transpose();
  channels.row(2) = channels.row(0).cwiseProduct(channels.row(1));
  return channels;
}

struct QuadForward {
  double beta = 0.0;
  Eigen::MatrixXd direction;  // 1 x d
  Eigen::MatrixXd channels;   // 3 x d
  BlockCache dense_cache, percoord_cache;
  Eigen::VectorXd next_x;
};

QuadForward quad_forward(const Eigen::VectorXd& alpha, const QuadraticInstance& inst,
                         const AlgorithmState& state, bool want_cache) {
  const ArchitectureLayout& layout = quad_architecture_layout();
  BlockWeights dense_w, percoord_w;
  unflatten(layout, alpha, dense_w, percoord_w);

  QuadForward fwd;
  const Eigen::VectorXd features = quad_features(inst, state);
  fwd.channels = quad_channels(inst, state);
  const Eigen::MatrixXd beta_out = block_forward(layout.dense, dense_w, features,
                                                 want_cache ? &fwd.dense_cache : nullptr);
  fwd.beta = beta_out(0, 0);
  fwd.direction = block_forward(layout.percoord, percoord_w, fwd.channels,
                                want_cache ? &fwd.percoord_cache : nullptr);
  fwd.next_x = state.x + fwd.beta * fwd.direction.row(0).transpose();
  return fwd;
}

}  // namespace

void quad_update(const Eigen::VectorXd& alpha, const QuadraticInstance& inst,
                 AlgorithmState& state) {
  QuadForward fwd = quad_forward(alpha, inst, state, /*want_cache=*/false);
  state.x_prev = state.x;
  state.x = std::move(fwd.next_x);
}

Eigen::VectorXd lasso_features(const LassoInstance& inst, const AlgorithmState& state) {
  require_loss_caches(state, "lasso_features");
  const Eigen::VectorXd& x = state.x;
  const Eigen::VectorXd grad = lasso_smooth_grad(inst, x);
  const Eigen::VectorXd momentum = x - state.x_prev;
  const double beta = 1.0 / inst.lipschitz;
  const Eigen::VectorXd prox_point = soft_threshold(x - beta * grad, beta * inst.reg);

  const int d = inst.dim();
  Eigen::VectorXd mask_nz(d), mask_z(d);
  for (int i = 0; i < d; ++i) {
    mask_nz(i) = x(i) != 0.0 ? 1.0 : 0.0;
    mask_z(i) = 1.0 - mask_nz(i);
  }
  const auto split_norms = [&](const Eigen::VectorXd& v) {
    return std::pair<double, double>{v.cwiseProduct(mask_nz).norm(), v.cwiseProduct(mask_z).norm()};
  };

  const auto [g_nz, g_z] = split_norms(grad);
  const auto [m_nz, m_z] = split_norms(momentum);
  const auto [p_nz, p_z] = split_norms(prox_point);
  const Eigen::VectorXd dir_grad = normalized_or_zero(grad);
  const Eigen::VectorXd dir_mom = normalized_or_zero(momentum);

  Eigen::VectorXd f(12);
  f(0) = std::log1p(g_nz);
  f(1) = std::log1p(g_z);
  f(2) = std::log1p(m_nz);
  f(3) = std::log1p(m_z);
  f(4) = std::log1p(p_nz);
  f(5) = std::log1p(p_z);
  f(6) = state.loss - state.loss_prev;  // cached objective difference
  f(7) = inst.reg * (x.lpNorm<1>() - state.x_prev.lpNorm<1>());
  f(8) = 0.5 * ((*inst.design * x - inst.rhs).squaredNorm() -
                (*inst.design * state.x_prev - inst.rhs).squaredNorm());
  f(9) = dir_grad.cwiseProduct(mask_nz).dot(dir_mom.cwiseProduct(mask_nz));
  f(10) = dir_grad.cwiseProduct(mask_z).dot(dir_mom.cwiseProduct(mask_z));
  f(11) = inst.reg;
  return f;
}

namespace {

struct LassoForward {
  Eigen::VectorXd features;     // 12
  Eigen::VectorXd scales;       // 8, dense block output
  Eigen::MatrixXd channels;     // 8 x d, unscaled
  Eigen::MatrixXd scaled;       // 8 x d, input to the per-coordinate block
  Eigen::MatrixXd directions;   // 2 x d
  Eigen::VectorXd mask_nz, mask_z;
  Eigen::VectorXd grad;         // smooth gradient at x
  double momentum_norm = 0.0;
  Eigen::VectorXd pre_prox;     // z
  Eigen::VectorXd next_x;       // prox(z)
  BlockCache dense_cache, percoord_cache;
};

// Channel order: gradient, momentum, prox residual, gradient (*) momentum,
// each masked to the nonzero support then to the zero support.
LassoForward lasso_forward(const Eigen::VectorXd& alpha, const LassoInstance& inst,
                           const AlgorithmState& state, bool want_cache) {
  const ArchitectureLayout& layout = lasso_architecture_layout();
  BlockWeights dense_w, percoord_w;
  unflatten(layout, alpha, dense_w, percoord_w);

  LassoForward fwd;
  const Eigen::VectorXd& x = state.x;
  const int d = inst.dim();
  fwd.grad = lasso_smooth_grad(inst, x);
  const Eigen::VectorXd momentum = x - state.x_prev;
  fwd.momentum_norm = momentum.norm();
  const double beta = 1.0 / inst.lipschitz;
  const Eigen::VectorXd prox_point = soft_threshold(x - beta * fwd.grad, beta * inst.reg);

  fwd.mask_nz.resize(d);
  fwd.mask_z.resize(d);
  for (int i = 0; i < d; ++i) {
    fwd.mask_nz(i) = x(i) != 0.0 ? 1.0 : 0.0;
    fwd.mask_z(i) = 1.0 - fwd.mask_nz(i);
  }

  const Eigen::VectorXd dir_grad = normalized_or_zero(fwd.grad);
  const Eigen::VectorXd dir_mom = normalized_or_zero(momentum);
  const Eigen::VectorXd dir_res = normalized_or_zero(x - prox_point);
  const Eigen::VectorXd dir_gm = dir_grad.cwiseProduct(dir_mom);

  fwd.channels.resize(8, d);
  fwd.channels.row(0) = dir_grad.cwiseProduct(fwd.mask_nz).transpose();
  fwd.channels.row(1) = dir_grad.cwiseProduct(fwd.mask_z).transpose();
  fwd.channels.row(2) = dir_mom.cwiseProduct(fwd.mask_nz).transpose();
  fwd.channels.row(3) = dir_mom.cwiseProduct(fwd.mask_z).transpose();
  fwd.channels.row(4) = dir_res.cwiseProduct(fwd.mask_nz).transpose();
  fwd.channels.row(5) = dir_res.cwiseProduct(fwd.mask_z).transpose();
  fwd.channels.row(6) = dir_gm.cwiseProduct(fwd.mask_nz).transpose();
  fwd.channels.row(7) = dir_gm.cwiseProduct(fwd.mask_z).transpose();

  fwd.features = lasso_features(inst, state);
  fwd.scales = block_forward(layout.dense, dense_w, fwd.features,
                             want_cache ? &fwd.dense_cache : nullptr);
  fwd.scaled = fwd.scales.asDiagonal() * fwd.channels;
  fwd.directions = block_forward(layout.percoord, percoord_w, fwd.scaled,
                                 want_cache ? &fwd.percoord_cache : nullptr);

  const Eigen::VectorXd correction_nz = fwd.directions.row(0).transpose().cwiseProduct(fwd.mask_nz);
  const Eigen::VectorXd correction_z = fwd.directions.row(1).transpose().cwiseProduct(fwd.mask_z);
  fwd.pre_prox =
      x + (correction_nz - fwd.grad + fwd.momentum_norm * correction_z) / inst.lipschitz;
  fwd.next_x = soft_threshold(fwd.pre_prox, inst.reg / inst.lipschitz);
  return fwd;
}

}  // namespace

void lasso_update(const Eigen::VectorXd& alpha, const LassoInstance& inst, AlgorithmState& state) {
  LassoForward fwd = lasso_forward(alpha, inst, state, /*want_cache=*/false);
  state.x_prev = state.x;
  state.x = std::move(fwd.next_x);
}

double quad_training_step(const Eigen::VectorXd& alpha, const QuadraticInstance& inst,
                          AlgorithmState& state, Eigen::VectorXd* grad) {
  const ArchitectureLayout& layout = quad_architecture_layout();
  require_loss_caches(state, "quad_training_step");
  const double loss0 = state.loss;
  const bool observed = loss0 > 0.0 && !quad_converged(inst, state.x);

  QuadForward fwd = quad_forward(alpha, inst, state, /*want_cache=*/grad != nullptr);
  const double loss1 = quad_loss(inst, fwd.next_x);
  const double l_train = observed ? loss1 / loss0 : 0.0;

  if (grad) {
    grad->setZero(layout.param_count());
    if (observed) {
      BlockWeights dense_w, percoord_w;
      unflatten(layout, alpha, dense_w, percoord_w);
      const Eigen::VectorXd upstream_x = quad_grad(inst, fwd.next_x) / loss0;
      // x+ = x + beta * direction: split the upstream between the two heads.
      Eigen::MatrixXd beta_upstream(1, 1);
      beta_upstream(0, 0) = upstream_x.dot(fwd.direction.row(0).transpose());
      const Eigen::MatrixXd dir_upstream = fwd.beta * upstream_x.transpose();

      std::vector<Eigen::MatrixXd> dense_grads, percoord_grads;
      block_backward(layout.dense, dense_w, fwd.dense_cache, beta_upstream, dense_grads);
      block_backward(layout.percoord, percoord_w, fwd.percoord_cache, dir_upstream,
                     percoord_grads);
      *grad = flatten(layout, dense_grads, percoord_grads);
    }
  }

  state.x_prev = state.x;
  state.x = std::move(fwd.next_x);
  state.loss_prev = loss0;
  state.loss = loss1;
  return l_train;
}

double lasso_training_step(const Eigen::VectorXd& alpha, const LassoInstance& inst,
                           AlgorithmState& state, Eigen::VectorXd* grad) {
  const ArchitectureLayout& layout = lasso_architecture_layout();
  require_loss_caches(state, "lasso_training_step");
  const double loss0 = state.loss;
  const bool observed = loss0 > 0.0 && !lasso_converged(inst, state.x);

  LassoForward fwd = lasso_forward(alpha, inst, state, /*want_cache=*/grad != nullptr);
  const double loss1 = lasso_objective(inst, fwd.next_x);
  const double l_train = observed ? loss1 / loss0 : 0.0;

  if (grad) {
    grad->setZero(layout.param_count());
    if (observed) {
      BlockWeights dense_w, percoord_w;
      unflatten(layout, alpha, dense_w, percoord_w);

      // d objective(prox(z)) / dz: the prox is active only where
      // |z_i| > reg / L, and there d prox / dz = 1 with sign(x+_i) defined.
      const double kappa = inst.reg / inst.lipschitz;
      const Eigen::VectorXd grad_next = lasso_smooth_grad(inst, fwd.next_x);
      Eigen::VectorXd upstream_z(inst.dim());
      for (int i = 0; i < inst.dim(); ++i) {
        const bool active = std::abs(fwd.pre_prox(i)) > kappa;
        upstream_z(i) =
            active ? (grad_next(i) + inst.reg * sign_or_zero(fwd.next_x(i))) / loss0 : 0.0;
      }

      Eigen::MatrixXd dir_upstream(2, inst.dim());
      dir_upstream.row(0) =
          (upstream_z.cwiseProduct(fwd.mask_nz) / inst.lipschitz).transpose();
      dir_upstream.row(1) =
          (fwd.momentum_norm / inst.lipschitz) * upstream_z.cwiseProduct(fwd.mask_z).transpose();

      std::vector<Eigen::MatrixXd> dense_grads, percoord_grads;
      const Eigen::MatrixXd scaled_grad = block_backward(layout.percoord, percoord_w,
                                                         fwd.percoord_cache, dir_upstream,
                                                         percoord_grads);
      // scaled = diag(s) * channels, so ds_k = <scaled_grad_k, channels_k>.
      Eigen::VectorXd scale_upstream(8);
      for (int k = 0; k < 8; ++k)
        scale_upstream(k) = scaled_grad.row(k).dot(fwd.channels.row(k));
      block_backward(layout.dense, dense_w, fwd.dense_cache, scale_upstream, dense_grads);
      *grad = flatten(layout, dense_grads, percoord_grads);
    }
  }

  state.x_prev = state.x;
  state.x = std::move(fwd.next_x);
  state.loss_prev = loss0;
  state.loss = loss1;
  return l_train;
}

void QuadLearnedRule::apply(const Eigen::VectorXd& alpha, const Problem& problem,
                            AlgorithmState& state, RandomnessStream& rng) const {
  (void)rng;
  const auto* quad = dynamic_cast<const QuadraticProblem*>(&problem);
  if (quad == nullptr) throw ShapeError("QuadLearnedRule: expects a QuadraticProblem");
  quad_update(alpha, quad->instance(), state);
}

void LassoLearnedRule::apply(const Eigen::VectorXd& alpha, const Problem& problem,
                             AlgorithmState& state, RandomnessStream& rng) const {
  (void)rng;
  const auto* lasso = dynamic_cast<const LassoProblem*>(&problem);
  if (lasso == nullptr) throw ShapeError("LassoLearnedRule: expects a LassoProblem");
  lasso_update(alpha, lasso->instance(), state);
}

namespace {

class QuadArchitectureImpl : public LearnedArchitecture {
 public:
  ArchitectureId id() const override { return ArchitectureId::kQuadDescent; }
  const ArchitectureLayout& layout() const override { return quad_architecture_layout(); }
  Eigen::VectorXd init_weights(RandomnessStream& rng) const override {
    return l2o::init_weights(layout(), rng);
  }
  std::unique_ptr<UpdateRule> make_rule() const override {
    return std::make_unique<QuadLearnedRule>();
  }
  double training_step(const Eigen::VectorXd& alpha, const Problem& problem,
                       AlgorithmState& state, Eigen::VectorXd* grad) const override {
    const auto* quad = dynamic_cast<const QuadraticProblem*>(&problem);
    if (quad == nullptr) throw ShapeError("quad architecture: expects a QuadraticProblem");
    return quad_training_step(alpha, quad->instance(), state, grad);
  }
};

class LassoArchitectureImpl : public LearnedArchitecture {
 public:
  ArchitectureId id() const override { return ArchitectureId::kLassoProx; }
  const ArchitectureLayout& layout() const override { return lasso_architecture_layout(); }
  Eigen::VectorXd init_weights(RandomnessStream& rng) const override {
    return l2o::init_weights(layout(), rng);
  }
  std::unique_ptr<UpdateRule> make_rule() const override {
    return std::make_unique<LassoLearnedRule>();
  }
  double training_step(const Eigen::VectorXd& alpha, const Problem& problem,
                       AlgorithmState& state, Eigen::VectorXd* grad) const override {
    const auto* lasso = dynamic_cast<const LassoProblem*>(&problem);
    if (lasso == nullptr) throw ShapeError("lasso architecture: expects a LassoProblem");
    return lasso_training_step(alpha, lasso->instance(), state, grad);
  }
};

}  // namespace

std::unique_ptr<LearnedArchitecture> make_architecture(ArchitectureId id) {
  if (id == ArchitectureId::kQuadDescent) return std::make_unique<QuadArchitectureImpl>();
  return std::make_unique<LassoArchitectureImpl>();
}

}  // namespace l2o
