#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "l2o/problems.hpp"
#include "l2o/random.hpp"
#include "l2o/trajectory.hpp"

namespace l2o {

// Learnable update rules: small bias-free fully-connected and per-coordinate
// (1x1 convolution) blocks with hand-written forward and reverse passes. Two
// fixed computation graphs are supported, one for quadratics and one for
// LASSO; there is deliberately no generic autodiff beyond them.

enum class Activation { kIdentity, kRelu };

struct BlockLayout {
  std::vector<int> widths;               // layer sizes, length L+1
  std::vector<Activation> activations;   // after each layer, length L
  int layer_count() const { return static_cast<int>(activations.size()); }
  int weight_count() const;
  void validate() const;
};

// All weight matrices of one block; weights[l] has shape widths[l+1] x widths[l].
using BlockWeights = std::vector<Eigen::MatrixXd>;

// Forward activations needed by the reverse pass.
struct BlockCache {
  std::vector<Eigen::MatrixXd> inputs;    // input of each layer
  std::vector<Eigen::MatrixXd> pre_acts;  // W * input of each layer
};

// Shared bias-free feed-forward core. Columns of the input are independent
// sites: a dense block is the single-column case, a per-coordinate block
// mixes channels identically at every coordinate of the optimization
// variable (what a 1x1 convolution does).
Eigen::MatrixXd block_forward(const BlockLayout& layout, const BlockWeights& weights,
                              const Eigen::MatrixXd& input, BlockCache* cache);

// Reverse pass. upstream is dL/d(output); returns dL/d(input) and appends
// one dL/dW per layer to weight_grads. The ReLU subgradient at 0 is 0.
// Throws when the cache was not populated by a matching forward call.
Eigen::MatrixXd block_backward(const BlockLayout& layout, const BlockWeights& weights,
                               const BlockCache& cache, const Eigen::MatrixXd& upstream,
                               std::vector<Eigen::MatrixXd>& weight_grads);

// Named wrappers for the two block roles.
struct DenseBlock {
  BlockLayout layout;
  BlockWeights weights;
  Eigen::VectorXd forward(const Eigen::VectorXd& input, BlockCache* cache = nullptr) const;
  Eigen::VectorXd backward(const BlockCache& cache, const Eigen::VectorXd& upstream,
                           std::vector<Eigen::MatrixXd>& weight_grads) const;
};

struct PerCoordBlock {
  BlockLayout layout;
  BlockWeights weights;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& channels, BlockCache* cache = nullptr) const;
  Eigen::MatrixXd backward(const BlockCache& cache, const Eigen::MatrixXd& upstream,
                           std::vector<Eigen::MatrixXd>& weight_grads) const;
};

enum class ArchitectureId { kQuadDescent, kLassoProx };

// Static layout descriptor of one architecture; fixes the canonical flat
// parameter order: dense block layers first, then per-coordinate block
// layers, each weight matrix row-major.
struct ArchitectureLayout {
  ArchitectureId id;
  BlockLayout dense;
  BlockLayout percoord;
  int param_count() const { return dense.weight_count() + percoord.weight_count(); }
};

const ArchitectureLayout& quad_architecture_layout();
const ArchitectureLayout& lasso_architecture_layout();
const ArchitectureLayout& architecture_layout(ArchitectureId id);

// Flat hyperparameter vector housing every learnable weight of one rule.
struct Hyperparameters {
  ArchitectureId arch = ArchitectureId::kQuadDescent;
  Eigen::VectorXd flat;
  void validate() const;
};

// Exact round-trip between the flat vector and per-block weight matrices.
void unflatten(const ArchitectureLayout& layout, const Eigen::VectorXd& flat,
               BlockWeights& dense, BlockWeights& percoord);
Eigen::VectorXd flatten(const ArchitectureLayout& layout, const BlockWeights& dense,
                        const BlockWeights& percoord);

// Per-layer U[-s, s] with s = 1 / sqrt(fan_in); the final layer of each
// block is scaled by 0.01 so the initial rule is a small perturbation of
// the neutral update.
Eigen::VectorXd init_weights(const ArchitectureLayout& layout, RandomnessStream& rng);

// ---- Quadratic architecture -------------------------------------------------
// Update x+ = x + beta * direction with beta from the dense block on four
// scalar features and direction from the per-coordinate block on channels
// (normalized gradient, normalized momentum, their pointwise product).

// The four features log(1+||grad||), log(1+||x - x_prev||), log(1+loss),
// log(1+loss_prev); requires loss caches on the state.
Eigen::VectorXd quad_features(const QuadraticInstance& inst, const AlgorithmState& state);

// Advances x/x_prev only; loss caches stay with the caller.
void quad_update(const Eigen::VectorXd& alpha, const QuadraticInstance& inst,
                 AlgorithmState& state);

// ---- LASSO architecture -----------------------------------------------------
// Prox-gradient update with learned corrections on the nonzero / zero
// supports of x (split by exact equality with 0):
//   x+ = prox_{g/L}( x + (d_out1 on support> - grad h(x) + ||x - x_prev|| d_out2 on support0) / L ).

// Twelve features: split norms of the smooth gradient, the momentum and the
// prox point over the two supports, the cached objective difference, the
// differences of the l1 and smooth parts, the two split scalar products of
// normalized gradient and momentum, and the regularization weight.
Eigen::VectorXd lasso_features(const LassoInstance& inst, const AlgorithmState& state);

void lasso_update(const Eigen::VectorXd& alpha, const LassoInstance& inst, AlgorithmState& state);

// ---- Training-step gradients ------------------------------------------------
// One transition of the training loss
//   l_train = 1{l(xi_t) > 0} * l(xi_{t+1}) / l(xi_t) * 1{(theta, xi_t) not in C},
// advancing `state` (including its loss caches) by one learned update and,
// when grad != nullptr, writing d l_train / d alpha for the alpha that
// produced the step.
double quad_training_step(const Eigen::VectorXd& alpha, const QuadraticInstance& inst,
                          AlgorithmState& state, Eigen::VectorXd* grad);
double lasso_training_step(const Eigen::VectorXd& alpha, const LassoInstance& inst,
                           AlgorithmState& state, Eigen::VectorXd* grad);

// Engine adapters.
class QuadLearnedRule : public UpdateRule {
 public:
  void apply(const Eigen::VectorXd& alpha, const Problem& problem, AlgorithmState& state,
             RandomnessStream& rng) const override;
};

class LassoLearnedRule : public UpdateRule {
 public:
  void apply(const Eigen::VectorXd& alpha, const Problem& problem, AlgorithmState& state,
             RandomnessStream& rng) const override;
};

// Family-independent view used by the training pipeline.
class LearnedArchitecture {
 public:
  virtual ~LearnedArchitecture() = default;
  virtual ArchitectureId id() const = 0;
  virtual const ArchitectureLayout& layout() const = 0;
  virtual Eigen::VectorXd init_weights(RandomnessStream& rng) const = 0;
  virtual std::unique_ptr<UpdateRule> make_rule() const = 0;
  virtual double training_step(const Eigen::VectorXd& alpha, const Problem& problem,
                               AlgorithmState& state, Eigen::VectorXd* grad) const = 0;
};

std::unique_ptr<LearnedArchitecture> make_architecture(ArchitectureId id);

}  // namespace l2o
