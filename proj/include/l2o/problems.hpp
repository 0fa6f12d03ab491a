#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "l2o/random.hpp"
#include "l2o/trajectory.hpp"

namespace l2o {

// Convergence-set thresholds. C_quad is the disjunction
// l(s) < 1e-8 or ||grad l(s)|| < 1e-6; C_lasso is a strict prox-residual
// test at 1e-6 with step 1/L.
inline constexpr double kQuadLossTol = 1e-8;
inline constexpr double kQuadGradTol = 1e-6;
inline constexpr double kLassoResidualTol = 1e-6;

// min_x 1/2 ||Ax - b||^2 with A diagonal, entries sqrt(m) .. sqrt(L).
struct QuadraticInstance {
  Eigen::VectorXd diag;  // diagonal of A, strictly positive, nondecreasing
  Eigen::VectorXd rhs;   // b
  double strong_convexity = 0.0;  // m
  double smoothness = 0.0;        // L

  int dim() const { return static_cast<int>(diag.size()); }
  void validate() const;
};

double quad_loss(const QuadraticInstance& inst, const Eigen::VectorXd& x);
Eigen::VectorXd quad_grad(const QuadraticInstance& inst, const Eigen::VectorXd& x);
bool quad_converged(const QuadraticInstance& inst, const Eigen::VectorXd& x);

// min_x 1/2 ||Ax - b||^2 + reg ||x||_1 with a design matrix shared across
// the whole dataset.
struct LassoInstance {
  std::shared_ptr<const Eigen::MatrixXd> design;  // p x d, shared
  Eigen::VectorXd rhs;                            // b in R^p
  double reg = 0.0;                               // l1 weight, > 0 when sampled
  double lipschitz = 0.0;                         // largest eigenvalue of A^T A

  int dim() const { return design ? static_cast<int>(design->cols()) : 0; }
  void validate() const;
};

double lasso_objective(const LassoInstance& inst, const Eigen::VectorXd& x);
Eigen::VectorXd lasso_smooth_grad(const LassoInstance& inst, const Eigen::VectorXd& x);
// Componentwise shrink: zero on [-kappa, kappa] (boundary included), shift
// by kappa toward zero outside.
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double kappa);
bool lasso_converged(const LassoInstance& inst, const Eigen::VectorXd& x);
// The quantity tested by lasso_converged: ||x - prox(x - grad h(x)/L)||.
double lasso_prox_residual(const LassoInstance& inst, const Eigen::VectorXd& x);

struct QuadraticDistributionConfig {
  int dimension = 20;
  double m_minus = 0.1, m_plus = 1.0;  // strong convexity range
  double L_minus = 1.0, L_plus = 10.0; // smoothness range
  void validate() const;
};

struct LassoDistributionConfig {
  int dimension = 70;   // d
  int num_rows = 35;    // p <= d
  double reg_min = 5.0, reg_max = 10.0;
  // Scale of the N(0, scale^2 I) right-hand side; the distribution itself is
  // a fixed artifact choice (identity covariance).
  double rhs_scale = 1.0;
  void validate() const;
};

// m ~ U[m-, m+], L ~ U[L-, L+], diagonal entries
// a_i = sqrt(m) + i (sqrt(L) - sqrt(m)) / d for i = 1..d, b ~ N(0, I).
QuadraticInstance sample_quadratic(const QuadraticDistributionConfig& cfg, RandomnessStream& rng);

// One design matrix with entries U[-0.5, 0.5] shared by every instance;
// per-instance reg ~ U[reg_min, reg_max] and rhs ~ N(0, scale^2 I). The
// Lipschitz constant is computed once by power iteration.
std::vector<LassoInstance> sample_lasso_family(const LassoDistributionConfig& cfg, int count,
                                               RandomnessStream& rng);

// One instance against an already-sampled shared design matrix.
LassoInstance sample_lasso_instance(const LassoDistributionConfig& cfg,
                                    const std::shared_ptr<const Eigen::MatrixXd>& design,
                                    double lipschitz, RandomnessStream& rng);

// Dominant eigenvalue of a symmetric PSD matrix by power iteration with a
// deterministic all-ones start. Throws NumericError past max_iters.
double largest_eigenvalue_power(const Eigen::MatrixXd& sym, double tol = 1e-10,
                                int max_iters = 10000);

// Problem adapters for the trajectory engine.
class QuadraticProblem : public GradientProblem {
 public:
  explicit QuadraticProblem(QuadraticInstance inst) : inst_(std::move(inst)) {}
  int dim() const override { return inst_.dim(); }
  double loss(const Eigen::VectorXd& x) const override { return quad_loss(inst_, x); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return quad_grad(inst_, x); }
  bool in_convergence_set(const Eigen::VectorXd& x) const override {
    return quad_converged(inst_, x);
  }
  const QuadraticInstance& instance() const { return inst_; }

 private:
  QuadraticInstance inst_;
};

class LassoProblem : public GradientProblem {
 public:
  explicit LassoProblem(LassoInstance inst) : inst_(std::move(inst)) {}
  int dim() const override { return inst_.dim(); }
  double loss(const Eigen::VectorXd& x) const override { return lasso_objective(inst_, x); }
  // Gradient of the smooth part h(x) = 1/2 ||Ax - b||^2.
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
    return lasso_smooth_grad(inst_, x);
  }
  bool in_convergence_set(const Eigen::VectorXd& x) const override {
    return lasso_converged(inst_, x);
  }
  const LassoInstance& instance() const { return inst_; }

 private:
  LassoInstance inst_;
};

}  // namespace l2o
