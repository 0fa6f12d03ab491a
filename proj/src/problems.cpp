#include "l2o/problems.hpp"

#include <cmath>
#include <string>

namespace l2o {

void QuadraticInstance::validate() const {
  if (diag.size() == 0 || diag.size() != rhs.size())
    throw ShapeError("quadratic: diag/rhs dimension mismatch");
  for (int i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0)) throw ShapeError("quadratic: diagonal entries must be positive");
    if (i > 0 && diag(i) < diag(i - 1))
      throw ShapeError("quadratic: diagonal entries must be nondecreasing");
  }
  const double top = diag(diag.size() - 1);
  if (std::abs(top * top - smoothness) > 1e-9)
    throw ShapeError("quadratic: largest diagonal entry squared must equal L");
  if (diag(0) * diag(0) < strong_convexity - 1e-9)
    throw ShapeError("quadratic: smallest diagonal entry squared must be >= m");
}

double quad_loss(const QuadraticInstance& inst, const Eigen::VectorXd& x) {
  if (x.size() != inst.diag.size()) throw ShapeError("quad_loss: dimension mismatch");
  return 0.5 * (inst.diag.cwiseProduct(x) - inst.rhs).squaredNorm();
}

Eigen::VectorXd quad_grad(const QuadraticInstance& inst, const Eigen::VectorXd& x) {
  if (x.size() != inst.diag.size()) throw ShapeError("quad_grad: dimension mismatch");
  return inst.diag.cwiseProduct(inst.diag.cwiseProduct(x) - inst.rhs);
}

bool quad_converged(const QuadraticInstance& inst, const Eigen::VectorXd& x) {
  return quad_loss(inst, x) < kQuadLossTol || quad_grad(inst, x).norm() < kQuadGradTol;
}

void LassoInstance::validate() const {
  if (!design || design->size() == 0) throw ShapeError("lasso: missing design matrix");
  if (rhs.size() != design->rows()) throw ShapeError("lasso: rhs dimension mismatch");
  if (!(reg >= 0.0)) throw ShapeError("lasso: regularization must be nonnegative");
  if (!(lipschitz > 0.0)) throw ShapeError("lasso: Lipschitz constant must be positive");
}

double lasso_objective(const LassoInstance& inst, const Eigen::VectorXd& x) {
  if (x.size() != inst.design->cols()) throw ShapeError("lasso_objective: dimension mismatch");
  return 0.5 * (*inst.design * x - inst.rhs).squaredNorm() + inst.reg * x.lpNorm<1>();
}

Eigen::VectorXd lasso_smooth_grad(const LassoInstance& inst, const Eigen::VectorXd& x) {
  if (x.size() != inst.design->cols()) throw ShapeError("lasso_smooth_grad: dimension mismatch");
  return inst.design->transpose() * (*inst.design * x - inst.rhs);
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double kappa) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("soft_threshold: kappa must be nonnegative");
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < v.size(); ++i) {
    const double vi = v(i);
    // Strict inequality: |v_i| == kappa maps to exactly zero.
    out(i) = std::abs(vi) > kappa ? vi - kappa * (vi > 0.0 ? 1.0 : -1.0) : 0.0;
  }
  return out;
}

double lasso_prox_residual(const LassoInstance& inst, const Eigen::VectorXd& x) {
  const double beta = 1.0 / inst.lipschitz;
  const Eigen::VectorXd prox = soft_threshold(x - beta * lasso_smooth_grad(inst, x),
                                              beta * inst.reg);
  return (x - prox).norm();
}

bool lasso_converged(const LassoInstance& inst, const Eigen::VectorXd& x) {
  return lasso_prox_residual(inst, x) < kLassoResidualTol;
}

void QuadraticDistributionConfig::validate() const {
  if (dimension < 1) throw ConfigError("quadratic config: dimension must be >= 1");
  if (!(0.0 < m_minus && m_minus <= m_plus && m_plus <= L_minus && L_minus <= L_plus))
    throw ConfigError("quadratic config: need 0 < m- <= m+ <= L- <= L+");
}

void LassoDistributionConfig::validate() const {
  if (dimension < 1 || num_rows < 1) throw ConfigError("lasso config: dimensions must be >= 1");
  if (num_rows > dimension) throw ConfigError("lasso config: need p <= d");
  if (!(0.0 < reg_min && reg_min <= reg_max))
    throw ConfigError("lasso config: need 0 < reg_min <= reg_max");
  if (!(rhs_scale > 0.0)) throw ConfigError("lasso config: rhs_scale must be positive");
}

QuadraticInstance sample_quadratic(const QuadraticDistributionConfig& cfg, RandomnessStream& rng) {
  cfg.validate();
  const int d = cfg.dimension;
  QuadraticInstance inst;
  inst.strong_convexity = rng.uniform(cfg.m_minus, cfg.m_plus);
  inst.smoothness = rng.uniform(cfg.L_minus, cfg.L_plus);
  const double root_m = std::sqrt(inst.strong_convexity);
  const double root_L = std::sqrt(inst.smoothness);
  inst.diag.resize(d);
  for (int i = 1; i <= d; ++i)
    inst.diag(i - 1) = root_m + static_cast<double>(i) * (root_L - root_m) / static_cast<double>(d);
  // The top entry is sqrt(L) by construction; pin it exactly so the spectral
  // identity L == a_dd^2 is not left to rounding.
  inst.diag(d - 1) = root_L;
  inst.rhs.resize(d);
  for (int i = 0; i < d; ++i) inst.rhs(i) = rng.normal();
  inst.validate();
  return inst;
}

std::vector<LassoInstance> sample_lasso_family(const LassoDistributionConfig& cfg, int count,
                                               RandomnessStream& rng) {
  cfg.validate();
  if (count < 1) throw ConfigError("sample_lasso_family: need at least one instance");
  auto design = std::make_shared<Eigen::MatrixXd>(cfg.num_rows, cfg.dimension);
  for (int i = 0; i < cfg.num_rows; ++i)
    for (int j = 0; j < cfg.dimension; ++j) (*design)(i, j) = rng.uniform(-0.5, 0.5);
  const double lipschitz = largest_eigenvalue_power(design->transpose() * *design);

  std::vector<LassoInstance> family;
  family.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n)
    family.push_back(sample_lasso_instance(cfg, design, lipschitz, rng));
  return family;
}

LassoInstance sample_lasso_instance(const LassoDistributionConfig& cfg,
                                    const std::shared_ptr<const Eigen::MatrixXd>& design,
                                    double lipschitz, RandomnessStream& rng) {
  LassoInstance inst;
  inst.design = design;
  inst.reg = rng.uniform(cfg.reg_min, cfg.reg_max);
  inst.rhs.resize(cfg.num_rows);
  for (int i = 0; i < cfg.num_rows; ++i) inst.rhs(i) = cfg.rhs_scale * rng.normal();
  inst.lipschitz = lipschitz;
  inst.validate();
  return inst;
}

double largest_eigenvalue_power(const Eigen::MatrixXd& sym, double tol, int max_iters) {
  if (sym.rows() != sym.cols() || sym.rows() == 0)
    throw ShapeError("largest_eigenvalue_power: matrix must be square");
  Eigen::VectorXd v = Eigen::VectorXd::Ones(sym.rows());
  v.normalize();
  double eig = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = sym * v;
    const double norm = w.norm();
    if (!(norm > 0.0)) return 0.0;  // null start vector: matrix annihilates it
    v = w / norm;
    const double next = v.dot(sym * v);
    if (it > 0 && std::abs(next - eig) <= tol * std::max(1.0, std::abs(next))) return next;
    eig = next;
  }
  throw NumericError("largest_eigenvalue_power: no convergence after " +
                     std::to_string(max_iters) + " iterations");
}

}  // namespace l2o
