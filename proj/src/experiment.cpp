#include "l2o/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "l2o/baselines.hpp"
#include "l2o/finite_kernel.hpp"
#include "l2o/parallel.hpp"

namespace l2o {

namespace fs = std::filesystem;

void SplitSizes::validate() const {
  if (train < 1 || prior < 1 || certify < 1 || test < 1)
    throw ConfigError("splits: all split sizes must be positive");
}

void BoundConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("bounds: epsilon must be in (0, 1)");
  if (!(r_max > 0.0)) throw ConfigError("bounds: r_max must be positive");
  if (t_max < 1) throw ConfigError("bounds: t_max must be >= 1");
  for (double lam : {lambda_time, lambda_rate, lambda_prob, lambda_gibbs})
    if (!(lam >= 0.0)) throw ConfigError("bounds: lambda values must be >= 0 (0 = auto)");
  if (!(rate_event_threshold > 0.0)) throw ConfigError("bounds: rate_event_threshold must be > 0");
}

void ValidationConfig::validate() const {
  if (trials < 100) throw ConfigError("validation: need at least 100 trials");
  if (population < 1) throw ConfigError("validation: population must be positive");
}

ArchitectureId ExperimentConfig::architecture_id() const {
  if (architecture == "quad-descent") return ArchitectureId::kQuadDescent;
  if (architecture == "lasso-prox") return ArchitectureId::kLassoProx;
  throw ConfigError("config: unknown architecture '" + architecture + "'");
}

void ExperimentConfig::validate() const {
  if (family != "quadratic" && family != "lasso")
    throw ConfigError("config: family must be 'quadratic' or 'lasso'");
  const ArchitectureId arch = architecture_id();
  if (is_quadratic() != (arch == ArchitectureId::kQuadDescent))
    throw ConfigError("config: architecture does not match the problem family");
  if (is_quadratic()) quad.validate();
  else lasso.validate();
  splits.validate();
  train.validate();
  bounds.validate();
  validation.validate();
  if (threads < 0) throw ConfigError("config: threads must be >= 0");
  if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
}

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: expected an object at " + where);
  for (const auto& item : j.items())
    if (allowed.find(item.key()) == allowed.end())
      throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  require_keys(j, {"schema_version", "family", "architecture", "master_seed", "out_dir",
                   "problem", "splits", "train", "bounds", "validation", "threads"},
               "top level");
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
    throw ConfigError("config: schema_version must be 1");

  ExperimentConfig cfg;
  read_field(j, "family", cfg.family);
  read_field(j, "architecture", cfg.architecture);
  if (j.contains("master_seed")) {
    cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    cfg.seed_set = true;
  }
  read_field(j, "out_dir", cfg.out_dir);
  read_field(j, "threads", cfg.threads);

  if (j.contains("problem")) {
    const json& p = j.at("problem");
    if (cfg.family == "quadratic") {
      require_keys(p, {"dimension", "m_minus", "m_plus", "L_minus", "L_plus"}, "problem");
      read_field(p, "dimension", cfg.quad.dimension);
      read_field(p, "m_minus", cfg.quad.m_minus);
      read_field(p, "m_plus", cfg.quad.m_plus);
      read_field(p, "L_minus", cfg.quad.L_minus);
      read_field(p, "L_plus", cfg.quad.L_plus);
    } else {
      require_keys(p, {"dimension", "num_rows", "reg_min", "reg_max", "rhs_scale"}, "problem");
      read_field(p, "dimension", cfg.lasso.dimension);
      read_field(p, "num_rows", cfg.lasso.num_rows);
      read_field(p, "reg_min", cfg.lasso.reg_min);
      read_field(p, "reg_max", cfg.lasso.reg_max);
      read_field(p, "rhs_scale", cfg.lasso.rhs_scale);
    }
  }
  if (j.contains("splits")) {
    const json& s = j.at("splits");
    require_keys(s, {"train", "prior", "certify", "test"}, "splits");
    read_field(s, "train", cfg.splits.train);
    read_field(s, "prior", cfg.splits.prior);
    read_field(s, "certify", cfg.splits.certify);
    read_field(s, "test", cfg.splits.test);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    require_keys(t, {"outer_iterations", "inner_iterations", "learning_rate", "n_sample",
                     "sigma_prior"},
                 "train");
    read_field(t, "outer_iterations", cfg.train.outer_iterations);
    read_field(t, "inner_iterations", cfg.train.inner_iterations);
    read_field(t, "learning_rate", cfg.train.learning_rate);
    read_field(t, "n_sample", cfg.train.n_sample);
    read_field(t, "sigma_prior", cfg.train.sigma_prior);
  }
  if (j.contains("bounds")) {
    const json& b = j.at("bounds");
    require_keys(b, {"epsilon", "r_max", "t_max", "lambda_time", "lambda_rate", "lambda_prob",
                     "lambda_gibbs", "rate_event_threshold"},
                 "bounds");
    read_field(b, "epsilon", cfg.bounds.epsilon);
    read_field(b, "r_max", cfg.bounds.r_max);
    read_field(b, "t_max", cfg.bounds.t_max);
    read_field(b, "lambda_time", cfg.bounds.lambda_time);
    read_field(b, "lambda_rate", cfg.bounds.lambda_rate);
    read_field(b, "lambda_prob", cfg.bounds.lambda_prob);
    read_field(b, "lambda_gibbs", cfg.bounds.lambda_gibbs);
    read_field(b, "rate_event_threshold", cfg.bounds.rate_event_threshold);
  }
  if (j.contains("validation")) {
    const json& v = j.at("validation");
    require_keys(v, {"trials", "population"}, "validation");
    read_field(v, "trials", cfg.validation.trials);
    read_field(v, "population", cfg.validation.population);
  }

  // Mirror the TrainConfig fields shared with the bound configuration.
  cfg.train.epsilon = cfg.bounds.epsilon;
  cfg.train.r_max = cfg.bounds.r_max;
  cfg.train.t_max = cfg.bounds.t_max;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: JSON parse error in '" + path + "': " + e.what());
  }
  return parse_experiment_config(j);
}

namespace {

class QuadSampler : public ProblemSampler {
 public:
  explicit QuadSampler(QuadraticDistributionConfig cfg) : cfg_(cfg) {}
  std::unique_ptr<Problem> sample(RandomnessStream& rng) const override {
    return std::make_unique<QuadraticProblem>(sample_quadratic(cfg_, rng));
  }

 private:
  QuadraticDistributionConfig cfg_;
};

class LassoSampler : public ProblemSampler {
 public:
  LassoSampler(LassoDistributionConfig cfg, std::shared_ptr<const Eigen::MatrixXd> design,
               double lipschitz)
      : cfg_(cfg), design_(std::move(design)), lipschitz_(lipschitz) {}
  std::unique_ptr<Problem> sample(RandomnessStream& rng) const override {
    return std::make_unique<LassoProblem>(sample_lasso_instance(cfg_, design_, lipschitz_, rng));
  }

 private:
  LassoDistributionConfig cfg_;
  std::shared_ptr<const Eigen::MatrixXd> design_;
  double lipschitz_;
};

}  // namespace

std::unique_ptr<ProblemSampler> make_problem_sampler(const ExperimentConfig& cfg) {
  if (cfg.is_quadratic()) return std::make_unique<QuadSampler>(cfg.quad);
  RandomnessStream design_rng(cfg.master_seed, kTagDesignMatrix);
  auto design = std::make_shared<Eigen::MatrixXd>(cfg.lasso.num_rows, cfg.lasso.dimension);
  for (int i = 0; i < cfg.lasso.num_rows; ++i)
    for (int jx = 0; jx < cfg.lasso.dimension; ++jx) (*design)(i, jx) = design_rng.uniform(-0.5, 0.5);
  const double lipschitz = largest_eigenvalue_power(design->transpose() * *design);
  return std::make_unique<LassoSampler>(cfg.lasso, design, lipschitz);
}

std::vector<const Problem*> Dataset::split(int begin, int end) const {
  std::vector<const Problem*> out;
  out.reserve(static_cast<std::size_t>(end - begin));
  for (int i = begin; i < end; ++i) out.push_back(problems[static_cast<std::size_t>(i)].get());
  return out;
}

void Dataset::assert_disjoint() const {
  const std::array<std::pair<int, int>, 4> ranges = {
      std::pair{train_begin, train_end}, std::pair{prior_begin, prior_end},
      std::pair{certify_begin, certify_end}, std::pair{test_begin, test_end}};
  for (std::size_t a = 0; a < ranges.size(); ++a)
    for (std::size_t b = a + 1; b < ranges.size(); ++b)
      if (std::max(ranges[a].first, ranges[b].first) <
          std::min(ranges[a].second, ranges[b].second))
        throw ConfigError("dataset: split index ranges overlap");
}

Dataset sample_dataset(const ExperimentConfig& cfg, const ProblemSampler& sampler) {
  Dataset ds;
  const int total = cfg.splits.total();
  ds.problems.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    RandomnessStream rng(cfg.master_seed,
                         RandomnessStream::derive(cfg.master_seed, {kTagProblems,
                                                                    static_cast<std::uint64_t>(i)}));
    ds.problems.push_back(sampler.sample(rng));
  }
  ds.train_begin = 0;
  ds.train_end = cfg.splits.train;
  ds.prior_begin = ds.train_end;
  ds.prior_end = ds.prior_begin + cfg.splits.prior;
  ds.certify_begin = ds.prior_end;
  ds.certify_end = ds.certify_begin + cfg.splits.certify;
  ds.test_begin = ds.certify_end;
  ds.test_end = ds.test_begin + cfg.splits.test;
  ds.assert_disjoint();
  return ds;
}

json problems_to_json(const ExperimentConfig& cfg, const Dataset& dataset) {
  json j;
  j["schema_version"] = 1;
  j["family"] = cfg.family;
  j["master_seed"] = cfg.master_seed;
  j["splits"] = {{"train", cfg.splits.train},
                 {"prior", cfg.splits.prior},
                 {"certify", cfg.splits.certify},
                 {"test", cfg.splits.test}};
  json instances = json::array();
  if (cfg.is_quadratic()) {
    j["config"] = {{"dimension", cfg.quad.dimension}, {"m_minus", cfg.quad.m_minus},
                   {"m_plus", cfg.quad.m_plus},       {"L_minus", cfg.quad.L_minus},
                   {"L_plus", cfg.quad.L_plus}};
    for (const auto& p : dataset.problems) {
      const auto& inst = dynamic_cast<const QuadraticProblem&>(*p).instance();
      instances.push_back({{"diag", vector_to_json(inst.diag)},
                           {"rhs", vector_to_json(inst.rhs)},
                           {"m", inst.strong_convexity},
                           {"L", inst.smoothness}});
    }
  } else {
    j["config"] = {{"dimension", cfg.lasso.dimension}, {"num_rows", cfg.lasso.num_rows},
                   {"reg_min", cfg.lasso.reg_min},     {"reg_max", cfg.lasso.reg_max},
                   {"rhs_scale", cfg.lasso.rhs_scale}};
    const auto& first = dynamic_cast<const LassoProblem&>(*dataset.problems.front()).instance();
    json design = json::array();
    for (int r = 0; r < first.design->rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < first.design->cols(); ++c) row.push_back((*first.design)(r, c));
      design.push_back(std::move(row));
    }
    j["design"] = std::move(design);
    j["lipschitz"] = first.lipschitz;
    for (const auto& p : dataset.problems) {
      const auto& inst = dynamic_cast<const LassoProblem&>(*p).instance();
      instances.push_back({{"rhs", vector_to_json(inst.rhs)}, {"reg", inst.reg}});
    }
  }
  j["instances"] = std::move(instances);
  return j;
}

std::vector<std::unique_ptr<Problem>> problems_from_json(const json& j) {
  std::vector<std::unique_ptr<Problem>> out;
  const std::string family = j.at("family").get<std::string>();
  if (family == "quadratic") {
    for (const json& inst : j.at("instances")) {
      QuadraticInstance q;
      q.diag = vector_from_json(inst.at("diag"));
      q.rhs = vector_from_json(inst.at("rhs"));
      q.strong_convexity = inst.at("m").get<double>();
      q.smoothness = inst.at("L").get<double>();
      q.validate();
      out.push_back(std::make_unique<QuadraticProblem>(std::move(q)));
    }
  } else if (family == "lasso") {
    const json& design_json = j.at("design");
    const int rows = static_cast<int>(design_json.size());
    const int cols = static_cast<int>(design_json.at(0).size());
    auto design = std::make_shared<Eigen::MatrixXd>(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        (*design)(r, c) = design_json.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    const double lipschitz = j.at("lipschitz").get<double>();
    for (const json& inst : j.at("instances")) {
      LassoInstance l;
      l.design = design;
      l.rhs = vector_from_json(inst.at("rhs"));
      l.reg = inst.at("reg").get<double>();
      l.lipschitz = lipschitz;
      l.validate();
      out.push_back(std::make_unique<LassoProblem>(std::move(l)));
    }
  } else {
    throw ConfigError("problems file: unknown family '" + family + "'");
  }
  return out;
}

std::vector<std::vector<TrajectoryRecord>> rollout_support(
    const ExperimentConfig& cfg, const LearnedArchitecture& arch,
    const std::vector<Eigen::VectorXd>& support, const std::vector<const Problem*>& problems,
    std::uint64_t phase) {
  const std::unique_ptr<UpdateRule> rule = arch.make_rule();
  StoppingConfig stop;
  stop.t_max = cfg.bounds.t_max;
  stop.r_max = cfg.bounds.r_max;

  std::vector<std::vector<TrajectoryRecord>> records(support.size());
  for (auto& r : records) r.resize(problems.size());
  parallel_for(support.size() * problems.size(), cfg.threads, [&](std::size_t flat) {
    const std::size_t i = flat / problems.size();
    const std::size_t n = flat % problems.size();
    const Problem& problem = *problems[n];
    RandomnessStream rng(cfg.master_seed,
                         RandomnessStream::derive(cfg.master_seed, {kTagRollout, phase, i, n}));
    records[i][n] = rollout(*rule, support[i], problem, initial_state(problem), rng, stop);
  });
  return records;
}

namespace {

// Empirical objective per support point on the prior split: the bounded-rate
// mean plus the t_max-normalized stopping-time mean. Only used to place
// posterior mass; both targets are certified separately afterwards.
Eigen::VectorXd posterior_scores(const ExperimentConfig& cfg,
                                 const std::vector<std::vector<TrajectoryRecord>>& records) {
  Eigen::VectorXd scores(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const EmpiricalStats stats = empirical_statistics(records[i]);
    scores(static_cast<Eigen::Index>(i)) =
        stats.mean_rate_bounded + stats.mean_tau / static_cast<double>(cfg.bounds.t_max);
  }
  return scores;
}

double resolve_lambda(double configured, int dataset_size, double epsilon, double f_max) {
  return configured > 0.0 ? configured : default_lambda(dataset_size, epsilon, f_max);
}

}  // namespace

PipelineState stage_train(const ExperimentConfig& cfg, const Dataset& dataset) {
  dataset.assert_disjoint();
  const std::unique_ptr<LearnedArchitecture> arch = make_architecture(cfg.architecture_id());

  RandomnessStream init_rng(cfg.master_seed, kTagWeightInit);
  const Eigen::VectorXd alpha_init = arch->init_weights(init_rng);

  const std::vector<const Problem*> train_problems = dataset.train_split();
  TrainResult trained = train_hyperparameters(cfg.train, *arch, train_problems, alpha_init,
                                              cfg.master_seed);

  PipelineState state;
  state.alpha0 = std::move(trained.alpha0);
  state.history = std::move(trained.history);
  state.divergence_events = trained.divergence_events;

  RandomnessStream prior_rng(cfg.master_seed, kTagPriorPerturbation);
  state.prior = build_prior(state.alpha0, cfg.train.n_sample, cfg.train.sigma_prior, prior_rng);

  const auto prior_records =
      rollout_support(cfg, *arch, state.prior.support, dataset.prior_split(), /*phase=*/0);
  const Eigen::VectorXd scores = posterior_scores(cfg, prior_records);
  const double lambda_gibbs =
      resolve_lambda(cfg.bounds.lambda_gibbs, cfg.splits.prior, cfg.bounds.epsilon, 1.0);
  state.posterior = gibbs_posterior(state.prior, scores, lambda_gibbs);
  state.alpha_star_index = select_alpha_star_index(state.posterior);
  return state;
}

CertificationResult stage_certify(const ExperimentConfig& cfg, const Dataset& dataset,
                                  const PipelineState& state) {
  dataset.assert_disjoint();
  const std::unique_ptr<LearnedArchitecture> arch = make_architecture(cfg.architecture_id());
  const auto records =
      rollout_support(cfg, *arch, state.prior.support, dataset.certify_split(), /*phase=*/1);

  const int n_cert = cfg.splits.certify;
  const double eps = cfg.bounds.epsilon;
  const double lambda_time =
      resolve_lambda(cfg.bounds.lambda_time, n_cert, eps, static_cast<double>(cfg.bounds.t_max));
  const double lambda_rate = resolve_lambda(cfg.bounds.lambda_rate, n_cert, eps, cfg.bounds.r_max);
  const double lambda_prob = resolve_lambda(cfg.bounds.lambda_prob, n_cert, eps, 1.0);

  const int t_max = cfg.bounds.t_max;
  const double r_target = cfg.bounds.rate_event_threshold;
  const TrajectoryPredicate converged_event = [t_max](const TrajectoryRecord& r) {
    return r.tau < t_max;
  };
  const TrajectoryPredicate rate_event = [r_target](const TrajectoryRecord& r) {
    return r.rate <= r_target;
  };

  CertificationResult result;
  result.time = time_bound(records, state.posterior.weights, state.prior.weights, lambda_time,
                           eps, t_max);
  result.rate = rate_bound(records, state.posterior.weights, state.prior.weights, lambda_rate,
                           eps, cfg.bounds.r_max);
  result.prob_convergence =
      probability_bound(records, converged_event, state.posterior.weights, state.prior.weights,
                        lambda_prob, eps, "tau_lt_tmax");
  result.prob_rate = probability_bound(records, rate_event, state.posterior.weights,
                                       state.prior.weights, lambda_prob, eps, "rate_le_target");
  result.combined = combined_certificate(records, state.posterior.weights, state.prior.weights,
                                         lambda_time, lambda_rate, lambda_prob, eps, t_max,
                                         cfg.bounds.r_max, converged_event, "tau_lt_tmax");
  return result;
}

std::pair<std::unique_ptr<UpdateRule>, Eigen::VectorXd> make_baseline(const ExperimentConfig& cfg) {
  if (cfg.is_quadratic()) {
    const HbfParams params = hbf_optimal_params(cfg.quad.m_minus, cfg.quad.L_plus);
    Eigen::VectorXd alpha(2);
    alpha << params.beta1, params.beta2;
    return {std::make_unique<HbfRule>(), std::move(alpha)};
  }
  return {std::make_unique<FistaRule>(), Eigen::VectorXd()};
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("sample_quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("sample_quantile: q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

namespace {

std::vector<TrajectoryRecord> run_all(const ExperimentConfig& cfg, const UpdateRule& rule,
                                      const Eigen::VectorXd& alpha,
                                      const std::vector<const Problem*>& problems,
                                      std::uint64_t phase) {
  StoppingConfig stop;
  stop.t_max = cfg.bounds.t_max;
  stop.r_max = cfg.bounds.r_max;
  std::vector<TrajectoryRecord> records(problems.size());
  parallel_for(problems.size(), cfg.threads, [&](std::size_t n) {
    RandomnessStream rng(cfg.master_seed,
                         RandomnessStream::derive(cfg.master_seed, {kTagRollout, phase, 0, n}));
    records[n] = rollout(rule, alpha, *problems[n], initial_state(*problems[n]), rng, stop);
  });
  return records;
}

// Column of per-problem losses at iteration t; the final loss persists past
// the stopping time so every trajectory contributes to every row.
double loss_at(const TrajectoryRecord& record, std::size_t t) {
  return t < record.losses.size() ? record.losses[t] : record.losses.back();
}

}  // namespace

CompareResult stage_compare(const ExperimentConfig& cfg, const Dataset& dataset,
                            const PipelineState& state) {
  const std::unique_ptr<LearnedArchitecture> arch = make_architecture(cfg.architecture_id());
  const std::unique_ptr<UpdateRule> learned_rule = arch->make_rule();
  const Eigen::VectorXd alpha_star =
      state.posterior.support[static_cast<std::size_t>(state.alpha_star_index)];
  const auto [baseline_rule, baseline_alpha] = make_baseline(cfg);

  const std::vector<const Problem*> test_problems = dataset.test_split();
  CompareResult result;
  result.learned_records = run_all(cfg, *learned_rule, alpha_star, test_problems, /*phase=*/2);
  result.baseline_records = run_all(cfg, *baseline_rule, baseline_alpha, test_problems, /*phase=*/3);

  result.table.t_max = cfg.bounds.t_max;
  result.table.rows.resize(static_cast<std::size_t>(cfg.bounds.t_max) + 1);
  std::vector<double> a(test_problems.size()), b(test_problems.size());
  for (std::size_t t = 0; t < result.table.rows.size(); ++t) {
    for (std::size_t n = 0; n < test_problems.size(); ++n) {
      a[n] = loss_at(result.learned_records[n], t);
      b[n] = loss_at(result.baseline_records[n], t);
    }
    const double a_mean =
        std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    const double b_mean =
        std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
    result.table.rows[t] = {a_mean,          sample_quantile(a, 0.5), sample_quantile(a, 0.95),
                            b_mean,          sample_quantile(b, 0.5), sample_quantile(b, 0.95)};
  }
  return result;
}

ValidityReport stage_validate(const ExperimentConfig& cfg, const PipelineState& state) {
  const std::unique_ptr<LearnedArchitecture> arch = make_architecture(cfg.architecture_id());
  const std::shared_ptr<ProblemSampler> sampler = make_problem_sampler(cfg);
  const std::shared_ptr<UpdateRule> rule = arch->make_rule();

  StoppingConfig stop;
  stop.t_max = cfg.bounds.t_max;
  stop.r_max = cfg.bounds.r_max;
  const auto support = state.prior.support;

  ValidityModel model;
  model.sample_problem = [sampler](RandomnessStream& rng) { return sampler->sample(rng); };
  model.run = [rule, support, stop](const Problem& problem, int support_index,
                                    RandomnessStream rng) {
    return rollout(*rule, support[static_cast<std::size_t>(support_index)], problem,
                   initial_state(problem), rng, stop);
  };
  model.support_size = static_cast<int>(support.size());
  model.prior_weights = state.prior.weights;
  model.posterior_weights = state.posterior.weights;
  const int n_cert = cfg.splits.certify;
  const double eps = cfg.bounds.epsilon;
  model.lambda_time =
      resolve_lambda(cfg.bounds.lambda_time, n_cert, eps, static_cast<double>(cfg.bounds.t_max));
  model.lambda_rate = resolve_lambda(cfg.bounds.lambda_rate, n_cert, eps, cfg.bounds.r_max);
  model.lambda_prob = resolve_lambda(cfg.bounds.lambda_prob, n_cert, eps, 1.0);
  model.epsilon = eps;
  model.t_max = cfg.bounds.t_max;
  model.r_max = cfg.bounds.r_max;
  const int t_max = cfg.bounds.t_max;
  model.event = [t_max](const TrajectoryRecord& r) { return r.tau < t_max; };
  model.event_name = "tau_lt_tmax";

  return monte_carlo_validity(model, cfg.validation.trials, cfg.validation.population, n_cert,
                              cfg.master_seed, cfg.threads);
}

// ---- Artifact files ---------------------------------------------------------

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << content;
}

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

json bound_report_to_json(const BoundReport& report) {
  const char* kind = report.kind == BoundKind::kTime
                         ? "time"
                         : (report.kind == BoundKind::kRate ? "rate" : "probability");
  json j = {{"kind", kind},
            {"bound", report.bound},
            {"vacuous", report.vacuous},
            {"empirical", report.query.empirical},
            {"kl", report.query.kl},
            {"lambda", report.query.lambda},
            {"epsilon", report.query.epsilon},
            {"N", report.query.dataset_size},
            {"f_max", report.query.f_max}};
  if (!report.event.empty()) j["event"] = report.event;
  return j;
}

std::string bound_report_csv_row(const BoundReport& report, const std::string& label) {
  const json j = bound_report_to_json(report);
  std::string row = label;
  for (const char* key : {"empirical", "kl", "lambda", "epsilon"})
    row += "," + csv_double(j.at(key).get<double>());
  row += "," + std::to_string(report.query.dataset_size);
  row += "," + csv_double(report.bound);
  row += std::string(",") + (report.vacuous ? "true" : "false");
  return row + "\n";
}

}  // namespace

void write_problems_file(const ExperimentConfig& cfg, const Dataset& dataset) {
  write_json_file(fs::path(cfg.out_dir) / "problems.json", problems_to_json(cfg, dataset));
}

json hyperparameters_to_json(const ExperimentConfig& cfg, const Eigen::VectorXd& alpha) {
  return {{"schema_version", 1},
          {"architecture", cfg.architecture},
          {"weights_hex", vector_to_hex_json(alpha)}};
}

Eigen::VectorXd hyperparameters_from_json(const ExperimentConfig& cfg, const json& j) {
  if (j.at("schema_version").get<int>() != 1)
    throw ConfigError("checkpoint: unsupported schema version");
  if (j.at("architecture").get<std::string>() != cfg.architecture)
    throw ConfigError("checkpoint: architecture tag does not match the config");
  Eigen::VectorXd alpha = vector_from_hex_json(j.at("weights_hex"));
  Hyperparameters h{cfg.architecture_id(), alpha};
  h.validate();
  return alpha;
}

namespace {

json distribution_to_json(const ExperimentConfig& cfg, const DiscreteDistribution& dist) {
  json support = json::array();
  for (const Eigen::VectorXd& point : dist.support) support.push_back(vector_to_hex_json(point));
  return {{"schema_version", 1},
          {"architecture", cfg.architecture},
          {"weights", vector_to_json(dist.weights)},
          {"support_hex", std::move(support)}};
}

DiscreteDistribution distribution_from_json(const ExperimentConfig& cfg, const json& j) {
  if (j.at("architecture").get<std::string>() != cfg.architecture)
    throw ConfigError("distribution file: architecture tag does not match the config");
  DiscreteDistribution dist;
  for (const json& point : j.at("support_hex")) dist.support.push_back(vector_from_hex_json(point));
  dist.weights = vector_from_json(j.at("weights"));
  dist.validate();
  return dist;
}

}  // namespace

void write_pipeline_files(const ExperimentConfig& cfg, const PipelineState& state) {
  const fs::path out(cfg.out_dir);
  write_json_file(out / "alpha0.json", hyperparameters_to_json(cfg, state.alpha0));
  write_json_file(out / "prior.json", distribution_to_json(cfg, state.prior));
  json posterior = distribution_to_json(cfg, state.posterior);
  posterior["alpha_star_index"] = state.alpha_star_index;
  write_json_file(out / "posterior.json", posterior);

  std::string history = "outer,inner,loss_train\n";
  for (const TrainHistoryEntry& e : state.history)
    history += std::to_string(e.outer) + "," + std::to_string(e.inner) + "," +
               csv_double(e.loss_train) + "\n";
  write_text_file(out / "training_history.csv", history);
}

PipelineState load_pipeline_state(const ExperimentConfig& cfg) {
  const fs::path out(cfg.out_dir);
  const auto read_json = [](const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing checkpoint file '" + path.string() + "'; run train first");
    json j;
    in >> j;
    return j;
  };
  PipelineState state;
  state.alpha0 = hyperparameters_from_json(cfg, read_json(out / "alpha0.json"));
  state.prior = distribution_from_json(cfg, read_json(out / "prior.json"));
  const json posterior = read_json(out / "posterior.json");
  state.posterior = distribution_from_json(cfg, posterior);
  state.alpha_star_index = posterior.at("alpha_star_index").get<int>();
  return state;
}

void write_certification_files(const ExperimentConfig& cfg, const CertificationResult& result) {
  const fs::path out(cfg.out_dir);
  json j;
  j["schema_version"] = 1;
  j["reports"] = {bound_report_to_json(result.time), bound_report_to_json(result.rate),
                  bound_report_to_json(result.prob_convergence),
                  bound_report_to_json(result.prob_rate)};
  j["combined"] = {{"joint_epsilon", result.combined.joint_epsilon},
                   {"time", bound_report_to_json(result.combined.time)},
                   {"rate", bound_report_to_json(result.combined.rate)},
                   {"probability", bound_report_to_json(result.combined.probability)}};
  write_json_file(out / "bounds.json", j);

  std::string csv = "kind,empirical,kl,lambda,epsilon,N,bound,vacuous\n";
  csv += bound_report_csv_row(result.time, "time");
  csv += bound_report_csv_row(result.rate, "rate");
  csv += bound_report_csv_row(result.prob_convergence, "probability:tau_lt_tmax");
  csv += bound_report_csv_row(result.prob_rate, "probability:rate_le_target");
  csv += bound_report_csv_row(result.combined.time, "combined:time");
  csv += bound_report_csv_row(result.combined.rate, "combined:rate");
  csv += bound_report_csv_row(result.combined.probability, "combined:probability");
  write_text_file(out / "bounds.csv", csv);
}

void write_compare_files(const ExperimentConfig& cfg, const CompareResult& result) {
  const fs::path out(cfg.out_dir);

  std::string summary = "problem,algorithm,tau,rate,rate_bounded,converged\n";
  const auto append_rows = [&](const std::vector<TrajectoryRecord>& records, const char* name) {
    for (std::size_t n = 0; n < records.size(); ++n)
      summary += std::to_string(n) + "," + name + "," + std::to_string(records[n].tau) + "," +
                 csv_double(records[n].rate) + "," + csv_double(records[n].rate_bounded) + "," +
                 (records[n].converged ? "true" : "false") + "\n";
  };
  append_rows(result.learned_records, "learned");
  append_rows(result.baseline_records, "baseline");
  write_text_file(out / "summary.csv", summary);

  std::string comparison =
      "t,learned_mean,learned_median,learned_q95,baseline_mean,baseline_median,baseline_q95\n";
  for (std::size_t t = 0; t < result.table.rows.size(); ++t) {
    comparison += std::to_string(t);
    for (double v : result.table.rows[t]) comparison += "," + csv_double(v);
    comparison += "\n";
  }
  write_text_file(out / "comparison.csv", comparison);

  char name[64];
  for (std::size_t n = 0; n < result.learned_records.size(); ++n) {
    std::snprintf(name, sizeof(name), "trajectories/learned_%04zu.csv", n);
    std::ostringstream stream;
    write_trajectory_csv(stream, result.learned_records[n]);
    write_text_file(out / name, stream.str());
    std::snprintf(name, sizeof(name), "trajectories/baseline_%04zu.csv", n);
    std::ostringstream stream_b;
    write_trajectory_csv(stream_b, result.baseline_records[n]);
    write_text_file(out / name, stream_b.str());
  }
}

void write_validation_files(const ExperimentConfig& cfg, const ValidityReport& report) {
  const fs::path out(cfg.out_dir);
  json j = {{"schema_version", 1},
            {"trials", report.trials},
            {"population_size", report.population_size},
            {"dataset_size", report.dataset_size},
            {"epsilon", cfg.bounds.epsilon},
            {"population", {{"time", report.population_time},
                            {"rate", report.population_rate},
                            {"probability", report.population_prob}}},
            {"violations", {{"time", report.violations_time},
                            {"rate", report.violations_rate},
                            {"probability", report.violations_prob},
                            {"combined", report.violations_combined}}},
            {"frequencies", {{"time", report.freq_time},
                             {"rate", report.freq_rate},
                             {"probability", report.freq_prob},
                             {"combined", report.freq_combined}}}};
  write_json_file(out / "validation.json", j);

  std::string csv = "kind,violations,trials,frequency\n";
  const auto row = [&](const char* kind, int violations, double freq) {
    csv += std::string(kind) + "," + std::to_string(violations) + "," +
           std::to_string(report.trials) + "," + csv_double(freq) + "\n";
  };
  row("time", report.violations_time, report.freq_time);
  row("rate", report.violations_rate, report.freq_rate);
  row("probability", report.violations_prob, report.freq_prob);
  row("combined", report.violations_combined, report.freq_combined);
  write_text_file(out / "validation.csv", csv);
}

// ---- Subcommand entry points ------------------------------------------------

int run_train(const ExperimentConfig& cfg) {
  const auto sampler = make_problem_sampler(cfg);
  const Dataset dataset = sample_dataset(cfg, *sampler);
  write_problems_file(cfg, dataset);
  const PipelineState state = stage_train(cfg, dataset);
  write_pipeline_files(cfg, state);
  return 0;
}

int run_certify(const ExperimentConfig& cfg) {
  const auto sampler = make_problem_sampler(cfg);
  const Dataset dataset = sample_dataset(cfg, *sampler);
  const PipelineState state = load_pipeline_state(cfg);
  const CertificationResult result = stage_certify(cfg, dataset, state);
  write_certification_files(cfg, result);
  return 0;
}

int run_validate(const ExperimentConfig& cfg, std::ostream& out) {
  const PipelineState state = load_pipeline_state(cfg);
  const ValidityReport report = stage_validate(cfg, state);
  write_validation_files(cfg, report);
  out << "validity check: " << report.trials << " trials, population " << report.population_size
      << "\n";
  out << "  time        violations " << report.violations_time << " freq " << report.freq_time
      << "\n";
  out << "  rate        violations " << report.violations_rate << " freq " << report.freq_rate
      << "\n";
  out << "  probability violations " << report.violations_prob << " freq " << report.freq_prob
      << "\n";
  out << "  combined    violations " << report.violations_combined << " freq "
      << report.freq_combined << "\n";
  return 0;
}

int run_compare(const ExperimentConfig& cfg) {
  const auto sampler = make_problem_sampler(cfg);
  const Dataset dataset = sample_dataset(cfg, *sampler);
  const PipelineState state = load_pipeline_state(cfg);
  const CompareResult result = stage_compare(cfg, dataset, state);
  write_compare_files(cfg, result);
  return 0;
}

int run_demo(const ExperimentConfig& cfg, std::ostream& out) {
  const auto sampler = make_problem_sampler(cfg);
  const Dataset dataset = sample_dataset(cfg, *sampler);
  write_problems_file(cfg, dataset);

  const PipelineState state = stage_train(cfg, dataset);
  write_pipeline_files(cfg, state);

  const CertificationResult certified = stage_certify(cfg, dataset, state);
  write_certification_files(cfg, certified);

  const CompareResult compared = stage_compare(cfg, dataset, state);
  write_compare_files(cfg, compared);

  out << "demo complete; artifacts in " << cfg.out_dir << "\n";
  out << "  time bound  " << certified.time.bound << (certified.time.vacuous ? " (vacuous)" : "")
      << "\n";
  out << "  rate bound  " << certified.rate.bound << (certified.rate.vacuous ? " (vacuous)" : "")
      << "\n";
  out << "  P(tau < t_max) bound  " << certified.prob_convergence.bound
      << (certified.prob_convergence.vacuous ? " (vacuous)" : "") << "\n";
  return 0;
}

int run_kernel_verification(std::ostream& out) {
  RandomnessStream rng(20240901, 1);
  const auto random_kernel = [&](int n) {
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (int j = 0; j < n; ++j) {
        m(i, j) = rng.uniform() + 1e-3;
        row_sum += m(i, j);
      }
      m.row(i) /= row_sum;
    }
    return FiniteKernel{std::move(m)};
  };
  const auto random_measure = [&](int n) {
    Eigen::VectorXd w(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      w(i) = rng.uniform() + 1e-3;
      total += w(i);
    }
    return FiniteMeasure{w / total};
  };

  int failures = 0;
  const auto check = [&](const char* name, double deviation, double tol) {
    const bool ok = deviation < tol;
    out << (ok ? "[ok]   " : "[FAIL] ") << name << "  deviation " << deviation << "\n";
    if (!ok) ++failures;
  };

  // Chapman-Kolmogorov on random 4x4 kernels.
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const FiniteKernel gamma = random_kernel(4);
    for (int s = 0; s <= 6; ++s)
      for (int t = 0; t <= 6; ++t) {
        const Eigen::MatrixXd lhs = semigroup_power(gamma, s + t).probs;
        const Eigen::MatrixXd rhs =
            kernel_compose(semigroup_power(gamma, s), semigroup_power(gamma, t)).probs;
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
      }
  }
  check("chapman-kolmogorov gamma^{s+t} = gamma^s gamma^t", worst, 1e-12);

  // Product/composition marginal consistency.
  worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    const FiniteKernel mu = random_kernel(3);
    const FiniteKernel nu = random_kernel(3);
    const FiniteKernel product = kernel_product(mu, nu);
    const FiniteKernel composed = kernel_compose(mu, nu);
    for (int x = 0; x < 3; ++x)
      for (int z = 0; z < 3; ++z) {
        double marginal = 0.0;
        for (int y = 0; y < 3; ++y) marginal += product.probs(x, y * 3 + z);
        worst = std::max(worst, std::abs(marginal - composed.probs(x, z)));
      }
  }
  check("product marginal equals composition", worst, 1e-12);

  // Factorization of the joint path law.
  worst = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<FiniteKernel> gammas{random_kernel(2), random_kernel(3), random_kernel(2)};
    std::vector<FiniteMeasure> inits{random_measure(2), random_measure(3), random_measure(2)};
    worst = std::max(worst, joint_factorization_check(gammas, inits, 4));
  }
  check("joint path law factorizes across chains", worst, 1e-12);

  // Bernoulli-Laplace identity for a path event.
  worst = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    const FiniteKernel gamma = random_kernel(2);
    const FiniteMeasure init = random_measure(2);
    const PathPredicate event = [](std::span<const int> path) { return path.back() == 1; };
    const auto [lhs, rhs] = bernoulli_laplace_check(gamma, init, 3, event, 0.5 + rep, 3);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  check("bernoulli laplace transform identity", worst, 1e-12);

  // Hitting-time law mass balance.
  worst = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    const FiniteKernel gamma = random_kernel(3);
    const FiniteMeasure init = random_measure(3);
    const std::vector<int> target{0};
    const Eigen::VectorXd law = hitting_time_law(init, gamma, target, 6);
    worst = std::max(worst, std::abs(law.sum() - 1.0));
  }
  check("hitting-time law total mass", worst, 1e-12);

  out << (failures == 0 ? "kernel verification passed\n" : "kernel verification FAILED\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace l2o
