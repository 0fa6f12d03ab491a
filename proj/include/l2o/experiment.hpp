#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "l2o/bounds.hpp"
#include "l2o/nets.hpp"
#include "l2o/problems.hpp"
#include "l2o/serialize.hpp"
#include "l2o/training.hpp"

namespace l2o {

// End-to-end experiment orchestration: config file -> dataset -> training ->
// prior -> posterior -> certification -> validation -> baseline comparison,
// with full seed control and plot-ready outputs.

struct SplitSizes {
  int train = 50;
  int prior = 50;
  int certify = 50;
  int test = 100;
  int total() const { return train + prior + certify + test; }
  void validate() const;
};

struct BoundConfig {
  double epsilon = 0.05;
  double r_max = 1.0;
  int t_max = 500;
  // 0 resolves to default_lambda(N_certify, epsilon, f_max of the bound).
  double lambda_time = 0.0;
  double lambda_rate = 0.0;
  double lambda_prob = 0.0;
  // Gibbs step temperature; 0 resolves to default_lambda(N_prior, epsilon, 1).
  double lambda_gibbs = 0.0;
  // Event threshold for the "converged with rate <= target" property.
  double rate_event_threshold = 0.9;
  void validate() const;
};

struct ValidationConfig {
  int trials = 400;
  int population = 2000;
  void validate() const;
};

struct ExperimentConfig {
  std::string family = "quadratic";         // "quadratic" | "lasso"
  std::string architecture = "quad-descent";  // "quad-descent" | "lasso-prox"
  std::uint64_t master_seed = 0;
  bool seed_set = false;
  std::string out_dir = "out";
  QuadraticDistributionConfig quad;
  LassoDistributionConfig lasso;
  SplitSizes splits;
  TrainConfig train;
  BoundConfig bounds;
  ValidationConfig validation;
  int threads = 0;  // 0 = hardware concurrency

  bool is_quadratic() const { return family == "quadratic"; }
  ArchitectureId architecture_id() const;
  void validate() const;
};

// Strict parser: unknown keys anywhere in the document are errors.
ExperimentConfig parse_experiment_config(const json& j);
ExperimentConfig load_experiment_config(const std::string& path);

// Draws fresh problem instances from the configured distribution P_P. For
// LASSO the design matrix is shared state fixed at construction.
class ProblemSampler {
 public:
  virtual ~ProblemSampler() = default;
  virtual std::unique_ptr<Problem> sample(RandomnessStream& rng) const = 0;
};

std::unique_ptr<ProblemSampler> make_problem_sampler(const ExperimentConfig& cfg);

// The experiment dataset: consecutive, structurally disjoint index blocks
// for the train / prior / certify / test splits.
struct Dataset {
  std::vector<std::unique_ptr<Problem>> problems;
  int train_begin = 0, train_end = 0;
  int prior_begin = 0, prior_end = 0;
  int certify_begin = 0, certify_end = 0;
  int test_begin = 0, test_end = 0;

  std::vector<const Problem*> split(int begin, int end) const;
  std::vector<const Problem*> train_split() const { return split(train_begin, train_end); }
  std::vector<const Problem*> prior_split() const { return split(prior_begin, prior_end); }
  std::vector<const Problem*> certify_split() const { return split(certify_begin, certify_end); }
  std::vector<const Problem*> test_split() const { return split(test_begin, test_end); }
  // Throws when any two split ranges overlap.
  void assert_disjoint() const;
};

Dataset sample_dataset(const ExperimentConfig& cfg, const ProblemSampler& sampler);

json problems_to_json(const ExperimentConfig& cfg, const Dataset& dataset);
// Reconstructs instances bit-exactly from problems.json content.
std::vector<std::unique_ptr<Problem>> problems_from_json(const json& j);

// Trained pipeline: the data-dependent part fixed before certification.
struct PipelineState {
  Eigen::VectorXd alpha0;
  std::vector<TrainHistoryEntry> history;
  int divergence_events = 0;
  DiscreteDistribution prior;
  DiscreteDistribution posterior;
  int alpha_star_index = 0;
};

// Per-support rollouts over a problem list; records[i][n] is support point i
// on problem n. Deterministic in (seed, phase) regardless of thread count.
std::vector<std::vector<TrajectoryRecord>> rollout_support(
    const ExperimentConfig& cfg, const LearnedArchitecture& arch,
    const std::vector<Eigen::VectorXd>& support, const std::vector<const Problem*>& problems,
    std::uint64_t phase);

// Training on the train split, prior around alpha_0, Gibbs posterior from
// prior-split scores. Never touches the certify or test split.
PipelineState stage_train(const ExperimentConfig& cfg, const Dataset& dataset);

struct CertificationResult {
  BoundReport time;
  BoundReport rate;
  BoundReport prob_convergence;  // event tau < t_max
  BoundReport prob_rate;         // event rate <= rate_event_threshold
  CombinedCertificate combined;  // at epsilon/3 with the convergence event
};

CertificationResult stage_certify(const ExperimentConfig& cfg, const Dataset& dataset,
                                  const PipelineState& state);

// Per-iteration loss quantiles of two algorithms on a common problem list;
// losses past the stopping time carry the final recorded value forward.
struct ComparisonTable {
  int t_max = 0;
  // rows[t] = {a_mean, a_median, a_q95, b_mean, b_median, b_q95}
  std::vector<std::array<double, 6>> rows;
};

struct CompareResult {
  ComparisonTable table;
  std::vector<TrajectoryRecord> learned_records;
  std::vector<TrajectoryRecord> baseline_records;
};

CompareResult stage_compare(const ExperimentConfig& cfg, const Dataset& dataset,
                            const PipelineState& state);

ValidityReport stage_validate(const ExperimentConfig& cfg, const PipelineState& state);

// Baseline update rule and its hyperparameters for the configured family
// (heavy-ball with worst-case-optimal coefficients for quadratics, FISTA for
// LASSO).
std::pair<std::unique_ptr<UpdateRule>, Eigen::VectorXd> make_baseline(const ExperimentConfig& cfg);

// Linear-interpolation quantile of an unsorted sample (q in [0, 1]).
double sample_quantile(std::vector<double> values, double q);

// ---- Artifact files ---------------------------------------------------------
// All stages write under cfg.out_dir with fixed names: problems.json,
// training_history.csv, alpha0.json, prior.json, posterior.json, bounds.json,
// bounds.csv, summary.csv, comparison.csv, validation.json, validation.csv,
// trajectories/{learned,baseline}_NNNN.csv.

void write_problems_file(const ExperimentConfig& cfg, const Dataset& dataset);
void write_pipeline_files(const ExperimentConfig& cfg, const PipelineState& state);
void write_certification_files(const ExperimentConfig& cfg, const CertificationResult& result);
void write_compare_files(const ExperimentConfig& cfg, const CompareResult& result);
void write_validation_files(const ExperimentConfig& cfg, const ValidityReport& report);

PipelineState load_pipeline_state(const ExperimentConfig& cfg);

json hyperparameters_to_json(const ExperimentConfig& cfg, const Eigen::VectorXd& alpha);
Eigen::VectorXd hyperparameters_from_json(const ExperimentConfig& cfg, const json& j);

// ---- Subcommand entry points ------------------------------------------------
int run_train(const ExperimentConfig& cfg);
int run_certify(const ExperimentConfig& cfg);
int run_validate(const ExperimentConfig& cfg, std::ostream& out);
int run_compare(const ExperimentConfig& cfg);
int run_demo(const ExperimentConfig& cfg, std::ostream& out);

// Seeded battery of exact finite-kernel checks; prints one line per check
// and returns 0 when every check passes at 1e-12.
int run_kernel_verification(std::ostream& out);

}  // namespace l2o
