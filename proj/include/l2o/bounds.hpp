#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "l2o/trajectory.hpp"
#include "l2o/training.hpp"

namespace l2o {

// PAC-Bayes certification: Hoeffding-style bounds for the expected stopping
// time and expected bounded rate, the Catoni-style Phi bound for trajectory
// event probabilities, their epsilon/3 union-bound combination, and a
// Monte-Carlo check that the certified confidence levels hold.

// KL(rho || prior) over a shared support: sum rho_i log(rho_i / prior_i),
// with 0 log 0 = 0 and +infinity when rho charges a prior-null point.
double kl_discrete(const Eigen::VectorXd& rho, const Eigen::VectorXd& prior);

struct BoundQuery {
  double lambda = 1.0;
  double epsilon = 0.05;
  int dataset_size = 1;   // N
  double f_max = 1.0;     // uniform bound of the certified function
  double kl = 0.0;        // KL(rho || prior)
  double empirical = 0.0; // rho-averaged empirical mean
  void validate() const;
};

enum class BoundKind { kTime, kRate, kProbability };

struct BoundReport {
  BoundKind kind = BoundKind::kTime;
  double bound = 0.0;
  bool vacuous = false;  // rate bound above r_max, probability bound clamped at 1
  BoundQuery query;
  std::string event;  // event label for probability bounds
};

// bound = empirical + (kl + lambda^2 f_max^2 / (2N) - log epsilon) / lambda.
BoundReport hoeffding_bound(const BoundQuery& query, BoundKind kind);

// The slack-minimizing default lambda = sqrt(8 N log(1/epsilon)) / f_max;
// an artifact constant fixed before certification data is seen.
double default_lambda(int dataset_size, double epsilon, double f_max);

// Empirical term = rho-average over support points of the per-problem mean
// stopping time; f_max = t_max. Every support point must carry the same
// number of records (one per certification problem).
BoundReport time_bound(std::span<const std::vector<TrajectoryRecord>> records_per_support,
                       const Eigen::VectorXd& rho, const Eigen::VectorXd& prior, double lambda,
                       double epsilon, int t_max);

// Same with bounded-rate samples and f_max = r_max; flags vacuousness when
// the bound exceeds r_max.
BoundReport rate_bound(std::span<const std::vector<TrajectoryRecord>> records_per_support,
                       const Eigen::VectorXd& rho, const Eigen::VectorXd& prior, double lambda,
                       double epsilon, double r_max);

// Phi_a(p) = -(1/a) log(1 - (1 - e^{-a}) p), an increasing bijection of
// [0, 1] onto itself, and its inverse (1 - e^{-a q}) / (1 - e^{-a}).
// Requires a != 0; p outside [0, 1] is a domain error. phi_inv accepts
// arguments above 1 (the bound formula can produce them).
double phi(double a, double p);
double phi_inv(double a, double q);

// bound = Phi^{-1}_{lambda/N}(empirical frequency + (kl + log(1/epsilon)) / lambda),
// clamped to 1 with the vacuous flag when the argument reaches 1.
BoundReport probability_bound(std::span<const std::vector<TrajectoryRecord>> records_per_support,
                              const TrajectoryPredicate& event, const Eigen::VectorXd& rho,
                              const Eigen::VectorXd& prior, double lambda, double epsilon,
                              const std::string& event_name);

// All three bounds evaluated at epsilon/3 so they hold jointly with
// confidence 1 - epsilon (union bound).
struct CombinedCertificate {
  BoundReport time;
  BoundReport rate;
  BoundReport probability;
  double joint_epsilon = 0.0;
};

CombinedCertificate combined_certificate(
    std::span<const std::vector<TrajectoryRecord>> records_per_support,
    const Eigen::VectorXd& rho, const Eigen::VectorXd& prior, double lambda_time,
    double lambda_rate, double lambda_prob, double epsilon, int t_max, double r_max,
    const TrajectoryPredicate& event, const std::string& event_name);

// Fixed certification pipeline handed to the Monte-Carlo validity check:
// a problem sampler for P_P, a rollout per support point, and the frozen
// prior / posterior pair with the bound parameters.
struct ValidityModel {
  std::function<std::unique_ptr<Problem>(RandomnessStream&)> sample_problem;
  std::function<TrajectoryRecord(const Problem&, int support_index, RandomnessStream)> run;
  int support_size = 0;
  Eigen::VectorXd prior_weights;
  Eigen::VectorXd posterior_weights;
  double lambda_time = 1.0, lambda_rate = 1.0, lambda_prob = 1.0;
  double epsilon = 0.05;
  int t_max = 1;
  double r_max = 1.0;
  TrajectoryPredicate event;
  std::string event_name;
};

struct ValidityReport {
  int trials = 0;
  int population_size = 0;
  int dataset_size = 0;
  // Population quantities (estimated on fresh problems) per bound kind.
  double population_time = 0.0, population_rate = 0.0, population_prob = 0.0;
  int violations_time = 0, violations_rate = 0, violations_prob = 0, violations_combined = 0;
  double freq_time = 0.0, freq_rate = 0.0, freq_prob = 0.0, freq_combined = 0.0;
};

// Draws `trials` independent certification datasets of size dataset_size,
// certifies each with the fixed pipeline, and counts how often a bound falls
// below the population value estimated once on population_size fresh
// problems. The observed violation frequencies must respect epsilon up to
// binomial noise when the bound machinery is correct.
ValidityReport monte_carlo_validity(const ValidityModel& model, int trials, int population_size,
                                    int dataset_size, std::uint64_t seed, int threads);

}  // namespace l2o
