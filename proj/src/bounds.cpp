#include "l2o/bounds.hpp"

#include <cmath>
#include <limits>

#include "l2o/parallel.hpp"

namespace l2o {

double kl_discrete(const Eigen::VectorXd& rho, const Eigen::VectorXd& prior) {
  if (rho.size() != prior.size() || rho.size() == 0)
    throw std::invalid_argument("kl_discrete: supports do not match");
  double kl = 0.0;
  for (int i = 0; i < rho.size(); ++i) {
    if (!(rho(i) >= 0.0) || !(prior(i) >= 0.0))
      throw std::invalid_argument("kl_discrete: negative weight");
    if (rho(i) == 0.0) continue;
    if (prior(i) == 0.0) return std::numeric_limits<double>::infinity();
    kl += rho(i) * std::log(rho(i) / prior(i));
  }
  return kl;
}

void BoundQuery::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("bound query: lambda must be positive");
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("bound query: epsilon must be in (0, 1]");
  if (dataset_size < 1) throw std::invalid_argument("bound query: N must be >= 1");
  if (!(f_max > 0.0)) throw std::invalid_argument("bound query: f_max must be positive");
  if (!(kl >= 0.0)) throw std::invalid_argument("bound query: KL must be nonnegative");
  if (!std::isfinite(empirical)) throw std::invalid_argument("bound query: empirical term not finite");
}

BoundReport hoeffding_bound(const BoundQuery& query, BoundKind kind) {
  query.validate();
  const double n = static_cast<double>(query.dataset_size);
  const double slack =
      (query.kl + query.lambda * query.lambda * query.f_max * query.f_max / (2.0 * n) -
       std::log(query.epsilon)) /
      query.lambda;
  BoundReport report;
  report.kind = kind;
  report.query = query;
  report.bound = query.empirical + slack;
  return report;
}

double default_lambda(int dataset_size, double epsilon, double f_max) {
  if (dataset_size < 1 || !(epsilon > 0.0 && epsilon < 1.0) || !(f_max > 0.0))
    throw std::invalid_argument("default_lambda: invalid inputs");
  return std::sqrt(8.0 * static_cast<double>(dataset_size) * std::log(1.0 / epsilon)) / f_max;
}

namespace {

// rho-average of per-support means of a record statistic.
double posterior_empirical_mean(std::span<const std::vector<TrajectoryRecord>> records,
                                const Eigen::VectorXd& rho,
                                const std::function<double(const TrajectoryRecord&)>& stat) {
  if (records.empty() || static_cast<int>(records.size()) != rho.size())
    throw std::invalid_argument("bound: one record list per support point required");
  const std::size_t n = records[0].size();
  if (n == 0) throw std::invalid_argument("bound: empty record list");
  double value = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].size() != n)
      throw std::invalid_argument("bound: record count mismatch across support points");
    double mean = 0.0;
    for (const TrajectoryRecord& r : records[i]) mean += stat(r);
    value += rho(static_cast<int>(i)) * (mean / static_cast<double>(n));
  }
  return value;
}

}  // namespace

BoundReport time_bound(std::span<const std::vector<TrajectoryRecord>> records_per_support,
                       const Eigen::VectorXd& rho, const Eigen::VectorXd& prior, double lambda,
                       double epsilon, int t_max) {
  BoundQuery query;
  query.lambda = lambda;
  query.epsilon = epsilon;
  query.dataset_size = static_cast<int>(records_per_support.empty() ? 0 : records_per_support[0].size());
  query.f_max = static_cast<double>(t_max);
  query.kl = kl_discrete(rho, prior);
  query.empirical = posterior_empirical_mean(
      records_per_support, rho, [](const TrajectoryRecord& r) { return static_cast<double>(r.tau); });
  return hoeffding_bound(query, BoundKind::kTime);
}

BoundReport rate_bound(std::span<const std::vector<TrajectoryRecord>> records_per_support,
                       const Eigen::VectorXd& rho, const Eigen::VectorXd& prior, double lambda,
                       double epsilon, double r_max) {
  BoundQuery query;
  query.lambda = lambda;
  query.epsilon = epsilon;
  query.dataset_size = static_cast<int>(records_per_support.empty() ? 0 : records_per_support[0].size());
  query.f_max = r_max;
  query.kl = kl_discrete(rho, prior);
  query.empirical = posterior_empirical_mean(
      records_per_support, rho, [](const TrajectoryRecord& r) { return r.rate_bounded; });
  BoundReport report = hoeffding_bound(query, BoundKind::kRate);
  report.vacuous = report.bound > r_max;
  return report;
}

double phi(double a, double p) {
  if (a == 0.0) throw std::invalid_argument("phi: a must be nonzero");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("phi: p must lie in [0, 1]");
  const double value = -std::log(1.0 - (1.0 - std::exp(-a)) * p) / a;
  // Guard endpoint rounding only; interior values stay untouched.
  if (value < 0.0 && value > -1e-12) return 0.0;
  if (value > 1.0 && value < 1.0 + 1e-12) return 1.0;
  return value;
}

double phi_inv(double a, double q) {
  if (a == 0.0) throw std::invalid_argument("phi_inv: a must be nonzero");
  if (!(q >= 0.0)) throw std::domain_error("phi_inv: q must be nonnegative");
  const double value = (1.0 - std::exp(-a * q)) / (1.0 - std::exp(-a));
  if (value < 0.0 && value > -1e-12) return 0.0;
  if (q <= 1.0 && value > 1.0 && value < 1.0 + 1e-12) return 1.0;
  return value;
}

BoundReport probability_bound(std::span<const std::vector<TrajectoryRecord>> records_per_support,
                              const TrajectoryPredicate& event, const Eigen::VectorXd& rho,
                              const Eigen::VectorXd& prior, double lambda, double epsilon,
                              const std::string& event_name) {
  if (!event) throw std::invalid_argument("probability_bound: no event registered");
  BoundQuery query;
  query.lambda = lambda;
  query.epsilon = epsilon;
  query.dataset_size = static_cast<int>(records_per_support.empty() ? 0 : records_per_support[0].size());
  query.f_max = 1.0;
  query.kl = kl_discrete(rho, prior);
  query.empirical = posterior_empirical_mean(
      records_per_support, rho,
      [&](const TrajectoryRecord& r) { return event(r) ? 1.0 : 0.0; });
  query.validate();

  const double argument =
      query.empirical + (query.kl + std::log(1.0 / epsilon)) / lambda;
  BoundReport report;
  report.kind = BoundKind::kProbability;
  report.query = query;
  report.event = event_name;
  if (argument >= 1.0) {
    report.bound = 1.0;
    report.vacuous = true;
  } else {
    report.bound = phi_inv(lambda / static_cast<double>(query.dataset_size), argument);
    if (report.bound >= 1.0) {
      report.bound = 1.0;
      report.vacuous = true;
    }
  }
  return report;
}

CombinedCertificate combined_certificate(
    std::span<const std::vector<TrajectoryRecord>> records_per_support,
    const Eigen::VectorXd& rho, const Eigen::VectorXd& prior, double lambda_time,
    double lambda_rate, double lambda_prob, double epsilon, int t_max, double r_max,
    const TrajectoryPredicate& event, const std::string& event_name) {
  const double sub_epsilon = epsilon / 3.0;
  CombinedCertificate cert;
  cert.joint_epsilon = epsilon;
  cert.time = time_bound(records_per_support, rho, prior, lambda_time, sub_epsilon, t_max);
  cert.rate = rate_bound(records_per_support, rho, prior, lambda_rate, sub_epsilon, r_max);
  cert.probability = probability_bound(records_per_support, event, rho, prior, lambda_prob,
                                       sub_epsilon, event_name);
  return cert;
}

ValidityReport monte_carlo_validity(const ValidityModel& model, int trials, int population_size,
                                    int dataset_size, std::uint64_t seed, int threads) {
  if (trials < 100) throw std::invalid_argument("monte_carlo_validity: need at least 100 trials");
  if (population_size < 1 || dataset_size < 1)
    throw std::invalid_argument("monte_carlo_validity: sizes must be positive");
  if (model.support_size < 1 || !model.sample_problem || !model.run || !model.event)
    throw std::invalid_argument("monte_carlo_validity: incomplete model");

  const int support = model.support_size;

  // Population quantities: per-support means over fresh problems, then the
  // fixed posterior average. Shared problems across support points keep the
  // estimate cheap without biasing it.
  std::vector<double> pop_tau(static_cast<std::size_t>(support) * population_size);
  std::vector<double> pop_rb(pop_tau.size());
  std::vector<double> pop_ev(pop_tau.size());
  parallel_for(static_cast<std::size_t>(population_size), threads, [&](std::size_t m) {
    RandomnessStream problem_rng(seed, RandomnessStream::derive(seed, {kTagValidation, 0, m}));
    const std::unique_ptr<Problem> problem = model.sample_problem(problem_rng);
    for (int i = 0; i < support; ++i) {
      RandomnessStream rollout_rng(
          seed, RandomnessStream::derive(seed, {kTagValidation, 1, m, static_cast<std::uint64_t>(i)}));
      const TrajectoryRecord record = model.run(*problem, i, rollout_rng);
      const std::size_t slot = static_cast<std::size_t>(i) * population_size + m;
      pop_tau[slot] = static_cast<double>(record.tau);
      pop_rb[slot] = record.rate_bounded;
      pop_ev[slot] = model.event(record) ? 1.0 : 0.0;
    }
  });

  ValidityReport report;
  report.trials = trials;
  report.population_size = population_size;
  report.dataset_size = dataset_size;
  for (int i = 0; i < support; ++i) {
    double mean_tau = 0.0, mean_rb = 0.0, mean_ev = 0.0;
    for (int m = 0; m < population_size; ++m) {
      const std::size_t slot = static_cast<std::size_t>(i) * population_size + static_cast<std::size_t>(m);
      mean_tau += pop_tau[slot];
      mean_rb += pop_rb[slot];
      mean_ev += pop_ev[slot];
    }
    const double inv = 1.0 / static_cast<double>(population_size);
    report.population_time += model.posterior_weights(i) * mean_tau * inv;
    report.population_rate += model.posterior_weights(i) * mean_rb * inv;
    report.population_prob += model.posterior_weights(i) * mean_ev * inv;
  }

  std::vector<std::uint8_t> viol_time(static_cast<std::size_t>(trials), 0);
  std::vector<std::uint8_t> viol_rate(viol_time.size(), 0);
  std::vector<std::uint8_t> viol_prob(viol_time.size(), 0);
  std::vector<std::uint8_t> viol_comb(viol_time.size(), 0);

  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t trial) {
    std::vector<std::vector<TrajectoryRecord>> records(
        static_cast<std::size_t>(support));
    for (auto& r : records) r.reserve(static_cast<std::size_t>(dataset_size));
    for (int n = 0; n < dataset_size; ++n) {
      RandomnessStream problem_rng(
          seed, RandomnessStream::derive(seed, {kTagValidation, 2, trial, static_cast<std::uint64_t>(n)}));
      const std::unique_ptr<Problem> problem = model.sample_problem(problem_rng);
      for (int i = 0; i < support; ++i) {
        RandomnessStream rollout_rng(
            seed, RandomnessStream::derive(
                      seed, {kTagValidation, 3, trial, static_cast<std::uint64_t>(n),
                             static_cast<std::uint64_t>(i)}));
        records[static_cast<std::size_t>(i)].push_back(model.run(*problem, i, rollout_rng));
      }
    }

    const BoundReport time = time_bound(records, model.posterior_weights, model.prior_weights,
                                        model.lambda_time, model.epsilon, model.t_max);
    const BoundReport rate = rate_bound(records, model.posterior_weights, model.prior_weights,
                                        model.lambda_rate, model.epsilon, model.r_max);
    const BoundReport prob =
        probability_bound(records, model.event, model.posterior_weights, model.prior_weights,
                          model.lambda_prob, model.epsilon, model.event_name);
    const CombinedCertificate combined = combined_certificate(
        records, model.posterior_weights, model.prior_weights, model.lambda_time,
        model.lambda_rate, model.lambda_prob, model.epsilon, model.t_max, model.r_max,
        model.event, model.event_name);

    viol_time[trial] = report.population_time > time.bound ? 1 : 0;
    viol_rate[trial] = report.population_rate > rate.bound ? 1 : 0;
    viol_prob[trial] = report.population_prob > prob.bound ? 1 : 0;
    viol_comb[trial] = (report.population_time > combined.time.bound ||
                        report.population_rate > combined.rate.bound ||
                        report.population_prob > combined.probability.bound)
                           ? 1
                           : 0;
  });

  for (int t = 0; t < trials; ++t) {
    report.violations_time += viol_time[static_cast<std::size_t>(t)];
    report.violations_rate += viol_rate[static_cast<std::size_t>(t)];
    report.violations_prob += viol_prob[static_cast<std::size_t>(t)];
    report.violations_combined += viol_comb[static_cast<std::size_t>(t)];
  }
  const double inv_trials = 1.0 / static_cast<double>(trials);
  report.freq_time = report.violations_time * inv_trials;
  report.freq_rate = report.violations_rate * inv_trials;
  report.freq_prob = report.violations_prob * inv_trials;
  report.freq_combined = report.violations_combined * inv_trials;
  return report;
}

}  // namespace l2o
