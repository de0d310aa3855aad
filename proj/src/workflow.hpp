#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "estimation.hpp"
#include "expfam.hpp"
#include "stats.hpp"

namespace csim {

enum class SchemeKind { discard, augment, subsample, custom };

std::string scheme_label(SchemeKind kind);

// Cross-generation weighting rule omega_{G,g,i}. Rules only ever see indices
// and an RNG stream, so weights are independent of the data values by
// construction.
struct WeightScheme {
  SchemeKind kind = SchemeKind::augment;
  // custom rule: (G, g, i, rng) -> nonnegative weight
  std::function<double(int, int, int, rng::Stream&)> custom_rule;

  static WeightScheme discard() { return {SchemeKind::discard, nullptr}; }
  static WeightScheme augment() { return {SchemeKind::augment, nullptr}; }
  static WeightScheme subsample() { return {SchemeKind::subsample, nullptr}; }
  static WeightScheme custom(std::function<double(int, int, int, rng::Stream&)> rule) {
    return {SchemeKind::custom, std::move(rule)};
  }
};

// Weight vector of length n*G in block order (g=1..G, i=1..n) for the fit at
// generation G. subsample draws exactly n ones by a Fisher-Yates partial
// shuffle of the index set.
std::vector<double> weights_for_generation(const WeightScheme& scheme, int G,
                                           int n, rng::Stream& rs);

enum class EstimatorKind { mle, linear_closed_form, median };

struct WorkflowConfig {
  ExpFamilyModel model = ExpFamilyModel::gaussian_known_var();
  FeatureMap fmap = FeatureMap::glm(1);
  FeatureDistribution features = FeatureDistribution::standard_normal(1);
  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(1);
  int n = 100;
  int generations = 1;
  EstimatorKind estimator = EstimatorKind::mle;
  WeightScheme scheme = WeightScheme::augment();
  std::uint64_t seed = 1;
  bool separation_fallback = false;
  bool keep_corpus = false;

  void validate() const;  // throws ConfigError
};

struct GenerationRecord {
  Eigen::VectorXd theta_hat;
  bool degenerate = false;
  bool converged = true;
  int iterations = 0;
  double grad_norm = 0.0;
  // residual variance estimate; NaN for non-linear estimators
  double sigma2_hat = std::numeric_limits<double>::quiet_NaN();
  std::int64_t corpus_size = 0;
};

struct TrajectoryRecord {
  std::vector<GenerationRecord> generations;
  Corpus corpus;  // retained only when WorkflowConfig::keep_corpus is set
};

// One pass of the iterative model-training loop: generation 1 is real data
// drawn at theta0; at each G the estimator is fit on the weighted accumulated
// corpus and generation G+1 responses are sampled at theta_hat_G with fresh
// features. Estimator failures (variance collapse, separation, singular
// design) set an absorbing degenerate flag instead of aborting.
TrajectoryRecord run_workflow(const WorkflowConfig& cfg,
                              std::uint64_t replication = 0);

struct EnsembleResult {
  int n = 0;
  int generations = 0;
  int replications = 0;
  int dim_theta = 0;
  SchemeKind scheme = SchemeKind::augment;
  Eigen::VectorXd theta0;

  std::vector<TrajectoryRecord> trajectories;

  // Per-generation summaries over replications that are non-degenerate at
  // that generation.
  std::vector<int> effective_replications;
  Eigen::VectorXd trace_mse;
  RatioCurve mse_ratio;
  std::vector<Eigen::MatrixXd> theta_cov;
  Eigen::VectorXd fraction_degenerate;
  Eigen::VectorXd median_sigma2;  // NaN unless the linear estimator ran
};

// Independent replications with streams derived from (seed, replication
// index); aggregation is a deterministic reduction in replication order, so
// the result is a pure function of (cfg, replications) for any
// parallel_width.
EnsembleResult run_ensemble(const WorkflowConfig& cfg, int replications,
                            int parallel_width = 0);

}  // namespace csim
