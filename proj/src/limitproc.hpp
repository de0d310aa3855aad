#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "expfam.hpp"
#include "stats.hpp"
#include "workflow.hpp"

namespace csim {

// Specification of the limiting sequential Gaussian experiment for a
// weighting scheme: score_cov is the curvature matrix E[X' grad2A(X theta0) X]
// (the covariance of the per-generation score sum) and estimator_cov the
// sandwich covariance of the estimator. Custom schemes supply their
// reference covariance blocks directly; blocks are only ever requested for
// generations b <= a since later score sums are independent of earlier
// estimators under the reference law.
struct LimitProcessSpec {
  int dim = 1;
  Eigen::MatrixXd score_cov;      // d x d, symmetric PD
  Eigen::MatrixXd estimator_cov;  // d x d, symmetric PD
  SchemeKind scheme = SchemeKind::augment;

  struct ReferenceBlocks {
    // Cov(W_est(a), W_est(b)) for b <= a
    std::function<Eigen::MatrixXd(int, int)> estimator_estimator;
    // Cov(W_est(a), W_score(b)) for b <= a
    std::function<Eigen::MatrixXd(int, int)> estimator_score;
  };
  std::optional<ReferenceBlocks> custom_blocks;

  static LimitProcessSpec scalar(double score_var, double estimator_var,
                                 SchemeKind scheme);

  void validate() const;
};

// Curvature matrix E_H[X' grad2A(X theta0) X]; exact for fixed designs and
// for constant-curvature families under standard-normal features, Monte
// Carlo otherwise. Throws SingularError when the result is numerically
// singular.
Eigen::MatrixXd compute_score_cov(const ExpFamilyModel& model,
                                  const FeatureMap& fmap,
                                  const Eigen::VectorXd& theta0,
                                  const FeatureDistribution& h,
                                  std::int64_t mc_samples, rng::Stream& rs);

// Full reference covariance of (W_score(1), W_est(1), ..., W_score(G),
// W_est(G)) in that interleaved order; side 2*G*dim. Capped at G <= 200
// (beyond that only the recursive conditioning path runs). Throws
// NotPSDError when the assembly is indefinite beyond jitter.
Eigen::MatrixXd reference_covariance(const LimitProcessSpec& spec, int G);

constexpr int kMaxFullAssemblyGenerations = 200;
constexpr double kConditioningJitter = 1e-10;

struct ConditionalGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Gaussian conditioning of the unobserved coordinates (complement of
// observed_idx) on observed values. The observed block is factored with
// symmetric pivoting plus jitter; SingularConditionError if it cannot be
// solved.
ConditionalGaussian conditional_gaussian(const Eigen::MatrixXd& joint,
                                         const Eigen::VectorXd& mean,
                                         const std::vector<int>& observed_idx,
                                         const Eigen::VectorXd& observed_values);

// Precomputed conditioning plan: for each generation g, the linear gains of
// the conditional mean of W_est(g) given the realized history
// (W_score(1), W_est(1), ..., W_score(g)) plus the PSD square root of the
// conditional covariance. Two construction paths are provided and must
// agree: full-matrix conditioning on the assembled reference covariance, and
// a rank-2d incremental Cholesky update per generation.
class LimitPlan {
 public:
  static LimitPlan full_conditioning(const LimitProcessSpec& spec, int G);
  static LimitPlan recursive(const LimitProcessSpec& spec, int G);

  int generations() const { return generations_; }
  int dim() const { return dim_; }
  const Eigen::MatrixXd& gains(int g) const;       // d x (2g-1)d, g is 1-based
  const Eigen::MatrixXd& cond_cov(int g) const;    // d x d
  const Eigen::MatrixXd& cond_sqrt(int g) const;   // d x d, PSD square root
  const Eigen::MatrixXd& score_sqrt() const { return score_sqrt_; }
  const Eigen::MatrixXd& score_cov() const { return score_cov_; }

 private:
  LimitPlan() = default;
  void finalize(const LimitProcessSpec& spec);

  int generations_ = 0;
  int dim_ = 0;
  std::vector<Eigen::MatrixXd> gains_;
  std::vector<Eigen::MatrixXd> cond_cov_;
  std::vector<Eigen::MatrixXd> cond_sqrt_;
  Eigen::MatrixXd score_cov_;
  Eigen::MatrixXd score_sqrt_;
};

struct LimitTrajectory {
  Eigen::MatrixXd score_path;      // G x d, W_score(g)
  Eigen::MatrixXd estimator_path;  // G x d, W_est(g)
};

// Sequential simulation per the limit law: at each g a fresh reference score
// draw acquires the mean shift score_cov * W_est(g-1), and W_est(g) is drawn
// from the reference conditional distribution given the realized history.
// With mean_shift disabled the process degenerates to the reference law.
LimitTrajectory simulate_limit_process(const LimitPlan& plan, rng::Stream& rs,
                                       bool mean_shift = true);
LimitTrajectory simulate_limit_process(const LimitProcessSpec& spec, int G,
                                       rng::Stream& rs);

struct LimitEnsembleSummary {
  int generations = 0;
  int dim = 0;
  std::int64_t trajectories = 0;
  SchemeKind scheme = SchemeKind::augment;
  RatioCurve variance_ratio;                 // trace ratio vs generation 1
  Eigen::VectorXd trace_variance;            // per generation
  std::vector<Eigen::MatrixXd> estimator_cov;  // empirical Var(W_est(g))
};

// Deterministic (seed, trajectories)-keyed Monte Carlo ensemble of the limit
// process; chunked accumulation makes the result independent of
// parallel_width.
LimitEnsembleSummary simulate_limit_ensemble(const LimitProcessSpec& spec,
                                             int G, std::int64_t trajectories,
                                             std::uint64_t seed,
                                             int parallel_width = 0);

// Trace variance ratio curve of an explicit trajectory collection.
RatioCurve variance_ratio_curve(const std::vector<LimitTrajectory>& ensemble);

// Exact per-scheme conditional law of W_est(G) given the history, from the
// reference covariance algebra: mean = score_gain * w_score(G) +
// prev_gain * w_est(G-1), covariance cond_cov.
struct SchemeConditional {
  Eigen::MatrixXd score_gain;
  Eigen::MatrixXd prev_gain;
  Eigen::MatrixXd cond_cov;
};
SchemeConditional scheme_conditional_law(SchemeKind scheme,
                                         const Eigen::MatrixXd& score_cov,
                                         const Eigen::MatrixXd& estimator_cov,
                                         int G);

// Closed-form Var(W_est(G)): G * estimator_cov under discard,
// (sum_{g<=G} 1/g^2) * estimator_cov under augment. Throws
// UnsupportedSchemeError for schemes without a closed form.
Eigen::MatrixXd closed_form_variance(SchemeKind scheme,
                                     const Eigen::MatrixXd& estimator_cov,
                                     int G);

// Generation-by-generation variance propagation through the scheme's
// conditional law; agrees with closed_form_variance to floating-point
// accuracy.
Eigen::MatrixXd variance_recursion(SchemeKind scheme,
                                   const Eigen::MatrixXd& score_cov,
                                   const Eigen::MatrixXd& estimator_cov, int G);

}  // namespace csim
