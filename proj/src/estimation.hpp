#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "expfam.hpp"
#include "rng.hpp"

namespace csim {

// One generation block of data: row i of features pairs with responses[i].
struct GenerationData {
  Eigen::MatrixXd features;   // n x dim_x_raw
  Eigen::VectorXd responses;  // n
};
using Corpus = std::vector<GenerationData>;

struct SamplePoint {
  Eigen::VectorXd x_raw;
  double y = 0.0;
  double weight = 1.0;
  int gen = 1;
  int idx = 0;
};

// Weighted sample for Eq.-style M-estimation. Weights are attached to points
// by index only; nothing in this module ever derives a weight from a data
// value.
struct WeightedSample {
  std::vector<SamplePoint> points;

  int dim_x_raw() const {
    return points.empty() ? 0 : static_cast<int>(points[0].x_raw.size());
  }
};

struct FitResult {
  Eigen::VectorXd theta_hat;
  bool converged = false;
  int iterations = 0;
  // norm of the gradient of the mean weighted loss at theta_hat; converged
  // implies final_grad_norm <= 1e-10 * max(1, |mean weighted loss|)
  double final_grad_norm = 0.0;
  // Weighted Hessian of the loss at theta_hat divided by the total number of
  // points (zero-weight points included in the count).
  Eigen::MatrixXd observed_information;
};

struct NewtonOptions {
  int max_iterations = 100;
  int max_halvings = 60;
  double grad_tol = 1e-10;
  double ridge = 0.0;  // L2 damping added to the Hessian (separation fallback)
};

// Damped-Newton weighted MLE: minimises sum_i w_i (A(X_i theta) - theta' X_i' T(y_i)).
// Throws SeparationError when a bernoulli_logit fit diverges along a
// direction that classifies every positively weighted point correctly, and
// DomainError when iterates cannot be kept inside the natural-parameter
// domain.
FitResult fit_weighted_mle(const ExpFamilyModel& model, const FeatureMap& fmap,
                           const WeightedSample& sample,
                           const Eigen::VectorXd& init,
                           const NewtonOptions& opts = {});

// Corpus view of the same fit; weights are flattened in block order.
FitResult fit_weighted_mle(const ExpFamilyModel& model, const FeatureMap& fmap,
                           const Corpus& corpus,
                           const std::vector<double>& weights,
                           const Eigen::VectorXd& init,
                           const NewtonOptions& opts = {});

struct LinearFit {
  Eigen::VectorXd beta_hat;
  double sigma2_hat = 0.0;
  Eigen::VectorXd theta_hat;  // (beta_hat / sigma2_hat, 1 / sigma2_hat)
};

// Sufficient statistics of a weighted least-squares problem. Additive across
// blocks, which keeps iterated refits O(n d^2) per generation.
struct LinearSuffStats {
  Eigen::MatrixXd gram;  // sum w x x'
  Eigen::VectorXd xy;    // sum w x y
  double yy = 0.0;       // sum w y^2
  double weight_sum = 0.0;
  std::int64_t count = 0;

  explicit LinearSuffStats(int dim)
      : gram(Eigen::MatrixXd::Zero(dim, dim)), xy(Eigen::VectorXd::Zero(dim)) {}

  void accumulate(const Eigen::MatrixXd& rows, const Eigen::VectorXd& y,
                  double w);
  void accumulate_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& y,
                       const double* w);
  void add_scaled(const LinearSuffStats& other, double w);
};

// Weighted least squares with weight-normalised mean squared residual
// sigma2_hat = sum w r^2 / sum w, reported together with the natural
// parametrisation theta = (beta/sigma^2, 1/sigma^2). Throws
// SingularDesignError when the weighted Gram matrix has condition number
// above 1e12 and DegenerateVarianceError when sigma2_hat < 1e-12 (the
// collapse endpoint; deliberately not clamped).
LinearFit fit_linear_gaussian(const WeightedSample& sample);
LinearFit fit_linear_from_stats(const LinearSuffStats& stats);

constexpr double kSigma2Floor = 1e-12;
constexpr double kMaxGramCondition = 1e12;

// Lower weighted median: smallest value whose cumulative weight reaches half
// of the total. With unit weights this is the order-statistic lower median.
double fit_weighted_median(std::vector<std::pair<double, double>> values);

enum class LossKind { mle, median };

// Asymptotic covariance of the estimator defined by the loss, in the theta
// coordinates the fit uses: (E grad^2 L)^-1 E[grad L grad L'] (E grad^2 L)^-1
// estimated by Monte Carlo over (X, Y) draws at theta0. Closed forms are
// returned exactly where available: gaussian_known_var MLE (constant
// curvature) and the median of gaussian_known_var responses.
Eigen::MatrixXd sandwich_variance(const ExpFamilyModel& model,
                                  const FeatureMap& fmap, LossKind loss,
                                  const Eigen::VectorXd& theta0,
                                  const FeatureDistribution& h,
                                  std::int64_t mc_samples, rng::Stream& rs);

}  // namespace csim
