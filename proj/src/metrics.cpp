#include "metrics.hpp"

#include <cmath>

#include "errors.hpp"

namespace csim {

double are(const Eigen::MatrixXd& v1, const Eigen::MatrixXd& v2) {
  if (v1.rows() != v1.cols() || v2.rows() != v2.cols() || v1.rows() != v2.rows()) {
    throw DimensionError("are: covariance dimensions do not match");
  }
  const double t2 = v2.trace();
  if (t2 == 0.0) throw DegenerateError("are: denominator covariance has zero trace");
  return v1.trace() / t2;
}

double kl_exact(const ExpFamilyModel& model, const FeatureMap& fmap,
                const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0,
                const FeatureDistribution& h, std::int64_t mc_samples,
                rng::Stream& rs) {
  auto kl_at = [&](const Eigen::VectorXd& x) {
    const EtaVec eta_hat = fmap.eta(x, theta_hat);
    const EtaVec eta0 = fmap.eta(x, theta0);
    model.require_domain(eta_hat);
    model.require_domain(eta0);
    const EtaVec grad_hat = model.grad_log_partition(eta_hat);
    return model.log_partition(eta0) - model.log_partition(eta_hat) -
           (eta0 - eta_hat).dot(grad_hat);
  };

  double total = 0.0;
  if (h.is_fixed_design()) {
    for (const auto& p : h.design_points()) total += kl_at(p);
    total /= static_cast<double>(h.design_points().size());
  } else {
    if (mc_samples < 1) throw ConfigError("kl_exact: mc_samples must be >= 1");
    for (std::int64_t s = 0; s < mc_samples; ++s) {
      total += kl_at(h.draw(static_cast<std::size_t>(s), rs));
    }
    total /= static_cast<double>(mc_samples);
  }
  return std::max(0.0, total);
}

double kl_quadratic(const Eigen::MatrixXd& score_cov,
                    const Eigen::VectorXd& theta_hat,
                    const Eigen::VectorXd& theta0) {
  if (theta_hat.size() != theta0.size() || score_cov.rows() != theta_hat.size()) {
    throw DimensionError("kl_quadratic: dimension mismatch");
  }
  const Eigen::VectorXd delta = theta_hat - theta0;
  return 0.5 * delta.dot(score_cov * delta);
}

RatioCurve kl_ratio_curve(const EnsembleResult& ensemble,
                          const Eigen::VectorXd& theta0,
                          const Eigen::MatrixXd& score_cov) {
  const int gmax = ensemble.generations;
  RatioAccumulator acc(gmax);
  Eigen::VectorXd t(gmax);
  for (const auto& traj : ensemble.trajectories) {
    bool full = true;
    for (int g = 0; g < gmax; ++g) {
      const auto& rec = traj.generations[static_cast<std::size_t>(g)];
      if (rec.degenerate) {
        full = false;
        break;
      }
      t[g] = kl_quadratic(score_cov, rec.theta_hat, theta0);
    }
    if (full) acc.add_trajectory(t);
  }
  return ratio_curve_from_moments(acc);
}

double test_ce_loss(const ExpFamilyModel& model, const FeatureMap& fmap,
                    const Eigen::VectorXd& theta_hat,
                    const GenerationData& test_set) {
  const Eigen::Index m = test_set.responses.size();
  if (m == 0) throw EmptyError("test_ce_loss: empty test set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const EtaVec eta = fmap.eta(test_set.features.row(i), theta_hat);
    total -= model.log_density(test_set.responses[i], eta);
  }
  return total / static_cast<double>(m);
}

ComparisonReport build_comparison(const EnsembleResult& ensemble,
                                  const Eigen::VectorXd& theta0,
                                  const Eigen::MatrixXd& score_cov) {
  ComparisonReport report;
  report.scheme = scheme_label(ensemble.scheme);
  report.n = ensemble.n;
  report.replications = ensemble.replications;
  report.mse_ratio = ensemble.mse_ratio;
  report.kl_ratio = kl_ratio_curve(ensemble, theta0, score_cov);
  report.are_vs_gen1 = ensemble.mse_ratio.value.cwiseInverse();
  return report;
}

}  // namespace csim
