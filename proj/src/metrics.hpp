#pragma once

#include <Eigen/Dense>
#include <string>

#include "estimation.hpp"
#include "expfam.hpp"
#include "limitproc.hpp"
#include "workflow.hpp"

namespace csim {

// Asymptotic relative efficiency of estimator 2 versus estimator 1 with
// asymptotic covariances v1, v2: the trace ratio tr(v1)/tr(v2) (the scalar
// ratio in one dimension). Throws DegenerateError when tr(v2) is zero.
double are(const Eigen::MatrixXd& v1, const Eigen::MatrixXd& v2);

// Exact KL test loss E_X D_KL(p(.|X theta_hat) || p(.|X theta0)) through the
// exponential-family Bregman identity
//   KL(eta_hat || eta0) = A(eta0) - A(eta_hat) - (eta0 - eta_hat)' gradA(eta_hat),
// averaged over X ~ H (exactly for fixed designs, Monte Carlo otherwise).
double kl_exact(const ExpFamilyModel& model, const FeatureMap& fmap,
                const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta0,
                const FeatureDistribution& h, std::int64_t mc_samples,
                rng::Stream& rs);

// Quadratic approximation (1/2) (theta_hat - theta0)' V (theta_hat - theta0)
// with V the score covariance.
double kl_quadratic(const Eigen::MatrixXd& score_cov,
                    const Eigen::VectorXd& theta_hat,
                    const Eigen::VectorXd& theta0);

// Ratio of ensemble-mean quadratic KL at generation g to generation 1, with
// Monte Carlo standard errors.
RatioCurve kl_ratio_curve(const EnsembleResult& ensemble,
                          const Eigen::VectorXd& theta0,
                          const Eigen::MatrixXd& score_cov);

// Empirical cross-entropy test loss -(1/m) sum log p(y_j | X_j theta_hat) on
// held-out points (carrier included, so this is the absolute CE).
double test_ce_loss(const ExpFamilyModel& model, const FeatureMap& fmap,
                    const Eigen::VectorXd& theta_hat,
                    const GenerationData& test_set);

struct ComparisonReport {
  std::string scheme;
  int n = 0;
  int replications = 0;
  RatioCurve mse_ratio;
  RatioCurve kl_ratio;
  Eigen::VectorXd are_vs_gen1;  // 1 / mse_ratio, elementwise
};

ComparisonReport build_comparison(const EnsembleResult& ensemble,
                                  const Eigen::VectorXd& theta0,
                                  const Eigen::MatrixXd& score_cov);

}  // namespace csim
