#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "estimation.hpp"
#include "workflow.hpp"

namespace csim {

struct LikelihoodRatioRecord {
  double llr = 0.0;
  std::vector<double> per_generation;  // generation-1 contribution is 0
  int n = 0;
  int generations = 0;
  std::string scheme;
};

// Exact log-likelihood ratio between the sequential law (responses of
// generation g drawn at theta_hat_{g-1}) and the iid reference law (all
// responses at theta0) on a realized corpus:
//   sum_{g>=2} sum_i [ log p(y | X theta_hat_{g-1}) - log p(y | X theta0) ].
// Carrier terms cancel identically and are never evaluated. theta_hats[k] is
// the fit after generation k+1; entries beyond generation G-1 are ignored.
LikelihoodRatioRecord log_likelihood_ratio(
    const ExpFamilyModel& model, const FeatureMap& fmap, const Corpus& corpus,
    const std::vector<Eigen::VectorXd>& theta_hats,
    const Eigen::VectorXd& theta0);

// Second-order expansion of the same quantity around theta0:
//   sum_{g>=2} sum_i [ d' X'(T(y) - gradA(X theta0))
//                      - (1/2) d' X' grad2A(X theta0) X d ],  d = theta_hat_{g-1} - theta0.
double log_likelihood_ratio_quadratic(
    const ExpFamilyModel& model, const FeatureMap& fmap, const Corpus& corpus,
    const std::vector<Eigen::VectorXd>& theta_hats,
    const Eigen::VectorXd& theta0);

struct ContiguityReport {
  double mean_ratio = 0.0;   // Monte Carlo mean of exp(llr); 1 in expectation
  double stderr_ = 0.0;
  double max_share = 0.0;    // largest single-replication share of the total
  bool inconclusive = false; // heavy-tail rule: one replication carries > 20%
  int n = 0;
  int generations = 0;
  int replications = 0;
  int excluded = 0;          // degenerate trajectories dropped
  std::string scheme;
};

// Unit-mean diagnostic: corpora are generated entirely under the reference
// law (every generation at theta0) while the estimator trajectory is fit per
// the scheme on that reference data; reports the empirical mean of exp(llr).
// exp(llr) is heavy-tailed, so generations are capped at 3 and the largest
// summand share is reported; above 20% the check is inconclusive rather than
// failed.
ContiguityReport contiguity_check(const WorkflowConfig& cfg, int replications,
                                  int parallel_width = 0);

constexpr int kMaxContiguityGenerations = 3;
constexpr double kContiguityShareLimit = 0.20;

}  // namespace csim
