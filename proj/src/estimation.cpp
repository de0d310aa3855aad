#include "estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "errors.hpp"

namespace csim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CorpusView {
  const Corpus* corpus;
  const std::vector<double>* weights;
  // The objective is the mean weighted loss (argmin-invariant); this keeps
  // the convergence tolerance and the fitted point invariant under weight
  // rescaling.
  double inv_weight_sum = 1.0;

  std::int64_t total_points() const {
    std::int64_t n = 0;
    for (const auto& block : *corpus) n += block.responses.size();
    return n;
  }

  double weight_sum() const {
    double s = 0.0;
    for (double w : *weights) {
      if (w < 0.0) throw DomainError("negative weight");
      s += w;
    }
    return s;
  }

  template <typename Fn>
  void for_each_weighted(Fn&& fn) const {
    std::size_t offset = 0;
    for (const auto& block : *corpus) {
      const auto n = static_cast<std::size_t>(block.responses.size());
      for (std::size_t i = 0; i < n; ++i) {
        const double w = (*weights)[offset + i];
        if (w < 0.0) throw DomainError("negative weight");
        if (w > 0.0) {
          fn(block.features.row(static_cast<Eigen::Index>(i)),
             block.responses[static_cast<Eigen::Index>(i)], w);
        }
      }
      offset += n;
    }
  }
};

// Loss, gradient and Hessian of the weighted negative log-likelihood
// (carrier terms dropped; they are constant in theta). Returns +inf loss when
// any natural parameter leaves the domain.
double eval_loss(const ExpFamilyModel& model, const FeatureMap& fmap,
                 const CorpusView& view, const Eigen::VectorXd& theta) {
  double loss = 0.0;
  bool ok = true;
  view.for_each_weighted([&](const auto& x, double y, double w) {
    if (!ok) return;
    const EtaVec eta = fmap.eta(x, theta);
    if (!model.in_domain(eta)) {
      ok = false;
      return;
    }
    const EtaVec t = model.suff_stat(y);
    loss += w * (model.log_partition(eta) - eta.dot(t));
  });
  if (!ok || !std::isfinite(loss)) return kInf;
  return loss * view.inv_weight_sum;
}

double eval_loss_grad_hess(const ExpFamilyModel& model, const FeatureMap& fmap,
                           const CorpusView& view, const Eigen::VectorXd& theta,
                           Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  const int d = fmap.dim_theta();
  grad = Eigen::VectorXd::Zero(d);
  hess = Eigen::MatrixXd::Zero(d, d);
  double loss = 0.0;
  bool ok = true;
  view.for_each_weighted([&](const auto& x, double y, double w) {
    if (!ok) return;
    const EtaVec eta = fmap.eta(x, theta);
    if (!model.in_domain(eta)) {
      ok = false;
      return;
    }
    const EtaVec t = model.suff_stat(y);
    loss += w * (model.log_partition(eta) - eta.dot(t));
    const EtaVec resid = model.grad_log_partition(eta) - t;
    fmap.add_xt_vec(x, resid, w, grad);
    const EtaMat curv = model.hess_log_partition(eta);
    fmap.add_xt_hess_x(x, curv, w, hess);
  });
  if (!ok || !std::isfinite(loss)) return kInf;
  grad *= view.inv_weight_sum;
  hess *= view.inv_weight_sum;
  return loss * view.inv_weight_sum;
}

// Perfect (or quasi-complete) separation: every positively weighted point is
// classified with the right sign and the fit has drifted into saturation.
bool logistic_separated(const FeatureMap& fmap, const CorpusView& view,
                        const Eigen::VectorXd& theta) {
  double max_abs_eta = 0.0;
  bool all_margins_ok = true;
  view.for_each_weighted([&](const auto& x, double y, double /*w*/) {
    const EtaVec eta = fmap.eta(x, theta);
    const double margin = eta[0] * (2.0 * y - 1.0);
    if (margin < 0.0) all_margins_ok = false;
    max_abs_eta = std::max(max_abs_eta, std::abs(eta[0]));
  });
  return all_margins_ok && max_abs_eta > 25.0;
}

FitResult newton_fit(const ExpFamilyModel& model, const FeatureMap& fmap,
                     CorpusView view, const Eigen::VectorXd& init,
                     const NewtonOptions& opts) {
  const int d = fmap.dim_theta();
  if (init.size() != d) throw DimensionError("fit_weighted_mle: init has wrong dimension");
  const std::int64_t total = view.total_points();
  if (total == 0) throw EmptyError("fit_weighted_mle: empty sample");
  const double wsum = view.weight_sum();
  if (wsum <= 0.0) throw EmptyError("fit_weighted_mle: no positive weight");
  view.inv_weight_sum = 1.0 / wsum;

  Eigen::VectorXd theta = init;
  Eigen::VectorXd grad(d);
  Eigen::MatrixXd hess(d, d);
  double loss = eval_loss_grad_hess(model, fmap, view, theta, grad, hess);
  if (!std::isfinite(loss)) throw DomainError("fit_weighted_mle: init outside domain");

  FitResult result;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    const double gnorm = grad.norm();
    if (gnorm <= opts.grad_tol * std::max(1.0, std::abs(loss))) {
      result.converged = true;
      break;
    }
    Eigen::MatrixXd h = hess;
    if (opts.ridge > 0.0) h.diagonal().array() += opts.ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd step = -ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      // convex losses: fall back to a tiny diagonal lift
      h.diagonal().array() += 1e-10 * std::max(1.0, h.diagonal().maxCoeff());
      step = -h.ldlt().solve(grad);
      if (!step.allFinite()) throw SingularError("fit_weighted_mle: singular Hessian");
    }

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= opts.max_halvings; ++halving) {
      const Eigen::VectorXd cand = theta + t * step;
      const double cand_loss = eval_loss(model, fmap, view, cand);
      // non-strict acceptance lets the final steps cross the floating-point
      // plateau around the optimum
      if (cand_loss <= loss) {
        theta = cand;
        loss = cand_loss;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // stalled; convergence decided by gradient below
    loss = eval_loss_grad_hess(model, fmap, view, theta, grad, hess);
    if (!std::isfinite(loss)) {
      throw DomainError("fit_weighted_mle: iterates left the natural domain");
    }
  }

  const double gnorm = grad.norm();
  if (!result.converged) {
    result.converged = gnorm <= opts.grad_tol * std::max(1.0, std::abs(loss));
  }
  if (model.family() == Family::bernoulli_logit && opts.ridge == 0.0 &&
      logistic_separated(fmap, view, theta)) {
    throw SeparationError("fit_weighted_mle: separated logistic sample");
  }

  result.theta_hat = theta;
  result.iterations = iter;
  result.final_grad_norm = gnorm;
  // sum_i w_i grad2 L_i divided by the total point count
  result.observed_information = hess * (wsum / static_cast<double>(total));
  return result;
}

CorpusView make_view(const Corpus& corpus, const std::vector<double>& weights) {
  std::size_t n = 0;
  for (const auto& block : corpus) n += static_cast<std::size_t>(block.responses.size());
  if (weights.size() != n) {
    throw DimensionError("weight vector does not match corpus size");
  }
  return CorpusView{&corpus, &weights};
}

}  // namespace

FitResult fit_weighted_mle(const ExpFamilyModel& model, const FeatureMap& fmap,
                           const Corpus& corpus,
                           const std::vector<double>& weights,
                           const Eigen::VectorXd& init,
                           const NewtonOptions& opts) {
  return newton_fit(model, fmap, make_view(corpus, weights), init, opts);
}

FitResult fit_weighted_mle(const ExpFamilyModel& model, const FeatureMap& fmap,
                           const WeightedSample& sample,
                           const Eigen::VectorXd& init,
                           const NewtonOptions& opts) {
  if (sample.points.empty()) throw EmptyError("fit_weighted_mle: empty sample");
  const int d_raw = sample.dim_x_raw();
  Corpus corpus(1);
  corpus[0].features.resize(static_cast<Eigen::Index>(sample.points.size()), d_raw);
  corpus[0].responses.resize(static_cast<Eigen::Index>(sample.points.size()));
  std::vector<double> weights(sample.points.size());
  for (std::size_t i = 0; i < sample.points.size(); ++i) {
    const auto& p = sample.points[i];
    if (p.x_raw.size() != d_raw) throw DimensionError("ragged sample");
    corpus[0].features.row(static_cast<Eigen::Index>(i)) = p.x_raw.transpose();
    corpus[0].responses[static_cast<Eigen::Index>(i)] = p.y;
    weights[i] = p.weight;
  }
  return fit_weighted_mle(model, fmap, corpus, weights, init, opts);
}

void LinearSuffStats::accumulate(const Eigen::MatrixXd& rows,
                                 const Eigen::VectorXd& y, double w) {
  if (w == 0.0) {
    count += rows.rows();
    return;
  }
  gram.selfadjointView<Eigen::Lower>().rankUpdate(rows.transpose(), w);
  gram.triangularView<Eigen::StrictlyUpper>() =
      gram.triangularView<Eigen::StrictlyLower>().transpose();
  xy.noalias() += w * (rows.transpose() * y);
  yy += w * y.squaredNorm();
  weight_sum += w * static_cast<double>(rows.rows());
  count += rows.rows();
}

void LinearSuffStats::accumulate_rows(const Eigen::MatrixXd& rows,
                                      const Eigen::VectorXd& y,
                                      const double* w) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double wi = w[i];
    if (wi < 0.0) throw DomainError("negative weight");
    if (wi != 0.0) {
      gram.selfadjointView<Eigen::Lower>().rankUpdate(rows.row(i).transpose(), wi);
      xy.noalias() += wi * y[i] * rows.row(i).transpose();
      yy += wi * y[i] * y[i];
      weight_sum += wi;
    }
  }
  gram.triangularView<Eigen::StrictlyUpper>() =
      gram.triangularView<Eigen::StrictlyLower>().transpose();
  count += rows.rows();
}

void LinearSuffStats::add_scaled(const LinearSuffStats& other, double w) {
  count += other.count;
  if (w == 0.0) return;
  gram += w * other.gram;
  xy += w * other.xy;
  yy += w * other.yy;
  weight_sum += w * other.weight_sum;
}

LinearFit fit_linear_from_stats(const LinearSuffStats& stats) {
  if (stats.weight_sum <= 0.0) throw EmptyError("fit_linear_gaussian: no positive weight");
  const int d = static_cast<int>(stats.gram.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stats.gram);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (lmin <= 0.0 || lmax / lmin > kMaxGramCondition) {
    throw SingularDesignError("fit_linear_gaussian: ill-conditioned weighted Gram matrix");
  }

  LinearFit fit;
  fit.beta_hat = stats.gram.ldlt().solve(stats.xy);
  const double rss =
      std::max(0.0, stats.yy - 2.0 * fit.beta_hat.dot(stats.xy) +
                        fit.beta_hat.dot(stats.gram * fit.beta_hat));
  fit.sigma2_hat = rss / stats.weight_sum;
  if (fit.sigma2_hat < kSigma2Floor) {
    throw DegenerateVarianceError("fit_linear_gaussian: residual variance collapsed");
  }
  fit.theta_hat.resize(d + 1);
  fit.theta_hat.head(d) = fit.beta_hat / fit.sigma2_hat;
  fit.theta_hat[d] = 1.0 / fit.sigma2_hat;
  return fit;
}

LinearFit fit_linear_gaussian(const WeightedSample& sample) {
  if (sample.points.empty()) throw EmptyError("fit_linear_gaussian: empty sample");
  const int d = sample.dim_x_raw();
  LinearSuffStats stats(d);
  for (const auto& p : sample.points) {
    if (p.x_raw.size() != d) throw DimensionError("ragged sample");
    if (p.weight < 0.0) throw DomainError("negative weight");
    if (p.weight != 0.0) {
      stats.gram.selfadjointView<Eigen::Lower>().rankUpdate(p.x_raw, p.weight);
      stats.xy.noalias() += p.weight * p.y * p.x_raw;
      stats.yy += p.weight * p.y * p.y;
      stats.weight_sum += p.weight;
    }
    ++stats.count;
  }
  stats.gram.triangularView<Eigen::StrictlyUpper>() =
      stats.gram.triangularView<Eigen::StrictlyLower>().transpose();
  return fit_linear_from_stats(stats);
}

double fit_weighted_median(std::vector<std::pair<double, double>> values) {
  double total = 0.0;
  for (const auto& [v, w] : values) {
    (void)v;
    if (w < 0.0) throw DomainError("negative weight");
    total += w;
  }
  if (values.empty() || total <= 0.0) {
    throw EmptyError("fit_weighted_median: no positive weight");
  }
  std::sort(values.begin(), values.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const double half = 0.5 * total;
  double cum = 0.0;
  for (const auto& [v, w] : values) {
    cum += w;
    if (cum >= half) return v;
  }
  return values.back().first;
}

Eigen::MatrixXd sandwich_variance(const ExpFamilyModel& model,
                                  const FeatureMap& fmap, LossKind loss,
                                  const Eigen::VectorXd& theta0,
                                  const FeatureDistribution& h,
                                  std::int64_t mc_samples, rng::Stream& rs) {
  const int d = fmap.dim_theta();
  if (theta0.size() != d) throw DimensionError("sandwich_variance: theta0 has wrong dimension");

  if (loss == LossKind::median) {
    if (model.family() != Family::gaussian_known_var || d != 1) {
      throw UnsupportedSchemeError(
          "sandwich_variance: median loss supported for scalar gaussian_known_var only");
    }
    // median of N(mu, sigma^2): Var(mu_hat) = pi sigma^2 / 2; the fit reports
    // theta = mu / sigma^2.
    const double s2 = model.fixed_sigma2();
    Eigen::MatrixXd v(1, 1);
    v(0, 0) = 0.5 * M_PI * s2 / (s2 * s2);
    return v;
  }

  // Constant curvature: gaussian bread is exact for designs with known E[xx'].
  if (model.family() == Family::gaussian_known_var) {
    Eigen::MatrixXd exx;
    if (h.is_fixed_design()) {
      exx = Eigen::MatrixXd::Zero(d, d);
      for (const auto& p : h.design_points()) exx += p * p.transpose();
      exx /= static_cast<double>(h.design_points().size());
    } else {
      exx = Eigen::MatrixXd::Identity(d, d);  // standard normal coordinates
    }
    const Eigen::MatrixXd bread = model.fixed_sigma2() * exx;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bread);
    if (es.eigenvalues().minCoeff() < 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff())) {
      throw SingularInformationError("sandwich_variance: singular information matrix");
    }
    return bread.inverse();
  }

  if (mc_samples < 10000) {
    throw ConfigError("sandwich_variance: mc_samples must be >= 1e4");
  }
  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd grad(d);
  for (std::int64_t s = 0; s < mc_samples; ++s) {
    const Eigen::VectorXd x = h.draw(static_cast<std::size_t>(s), rs);
    const EtaVec eta = fmap.eta(x, theta0);
    model.require_domain(eta);
    const double y = model.sample_response(eta, rs);
    const EtaVec resid = model.grad_log_partition(eta) - model.suff_stat(y);
    grad.setZero();
    fmap.add_xt_vec(x, resid, 1.0, grad);
    meat.selfadjointView<Eigen::Lower>().rankUpdate(grad, 1.0);
    const EtaMat curv = model.hess_log_partition(eta);
    fmap.add_xt_hess_x(x, curv, 1.0, bread);
  }
  meat.triangularView<Eigen::StrictlyUpper>() =
      meat.triangularView<Eigen::StrictlyLower>().transpose();
  bread /= static_cast<double>(mc_samples);
  meat /= static_cast<double>(mc_samples);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(bread);
  if (es.eigenvalues().minCoeff() < 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    throw SingularInformationError("sandwich_variance: singular information matrix");
  }
  const Eigen::MatrixXd bread_inv = bread.inverse();
  return bread_inv * meat * bread_inv;
}

}  // namespace csim
