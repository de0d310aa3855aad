#include "limitproc.hpp"

#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"

namespace csim {

namespace {

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

void require_spd(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m));
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError(std::string(what) + " must be symmetric positive definite");
  }
}

// PSD square root with small negative eigenvalues clamped to zero; throws
// NotPSDError when the matrix is indefinite beyond tolerance.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-9 * scale) {
      throw NotPSDError(std::string(what) + " is indefinite beyond jitter");
    }
    lam[i] = std::max(lam[i], 0.0);
  }
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

// Reference covariance blocks for the built-in schemes, b <= a throughout.
//
//   discard    Cov(est(a), est(b)) = V_est 1{a=b},  Cov(est(a), score(b)) = I 1{a=b}
//   augment    Cov(est(a), est(b)) = V_est / a,     Cov(est(a), score(b)) = I / a
//   subsample  Cov(est(a), est(b)) = V_est 1{a=b} + V_est/a 1{a>b},
//              Cov(est(a), score(b)) = I / a
//
// The subsample cross block carries the 1/a factor because two independent
// size-n subsets of the first n*a and n*b points share n/a points on
// average; a constant cross block would make distinct-generation estimators
// perfectly correlated and the joint assembly indefinite.
struct SchemeBlocks {
  std::function<Eigen::MatrixXd(int, int)> estimator_estimator;
  std::function<Eigen::MatrixXd(int, int)> estimator_score;
};

SchemeBlocks blocks_for(const LimitProcessSpec& spec) {
  const Eigen::MatrixXd v_est = spec.estimator_cov;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(spec.dim, spec.dim);
  switch (spec.scheme) {
    case SchemeKind::discard:
      return {[v_est](int a, int b) {
                return a == b ? v_est : Eigen::MatrixXd::Zero(v_est.rows(), v_est.cols()).eval();
              },
              [eye](int a, int b) {
                return a == b ? eye : Eigen::MatrixXd::Zero(eye.rows(), eye.cols()).eval();
              }};
    case SchemeKind::augment:
      return {[v_est](int a, int /*b*/) { return (v_est / a).eval(); },
              [eye](int a, int /*b*/) { return (eye / a).eval(); }};
    case SchemeKind::subsample:
      return {[v_est](int a, int b) {
                return a == b ? v_est : (v_est / a).eval();
              },
              [eye](int a, int /*b*/) { return (eye / a).eval(); }};
    case SchemeKind::custom:
      if (!spec.custom_blocks) {
        throw ConfigError("custom limit scheme requires reference blocks");
      }
      return {spec.custom_blocks->estimator_estimator,
              spec.custom_blocks->estimator_score};
  }
  throw ConfigError("unknown scheme");
}

}  // namespace

LimitProcessSpec LimitProcessSpec::scalar(double score_var, double estimator_var,
                                          SchemeKind scheme) {
  LimitProcessSpec spec;
  spec.dim = 1;
  spec.score_cov = Eigen::MatrixXd::Constant(1, 1, score_var);
  spec.estimator_cov = Eigen::MatrixXd::Constant(1, 1, estimator_var);
  spec.scheme = scheme;
  return spec;
}

void LimitProcessSpec::validate() const {
  if (dim < 1) throw ConfigError("LimitProcessSpec: dim must be >= 1");
  if (score_cov.rows() != dim || score_cov.cols() != dim ||
      estimator_cov.rows() != dim || estimator_cov.cols() != dim) {
    throw ConfigError("LimitProcessSpec: covariance dimensions do not match dim");
  }
  require_spd(score_cov, "score_cov");
  require_spd(estimator_cov, "estimator_cov");
  if (scheme != SchemeKind::custom) {
    // estimator_cov - score_cov^-1 is the reference conditional covariance;
    // equality (zero) holds exactly for efficient estimators.
    const Eigen::MatrixXd gap =
        symmetrized(estimator_cov - score_cov.inverse());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gap);
    const double scale = std::max(1.0, estimator_cov.norm());
    if (es.eigenvalues().minCoeff() < -1e-9 * scale) {
      throw ConfigError(
          "LimitProcessSpec: estimator_cov - score_cov^-1 must be PSD");
    }
  }
  if (scheme == SchemeKind::custom && !custom_blocks) {
    throw ConfigError("LimitProcessSpec: custom scheme without reference blocks");
  }
}

Eigen::MatrixXd compute_score_cov(const ExpFamilyModel& model,
                                  const FeatureMap& fmap,
                                  const Eigen::VectorXd& theta0,
                                  const FeatureDistribution& h,
                                  std::int64_t mc_samples, rng::Stream& rs) {
  const int d = fmap.dim_theta();
  if (theta0.size() != d) throw DimensionError("compute_score_cov: theta0 dimension");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);

  auto add_point = [&](const Eigen::VectorXd& x, double scale) {
    const EtaVec eta = fmap.eta(x, theta0);
    model.require_domain(eta);
    const EtaMat curv = model.hess_log_partition(eta);
    fmap.add_xt_hess_x(x, curv, scale, out);
  };

  if (h.is_fixed_design()) {
    const auto& pts = h.design_points();
    for (const auto& p : pts) add_point(p, 1.0 / static_cast<double>(pts.size()));
  } else if (model.family() == Family::gaussian_known_var &&
             !fmap.is_linear_block()) {
    // constant curvature and E[xx'] = I under standard-normal features
    out = model.fixed_sigma2() * Eigen::MatrixXd::Identity(d, d);
  } else {
    if (mc_samples < 1) throw ConfigError("compute_score_cov: mc_samples must be >= 1");
    for (std::int64_t s = 0; s < mc_samples; ++s) {
      add_point(h.draw(static_cast<std::size_t>(s), rs),
                1.0 / static_cast<double>(mc_samples));
    }
  }

  out = symmetrized(out);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out);
  if (es.eigenvalues().minCoeff() <
      1e-10 * std::max(1.0, es.eigenvalues().maxCoeff())) {
    throw SingularError("compute_score_cov: curvature matrix is singular");
  }
  return out;
}

Eigen::MatrixXd reference_covariance(const LimitProcessSpec& spec, int G) {
  spec.validate();
  if (G < 1) throw ConfigError("reference_covariance: G must be >= 1");
  if (G > kMaxFullAssemblyGenerations) {
    throw ConfigError("reference_covariance: full assembly capped at G <= 200");
  }
  const int d = spec.dim;
  const SchemeBlocks blocks = blocks_for(spec);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * G * d, 2 * G * d);
  auto score_at = [d](int g) { return 2 * (g - 1) * d; };
  auto est_at = [d](int g) { return (2 * g - 1) * d; };
  for (int a = 1; a <= G; ++a) {
    m.block(score_at(a), score_at(a), d, d) = spec.score_cov;
    for (int b = 1; b <= a; ++b) {
      const Eigen::MatrixXd ee = blocks.estimator_estimator(a, b);
      m.block(est_at(a), est_at(b), d, d) = ee;
      m.block(est_at(b), est_at(a), d, d) = ee.transpose();
      const Eigen::MatrixXd es = blocks.estimator_score(a, b);
      m.block(est_at(a), score_at(b), d, d) = es;
      m.block(score_at(b), est_at(a), d, d) = es.transpose();
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m));
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-8 * scale) {
    throw NotPSDError("reference_covariance: assembly is indefinite beyond jitter");
  }
  return m;
}

ConditionalGaussian conditional_gaussian(const Eigen::MatrixXd& joint,
                                         const Eigen::VectorXd& mean,
                                         const std::vector<int>& observed_idx,
                                         const Eigen::VectorXd& observed_values) {
  const int n = static_cast<int>(joint.rows());
  if (joint.cols() != n || mean.size() != n) {
    throw DimensionError("conditional_gaussian: inconsistent joint dimensions");
  }
  if (static_cast<int>(observed_idx.size()) !=
      static_cast<int>(observed_values.size())) {
    throw DimensionError("conditional_gaussian: observed index/value mismatch");
  }
  std::vector<bool> is_obs(static_cast<std::size_t>(n), false);
  for (int idx : observed_idx) {
    if (idx < 0 || idx >= n) throw DimensionError("conditional_gaussian: index out of range");
    is_obs[static_cast<std::size_t>(idx)] = true;
  }
  std::vector<int> unobserved;
  for (int i = 0; i < n; ++i) {
    if (!is_obs[static_cast<std::size_t>(i)]) unobserved.push_back(i);
  }
  const int no = static_cast<int>(observed_idx.size());
  const int nu = static_cast<int>(unobserved.size());

  Eigen::MatrixXd s_oo(no, no), s_uo(nu, no), s_uu(nu, nu);
  Eigen::VectorXd delta(no);
  for (int i = 0; i < no; ++i) {
    delta[i] = observed_values[i] - mean[observed_idx[static_cast<std::size_t>(i)]];
    for (int j = 0; j < no; ++j) {
      s_oo(i, j) = joint(observed_idx[static_cast<std::size_t>(i)],
                         observed_idx[static_cast<std::size_t>(j)]);
    }
  }
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < no; ++j) {
      s_uo(i, j) = joint(unobserved[static_cast<std::size_t>(i)],
                         observed_idx[static_cast<std::size_t>(j)]);
    }
    for (int j = 0; j < nu; ++j) {
      s_uu(i, j) = joint(unobserved[static_cast<std::size_t>(i)],
                         unobserved[static_cast<std::size_t>(j)]);
    }
  }

  s_oo.diagonal().array() += kConditioningJitter;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(symmetrized(s_oo));
  if (ldlt.info() != Eigen::Success) {
    throw SingularConditionError("conditional_gaussian: observed block not factorizable");
  }
  const Eigen::MatrixXd gains = ldlt.solve(s_uo.transpose()).transpose();
  if (!gains.allFinite()) {
    throw SingularConditionError("conditional_gaussian: observed block is singular");
  }

  ConditionalGaussian out;
  out.mean = Eigen::VectorXd(nu);
  for (int i = 0; i < nu; ++i) {
    out.mean[i] = mean[unobserved[static_cast<std::size_t>(i)]];
  }
  out.mean += gains * delta;
  out.cov = symmetrized(s_uu - gains * s_uo.transpose());
  return out;
}

const Eigen::MatrixXd& LimitPlan::gains(int g) const {
  return gains_[static_cast<std::size_t>(g - 1)];
}
const Eigen::MatrixXd& LimitPlan::cond_cov(int g) const {
  return cond_cov_[static_cast<std::size_t>(g - 1)];
}
const Eigen::MatrixXd& LimitPlan::cond_sqrt(int g) const {
  return cond_sqrt_[static_cast<std::size_t>(g - 1)];
}

void LimitPlan::finalize(const LimitProcessSpec& spec) {
  score_cov_ = spec.score_cov;
  Eigen::LLT<Eigen::MatrixXd> llt(spec.score_cov);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("LimitPlan: score_cov is not positive definite");
  }
  score_sqrt_ = llt.matrixL();
  cond_sqrt_.reserve(cond_cov_.size());
  for (std::size_t g = 0; g < cond_cov_.size(); ++g) {
    cond_sqrt_.push_back(psd_sqrt(cond_cov_[g], "conditional covariance"));
  }
}

LimitPlan LimitPlan::full_conditioning(const LimitProcessSpec& spec, int G) {
  const Eigen::MatrixXd m = reference_covariance(spec, G);
  const int d = spec.dim;
  LimitPlan plan;
  plan.generations_ = G;
  plan.dim_ = d;
  plan.gains_.reserve(static_cast<std::size_t>(G));
  plan.cond_cov_.reserve(static_cast<std::size_t>(G));
  for (int g = 1; g <= G; ++g) {
    const int no = (2 * g - 1) * d;
    Eigen::MatrixXd s_oo = m.topLeftCorner(no, no);
    const Eigen::MatrixXd s_uo = m.block(no, 0, d, no);
    s_oo.diagonal().array() += kConditioningJitter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(s_oo);
    if (ldlt.info() != Eigen::Success) {
      throw SingularConditionError("LimitPlan: observed block not factorizable");
    }
    const Eigen::MatrixXd gains = ldlt.solve(s_uo.transpose()).transpose();
    plan.gains_.push_back(gains);
    plan.cond_cov_.push_back(
        symmetrized(m.block(no, no, d, d) - gains * s_uo.transpose()));
  }
  plan.finalize(spec);
  return plan;
}

LimitPlan LimitPlan::recursive(const LimitProcessSpec& spec, int G) {
  spec.validate();
  if (G < 1) throw ConfigError("LimitPlan: G must be >= 1");
  const int d = spec.dim;
  const SchemeBlocks blocks = blocks_for(spec);

  LimitPlan plan;
  plan.generations_ = G;
  plan.dim_ = d;
  plan.gains_.reserve(static_cast<std::size_t>(G));
  plan.cond_cov_.reserve(static_cast<std::size_t>(G));

  // Growing Cholesky factor of the reference covariance over the interleaved
  // prefix (score(1), est(1), score(2), ...); each generation appends the
  // est(g) rows and the score(g+1) rows (a rank-2d update).
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(2 * G * d, 2 * G * d);
  Eigen::LLT<Eigen::MatrixXd> score_llt(spec.score_cov);
  if (score_llt.info() != Eigen::Success) {
    throw ConfigError("LimitPlan: score_cov is not positive definite");
  }
  const Eigen::MatrixXd score_chol = score_llt.matrixL();
  chol.topLeftCorner(d, d) = score_chol;
  int m = d;  // current factored prefix size: score(1)

  Eigen::MatrixXd cross(2 * G * d, d);
  for (int g = 1; g <= G; ++g) {
    // Cov(prefix, est(g)): prefix holds score(1), est(1), ..., score(g)
    for (int b = 1; b <= g; ++b) {
      cross.block(2 * (b - 1) * d, 0, d, d) =
          blocks.estimator_score(g, b).transpose();
      if (b < g) {
        cross.block((2 * b - 1) * d, 0, d, d) =
            blocks.estimator_estimator(g, b).transpose();
      }
    }
    const auto l = chol.topLeftCorner(m, m).triangularView<Eigen::Lower>();
    const Eigen::MatrixXd a = l.solve(cross.topRows(m));
    const Eigen::MatrixXd z = l.transpose().solve(a);
    plan.gains_.push_back(z.transpose());
    const Eigen::MatrixXd cc = symmetrized(
        blocks.estimator_estimator(g, g) - a.transpose() * a);
    plan.cond_cov_.push_back(cc);

    // append est(g) rows: off-diagonal a', diagonal chol(cond_cov + jitter)
    chol.block(m, 0, d, m) = a.transpose();
    Eigen::MatrixXd diag = psd_sqrt(cc, "conditional covariance");
    diag = diag * diag;  // clamped PSD version of cc
    diag.diagonal().array() += kConditioningJitter;
    Eigen::LLT<Eigen::MatrixXd> diag_llt(diag);
    if (diag_llt.info() != Eigen::Success) {
      throw NotPSDError("LimitPlan: conditional block not factorizable");
    }
    chol.block(m, m, d, d) = Eigen::MatrixXd(diag_llt.matrixL());
    m += d;

    // append score(g+1) rows: independent of the whole prefix
    if (g < G) {
      chol.block(m, m, d, d) = score_chol;
      m += d;
    }
  }
  plan.finalize(spec);
  return plan;
}

LimitTrajectory simulate_limit_process(const LimitPlan& plan, rng::Stream& rs,
                                       bool mean_shift) {
  const int G = plan.generations();
  const int d = plan.dim();
  LimitTrajectory out;
  out.score_path.resize(G, d);
  out.estimator_path.resize(G, d);

  Eigen::VectorXd history(2 * G * d);
  Eigen::VectorXd est_prev = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd z(d);
  for (int g = 1; g <= G; ++g) {
    for (int k = 0; k < d; ++k) z[k] = rs.normal();
    Eigen::VectorXd score = plan.score_sqrt().triangularView<Eigen::Lower>() * z;
    if (mean_shift) score.noalias() += plan.score_cov() * est_prev;
    history.segment(2 * (g - 1) * d, d) = score;
    out.score_path.row(g - 1) = score.transpose();

    for (int k = 0; k < d; ++k) z[k] = rs.normal();
    Eigen::VectorXd est = plan.gains(g) * history.head((2 * g - 1) * d);
    est.noalias() += plan.cond_sqrt(g) * z;
    history.segment((2 * g - 1) * d, d) = est;
    out.estimator_path.row(g - 1) = est.transpose();
    est_prev = est;
  }
  return out;
}

LimitTrajectory simulate_limit_process(const LimitProcessSpec& spec, int G,
                                       rng::Stream& rs) {
  const LimitPlan plan = LimitPlan::recursive(spec, G);
  return simulate_limit_process(plan, rs);
}

namespace {

struct EnsembleAccumulator {
  RatioAccumulator moments;
  Eigen::MatrixXd sum_w;                  // G x d
  std::vector<Eigen::MatrixXd> sum_wwt;   // per gen d x d

  EnsembleAccumulator(int G, int d)
      : moments(G), sum_w(Eigen::MatrixXd::Zero(G, d)),
        sum_wwt(static_cast<std::size_t>(G), Eigen::MatrixXd::Zero(d, d)) {}

  void merge(const EnsembleAccumulator& other) {
    moments.merge(other.moments);
    sum_w += other.sum_w;
    for (std::size_t g = 0; g < sum_wwt.size(); ++g) sum_wwt[g] += other.sum_wwt[g];
  }
};

LimitEnsembleSummary summarize(std::vector<EnsembleAccumulator>&& chunks, int G,
                               int d) {
  EnsembleAccumulator total(G, d);
  for (const auto& c : chunks) total.merge(c);

  LimitEnsembleSummary out;
  out.generations = G;
  out.dim = d;
  out.trajectories = total.moments.count;
  out.trace_variance = Eigen::VectorXd::Zero(G);
  out.estimator_cov.assign(static_cast<std::size_t>(G),
                           Eigen::MatrixXd::Zero(d, d));
  const double r = static_cast<double>(total.moments.count);
  for (int g = 0; g < G; ++g) {
    const Eigen::VectorXd mean = total.sum_w.row(g).transpose() / r;
    out.estimator_cov[static_cast<std::size_t>(g)] =
        total.sum_wwt[static_cast<std::size_t>(g)] / r - mean * mean.transpose();
    out.trace_variance[g] = out.estimator_cov[static_cast<std::size_t>(g)].trace();
  }
  out.variance_ratio = ratio_curve_from_moments(total.moments);
  const double v1 = out.trace_variance[0];
  if (v1 > 0.0) {
    for (int g = 0; g < G; ++g) {
      out.variance_ratio.value[g] = out.trace_variance[g] / v1;
    }
  } else {
    out.variance_ratio.value.setConstant(std::numeric_limits<double>::quiet_NaN());
    out.variance_ratio.stderr_.setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace

LimitEnsembleSummary simulate_limit_ensemble(const LimitProcessSpec& spec,
                                             int G, std::int64_t trajectories,
                                             std::uint64_t seed,
                                             int parallel_width) {
  if (trajectories < 2) throw ConfigError("simulate_limit_ensemble: need >= 2 trajectories");
  const LimitPlan plan = LimitPlan::recursive(spec, G);
  const int d = spec.dim;
  const std::int64_t chunk = 4096;
  const std::int64_t n_chunks = (trajectories + chunk - 1) / chunk;
  std::vector<EnsembleAccumulator> acc(static_cast<std::size_t>(n_chunks),
                                       EnsembleAccumulator(G, d));
  const rng::StreamKey root = rng::root_key(seed);

  parallel_chunks(trajectories, chunk, parallel_width,
                  [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
                    auto& a = acc[static_cast<std::size_t>(c)];
                    Eigen::VectorXd t(G);
                    for (std::int64_t i = begin; i < end; ++i) {
                      rng::Stream rs =
                          root.child(static_cast<std::uint64_t>(i)).stream();
                      const LimitTrajectory traj = simulate_limit_process(plan, rs);
                      for (int g = 0; g < G; ++g) {
                        const auto w = traj.estimator_path.row(g);
                        t[g] = w.squaredNorm();
                        a.sum_w.row(g) += w;
                        a.sum_wwt[static_cast<std::size_t>(g)].noalias() +=
                            w.transpose() * w;
                      }
                      a.moments.add_trajectory(t);
                    }
                  });

  LimitEnsembleSummary out = summarize(std::move(acc), G, d);
  out.scheme = spec.scheme;
  return out;
}

RatioCurve variance_ratio_curve(const std::vector<LimitTrajectory>& ensemble) {
  if (ensemble.empty()) throw EmptyError("variance_ratio_curve: empty ensemble");
  const int G = static_cast<int>(ensemble[0].estimator_path.rows());
  const int d = static_cast<int>(ensemble[0].estimator_path.cols());
  EnsembleAccumulator acc(G, d);
  Eigen::VectorXd t(G);
  for (const auto& traj : ensemble) {
    for (int g = 0; g < G; ++g) {
      const auto w = traj.estimator_path.row(g);
      t[g] = w.squaredNorm();
      acc.sum_w.row(g) += w;
      acc.sum_wwt[static_cast<std::size_t>(g)].noalias() += w.transpose() * w;
    }
    acc.moments.add_trajectory(t);
  }
  std::vector<EnsembleAccumulator> chunks;
  chunks.push_back(std::move(acc));
  return summarize(std::move(chunks), G, d).variance_ratio;
}

SchemeConditional scheme_conditional_law(SchemeKind scheme,
                                         const Eigen::MatrixXd& score_cov,
                                         const Eigen::MatrixXd& estimator_cov,
                                         int G) {
  if (G < 1) throw ConfigError("scheme_conditional_law: G must be >= 1");
  const int d = static_cast<int>(score_cov.rows());
  const Eigen::MatrixXd inv_score = score_cov.inverse();
  SchemeConditional out;
  switch (scheme) {
    case SchemeKind::discard:
      out.score_gain = inv_score;
      out.prev_gain = Eigen::MatrixXd::Zero(d, d);
      out.cond_cov = estimator_cov - inv_score;
      break;
    case SchemeKind::augment: {
      const double g = static_cast<double>(G);
      out.score_gain = inv_score / g;
      out.prev_gain = ((g - 1.0) / g) * Eigen::MatrixXd::Identity(d, d);
      out.cond_cov = (estimator_cov - inv_score) / (g * g);
      break;
    }
    default:
      throw UnsupportedSchemeError(
          "scheme_conditional_law: closed form available for discard/augment only");
  }
  out.cond_cov = symmetrized(out.cond_cov);
  return out;
}

Eigen::MatrixXd closed_form_variance(SchemeKind scheme,
                                     const Eigen::MatrixXd& estimator_cov,
                                     int G) {
  if (G < 1) throw ConfigError("closed_form_variance: G must be >= 1");
  switch (scheme) {
    case SchemeKind::discard:
      return static_cast<double>(G) * estimator_cov;
    case SchemeKind::augment: {
      double s = 0.0;
      for (int g = 1; g <= G; ++g) s += 1.0 / (static_cast<double>(g) * g);
      return s * estimator_cov;
    }
    default:
      throw UnsupportedSchemeError(
          "closed_form_variance: no closed form for this scheme");
  }
}

Eigen::MatrixXd variance_recursion(SchemeKind scheme,
                                   const Eigen::MatrixXd& score_cov,
                                   const Eigen::MatrixXd& estimator_cov, int G) {
  if (G < 1) throw ConfigError("variance_recursion: G must be >= 1");
  const int d = static_cast<int>(score_cov.rows());
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(d, d);
  // W_est(g) = a W_score(g) + b W_est(g-1) + xi with W_score(g) =
  // W_score_ref(g) + score_cov W_est(g-1); propagate
  // Var_g = a V_score a' + (a V_score + b) Var_{g-1} (a V_score + b)' + C.
  for (int g = 1; g <= G; ++g) {
    const SchemeConditional law =
        scheme_conditional_law(scheme, score_cov, estimator_cov, g);
    const Eigen::MatrixXd mix = law.score_gain * score_cov + law.prev_gain;
    var = law.score_gain * score_cov * law.score_gain.transpose() +
          mix * var * mix.transpose() + law.cond_cov;
    var = symmetrized(var);
  }
  return var;
}

}  // namespace csim
