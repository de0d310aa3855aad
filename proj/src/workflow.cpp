#include "workflow.hpp"

#include <cmath>
#include <numeric>

#include "errors.hpp"
#include "parallel.hpp"

namespace csim {

std::string scheme_label(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::discard: return "discard";
    case SchemeKind::augment: return "augment";
    case SchemeKind::subsample: return "subsample";
    case SchemeKind::custom: return "custom";
  }
  return "unknown";
}

std::vector<double> weights_for_generation(const WeightScheme& scheme, int G,
                                           int n, rng::Stream& rs) {
  if (G < 1 || n < 1) throw ConfigError("weights_for_generation: G and n must be >= 1");
  const std::size_t total = static_cast<std::size_t>(G) * static_cast<std::size_t>(n);
  std::vector<double> w(total, 0.0);
  switch (scheme.kind) {
    case SchemeKind::discard:
      std::fill(w.end() - n, w.end(), 1.0);
      break;
    case SchemeKind::augment:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    case SchemeKind::subsample: {
      // Fisher-Yates partial shuffle: the first n entries of a uniformly
      // shuffled index set get weight 1.
      std::vector<std::size_t> idx(total);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        const std::size_t j = i + rs.uniform_below(total - i);
        std::swap(idx[i], idx[j]);
        w[idx[i]] = 1.0;
      }
      break;
    }
    case SchemeKind::custom: {
      if (!scheme.custom_rule) throw ConfigError("custom scheme without a rule");
      std::size_t k = 0;
      for (int g = 1; g <= G; ++g) {
        for (int i = 0; i < n; ++i) {
          const double wi = scheme.custom_rule(G, g, i, rs);
          if (wi < 0.0 || !std::isfinite(wi)) {
            throw DomainError("custom weight rule produced an invalid weight");
          }
          w[k++] = wi;
        }
      }
      break;
    }
  }
  return w;
}

void WorkflowConfig::validate() const {
  if (n < fmap.dim_theta() + 1) {
    throw ConfigError("WorkflowConfig: n must be >= dim_theta + 1");
  }
  if (generations < 1) throw ConfigError("WorkflowConfig: generations must be >= 1");
  if (theta0.size() != fmap.dim_theta()) {
    throw ConfigError("WorkflowConfig: theta0 dimension does not match the feature map");
  }
  if (features.dim() != fmap.dim_x_raw()) {
    throw ConfigError("WorkflowConfig: feature distribution dimension mismatch");
  }
  if (model.dim_eta() != fmap.dim_eta()) {
    throw ConfigError("WorkflowConfig: model and feature map disagree on dim_eta");
  }
  if (estimator == EstimatorKind::linear_closed_form &&
      model.family() != Family::linear_unknown_var) {
    throw ConfigError("linear_closed_form estimator requires linear_unknown_var");
  }
  if (estimator == EstimatorKind::median &&
      (model.family() != Family::gaussian_known_var || fmap.dim_theta() != 1)) {
    throw ConfigError("median estimator requires scalar gaussian_known_var");
  }
  if (scheme.kind == SchemeKind::custom && !scheme.custom_rule) {
    throw ConfigError("custom scheme without a rule");
  }
}

namespace {

// Weight shared by every point of one generation block, or nullopt if the
// block is not constant-weight.
std::vector<std::pair<bool, double>> block_weights(const std::vector<double>& w,
                                                   int G, int n) {
  std::vector<std::pair<bool, double>> out(static_cast<std::size_t>(G));
  for (int g = 0; g < G; ++g) {
    const double w0 = w[static_cast<std::size_t>(g) * n];
    bool constant = true;
    for (int i = 1; i < n; ++i) {
      if (w[static_cast<std::size_t>(g) * n + i] != w0) {
        constant = false;
        break;
      }
    }
    out[static_cast<std::size_t>(g)] = {constant, w0};
  }
  return out;
}

Eigen::VectorXd fit_generation(const WorkflowConfig& cfg, const Corpus& corpus,
                               const std::vector<LinearSuffStats>& blocks,
                               const std::vector<double>& weights, int G,
                               GenerationRecord& rec) {
  switch (cfg.estimator) {
    case EstimatorKind::mle: {
      NewtonOptions opts;
      FitResult fit;
      try {
        fit = fit_weighted_mle(cfg.model, cfg.fmap, corpus, weights, cfg.theta0, opts);
      } catch (const SeparationError&) {
        if (!cfg.separation_fallback) throw;
        opts.ridge = 1e-8;
        fit = fit_weighted_mle(cfg.model, cfg.fmap, corpus, weights, cfg.theta0, opts);
      }
      rec.converged = fit.converged;
      rec.iterations = fit.iterations;
      rec.grad_norm = fit.final_grad_norm;
      if (cfg.model.family() == Family::linear_unknown_var) {
        rec.sigma2_hat = 1.0 / fit.theta_hat[fit.theta_hat.size() - 1];
      }
      return fit.theta_hat;
    }
    case EstimatorKind::linear_closed_form: {
      const int d_raw = cfg.fmap.dim_x_raw();
      LinearSuffStats stats(d_raw);
      const auto per_block = block_weights(weights, G, cfg.n);
      for (int g = 0; g < G; ++g) {
        if (per_block[static_cast<std::size_t>(g)].first) {
          stats.add_scaled(blocks[static_cast<std::size_t>(g)],
                           per_block[static_cast<std::size_t>(g)].second);
        } else {
          stats.accumulate_rows(corpus[static_cast<std::size_t>(g)].features,
                                corpus[static_cast<std::size_t>(g)].responses,
                                weights.data() + static_cast<std::size_t>(g) * cfg.n);
        }
      }
      const LinearFit fit = fit_linear_from_stats(stats);
      rec.sigma2_hat = fit.sigma2_hat;
      return fit.theta_hat;
    }
    case EstimatorKind::median: {
      std::vector<std::pair<double, double>> values;
      values.reserve(static_cast<std::size_t>(G) * cfg.n);
      std::size_t k = 0;
      for (const auto& block : corpus) {
        for (Eigen::Index i = 0; i < block.responses.size(); ++i) {
          values.emplace_back(block.responses[i], weights[k++]);
        }
      }
      const double mu_hat = fit_weighted_median(std::move(values));
      Eigen::VectorXd theta(1);
      theta[0] = mu_hat / cfg.model.fixed_sigma2();
      return theta;
    }
  }
  throw ConfigError("unknown estimator");
}

}  // namespace

TrajectoryRecord run_workflow(const WorkflowConfig& cfg, std::uint64_t replication) {
  cfg.validate();
  const rng::StreamKey rep_key = rng::root_key(cfg.seed).child(replication);
  const int n = cfg.n;
  const bool cache_blocks = cfg.estimator == EstimatorKind::linear_closed_form;

  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(cfg.generations));
  std::vector<LinearSuffStats> blocks;

  TrajectoryRecord out;
  out.generations.reserve(static_cast<std::size_t>(cfg.generations));
  Eigen::VectorXd source_theta = cfg.theta0;  // generation 1 is real data
  bool degenerate = false;

  for (int g = 1; g <= cfg.generations; ++g) {
    GenerationRecord rec;
    rec.corpus_size = static_cast<std::int64_t>(g) * n;
    if (degenerate) {
      rec.degenerate = true;
      out.generations.push_back(std::move(rec));
      continue;
    }

    const rng::StreamKey gen_key = rep_key.child(static_cast<std::uint64_t>(g));
    GenerationData block;
    block.features.resize(n, cfg.fmap.dim_x_raw());
    block.responses.resize(n);
    {
      rng::Stream fs = gen_key.child(rng::Purpose::features).stream();
      cfg.features.fill_generation(block.features, fs);
    }
    {
      rng::Stream ys = gen_key.child(rng::Purpose::responses).stream();
      for (int i = 0; i < n; ++i) {
        const EtaVec eta = cfg.fmap.eta(block.features.row(i), source_theta);
        block.responses[i] = cfg.model.sample_response(eta, ys);
      }
    }
    corpus.push_back(std::move(block));
    if (cache_blocks) {
      LinearSuffStats stats(cfg.fmap.dim_x_raw());
      stats.accumulate(corpus.back().features, corpus.back().responses, 1.0);
      blocks.push_back(std::move(stats));
    }

    rng::Stream ws = gen_key.child(rng::Purpose::weights).stream();
    const std::vector<double> weights = weights_for_generation(cfg.scheme, g, n, ws);
    try {
      rec.theta_hat = fit_generation(cfg, corpus, blocks, weights, g, rec);
      source_theta = rec.theta_hat;
    } catch (const NumericError&) {
      rec.degenerate = true;
      degenerate = true;
    }
    out.generations.push_back(std::move(rec));
  }

  if (cfg.keep_corpus) out.corpus = std::move(corpus);
  return out;
}

EnsembleResult run_ensemble(const WorkflowConfig& cfg, int replications,
                            int parallel_width) {
  cfg.validate();
  if (replications < 2) throw ConfigError("run_ensemble: replications must be >= 2");

  EnsembleResult res;
  res.n = cfg.n;
  res.generations = cfg.generations;
  res.replications = replications;
  res.dim_theta = cfg.fmap.dim_theta();
  res.scheme = cfg.scheme.kind;
  res.theta0 = cfg.theta0;
  res.trajectories.resize(static_cast<std::size_t>(replications));

  parallel_chunks(replications, 16, parallel_width,
                  [&](std::int64_t, std::int64_t begin, std::int64_t end) {
                    for (std::int64_t r = begin; r < end; ++r) {
                      res.trajectories[static_cast<std::size_t>(r)] =
                          run_workflow(cfg, static_cast<std::uint64_t>(r));
                    }
                  });

  const int gmax = cfg.generations;
  const int d = res.dim_theta;
  res.effective_replications.assign(static_cast<std::size_t>(gmax), 0);
  res.trace_mse = Eigen::VectorXd::Zero(gmax);
  res.fraction_degenerate = Eigen::VectorXd::Zero(gmax);
  res.median_sigma2 =
      Eigen::VectorXd::Constant(gmax, std::numeric_limits<double>::quiet_NaN());
  res.theta_cov.assign(static_cast<std::size_t>(gmax), Eigen::MatrixXd::Zero(d, d));

  RatioAccumulator acc(gmax);
  std::vector<double> t_traj(static_cast<std::size_t>(gmax));
  for (int g = 0; g < gmax; ++g) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
    std::vector<double> sigma2s;
    int live = 0;
    for (const auto& traj : res.trajectories) {
      const auto& rec = traj.generations[static_cast<std::size_t>(g)];
      if (rec.degenerate) continue;
      ++live;
      const Eigen::VectorXd dev = rec.theta_hat - cfg.theta0;
      res.trace_mse[g] += dev.squaredNorm();
      mean += dev;
      second.selfadjointView<Eigen::Lower>().rankUpdate(dev, 1.0);
      if (std::isfinite(rec.sigma2_hat)) sigma2s.push_back(rec.sigma2_hat);
    }
    res.effective_replications[static_cast<std::size_t>(g)] = live;
    res.fraction_degenerate[g] =
        1.0 - static_cast<double>(live) / static_cast<double>(replications);
    if (live > 0) {
      res.trace_mse[g] /= static_cast<double>(live);
      mean /= static_cast<double>(live);
      second.triangularView<Eigen::StrictlyUpper>() =
          second.triangularView<Eigen::StrictlyLower>().transpose();
      res.theta_cov[static_cast<std::size_t>(g)] =
          second / static_cast<double>(live) - mean * mean.transpose();
    }
    if (!sigma2s.empty()) res.median_sigma2[g] = median_of(std::move(sigma2s));
  }

  // ratio curve over trajectories that stay non-degenerate throughout
  for (const auto& traj : res.trajectories) {
    bool full = true;
    for (int g = 0; g < gmax; ++g) {
      const auto& rec = traj.generations[static_cast<std::size_t>(g)];
      if (rec.degenerate) {
        full = false;
        break;
      }
      t_traj[static_cast<std::size_t>(g)] = (rec.theta_hat - cfg.theta0).squaredNorm();
    }
    if (full) acc.add_trajectory(t_traj);
  }
  res.mse_ratio = ratio_curve_from_moments(acc);
  return res;
}

}  // namespace csim
