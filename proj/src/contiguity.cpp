#include "contiguity.hpp"

#include <cmath>

#include "errors.hpp"
#include "parallel.hpp"

namespace csim {

LikelihoodRatioRecord log_likelihood_ratio(
    const ExpFamilyModel& model, const FeatureMap& fmap, const Corpus& corpus,
    const std::vector<Eigen::VectorXd>& theta_hats,
    const Eigen::VectorXd& theta0) {
  const int G = static_cast<int>(corpus.size());
  if (G < 1) throw EmptyError("log_likelihood_ratio: empty corpus");
  if (static_cast<int>(theta_hats.size()) < G - 1) {
    throw DimensionError("log_likelihood_ratio: need theta_hat for every g <= G-1");
  }

  LikelihoodRatioRecord rec;
  rec.n = static_cast<int>(corpus[0].responses.size());
  rec.generations = G;
  rec.per_generation.assign(static_cast<std::size_t>(G), 0.0);

  for (int g = 2; g <= G; ++g) {
    const Eigen::VectorXd& th = theta_hats[static_cast<std::size_t>(g - 2)];
    const GenerationData& block = corpus[static_cast<std::size_t>(g - 1)];
    double contrib = 0.0;
    for (Eigen::Index i = 0; i < block.responses.size(); ++i) {
      const auto x = block.features.row(i);
      const EtaVec eta_hat = fmap.eta(x, th);
      const EtaVec eta0 = fmap.eta(x, theta0);
      model.require_domain(eta_hat);
      model.require_domain(eta0);
      const EtaVec t = model.suff_stat(block.responses[i]);
      contrib += (eta_hat - eta0).dot(t) -
                 (model.log_partition(eta_hat) - model.log_partition(eta0));
    }
    rec.per_generation[static_cast<std::size_t>(g - 1)] = contrib;
    rec.llr += contrib;
  }
  return rec;
}

double log_likelihood_ratio_quadratic(
    const ExpFamilyModel& model, const FeatureMap& fmap, const Corpus& corpus,
    const std::vector<Eigen::VectorXd>& theta_hats,
    const Eigen::VectorXd& theta0) {
  const int G = static_cast<int>(corpus.size());
  if (G < 1) throw EmptyError("log_likelihood_ratio_quadratic: empty corpus");
  if (static_cast<int>(theta_hats.size()) < G - 1) {
    throw DimensionError("log_likelihood_ratio_quadratic: missing theta_hat");
  }
  double total = 0.0;
  const int d = fmap.dim_theta();
  Eigen::VectorXd score(d);
  Eigen::MatrixXd curv_acc(d, d);
  for (int g = 2; g <= G; ++g) {
    const Eigen::VectorXd delta =
        theta_hats[static_cast<std::size_t>(g - 2)] - theta0;
    const GenerationData& block = corpus[static_cast<std::size_t>(g - 1)];
    score.setZero();
    curv_acc.setZero();
    for (Eigen::Index i = 0; i < block.responses.size(); ++i) {
      const auto x = block.features.row(i);
      const EtaVec eta0 = fmap.eta(x, theta0);
      model.require_domain(eta0);
      const EtaVec resid =
          model.suff_stat(block.responses[i]) - model.grad_log_partition(eta0);
      fmap.add_xt_vec(x, resid, 1.0, score);
      const EtaMat curv = model.hess_log_partition(eta0);
      fmap.add_xt_hess_x(x, curv, 1.0, curv_acc);
    }
    total += delta.dot(score) - 0.5 * delta.dot(curv_acc * delta);
  }
  return total;
}

ContiguityReport contiguity_check(const WorkflowConfig& cfg, int replications,
                                  int parallel_width) {
  cfg.validate();
  if (replications < 2) throw ConfigError("contiguity_check: replications must be >= 2");
  if (cfg.generations > kMaxContiguityGenerations) {
    throw ConfigError("contiguity_check: generations capped at 3 (heavy tails)");
  }

  std::vector<double> ratios(static_cast<std::size_t>(replications), 0.0);
  std::vector<int> excluded_flag(static_cast<std::size_t>(replications), 0);

  parallel_chunks(replications, 64, parallel_width, [&](std::int64_t, std::int64_t begin,
                                                        std::int64_t end) {
    for (std::int64_t r = begin; r < end; ++r) {
      const rng::StreamKey rep_key =
          rng::root_key(cfg.seed).child(static_cast<std::uint64_t>(r));
      Corpus corpus;
      std::vector<Eigen::VectorXd> theta_hats;
      bool ok = true;
      for (int g = 1; g <= cfg.generations && ok; ++g) {
        const rng::StreamKey gen_key = rep_key.child(static_cast<std::uint64_t>(g));
        GenerationData block;
        block.features.resize(cfg.n, cfg.fmap.dim_x_raw());
        block.responses.resize(cfg.n);
        {
          rng::Stream fs = gen_key.child(rng::Purpose::features).stream();
          cfg.features.fill_generation(block.features, fs);
        }
        {
          // reference law: every generation drawn at theta0
          rng::Stream ys = gen_key.child(rng::Purpose::responses).stream();
          for (int i = 0; i < cfg.n; ++i) {
            const EtaVec eta = cfg.fmap.eta(block.features.row(i), cfg.theta0);
            block.responses[i] = cfg.model.sample_response(eta, ys);
          }
        }
        corpus.push_back(std::move(block));
        if (g < cfg.generations) {
          rng::Stream ws = gen_key.child(rng::Purpose::weights).stream();
          const std::vector<double> weights =
              weights_for_generation(cfg.scheme, g, cfg.n, ws);
          try {
            const FitResult fit =
                fit_weighted_mle(cfg.model, cfg.fmap, corpus, weights, cfg.theta0);
            theta_hats.push_back(fit.theta_hat);
          } catch (const NumericError&) {
            ok = false;
          }
        }
      }
      if (!ok) {
        excluded_flag[static_cast<std::size_t>(r)] = 1;
        continue;
      }
      const LikelihoodRatioRecord rec = log_likelihood_ratio(
          cfg.model, cfg.fmap, corpus, theta_hats, cfg.theta0);
      ratios[static_cast<std::size_t>(r)] = std::exp(rec.llr);
    }
  });

  ContiguityReport report;
  report.n = cfg.n;
  report.generations = cfg.generations;
  report.replications = replications;
  report.scheme = scheme_label(cfg.scheme.kind);

  double sum = 0.0, sum2 = 0.0, max_val = 0.0;
  int used = 0;
  for (int r = 0; r < replications; ++r) {
    if (excluded_flag[static_cast<std::size_t>(r)]) {
      ++report.excluded;
      continue;
    }
    const double v = ratios[static_cast<std::size_t>(r)];
    sum += v;
    sum2 += v * v;
    max_val = std::max(max_val, v);
    ++used;
  }
  if (used < 2) throw DegenerateError("contiguity_check: not enough usable replications");
  report.mean_ratio = sum / used;
  const double var = std::max(0.0, sum2 / used - report.mean_ratio * report.mean_ratio);
  report.stderr_ = std::sqrt(var / used);
  report.max_share = sum > 0.0 ? max_val / sum : 0.0;
  report.inconclusive = report.max_share > kContiguityShareLimit;
  return report;
}

}  // namespace csim
