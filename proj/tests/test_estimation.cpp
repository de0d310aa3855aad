#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "estimation.hpp"

using namespace csim;

namespace {

WeightedSample make_sample(const std::vector<double>& xs,
                           const std::vector<double>& ys,
                           const std::vector<double>& ws) {
  WeightedSample s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    SamplePoint p;
    p.x_raw = Eigen::VectorXd::Constant(1, xs[i]);
    p.y = ys[i];
    p.weight = ws.empty() ? 1.0 : ws[i];
    p.gen = 1;
    p.idx = static_cast<int>(i);
    s.points.push_back(std::move(p));
  }
  return s;
}

// mean weighted negative log-likelihood (the fit's objective)
double weighted_loss(const ExpFamilyModel& m, const FeatureMap& fmap,
                     const WeightedSample& s, const Eigen::VectorXd& theta) {
  double loss = 0.0, wsum = 0.0;
  for (const auto& p : s.points) {
    const EtaVec eta = fmap.eta(p.x_raw, theta);
    loss += p.weight * (m.log_partition(eta) - eta.dot(m.suff_stat(p.y)));
    wsum += p.weight;
  }
  return loss / wsum;
}

}  // namespace

TEST_CASE("gaussian MLE with unit weights is the sample mean") {
  const auto model = ExpFamilyModel::gaussian_known_var(1.0);
  const auto fmap = FeatureMap::glm(1);
  const auto sample = make_sample({1, 1, 1}, {1, 2, 3}, {});
  const FitResult fit =
      fit_weighted_mle(model, fmap, sample, Eigen::VectorXd::Zero(1));
  CHECK(fit.converged);
  CHECK(fit.theta_hat[0] == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("logistic fit on symmetric data is zero") {
  const auto model = ExpFamilyModel::bernoulli_logit();
  const auto fmap = FeatureMap::glm(1);
  const auto sample = make_sample({1, 1, -1, -1}, {1, 0, 1, 0}, {});
  const FitResult fit =
      fit_weighted_mle(model, fmap, sample, Eigen::VectorXd::Zero(1));
  CHECK(fit.converged);
  CHECK(std::abs(fit.theta_hat[0]) <= 1e-10);
}

TEST_CASE("logistic intercept-only 3:1 fit equals log 3") {
  const auto model = ExpFamilyModel::bernoulli_logit();
  const auto fmap = FeatureMap::glm(1);
  const auto sample = make_sample({1, 1, 1, 1}, {1, 1, 1, 0}, {});
  const FitResult fit =
      fit_weighted_mle(model, fmap, sample, Eigen::VectorXd::Zero(1));
  CHECK(fit.converged);
  CHECK(fit.theta_hat[0] == doctest::Approx(std::log(3.0)).epsilon(1e-9));

  // grid-search oracle over [0, 2], step 1e-4
  double best = 0.0, best_loss = weighted_loss(model, fmap, sample,
                                               Eigen::VectorXd::Zero(1));
  for (double t = 0.0; t <= 2.0; t += 1e-4) {
    const double l =
        weighted_loss(model, fmap, sample, Eigen::VectorXd::Constant(1, t));
    if (l < best_loss) {
      best_loss = l;
      best = t;
    }
  }
  CHECK(std::abs(best - fit.theta_hat[0]) <= 2e-4);
}

TEST_CASE("fit converges with a reported gradient norm below tolerance") {
  const auto model = ExpFamilyModel::poisson_log();
  const auto fmap = FeatureMap::glm(1);
  const auto sample = make_sample({1, 1, 1, 1}, {0, 1, 2, 4}, {});
  const FitResult fit =
      fit_weighted_mle(model, fmap, sample, Eigen::VectorXd::Zero(1));
  CHECK(fit.converged);
  const double loss = weighted_loss(model, fmap, sample, fit.theta_hat);
  CHECK(fit.final_grad_norm <= 1e-10 * std::max(1.0, std::abs(loss)));
  CHECK(fit.theta_hat[0] == doctest::Approx(std::log(7.0 / 4.0)).epsilon(1e-9));
}

TEST_CASE("linear gaussian fit: perfect fit raises DegenerateVarianceError") {
  const auto sample = make_sample({1, 2, 3}, {1, 2, 3}, {});
  CHECK_THROWS_AS(fit_linear_gaussian(sample), DegenerateVarianceError);
}

TEST_CASE("linear gaussian fit: hand-solved normal equations") {
  const auto sample = make_sample({1, -1, 1, -1}, {0, 0, 2, -2}, {});
  const LinearFit fit = fit_linear_gaussian(sample);
  CHECK(fit.beta_hat[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.sigma2_hat == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.theta_hat[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.theta_hat[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("linear gaussian fit: zero weights reduce to a residual-free pair") {
  const auto sample = make_sample({1, -1, 1, -1}, {0, 0, 2, -2}, {1, 1, 0, 0});
  CHECK_THROWS_AS(fit_linear_gaussian(sample), DegenerateVarianceError);
}

TEST_CASE("linear gaussian fit: collinear design raises SingularDesignError") {
  WeightedSample s;
  for (int i = 0; i < 6; ++i) {
    SamplePoint p;
    p.x_raw = Eigen::VectorXd(2);
    p.x_raw << 1.0, 2.0;  // identical rows: rank-1 Gram
    p.y = i;
    s.points.push_back(std::move(p));
  }
  CHECK_THROWS_AS(fit_linear_gaussian(s), SingularDesignError);
}

TEST_CASE("weighted median conventions") {
  CHECK(fit_weighted_median({{1, 1}, {2, 1}, {3, 1}}) == 2.0);
  CHECK(fit_weighted_median({{1, 1}, {2, 1}, {3, 1}, {4, 1}}) == 2.0);
  CHECK(fit_weighted_median({{1, 5}, {2, 1}, {3, 1}}) == 1.0);
  CHECK_THROWS_AS(fit_weighted_median({}), EmptyError);
  CHECK_THROWS_AS(fit_weighted_median({{1.0, 0.0}}), EmptyError);
}

TEST_CASE("unweighted median equals the order-statistic lower median") {
  rng::Stream rs = rng::root_key(31).child(1).stream();
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rs.uniform_below(40));
    std::vector<std::pair<double, double>> vals;
    std::vector<double> plain;
    for (int i = 0; i < n; ++i) {
      const double v = rs.normal();
      vals.push_back({v, 1.0});
      plain.push_back(v);
    }
    std::sort(plain.begin(), plain.end());
    const double expected = plain[(plain.size() - 1) / 2];
    CHECK(fit_weighted_median(vals) == expected);
  }
}

TEST_CASE("sandwich variance closed forms") {
  rng::Stream rs = rng::root_key(77).child(1).stream();
  const auto intercept =
      FeatureDistribution::fixed_design({Eigen::VectorXd::Ones(1)});

  const Eigen::MatrixXd v_gauss = sandwich_variance(
      ExpFamilyModel::gaussian_known_var(1.0), FeatureMap::glm(1), LossKind::mle,
      Eigen::VectorXd::Zero(1), intercept, 10000, rs);
  CHECK(v_gauss(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  const Eigen::MatrixXd v_med = sandwich_variance(
      ExpFamilyModel::gaussian_known_var(1.0), FeatureMap::glm(1),
      LossKind::median, Eigen::VectorXd::Zero(1), intercept, 10000, rs);
  CHECK(v_med(0, 0) == doctest::Approx(M_PI / 2.0).epsilon(1e-12));

  const Eigen::MatrixXd v_bern = sandwich_variance(
      ExpFamilyModel::bernoulli_logit(), FeatureMap::glm(1), LossKind::mle,
      Eigen::VectorXd::Zero(1), intercept, 50000, rs);
  // at p = 1/2 the per-sample meat is constant, so the Monte Carlo sandwich
  // equals the inverse Fisher information exactly
  CHECK(v_bern(0, 0) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("median asymptotic variance matches the replicated-median oracle") {
  // n * Var(median of n standard normals), n = 1e4, 1e4 replications
  const int n = 10000, reps = 10000;
  rng::Stream rs = rng::root_key(314).child(9).stream();
  std::vector<double> buf(static_cast<std::size_t>(n));
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    for (auto& v : buf) v = rs.normal();
    const auto mid = buf.begin() + (n - 1) / 2;
    std::nth_element(buf.begin(), mid, buf.end());
    sum += *mid;
    sum2 += *mid * *mid;
  }
  const double mean = sum / reps;
  const double oracle = n * (sum2 / reps - mean * mean);

  rng::Stream rs2 = rng::root_key(77).child(2).stream();
  const Eigen::MatrixXd v_med = sandwich_variance(
      ExpFamilyModel::gaussian_known_var(1.0), FeatureMap::glm(1),
      LossKind::median, Eigen::VectorXd::Zero(1),
      FeatureDistribution::fixed_design({Eigen::VectorXd::Ones(1)}), 10000, rs2);
  CHECK(std::abs(oracle - v_med(0, 0)) / v_med(0, 0) <= 0.03);
}

TEST_CASE("MC sandwich equals inverse Fisher information within MC error") {
  rng::Stream rs = rng::root_key(77).child(3).stream();
  const auto h = FeatureDistribution::standard_normal(2);
  Eigen::VectorXd theta0(2);
  theta0 << 0.5, -0.25;
  const Eigen::MatrixXd v = sandwich_variance(ExpFamilyModel::bernoulli_logit(),
                                              FeatureMap::glm(2), LossKind::mle,
                                              theta0, h, 400000, rs);
  // independent oracle: inverse Fisher information by separate Monte Carlo
  rng::Stream rs2 = rng::root_key(77).child(4).stream();
  const auto model = ExpFamilyModel::bernoulli_logit();
  const auto fmap = FeatureMap::glm(2);
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(2, 2);
  const int m = 400000;
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd x = h.draw(0, rs2);
    const EtaVec eta = fmap.eta(x, theta0);
    const EtaMat curv = model.hess_log_partition(eta);
    fmap.add_xt_hess_x(x, curv, 1.0 / m, info);
  }
  const Eigen::MatrixXd oracle = info.inverse();
  CHECK((v - oracle).cwiseAbs().maxCoeff() <= 0.05 * oracle.cwiseAbs().maxCoeff());
}

TEST_CASE("optimality: random perturbations never reduce the weighted loss") {
  rng::Stream rs = rng::root_key(88).child(1).stream();
  for (const auto& model :
       {ExpFamilyModel::bernoulli_logit(), ExpFamilyModel::poisson_log(),
        ExpFamilyModel::gaussian_known_var(1.0)}) {
    const auto fmap = FeatureMap::glm(2);
    WeightedSample s;
    for (int i = 0; i < 60; ++i) {
      SamplePoint p;
      p.x_raw = Eigen::VectorXd(2);
      p.x_raw << 1.0, rs.normal();
      EtaVec eta(1);
      eta[0] = 0.2 * p.x_raw[1];
      p.y = model.sample_response(eta, rs);
      p.weight = 0.25 + rs.uniform();
      s.points.push_back(std::move(p));
    }
    const FitResult fit =
        fit_weighted_mle(model, fmap, s, Eigen::VectorXd::Zero(2));
    REQUIRE(fit.converged);
    const double loss = weighted_loss(model, fmap, s, fit.theta_hat);
    CHECK(fit.final_grad_norm <= 1e-10 * std::max(1.0, std::abs(loss)));
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd dir(2);
      dir << rs.normal(), rs.normal();
      dir.normalize();
      for (double sign : {-1.0, 1.0}) {
        const double perturbed =
            weighted_loss(model, fmap, s, fit.theta_hat + sign * 1e-3 * dir);
        CHECK(perturbed >= loss - 1e-12);
      }
    }
  }
}

TEST_CASE("closed-form linear fit agrees with the natural-parameter MLE") {
  rng::Stream rs = rng::root_key(88).child(2).stream();
  const auto model = ExpFamilyModel::linear_unknown_var();
  const auto fmap = FeatureMap::linear_model(3);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    WeightedSample s;
    Eigen::VectorXd beta(3);
    beta << 1.0, -0.5, 0.25;
    for (int i = 0; i < 50; ++i) {
      SamplePoint p;
      p.x_raw = Eigen::VectorXd(3);
      p.x_raw << 1.0, rs.normal(), rs.normal();
      p.y = p.x_raw.dot(beta) + 0.8 * rs.normal();
      p.weight = 0.5 + rs.uniform();
      s.points.push_back(std::move(p));
    }
    const LinearFit closed = fit_linear_gaussian(s);
    Eigen::VectorXd init(4);
    init << beta / 0.64, 1.0 / 0.64;
    const FitResult mle = fit_weighted_mle(model, fmap, s, init);
    REQUIRE(mle.converged);
    CHECK((closed.theta_hat - mle.theta_hat).cwiseAbs().maxCoeff() <=
          1e-8 * std::max(1.0, closed.theta_hat.cwiseAbs().maxCoeff()));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("weight homogeneity: scaling weights leaves the argmin unchanged") {
  rng::Stream rs = rng::root_key(88).child(3).stream();
  const auto model = ExpFamilyModel::bernoulli_logit();
  const auto fmap = FeatureMap::glm(2);
  WeightedSample s;
  for (int i = 0; i < 80; ++i) {
    SamplePoint p;
    p.x_raw = Eigen::VectorXd(2);
    p.x_raw << 1.0, rs.normal();
    p.y = rs.uniform() < 0.5 ? 1.0 : 0.0;
    p.weight = 0.1 + rs.uniform();
    s.points.push_back(std::move(p));
  }
  const FitResult base = fit_weighted_mle(model, fmap, s, Eigen::VectorXd::Zero(2));
  for (double c : {0.02, 3.0, 1000.0}) {
    WeightedSample scaled = s;
    for (auto& p : scaled.points) p.weight *= c;
    const FitResult fit =
        fit_weighted_mle(model, fmap, scaled, Eigen::VectorXd::Zero(2));
    CHECK((fit.theta_hat - base.theta_hat).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("zero-weight points never affect the fit") {
  rng::Stream rs = rng::root_key(88).child(4).stream();
  const auto model = ExpFamilyModel::poisson_log();
  const auto fmap = FeatureMap::glm(1);
  WeightedSample full, filtered;
  for (int i = 0; i < 40; ++i) {
    SamplePoint p;
    p.x_raw = Eigen::VectorXd::Ones(1);
    EtaVec eta(1);
    eta[0] = 0.4;
    p.y = model.sample_response(eta, rs);
    p.weight = (i % 3 == 0) ? 0.0 : 1.0;
    full.points.push_back(p);
    if (p.weight > 0.0) filtered.points.push_back(p);
  }
  const FitResult a = fit_weighted_mle(model, fmap, full, Eigen::VectorXd::Zero(1));
  const FitResult b =
      fit_weighted_mle(model, fmap, filtered, Eigen::VectorXd::Zero(1));
  CHECK((a.theta_hat - b.theta_hat).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("separated logistic data raises SeparationError; ridge fallback fits") {
  const auto model = ExpFamilyModel::bernoulli_logit();
  const auto fmap = FeatureMap::glm(1);
  const auto sample = make_sample({1, 2, -1, -2}, {1, 1, 0, 0}, {});
  CHECK_THROWS_AS(
      fit_weighted_mle(model, fmap, sample, Eigen::VectorXd::Zero(1)),
      SeparationError);

  NewtonOptions opts;
  opts.ridge = 1e-8;
  const FitResult fit =
      fit_weighted_mle(model, fmap, sample, Eigen::VectorXd::Zero(1), opts);
  CHECK(fit.theta_hat[0] > 5.0);  // saturated but finite
}

TEST_CASE("observed information is symmetric PSD at the optimum") {
  rng::Stream rs = rng::root_key(88).child(5).stream();
  const auto model = ExpFamilyModel::bernoulli_logit();
  const auto fmap = FeatureMap::glm(2);
  WeightedSample s;
  for (int i = 0; i < 100; ++i) {
    SamplePoint p;
    p.x_raw = Eigen::VectorXd(2);
    p.x_raw << 1.0, rs.normal();
    p.y = rs.uniform() < 0.4 ? 1.0 : 0.0;
    s.points.push_back(std::move(p));
  }
  const FitResult fit = fit_weighted_mle(model, fmap, s, Eigen::VectorXd::Zero(2));
  const Eigen::MatrixXd info = fit.observed_information;
  CHECK((info - info.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("empty or all-zero-weight samples are rejected") {
  const auto model = ExpFamilyModel::gaussian_known_var(1.0);
  const auto fmap = FeatureMap::glm(1);
  WeightedSample empty;
  CHECK_THROWS_AS(fit_weighted_mle(model, fmap, empty, Eigen::VectorXd::Zero(1)),
                  EmptyError);
  const auto zeros = make_sample({1, 1}, {0, 1}, {0, 0});
  CHECK_THROWS_AS(fit_weighted_mle(model, fmap, zeros, Eigen::VectorXd::Zero(1)),
                  EmptyError);
  CHECK_THROWS_AS(fit_linear_gaussian(zeros), EmptyError);
}
