#include <doctest.h>

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "expfam.hpp"

using namespace csim;

namespace {

EtaVec eta1(double v) {
  EtaVec e(1);
  e[0] = v;
  return e;
}

EtaVec eta2(double a, double b) {
  EtaVec e(2);
  e[0] = a;
  e[1] = b;
  return e;
}

// central-difference oracle for grad/hess of the log-partition
EtaVec fd_grad(const ExpFamilyModel& m, const EtaVec& eta, double h) {
  EtaVec g(eta.size());
  for (int i = 0; i < eta.size(); ++i) {
    EtaVec lo = eta, hi = eta;
    lo[i] -= h;
    hi[i] += h;
    g[i] = (m.log_partition(hi) - m.log_partition(lo)) / (2.0 * h);
  }
  return g;
}

EtaMat fd_hess(const ExpFamilyModel& m, const EtaVec& eta, double h) {
  EtaMat out(eta.size(), eta.size());
  for (int j = 0; j < eta.size(); ++j) {
    EtaVec lo = eta, hi = eta;
    lo[j] -= h;
    hi[j] += h;
    const EtaVec diff = (m.grad_log_partition(hi) - m.grad_log_partition(lo)) / (2.0 * h);
    out.col(j) = diff;
  }
  return out;
}

std::vector<EtaVec> domain_grid(const ExpFamilyModel& m) {
  std::vector<EtaVec> grid;
  if (m.dim_eta() == 1) {
    for (double v : {-2.0, -1.0, -0.3, 0.0, 0.5, 1.0, 2.0}) grid.push_back(eta1(v));
  } else {
    for (double a : {-1.0, 0.0, 1.0}) {
      for (double b : {-0.25, -0.5, -2.0}) grid.push_back(eta2(a, b));
    }
  }
  return grid;
}

std::vector<ExpFamilyModel> all_families() {
  return {ExpFamilyModel::gaussian_known_var(1.0), ExpFamilyModel::linear_unknown_var(),
          ExpFamilyModel::bernoulli_logit(), ExpFamilyModel::poisson_log()};
}

}  // namespace

TEST_CASE("log_partition closed forms") {
  CHECK(ExpFamilyModel::bernoulli_logit().log_partition(eta1(0.0)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ExpFamilyModel::gaussian_known_var(1.0).log_partition(eta1(0.0)) == 0.0);
  CHECK(ExpFamilyModel::poisson_log().log_partition(eta1(1.0)) ==
        doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("grad_log_partition closed forms and finite-difference oracle") {
  CHECK(ExpFamilyModel::bernoulli_logit().grad_log_partition(eta1(0.0))[0] ==
        doctest::Approx(0.5));
  CHECK(ExpFamilyModel::gaussian_known_var(1.0).grad_log_partition(eta1(1.5))[0] ==
        doctest::Approx(1.5));

  // sigmoid(2) frozen from the central-difference oracle, h = 1e-6
  const ExpFamilyModel bern = ExpFamilyModel::bernoulli_logit();
  const double fd = fd_grad(bern, eta1(2.0), 1e-6)[0];
  CHECK(bern.grad_log_partition(eta1(2.0))[0] == doctest::Approx(fd).epsilon(1e-8));
  CHECK(bern.grad_log_partition(eta1(2.0))[0] == doctest::Approx(0.880797).epsilon(1e-6));
}

TEST_CASE("hess_log_partition closed forms") {
  CHECK(ExpFamilyModel::bernoulli_logit().hess_log_partition(eta1(0.0))(0, 0) ==
        doctest::Approx(0.25));
  CHECK(ExpFamilyModel::gaussian_known_var(1.0).hess_log_partition(eta1(-3.7))(0, 0) ==
        doctest::Approx(1.0));

  // N(0,2) in canonical coordinates: eta = (mu/s2, -1/(2 s2)) = (0, -0.25);
  // oracle = closed moments of (Y, Y^2): Var Y = s2, Cov(Y,Y^2) = 2 mu s2,
  // Var Y^2 = 2 s2^2 + 4 mu^2 s2.
  const double mu = 0.0, s2 = 2.0;
  const EtaMat h =
      ExpFamilyModel::linear_unknown_var().hess_log_partition(eta2(0.0, -0.25));
  CHECK(h(0, 0) == doctest::Approx(s2).epsilon(1e-12));
  CHECK(h(0, 1) == doctest::Approx(2.0 * mu * s2).epsilon(1e-12));
  CHECK(h(1, 1) == doctest::Approx(2.0 * s2 * s2 + 4.0 * mu * mu * s2).epsilon(1e-12));
}

TEST_CASE("gradient and Hessian match finite differences on the domain grid") {
  for (const auto& m : all_families()) {
    for (const auto& eta : domain_grid(m)) {
      const EtaVec g = m.grad_log_partition(eta);
      const EtaVec g_fd = fd_grad(m, eta, 1e-5);
      for (int i = 0; i < g.size(); ++i) {
        CHECK(std::abs(g[i] - g_fd[i]) <= 1e-6 * std::max(1.0, std::abs(g[i])));
      }
      const EtaMat h = m.hess_log_partition(eta);
      const EtaMat h_fd = fd_hess(m, eta, 1e-5);
      for (int i = 0; i < h.rows(); ++i) {
        for (int j = 0; j < h.cols(); ++j) {
          CHECK(std::abs(h(i, j) - h_fd(i, j)) <=
                1e-5 * std::max(1.0, std::abs(h(i, j))));
        }
      }
    }
  }
}

TEST_CASE("Hessian is symmetric PSD on the domain grid") {
  for (const auto& m : all_families()) {
    for (const auto& eta : domain_grid(m)) {
      const EtaMat h = m.hess_log_partition(eta);
      CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(h)};
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
  }
}

TEST_CASE("Monte Carlo moments of T match grad and hess of A") {
  const std::int64_t n = 1000000;
  for (const auto& m : all_families()) {
    const EtaVec eta = m.dim_eta() == 2 ? eta2(0.4, -0.5) : eta1(0.3);
    rng::Stream rs = rng::root_key(2024).child(17).stream();
    const int d = m.dim_eta();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd sum4 = Eigen::VectorXd::Zero(d);  // for SE of the variance
    for (std::int64_t i = 0; i < n; ++i) {
      const EtaVec t = m.suff_stat(m.sample_response(eta, rs));
      sum += t;
      sum2.selfadjointView<Eigen::Lower>().rankUpdate(t, 1.0);
      for (int k = 0; k < d; ++k) sum4[k] += t[k] * t[k] * t[k] * t[k];
    }
    sum2.triangularView<Eigen::StrictlyUpper>() =
        sum2.triangularView<Eigen::StrictlyLower>().transpose();
    const Eigen::VectorXd mean = sum / static_cast<double>(n);
    const Eigen::MatrixXd cov =
        sum2 / static_cast<double>(n) - mean * mean.transpose();

    const EtaVec g = m.grad_log_partition(eta);
    const EtaMat h = m.hess_log_partition(eta);
    for (int k = 0; k < d; ++k) {
      const double se_mean = std::sqrt(h(k, k) / static_cast<double>(n));
      CHECK(std::abs(mean[k] - g[k]) <= 4.0 * se_mean);
      const double m2 = sum2(k, k) / static_cast<double>(n);
      const double m4 = sum4[k] / static_cast<double>(n);
      const double se_var = std::sqrt(std::max(m4 - m2 * m2, 0.0) / static_cast<double>(n));
      CHECK(std::abs(cov(k, k) - h(k, k)) <= 4.0 * se_var + 1e-9);
    }
  }
}

TEST_CASE("discrete densities sum to one") {
  const ExpFamilyModel bern = ExpFamilyModel::bernoulli_logit();
  const double bern_total = std::exp(bern.log_density(0.0, eta1(0.7))) +
                          std::exp(bern.log_density(1.0, eta1(0.7)));
  CHECK(bern_total == doctest::Approx(1.0).epsilon(1e-14));

  const ExpFamilyModel pois = ExpFamilyModel::poisson_log();
  double total = 0.0;
  for (int k = 0; k <= 80; ++k) {
    total += std::exp(pois.log_density(static_cast<double>(k), eta1(0.5)));
  }
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("log_density closed values") {
  CHECK(ExpFamilyModel::bernoulli_logit().log_density(1.0, eta1(0.0)) ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(ExpFamilyModel::gaussian_known_var(1.0).log_density(0.0, eta1(0.0)) ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
  CHECK(ExpFamilyModel::poisson_log().log_density(2.0, eta1(0.0)) ==
        doctest::Approx(-1.0 - std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("support errors") {
  CHECK_THROWS_AS(ExpFamilyModel::bernoulli_logit().log_density(0.5, eta1(0.0)),
                  SupportError);
  CHECK_THROWS_AS(ExpFamilyModel::poisson_log().log_density(-1.0, eta1(0.0)),
                  SupportError);
  CHECK_THROWS_AS(ExpFamilyModel::poisson_log().log_density(2.5, eta1(0.0)),
                  SupportError);
}

TEST_CASE("domain guard for the unknown-variance family") {
  const ExpFamilyModel lin = ExpFamilyModel::linear_unknown_var();
  CHECK(lin.in_domain(eta2(0.0, -0.25)));
  // precision 1/sigma^2 = -2 eta2 below 1e-8 is rejected, not clamped
  CHECK_FALSE(lin.in_domain(eta2(0.0, -1e-12)));
  CHECK_THROWS_AS(lin.log_partition(eta2(0.0, 1e-3)), DomainError);
  CHECK_THROWS_AS(lin.grad_log_partition(eta2(0.0, 0.0)), DomainError);
}

TEST_CASE("samplers hit saturated and moment targets") {
  const ExpFamilyModel bern = ExpFamilyModel::bernoulli_logit();
  rng::Stream rs1 = rng::root_key(5).child(1).stream();
  for (int i = 0; i < 10000; ++i) {
    CHECK(bern.sample_response(eta1(-50.0), rs1) == 0.0);
  }

  const ExpFamilyModel gauss = ExpFamilyModel::gaussian_known_var(1.0);
  rng::Stream rs2 = rng::root_key(5).child(2).stream();
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += gauss.sample_response(eta1(3.0), rs2);
  CHECK(std::abs(sum / n - 3.0) <= 0.004);  // 3 sigma / sqrt(n) plus margin

  // beta = 1, sigma^2 = 4 at x = 1: eta = (beta/s2, -1/(2 s2)) = (0.25, -0.125)
  const ExpFamilyModel lin = ExpFamilyModel::linear_unknown_var();
  rng::Stream rs3 = rng::root_key(5).child(3).stream();
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = lin.sample_response(eta2(0.25, -0.125), rs3);
    s += y;
    s2 += y * y;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(var - 4.0) / 4.0 <= 0.05);
  CHECK(std::abs(mean - 1.0) <= 0.01);
}

TEST_CASE("poisson sampler matches moments at large mean (split path)") {
  const ExpFamilyModel pois = ExpFamilyModel::poisson_log();
  rng::Stream rs = rng::root_key(5).child(4).stream();
  const double lambda = std::exp(6.6);  // ~ 735, exercises halving
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double y = pois.sample_response(eta1(6.6), rs);
    sum += y;
    sum2 += y * y;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - lambda) <= 4.0 * std::sqrt(lambda / n));
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(var - lambda) / lambda <= 0.05);
}

TEST_CASE("natural_param examples") {
  const FeatureMap logit = FeatureMap::glm(2);
  Eigen::VectorXd x(2), th(2);
  x << 1.0, 2.0;
  th << 0.5, -0.5;
  CHECK(logit.natural_param(x, th)[0] == doctest::Approx(-0.5));
  CHECK(logit.natural_param(x, Eigen::VectorXd::Zero(2))[0] == 0.0);

  const FeatureMap lin = FeatureMap::linear_model(1);
  Eigen::VectorXd x1(1), th1(2);
  x1 << 1.0;
  th1 << 0.25, 0.25;
  const Eigen::VectorXd eta = lin.natural_param(x1, th1);
  CHECK(eta[0] == doctest::Approx(0.25));
  CHECK(eta[1] == doctest::Approx(-0.125));

  CHECK_THROWS_AS(logit.natural_param(x1, th), DimensionError);
  CHECK_THROWS_AS(logit.natural_param(x, Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST_CASE("embed matches eta for the linear block matrix") {
  const FeatureMap lin = FeatureMap::linear_model(3);
  Eigen::VectorXd x(3), th(4);
  x << 1.0, -2.0, 0.5;
  th << 0.3, 0.1, -0.2, 2.0;
  const Eigen::MatrixXd embedded = lin.embed(x);
  CHECK(embedded.rows() == 2);
  CHECK(embedded.cols() == 4);
  CHECK(embedded(1, 3) == doctest::Approx(-0.5));
  const Eigen::VectorXd via_embed = embedded * th;
  const Eigen::VectorXd via_eta = lin.natural_param(x, th);
  CHECK((via_embed - via_eta).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("fixed designs cycle identically across generations") {
  Eigen::VectorXd p1(1), p2(1);
  p1 << 1.0;
  p2 << -1.0;
  const FeatureDistribution h = FeatureDistribution::fixed_design({p1, p2});
  rng::Stream rs = rng::root_key(9).child(1).stream();
  Eigen::MatrixXd gen_a(5, 1), gen_b(5, 1);
  h.fill_generation(gen_a, rs);
  h.fill_generation(gen_b, rs);
  CHECK((gen_a - gen_b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gen_a(0, 0) == 1.0);
  CHECK(gen_a(1, 0) == -1.0);
  CHECK(gen_a(2, 0) == 1.0);
}
