#include "expfam.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "errors.hpp"

namespace csim {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double softplus(double x) {
  // log(1 + e^x) without overflow.
  if (x > 36.0) return x + std::exp(-x);
  if (x < -36.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_factorial(double k) {
  return std::lgamma(k + 1.0);
}

// Poisson sampler by CDF inversion; for large means the variate is split
// into halves so the running cumulative never underflows.
double poisson_draw(double lambda, rng::Stream& rs) {
  if (lambda <= 0.0) return 0.0;
  if (lambda > 400.0) {
    return poisson_draw(lambda / 2.0, rs) + poisson_draw(lambda / 2.0, rs);
  }
  const double u = rs.uniform();
  double p = std::exp(-lambda);
  double cum = p;
  double k = 0.0;
  while (u > cum && k < 20000.0) {
    k += 1.0;
    p *= lambda / k;
    cum += p;
  }
  return k;
}

}  // namespace

ExpFamilyModel ExpFamilyModel::gaussian_known_var(double sigma2) {
  if (!(sigma2 > 0.0)) throw DomainError("gaussian_known_var: sigma2 must be positive");
  return ExpFamilyModel(Family::gaussian_known_var, sigma2);
}

ExpFamilyModel ExpFamilyModel::linear_unknown_var() {
  return ExpFamilyModel(Family::linear_unknown_var, 0.0);
}

ExpFamilyModel ExpFamilyModel::bernoulli_logit() {
  return ExpFamilyModel(Family::bernoulli_logit, 0.0);
}

ExpFamilyModel ExpFamilyModel::poisson_log() {
  return ExpFamilyModel(Family::poisson_log, 0.0);
}

bool ExpFamilyModel::in_domain(const EtaVec& eta) const {
  if (eta.size() != dim_eta()) return false;
  if (!eta.allFinite()) return false;
  if (family_ == Family::linear_unknown_var) {
    // precision 1/sigma^2 = -2 eta2 must stay >= kMinPrecision
    return eta[1] <= -0.5 * kMinPrecision;
  }
  return true;
}

void ExpFamilyModel::require_domain(const EtaVec& eta) const {
  if (!in_domain(eta)) {
    std::ostringstream os;
    os << "natural parameter outside the family domain: [";
    for (int i = 0; i < eta.size(); ++i) os << (i ? ", " : "") << eta[i];
    os << "]";
    throw DomainError(os.str());
  }
}

double ExpFamilyModel::log_partition(const EtaVec& eta) const {
  require_domain(eta);
  switch (family_) {
    case Family::gaussian_known_var:
      return 0.5 * eta[0] * eta[0] * sigma2_;
    case Family::linear_unknown_var:
      return -eta[0] * eta[0] / (4.0 * eta[1]) - 0.5 * std::log(-2.0 * eta[1]);
    case Family::bernoulli_logit:
      return softplus(eta[0]);
    case Family::poisson_log:
      return std::exp(eta[0]);
  }
  return 0.0;
}

EtaVec ExpFamilyModel::grad_log_partition(const EtaVec& eta) const {
  require_domain(eta);
  EtaVec g(dim_eta());
  switch (family_) {
    case Family::gaussian_known_var:
      g[0] = eta[0] * sigma2_;
      break;
    case Family::linear_unknown_var: {
      const double mu = -eta[0] / (2.0 * eta[1]);
      const double s2 = -1.0 / (2.0 * eta[1]);
      g[0] = mu;            // E y
      g[1] = mu * mu + s2;  // E y^2
      break;
    }
    case Family::bernoulli_logit:
      g[0] = sigmoid(eta[0]);
      break;
    case Family::poisson_log:
      g[0] = std::exp(eta[0]);
      break;
  }
  return g;
}

EtaMat ExpFamilyModel::hess_log_partition(const EtaVec& eta) const {
  require_domain(eta);
  EtaMat h(dim_eta(), dim_eta());
  switch (family_) {
    case Family::gaussian_known_var:
      h(0, 0) = sigma2_;
      break;
    case Family::linear_unknown_var: {
      const double mu = -eta[0] / (2.0 * eta[1]);
      const double s2 = -1.0 / (2.0 * eta[1]);
      h(0, 0) = s2;                           // Var y
      h(0, 1) = h(1, 0) = 2.0 * mu * s2;      // Cov(y, y^2)
      h(1, 1) = 2.0 * s2 * s2 + 4.0 * mu * mu * s2;  // Var y^2
      break;
    }
    case Family::bernoulli_logit: {
      const double p = sigmoid(eta[0]);
      h(0, 0) = p * (1.0 - p);
      break;
    }
    case Family::poisson_log:
      h(0, 0) = std::exp(eta[0]);
      break;
  }
  return h;
}

EtaVec ExpFamilyModel::suff_stat(double y) const {
  EtaVec t(dim_eta());
  if (family_ == Family::linear_unknown_var) {
    t[0] = y;
    t[1] = y * y;
  } else {
    t[0] = y;
  }
  return t;
}

double ExpFamilyModel::log_carrier(double y) const {
  switch (family_) {
    case Family::gaussian_known_var:
      return -0.5 * y * y / sigma2_ - 0.5 * std::log(sigma2_) - 0.5 * kLog2Pi;
    case Family::linear_unknown_var:
      return -0.5 * kLog2Pi;
    case Family::bernoulli_logit:
      if (y != 0.0 && y != 1.0) {
        throw SupportError("bernoulli_logit response must be 0 or 1");
      }
      return 0.0;
    case Family::poisson_log:
      if (y < 0.0 || y != std::floor(y)) {
        throw SupportError("poisson_log response must be a nonnegative integer");
      }
      return -log_factorial(y);
  }
  return 0.0;
}

double ExpFamilyModel::log_density(double y, const EtaVec& eta) const {
  require_domain(eta);
  const EtaVec t = suff_stat(y);
  return eta.dot(t) - log_partition(eta) + log_carrier(y);
}

double ExpFamilyModel::sample_response(const EtaVec& eta, rng::Stream& rs) const {
  require_domain(eta);
  switch (family_) {
    case Family::gaussian_known_var: {
      const double mu = eta[0] * sigma2_;
      return mu + std::sqrt(sigma2_) * rs.normal();
    }
    case Family::linear_unknown_var: {
      const double s2 = -1.0 / (2.0 * eta[1]);
      const double mu = -eta[0] / (2.0 * eta[1]);
      return mu + std::sqrt(s2) * rs.normal();
    }
    case Family::bernoulli_logit:
      return rs.uniform() < sigmoid(eta[0]) ? 1.0 : 0.0;
    case Family::poisson_log:
      return poisson_draw(std::exp(eta[0]), rs);
  }
  return 0.0;
}

FeatureMap FeatureMap::glm(int dim_theta) {
  if (dim_theta < 1) throw DimensionError("FeatureMap::glm: dim_theta must be >= 1");
  return FeatureMap(dim_theta, dim_theta, false);
}

FeatureMap FeatureMap::linear_model(int dim_raw) {
  if (dim_raw < 1) throw DimensionError("FeatureMap::linear_model: dim_raw must be >= 1");
  return FeatureMap(dim_raw + 1, dim_raw, true);
}

Eigen::MatrixXd FeatureMap::embed(const Eigen::VectorXd& x_raw) const {
  if (x_raw.size() != dim_x_raw_) {
    throw DimensionError("FeatureMap::embed: raw feature has wrong dimension");
  }
  Eigen::MatrixXd x(dim_eta(), dim_theta_);
  x.setZero();
  if (linear_block_) {
    x.block(0, 0, 1, dim_x_raw_) = x_raw.transpose();
    x(1, dim_theta_ - 1) = -0.5;
  } else {
    x.row(0) = x_raw.transpose();
  }
  return x;
}

Eigen::VectorXd FeatureMap::natural_param(const Eigen::VectorXd& x_raw,
                                          const Eigen::VectorXd& theta) const {
  if (x_raw.size() != dim_x_raw_) {
    throw DimensionError("natural_param: raw feature has wrong dimension");
  }
  if (theta.size() != dim_theta_) {
    throw DimensionError("natural_param: theta has wrong dimension");
  }
  const EtaVec e = eta(x_raw, theta);
  return Eigen::VectorXd(e);
}

FeatureDistribution FeatureDistribution::standard_normal(int dim) {
  if (dim < 1) throw DimensionError("FeatureDistribution: dim must be >= 1");
  return FeatureDistribution(Kind::standard_normal, dim);
}

FeatureDistribution FeatureDistribution::fixed_design(
    std::vector<Eigen::VectorXd> points) {
  if (points.empty()) throw DimensionError("fixed_design: no design points");
  FeatureDistribution h(Kind::fixed_design, static_cast<int>(points[0].size()));
  for (const auto& p : points) {
    if (p.size() != h.dim_) throw DimensionError("fixed_design: ragged points");
  }
  h.points_ = std::move(points);
  return h;
}

FeatureDistribution FeatureDistribution::custom(int dim, Sampler sampler) {
  if (dim < 1) throw DimensionError("FeatureDistribution: dim must be >= 1");
  FeatureDistribution h(Kind::custom, dim);
  h.sampler_ = std::move(sampler);
  return h;
}

Eigen::VectorXd FeatureDistribution::draw(std::size_t index_in_generation,
                                          rng::Stream& rs) const {
  switch (kind_) {
    case Kind::standard_normal: {
      Eigen::VectorXd x(dim_);
      for (int i = 0; i < dim_; ++i) x[i] = rs.normal();
      return x;
    }
    case Kind::fixed_design:
      return points_[index_in_generation % points_.size()];
    case Kind::custom: {
      Eigen::VectorXd x = sampler_(rs);
      if (x.size() != dim_) throw DimensionError("custom sampler: wrong dimension");
      return x;
    }
  }
  return Eigen::VectorXd();
}

void FeatureDistribution::fill_generation(Eigen::MatrixXd& rows,
                                          rng::Stream& rs) const {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    rows.row(i) = draw(static_cast<std::size_t>(i), rs).transpose();
  }
}

}  // namespace csim
