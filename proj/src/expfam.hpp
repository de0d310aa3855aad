#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "rng.hpp"

namespace csim {

// Natural parameters of the built-in families have at most two coordinates;
// EtaVec is stack-allocated up to that size.
using EtaVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
using EtaMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;

enum class Family {
  gaussian_known_var,
  linear_unknown_var,
  bernoulli_logit,
  poisson_log,
};

// Exponential-family response model p(y|eta) = exp(eta'T(y) - A(eta)) h(y)
// with exact log-partition calculus and a transform-based sampler.
//
// Conventions per family (y scalar throughout):
//   gaussian_known_var  T(y)=y,        A(eta)=eta^2 sigma2/2,  h = N(0,sigma2),
//                       mean = eta*sigma2, domain all of R.
//   linear_unknown_var  T(y)=(y,y^2),  A(eta)= -eta1^2/(4 eta2) - log(-2 eta2)/2,
//                       h = 1/sqrt(2 pi), domain eta2 <= -min_precision/2
//                       (so the implied precision 1/sigma^2 = -2 eta2 stays
//                       bounded away from zero; violations raise DomainError
//                       instead of clamping so variance collapse stays
//                       observable).
//   bernoulli_logit     T(y)=y in {0,1}, A(eta)=log(1+e^eta), h=1, domain R.
//   poisson_log         T(y)=y in N,   A(eta)=e^eta, h(y)=1/y!, domain R.
class ExpFamilyModel {
 public:
  static ExpFamilyModel gaussian_known_var(double sigma2 = 1.0);
  static ExpFamilyModel linear_unknown_var();
  static ExpFamilyModel bernoulli_logit();
  static ExpFamilyModel poisson_log();

  Family family() const { return family_; }
  int dim_y() const { return 1; }
  int dim_eta() const { return family_ == Family::linear_unknown_var ? 2 : 1; }
  double fixed_sigma2() const { return sigma2_; }

  // Smallest admissible precision 1/sigma^2 for linear_unknown_var.
  static constexpr double kMinPrecision = 1e-8;

  bool in_domain(const EtaVec& eta) const;
  void require_domain(const EtaVec& eta) const;  // throws DomainError

  double log_partition(const EtaVec& eta) const;
  EtaVec grad_log_partition(const EtaVec& eta) const;
  EtaMat hess_log_partition(const EtaVec& eta) const;

  EtaVec suff_stat(double y) const;
  double log_carrier(double y) const;  // throws SupportError off-support
  double log_density(double y, const EtaVec& eta) const;

  double sample_response(const EtaVec& eta, rng::Stream& rs) const;

 private:
  ExpFamilyModel(Family f, double sigma2) : family_(f), sigma2_(sigma2) {}

  Family family_;
  double sigma2_;  // fixed variance; used by gaussian_known_var only
};

// Maps a raw feature vector x to the d_eta x d_theta matrix X so that the
// natural parameter is eta = X * theta.
//
//   glm:     X = x' (one row); d_theta = dim(x).
//   linear:  X = [x' 0; 0 -1/2], the 2 x (d+1) block embedding that turns
//            the Gaussian linear model with unknown variance into a linear
//            exponential family in theta = (beta/sigma^2, 1/sigma^2).
class FeatureMap {
 public:
  static FeatureMap glm(int dim_theta);
  static FeatureMap linear_model(int dim_raw);

  int dim_theta() const { return dim_theta_; }
  int dim_x_raw() const { return dim_x_raw_; }
  int dim_eta() const { return linear_block_ ? 2 : 1; }
  bool is_linear_block() const { return linear_block_; }

  Eigen::MatrixXd embed(const Eigen::VectorXd& x_raw) const;

  // eta = embed(x) * theta, without materialising the embedding.
  template <typename XVec, typename ThetaVec>
  EtaVec eta(const XVec& x_raw, const ThetaVec& theta) const {
    EtaVec out(dim_eta());
    if (linear_block_) {
      out[0] = x_raw.dot(theta.head(dim_x_raw_));
      out[1] = -0.5 * theta[dim_theta_ - 1];
    } else {
      out[0] = x_raw.dot(theta);
    }
    return out;
  }

  Eigen::VectorXd natural_param(const Eigen::VectorXd& x_raw,
                                const Eigen::VectorXd& theta) const;

  // grad_out += scale * X' v  for v of length dim_eta.
  template <typename XVec>
  void add_xt_vec(const XVec& x_raw, const EtaVec& v, double scale,
                  Eigen::VectorXd& grad_out) const {
    if (linear_block_) {
      grad_out.head(dim_x_raw_).noalias() += (scale * v[0]) * x_raw;
      grad_out[dim_theta_ - 1] += scale * (-0.5) * v[1];
    } else {
      grad_out.noalias() += (scale * v[0]) * x_raw;
    }
  }

  // hess_out += scale * X' H X  for H of size dim_eta x dim_eta.
  template <typename XVec>
  void add_xt_hess_x(const XVec& x_raw, const EtaMat& h, double scale,
                     Eigen::MatrixXd& hess_out) const {
    if (linear_block_) {
      const int d = dim_x_raw_;
      hess_out.topLeftCorner(d, d).noalias() +=
          (scale * h(0, 0)) * (x_raw * x_raw.transpose());
      hess_out.block(0, d, d, 1).noalias() +=
          (scale * -0.5 * h(0, 1)) * x_raw;
      hess_out.block(d, 0, 1, d).noalias() +=
          (scale * -0.5 * h(1, 0)) * x_raw.transpose();
      hess_out(d, d) += scale * 0.25 * h(1, 1);
    } else {
      hess_out.noalias() += (scale * h(0, 0)) * (x_raw * x_raw.transpose());
    }
  }

 private:
  FeatureMap(int dim_theta, int dim_x_raw, bool linear_block)
      : dim_theta_(dim_theta), dim_x_raw_(dim_x_raw),
        linear_block_(linear_block) {}

  int dim_theta_;
  int dim_x_raw_;
  bool linear_block_;
};

// Feature law H, identical across generations. fixed_design cycles through
// the supplied points by index so a generation of n draws is deterministic.
class FeatureDistribution {
 public:
  using Sampler = std::function<Eigen::VectorXd(rng::Stream&)>;

  static FeatureDistribution standard_normal(int dim);
  static FeatureDistribution fixed_design(std::vector<Eigen::VectorXd> points);
  static FeatureDistribution custom(int dim, Sampler sampler);

  int dim() const { return dim_; }
  bool is_fixed_design() const { return kind_ == Kind::fixed_design; }
  const std::vector<Eigen::VectorXd>& design_points() const { return points_; }

  Eigen::VectorXd draw(std::size_t index_in_generation, rng::Stream& rs) const;

  // Fills one generation of features, one row per point.
  void fill_generation(Eigen::MatrixXd& rows, rng::Stream& rs) const;

 private:
  enum class Kind { standard_normal, fixed_design, custom };

  FeatureDistribution(Kind kind, int dim) : kind_(kind), dim_(dim) {}

  Kind kind_;
  int dim_;
  std::vector<Eigen::VectorXd> points_;
  Sampler sampler_;
};

}  // namespace csim
