#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace csim {

// Per-generation curve of ratios mean(t_g)/mean(t_1) with delta-method
// standard errors.
struct RatioCurve {
  Eigen::VectorXd value;
  Eigen::VectorXd stderr_;
};

// Accumulated cross moments of per-trajectory scalars t_g: sums of t_g,
// t_g^2 and t_g * t_1.
struct RatioAccumulator {
  Eigen::VectorXd sum_t;
  Eigen::VectorXd sum_t2;
  Eigen::VectorXd sum_t_t1;
  std::int64_t count = 0;

  explicit RatioAccumulator(int generations)
      : sum_t(Eigen::VectorXd::Zero(generations)),
        sum_t2(Eigen::VectorXd::Zero(generations)),
        sum_t_t1(Eigen::VectorXd::Zero(generations)) {}

  template <typename Vec>
  void add_trajectory(const Vec& t) {
    const double t1 = t[0];
    for (Eigen::Index g = 0; g < sum_t.size(); ++g) {
      sum_t[g] += t[g];
      sum_t2[g] += t[g] * t[g];
      sum_t_t1[g] += t[g] * t1;
    }
    ++count;
  }

  void merge(const RatioAccumulator& other) {
    sum_t += other.sum_t;
    sum_t2 += other.sum_t2;
    sum_t_t1 += other.sum_t_t1;
    count += other.count;
  }
};

inline RatioCurve ratio_curve_from_moments(const RatioAccumulator& acc) {
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  const Eigen::Index gmax = acc.sum_t.size();
  RatioCurve out;
  out.value = Eigen::VectorXd::Constant(gmax, nan);
  out.stderr_ = Eigen::VectorXd::Constant(gmax, nan);
  if (acc.count < 2) return out;
  const double r = static_cast<double>(acc.count);
  const double m1 = acc.sum_t[0] / r;
  if (!(m1 > 0.0)) return out;  // zero denominator: curve flagged as NaN
  const double v11 = acc.sum_t2[0] / r - m1 * m1;
  for (Eigen::Index g = 0; g < gmax; ++g) {
    const double mg = acc.sum_t[g] / r;
    const double vgg = acc.sum_t2[g] / r - mg * mg;
    const double vg1 = acc.sum_t_t1[g] / r - mg * m1;
    out.value[g] = mg / m1;
    const double var =
        (vgg / (m1 * m1) + mg * mg * v11 / (m1 * m1 * m1 * m1) -
         2.0 * mg * vg1 / (m1 * m1 * m1)) /
        r;
    out.stderr_[g] = var > 0.0 ? std::sqrt(var) : 0.0;
  }
  return out;
}

inline double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = (values.size() - 1) / 2;  // lower median
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  return values[mid];
}

}  // namespace csim
