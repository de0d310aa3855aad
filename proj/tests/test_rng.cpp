#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "rng.hpp"

using namespace csim;

TEST_CASE("streams are reproducible and path-separated") {
  const rng::StreamKey root = rng::root_key(42);
  rng::Stream a = root.child(3).child(rng::Purpose::features).stream();
  rng::Stream b = root.child(3).child(rng::Purpose::features).stream();
  rng::Stream c = root.child(3).child(rng::Purpose::responses).stream();
  rng::Stream d = root.child(4).child(rng::Purpose::features).stream();

  bool same_ab = true, same_ac = true, same_ad = true;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    same_ab &= va == b.next_u64();
    same_ac &= va == c.next_u64();
    same_ad &= va == d.next_u64();
  }
  CHECK(same_ab);
  CHECK_FALSE(same_ac);
  CHECK_FALSE(same_ad);
}

TEST_CASE("derived keys do not collide across levels") {
  const rng::StreamKey root = rng::root_key(7);
  std::set<std::uint64_t> keys;
  for (std::uint64_t r = 0; r < 50; ++r) {
    for (std::uint64_t g = 1; g <= 50; ++g) {
      keys.insert(root.child(r).child(g).value);
    }
  }
  CHECK(keys.size() == 2500);
}

TEST_CASE("uniform moments") {
  rng::Stream rs(123);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0, lo = 1.0, hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rs.uniform();
    sum += u;
    sum2 += u * u;
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal moments within 4 standard errors") {
  rng::Stream rs(99);
  const int n = 400000;
  double sum = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rs.normal();
    sum += z;
    sum2 += z * z;
    sum3 += z * z * z;
    sum4 += z * z * z * z;
  }
  const double rn = n;
  CHECK(std::abs(sum / rn) < 4.0 / std::sqrt(rn));
  CHECK(std::abs(sum2 / rn - 1.0) < 4.0 * std::sqrt(2.0 / rn));
  CHECK(std::abs(sum3 / rn) < 4.0 * std::sqrt(15.0 / rn));
  CHECK(std::abs(sum4 / rn - 3.0) < 4.0 * std::sqrt(96.0 / rn));
}

TEST_CASE("uniform_below stays in range and covers values") {
  rng::Stream rs(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const std::uint64_t v = rs.uniform_below(7);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) CHECK(c > 9000);
}

TEST_CASE("uniform_pos never returns zero") {
  rng::Stream rs(11);
  for (int i = 0; i < 100000; ++i) {
    const double u = rs.uniform_pos();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
  }
}
