#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "elfit/rng.hpp"
#include "elfit/stats.hpp"

using namespace elfit;

namespace {

// O(m^2): evaluate both one-sided gaps at every sample point by counting.
double brute_ks_one(const std::vector<double>& s, double (*cdf)(double)) {
  const double m = double(s.size());
  double worst = 0.0;
  for (double x : s) {
    int le = 0, lt = 0;
    for (double y : s) {
      le += y <= x;
      lt += y < x;
    }
    worst = std::max({worst, std::abs(le / m - cdf(x)), std::abs(lt / m - cdf(x))});
  }
  return worst;
}

double brute_ks_two(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  auto ecdf = [](const std::vector<double>& v, double x) {
    int c = 0;
    for (double y : v) c += y <= x;
    return double(c) / double(v.size());
  };
  for (const auto* v : {&a, &b})
    for (double x : *v) worst = std::max(worst, std::abs(ecdf(a, x) - ecdf(b, x)));
  return worst;
}

}  // namespace

TEST_CASE("normal pdf and cdf") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-14));
  CHECK(normal_cdf(-8.0) == doctest::Approx(6.22096057427178e-16).epsilon(1e-10));
  CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
}

TEST_CASE("one-sample KS matches brute force") {
  RngStream rng(1, 0);
  for (int m : {1, 2, 7, 50, 200}) {
    std::vector<double> s(static_cast<std::size_t>(m));
    for (auto& x : s) x = 1.3 * rng.normal() + 0.2;
    CHECK(ks_one_sample(s, normal_cdf) == doctest::Approx(brute_ks_one(s, normal_cdf)).epsilon(1e-14));
  }
  std::vector<double> ties = {0.0, 0.0, 0.0, 1.0, 1.0, -2.0};
  CHECK(ks_one_sample(ties, normal_cdf) == doctest::Approx(brute_ks_one(ties, normal_cdf)).epsilon(1e-14));
  CHECK_THROWS_AS(ks_one_sample(std::vector<double>{}, normal_cdf), std::invalid_argument);
}

TEST_CASE("two-sample KS matches brute force, including ties") {
  RngStream rng(2, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(static_cast<std::size_t>(5 + trial * 9)), b(static_cast<std::size_t>(3 + trial * 7));
    for (auto& x : a) x = std::round(4 * rng.normal()) / 4;
    for (auto& x : b) x = std::round(4 * rng.normal() + 1) / 4;
    CHECK(ks_two_sample(a, b) == doctest::Approx(brute_ks_two(a, b)).epsilon(1e-14));
  }
  std::vector<double> same = {1, 2, 3};
  CHECK(ks_two_sample(same, same) == 0.0);
  CHECK(ks_two_sample(std::vector<double>{0}, std::vector<double>{1}) == 1.0);
}

TEST_CASE("Kolmogorov quantiles") {
  CHECK(kolmogorov_quantile(0.01) == doctest::Approx(1.628).epsilon(1e-3));
  CHECK(kolmogorov_quantile(0.05) == doctest::Approx(1.358).epsilon(1e-3));
  CHECK(ks_critical_one_sample(100, 0.01) == doctest::Approx(0.1628).epsilon(1e-3));
  CHECK(ks_critical_two_sample(40, 40, 0.05) == doctest::Approx(1.358 * std::sqrt(80.0 / 1600.0)).epsilon(1e-3));
  CHECK_THROWS_AS(kolmogorov_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(kolmogorov_quantile(1.0), std::invalid_argument);
}

TEST_CASE("one-sample KS rejects at about the nominal rate") {
  RngStream rng(3, 0);
  int rejections = 0;
  const int meta = 400, m = 200;
  for (int k = 0; k < meta; ++k) {
    std::vector<double> s(m);
    for (auto& x : s) x = rng.normal();
    rejections += ks_one_sample(s, normal_cdf) > ks_critical_one_sample(m, 0.05);
  }
  // 5% nominal, the asymptotic critical value is slightly conservative
  CHECK(rejections <= 40);
}

TEST_CASE("descriptive statistics") {
  std::vector<double> v = {1, 2, 3, 4};
  CHECK(mean(v) == 2.5);
  CHECK(sample_stddev(v) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(std_error(v) == doctest::Approx(std::sqrt(5.0 / 3.0) / 2).epsilon(1e-15));
  CHECK(sample_stddev(std::vector<double>{3.0}) == 0.0);
  CHECK(quantile(v, 0.1) == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(median({5, 1, 3}) == 3.0);
  CHECK(median(v) == 2.5);
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile(v, 1.5), std::invalid_argument);
  // pairwise summation keeps long sums accurate
  std::vector<double> many(1000000, 0.1);
  CHECK(mean(many) == doctest::Approx(0.1).epsilon(1e-14));
}
