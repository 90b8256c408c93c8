#include "elfit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "elfit/fitting.hpp"

namespace elfit {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_one_sample: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double m = double(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, double(i + 1) / m - f, f - double(i) / m});
  }
  return d;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = double(x.size()), nb = double(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // Step both empirical cdfs past each distinct value before comparing.
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    d = std::max(d, std::abs(double(i) / na - double(j) / nb));
  }
  return d;
}

double kolmogorov_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("kolmogorov_quantile: level must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(0.5 * level));
}

double ks_critical_one_sample(int m, double level) {
  if (m < 1) throw std::invalid_argument("ks_critical_one_sample: m must be >= 1");
  return kolmogorov_quantile(level) / std::sqrt(double(m));
}

double ks_critical_two_sample(int m, int k, double level) {
  if (m < 1 || k < 1) throw std::invalid_argument("ks_critical_two_sample: sizes must be >= 1");
  return kolmogorov_quantile(level) * std::sqrt(double(m + k) / (double(m) * double(k)));
}

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean: empty sample");
  return pairwise_sum(v) / double(v.size());
}

double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mu) * (v[i] - mu);
  return std::sqrt(pairwise_sum(sq) / double(v.size() - 1));
}

double std_error(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("std_error: empty sample");
  return sample_stddev(v) / std::sqrt(double(v.size()));
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = q * double(v.size() - 1);
  const auto lo = std::size_t(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

}  // namespace elfit
