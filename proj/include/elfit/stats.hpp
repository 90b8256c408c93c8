#pragma once

#include <functional>
#include <span>
#include <vector>

namespace elfit {

double normal_pdf(double x);
double normal_cdf(double x);

/// sup_x |F_m(x) - cdf(x)| for the empirical cdf F_m of `samples`.
double ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf);
/// sup_x |F_a(x) - F_b(x)|.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic two-sided Kolmogorov quantile c(level): P(sqrt(m) D_m > c) -> level.
/// c(0.01) = 1.628.
double kolmogorov_quantile(double level);
/// c(level) / sqrt(m).
double ks_critical_one_sample(int m, double level);
/// c(level) sqrt((m + k) / (m k)).
double ks_critical_two_sample(int m, int k, double level);

double mean(std::span<const double> v);
/// Unbiased sample standard deviation; 0 for fewer than two values.
double sample_stddev(std::span<const double> v);
/// sample_stddev / sqrt(size)
double std_error(std::span<const double> v);
/// Linear interpolation between order statistics (R type 7), q in [0, 1].
double quantile(std::vector<double> v, double q);
double median(std::vector<double> v);

}  // namespace elfit
