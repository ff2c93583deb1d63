#pragma once

#include <functional>
#include <span>
#include <vector>

namespace heavysgd::stats {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of an unsorted sample.
double quantile(std::span<const double> xs, double prob);
double median(std::span<const double> xs);
double interquartile_range(std::span<const double> xs);

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);

/// Limiting Kolmogorov distribution P(sup|B| <= x).
double kolmogorov_cdf(double x);
/// Smallest c with kolmogorov_cdf(c) >= 1 - level (1.6276 at level 0.01).
double kolmogorov_critical(double level);

struct KsResult {
    double statistic = 0.0;
    double threshold = 0.0;  // critical value of the statistic at the requested level
    double p_value = 1.0;    // asymptotic, with the Stephens small-sample correction
    bool pass = false;       // statistic < threshold
};

double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);
double ks_statistic_two_sample(std::span<const double> a, std::span<const double> b);

KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf,
                 double level = 0.01);
KsResult ks_test_two_sample(std::span<const double> a, std::span<const double> b,
                            double level = 0.01);

}  // namespace heavysgd::stats
