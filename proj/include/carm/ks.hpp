#pragma once

#include <span>

namespace carm::stats {

struct KsResult {
  double statistic = 0.0;  // sup |F_a - F_b|
  double p_value = 1.0;    // two-sided
};

/// Samples up to this product of sizes use the exact lattice-path p-value.
inline constexpr long kExactSizeLimit = 10000;

/// Two-sample two-sided Kolmogorov-Smirnov test. Throws EmptySample.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// P(D >= statistic) for sample sizes n, m where statistic = max_diff / (n m)
/// and max_diff = max |i m - j n| over the merged empirical CDFs.
double ks_exact_pvalue(long n, long m, long max_diff);

/// Asymptotic Kolmogorov tail with the Stephens small-sample correction.
double ks_asymptotic_pvalue(long n, long m, double statistic);

}  // namespace carm::stats
