#include "carm/ks.hpp"

#include "carm/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace carm::stats {

double ks_exact_pvalue(long n, long m, long max_diff) {
  if (max_diff <= 0) return 1.0;
  // u[j] after row i holds (#paths to (i,j) staying strictly inside the band)
  // divided by C(i+j, i): each update mixes the two predecessors with weights
  // i/(i+j) and j/(i+j), so every value stays in [0, 1].
  std::vector<double> u(static_cast<std::size_t>(m) + 1, 0.0);
  auto inside = [&](long i, long j) { return std::labs(i * m - j * n) < max_diff; };
  u[0] = inside(0, 0) ? 1.0 : 0.0;
  for (long j = 1; j <= m; ++j) {
    u[static_cast<std::size_t>(j)] = inside(0, j) ? u[static_cast<std::size_t>(j) - 1] : 0.0;
  }
  for (long i = 1; i <= n; ++i) {
    u[0] = inside(i, 0) ? u[0] : 0.0;
    for (long j = 1; j <= m; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      if (!inside(i, j)) {
        u[jj] = 0.0;
        continue;
      }
      const double w = static_cast<double>(i) / static_cast<double>(i + j);
      u[jj] = w * u[jj] + (1.0 - w) * u[jj - 1];
    }
  }
  return std::clamp(1.0 - u[static_cast<std::size_t>(m)], 0.0, 1.0);
}

double ks_asymptotic_pvalue(long n, long m, double statistic) {
  const double en = std::sqrt(static_cast<double>(n) * static_cast<double>(m) /
                              static_cast<double>(n + m));
  const double lambda = (en + 0.12 + 0.11 / en) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptySample, "KS test needs non-empty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const auto n = static_cast<long>(sa.size());
  const auto m = static_cast<long>(sb.size());

  // Integer form of |F_a - F_b| scaled by n*m; ties advance both samples.
  long i = 0;
  long j = 0;
  long max_diff = 0;
  while (i < n && j < m) {
    const double x = std::min(sa[static_cast<std::size_t>(i)], sb[static_cast<std::size_t>(j)]);
    while (i < n && sa[static_cast<std::size_t>(i)] <= x) ++i;
    while (j < m && sb[static_cast<std::size_t>(j)] <= x) ++j;
    max_diff = std::max(max_diff, std::labs(i * m - j * n));
  }
  KsResult out;
  out.statistic = static_cast<double>(max_diff) / static_cast<double>(n * m);
  out.p_value = n * m <= kExactSizeLimit ? ks_exact_pvalue(n, m, max_diff)
                                         : ks_asymptotic_pvalue(n, m, out.statistic);
  return out;
}

}  // namespace carm::stats
