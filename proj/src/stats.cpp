#include "mdpdt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace mdpdt::stats {

namespace {

void require_size(std::span<const double> s, std::size_t min, const char* which) {
  if (s.size() < min)
    throw InsufficientSample(std::string(which) + ": need at least " +
                             std::to_string(min) + " values, got " +
                             std::to_string(s.size()));
}

double mean(std::span<const double> s) {
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

// Unbiased sample variance (n-1 denominator), two-pass.
double sample_variance(std::span<const double> s, double m) {
  double acc = 0.0;
  for (double v : s) acc += (v - m) * (v - m);
  return acc / static_cast<double>(s.size() - 1);
}

// Continued fraction for the incomplete beta function (Lentz's method).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  constexpr double kFpMin = std::numeric_limits<double>::min() / kEps;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

const char* test_name(TestKind kind) {
  switch (kind) {
    case TestKind::student_t: return "student_t";
    case TestKind::welch: return "welch";
    case TestKind::mann_whitney: return "mann_whitney";
    case TestKind::kolmogorov_smirnov: return "kolmogorov_smirnov";
  }
  return "?";
}

TestKind test_from_name(const std::string& name) {
  if (name == "student_t") return TestKind::student_t;
  if (name == "welch") return TestKind::welch;
  if (name == "mann_whitney") return TestKind::mann_whitney;
  if (name == "kolmogorov_smirnov") return TestKind::kolmogorov_smirnov;
  throw std::invalid_argument("unknown statistical test: " + name);
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  // Use the continued fraction on the side where it converges fast.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  const double x = df / (df + t * t);
  double p = regularized_incomplete_beta(0.5 * df, 0.5, x);
  return std::clamp(p, 0.0, 1.0);
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  constexpr double kTermEps = 1e-12;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 1000; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < kTermEps) return std::clamp(2.0 * sum, 0.0, 1.0);
    sign = -sign;
  }
  return 1.0;  // lambda too small for the series to move off 1
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

TestOutcome student_t_test(std::span<const double> a, std::span<const double> b) {
  require_size(a, 2, "student_t sample a");
  require_size(b, 2, "student_t sample b");
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double m1 = mean(a), m2 = mean(b);
  const double v1 = sample_variance(a, m1), v2 = sample_variance(b, m2);
  const double df = n1 + n2 - 2.0;
  const double pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / df;
  if (pooled <= 0.0)
    throw DegenerateVariance("student_t: pooled variance is zero");
  const double t = (m1 - m2) / (std::sqrt(pooled) * std::sqrt(1.0 / n1 + 1.0 / n2));
  return {t, student_t_two_sided_p(t, df), df};
}

TestOutcome welch_test(std::span<const double> a, std::span<const double> b) {
  require_size(a, 2, "welch sample a");
  require_size(b, 2, "welch sample b");
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double m1 = mean(a), m2 = mean(b);
  const double v1 = sample_variance(a, m1), v2 = sample_variance(b, m2);
  const double se2 = v1 / n1 + v2 / n2;
  if (se2 <= 0.0)
    throw DegenerateVariance("welch: both sample variances are zero");
  const double t = (m1 - m2) / std::sqrt(se2);
  // Welch-Satterthwaite degrees of freedom.
  double denom = 0.0;
  if (v1 > 0.0) denom += (v1 / n1) * (v1 / n1) / (n1 - 1.0);
  if (v2 > 0.0) denom += (v2 / n2) * (v2 / n2) / (n2 - 1.0);
  const double df = se2 * se2 / denom;
  return {t, student_t_two_sided_p(t, df), df};
}

namespace detail {

std::pair<std::vector<double>, std::vector<double>> midranks(
    std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(n);
  for (std::size_t i = 0; i < a.size(); ++i) pooled.emplace_back(a[i], i);
  for (std::size_t j = 0; j < b.size(); ++j) pooled.emplace_back(b[j], a.size() + j);
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });

  std::vector<double> ra(a.size()), rb(b.size());
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // midpoint of i+1..j
    for (std::size_t k = i; k < j; ++k) {
      const std::size_t idx = pooled[k].second;
      if (idx < a.size()) ra[idx] = rank;
      else rb[idx - a.size()] = rank;
    }
    i = j;
  }
  return {std::move(ra), std::move(rb)};
}

double mann_whitney_p_normal(double u_min, std::span<const double> a,
                             std::span<const double> b) {
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;
  // Tie correction: subtract sum(t^3 - t) over tie groups of the pooled sample.
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mu = 0.5 * n1 * n2;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) return 1.0;  // every pooled value tied
  const double z = (u_min - mu + 0.5) / std::sqrt(var);
  return std::clamp(2.0 * normal_cdf(z), 0.0, 1.0);
}

double mann_whitney_p_exact(std::span<const double> a, std::span<const double> b) {
  // Distribution of the rank sum of a uniformly random size-n1 subset of the
  // pooled midranks, counted by subset-sum DP. Midranks are half-integers, so
  // doubling them makes every quantity an exact integer. With ties the
  // distribution of U1 is not symmetric, so the two-sided p doubles the
  // smaller of U1's own tails rather than a tail at min(U1, U2).
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  const std::size_t n = n1 + n2;
  auto [ra, rb] = midranks(a, b);

  std::vector<std::int64_t> doubled;
  doubled.reserve(n);
  for (double r : ra) doubled.push_back(static_cast<std::int64_t>(std::llround(2.0 * r)));
  for (double r : rb) doubled.push_back(static_cast<std::int64_t>(std::llround(2.0 * r)));

  const std::int64_t max_sum = static_cast<std::int64_t>(n) * (static_cast<std::int64_t>(n) + 1);
  // ways[j][s] = number of size-j subsets with doubled-rank sum s.
  std::vector<std::vector<double>> ways(n1 + 1,
                                        std::vector<double>(max_sum + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::int64_t d : doubled) {
    for (std::size_t j = std::min(n1, ways.size() - 1); j >= 1; --j) {
      for (std::int64_t s = max_sum; s >= d; --s) {
        if (ways[j - 1][s - d] != 0.0) ways[j][s] += ways[j - 1][s - d];
      }
    }
  }

  // 2*R1 observed, exact as an integer.
  const double r1 = std::accumulate(ra.begin(), ra.end(), 0.0);
  const std::int64_t doubled_r1_obs = static_cast<std::int64_t>(std::llround(2.0 * r1));

  double total = 0.0, lower = 0.0, upper = 0.0;
  for (std::int64_t s = 0; s <= max_sum; ++s) {
    const double w = ways[n1][s];
    if (w == 0.0) continue;
    total += w;
    if (s <= doubled_r1_obs) lower += w;
    if (s >= doubled_r1_obs) upper += w;
  }
  return std::min(2.0 * std::min(lower, upper) / total, 1.0);
}

}  // namespace detail

TestOutcome mann_whitney_u_test(std::span<const double> a, std::span<const double> b) {
  require_size(a, 1, "mann_whitney sample a");
  require_size(b, 1, "mann_whitney sample b");
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  auto [ra, rb] = detail::midranks(a, b);
  const double r1 = std::accumulate(ra.begin(), ra.end(), 0.0);
  const double u1 = r1 - n1 * (n1 + 1.0) / 2.0;
  const double u2 = n1 * n2 - u1;
  const double u = std::min(u1, u2);
  const double p = (a.size() + b.size() <= 20)
                       ? detail::mann_whitney_p_exact(a, b)
                       : detail::mann_whitney_p_normal(u, a, b);
  return {u, p, std::nullopt};
}

TestOutcome kolmogorov_smirnov_test(std::span<const double> a,
                                    std::span<const double> b) {
  require_size(a, 1, "kolmogorov_smirnov sample a");
  require_size(b, 1, "kolmogorov_smirnov sample b");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double n1 = static_cast<double>(sa.size());
  const double n2 = static_cast<double>(sb.size());

  // Walk the pooled distinct values, advancing both ECDFs fully through each
  // value before evaluating, so ties never produce a spurious gap.
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (i < sa.size() && j < sb.size()) x = std::min(sa[i], sb[j]);
    else if (i < sa.size()) x = sa[i];
    else x = sb[j];
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / n1 -
                              static_cast<double>(j) / n2));
  }
  const double lambda = d * std::sqrt(n1 * n2 / (n1 + n2));
  return {d, kolmogorov_survival(lambda), std::nullopt};
}

TestOutcome run_test(TestKind kind, std::span<const double> a,
                     std::span<const double> b) {
  switch (kind) {
    case TestKind::student_t: return student_t_test(a, b);
    case TestKind::welch: return welch_test(a, b);
    case TestKind::mann_whitney: return mann_whitney_u_test(a, b);
    case TestKind::kolmogorov_smirnov: return kolmogorov_smirnov_test(a, b);
  }
  throw std::logic_error("unreachable test kind");
}

}  // namespace mdpdt::stats
