#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdpdt::stats {

using Sample = std::vector<double>;

// Result of a two-sample test: the test statistic, the two-sided probability
// that both samples come from the same population, and (for t-family tests)
// the degrees of freedom.
struct TestOutcome {
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> degrees_of_freedom;
};

struct InsufficientSample : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when a test cannot form a statistic because the spread collapses
// (pooled variance zero, or both variances zero). Callers treat this as
// "no usable evidence", never as p = 0 or p = 1.
struct DegenerateVariance : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class TestKind { student_t, welch, mann_whitney, kolmogorov_smirnov };

const char* test_name(TestKind kind);
TestKind test_from_name(const std::string& name);

// Pooled-variance two-sample t test; df = n1 + n2 - 2.
TestOutcome student_t_test(std::span<const double> a, std::span<const double> b);

// Unequal-variance t test; df per Welch-Satterthwaite.
TestOutcome welch_test(std::span<const double> a, std::span<const double> b);

// Rank-sum test. statistic = min(U1, U2) with midpoint ranks on ties.
// p-value is exact (full enumeration of group assignments) for pooled sizes
// up to 20, and a tie-corrected normal approximation above that.
TestOutcome mann_whitney_u_test(std::span<const double> a, std::span<const double> b);

// Two-sample Kolmogorov-Smirnov test; asymptotic p-value.
TestOutcome kolmogorov_smirnov_test(std::span<const double> a, std::span<const double> b);

TestOutcome run_test(TestKind kind, std::span<const double> a, std::span<const double> b);

// --- numeric building blocks (exposed for verification) ---

// Regularized incomplete beta function I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided tail probability of the t distribution with (possibly
// non-integer) df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// Survival function of the Kolmogorov distribution,
// Q(lambda) = 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

double normal_cdf(double z);

namespace detail {
// Midpoint ranks of the pooled samples; returns (ranks of a, ranks of b).
std::pair<std::vector<double>, std::vector<double>> midranks(
    std::span<const double> a, std::span<const double> b);

// Normal-approximation two-sided p for the Mann-Whitney U statistic,
// with tie correction; exposed so the exact and approximate routes can be
// compared directly.
double mann_whitney_p_normal(double u_min, std::span<const double> a,
                             std::span<const double> b);

// Exact two-sided p over all equally likely group assignments of the pooled
// values, computed by a subset-sum count over doubled midranks: twice the
// smaller tail of U1's permutation distribution, clamped at 1.
double mann_whitney_p_exact(std::span<const double> a, std::span<const double> b);
}  // namespace detail

}  // namespace mdpdt::stats
