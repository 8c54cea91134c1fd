#ifndef CONSERVA_STATS_HPP
#define CONSERVA_STATS_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace conserva {

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a,x)/Gamma(a).
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution with df degrees of freedom.
double chi_square_sf(double x, int df);

/// Wilson score interval for a binomial proportion at ~95% coverage.
struct ProportionCI {
    double estimate;
    double low;
    double high;
};
ProportionCI wilson_interval(std::size_t hits, std::size_t trials);

/// Weighted least squares line fit y = intercept + slope*x with known
/// per-point standard deviations. Points with non-finite input are skipped.
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    int points_used = 0;
    bool defined = false;
};
SlopeFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                           std::span<const double> y_sd);

/// Log-log version: fits log|y| against log x, propagating sd(y) to the log
/// scale by the delta method. Non-positive |y| points are dropped.
SlopeFit loglog_fit(std::span<const double> x, std::span<const double> y,
                    std::span<const double> y_sd);

/// Pearson chi-square statistic of observed counts against expected
/// probabilities; returns the p-value. Cells with tiny expectation are pooled.
double chi_square_gof_pvalue(std::span<const std::size_t> observed,
                             std::span<const double> expected_probs);

/// Two-sample chi-square homogeneity test over a common set of cells.
double chi_square_homogeneity_pvalue(std::span<const std::size_t> counts_a,
                                     std::span<const std::size_t> counts_b);

} // namespace conserva

#endif
