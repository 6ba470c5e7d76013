#pragma once

#include <cstdint>
#include <vector>

namespace rcm {

double normal_cdf(double z);
double normal_sf(double z);  // 1 - cdf

// Regularized upper incomplete gamma Q(a,x); chi-square survival function is
// Q(dof/2, x/2).
double gamma_q(double a, double x);
double chi_square_sf(double statistic, std::int64_t dof);

struct ChiSquareResult {
    double statistic = 0.0;
    std::int64_t dof = 0;
    double pValue = 1.0;
    std::int64_t pooledCells = 0;  // low-expectation cells merged into one
};

// Goodness of fit of observed counts against expected counts (same total);
// cells with expected < minExpected are pooled.
ChiSquareResult chi_square_test(const std::vector<double>& observed,
                                const std::vector<double>& expected,
                                double minExpected = 5.0);

struct MannWhitneyResult {
    double u = 0.0;
    double z = 0.0;
    // One-sided p-value for the null "same distribution" against the
    // alternative "sample a tends larger than sample b".
    double pGreater = 1.0;
};

MannWhitneyResult mann_whitney_greater(const std::vector<double>& a,
                                       const std::vector<double>& b);

struct McEstimate {
    double value = 0.0;
    double stdError = 0.0;
    std::int64_t samples = 0;
    std::int64_t acceptedSamples = 0;
};

// Binomial proportion estimate from a hit count.
McEstimate binomial_estimate(std::int64_t hits, std::int64_t trials);

// Sample mean and standard error of the mean.
McEstimate mean_estimate(const std::vector<double>& values);

}  // namespace rcm
