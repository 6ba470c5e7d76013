#include "rcm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rcm/common.hpp"

namespace rcm {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace {

// Lower incomplete gamma by series, upper by continued fraction (Lentz).
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw ParameterError("gamma_q domain");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi_square_sf(double statistic, std::int64_t dof) {
    if (dof <= 0) return 1.0;
    return gamma_q(0.5 * static_cast<double>(dof), 0.5 * statistic);
}

ChiSquareResult chi_square_test(const std::vector<double>& observed,
                                const std::vector<double>& expected,
                                double minExpected) {
    double obsPool = 0.0, expPool = 0.0;
    ChiSquareResult res;
    std::int64_t cells = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] < minExpected) {
            obsPool += observed[i];
            expPool += expected[i];
            continue;
        }
        double d = observed[i] - expected[i];
        res.statistic += d * d / expected[i];
        ++cells;
    }
    if (expPool > 0.0) {
        double d = obsPool - expPool;
        res.statistic += d * d / expPool;
        ++cells;
        res.pooledCells = 1;
    }
    res.dof = cells - 1;
    res.pValue = chi_square_sf(res.statistic, res.dof);
    return res;
}

MannWhitneyResult mann_whitney_greater(const std::vector<double>& a,
                                       const std::vector<double>& b) {
    const std::size_t na = a.size(), nb = b.size();
    MannWhitneyResult res;
    if (na == 0 || nb == 0) return res;

    struct Entry {
        double v;
        int who;  // 0 = a, 1 = b
    };
    std::vector<Entry> all;
    all.reserve(na + nb);
    for (double v : a) all.push_back({v, 0});
    for (double v : b) all.push_back({v, 1});
    std::sort(all.begin(), all.end(),
              [](const Entry& x, const Entry& y) { return x.v < y.v; });

    // Midranks and the tie correction term sum(t^3 - t).
    double rankSumA = 0.0;
    double tieTerm = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].v == all[i].v) ++j;
        double t = static_cast<double>(j - i);
        double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (all[k].who == 0) rankSumA += midrank;
        tieTerm += t * t * t - t;
        i = j;
    }

    double n = static_cast<double>(na + nb);
    res.u = rankSumA - static_cast<double>(na) * (na + 1) / 2.0;
    double mu = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
    double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                 ((n + 1.0) - tieTerm / (n * (n - 1.0)));
    if (var <= 0.0) {
        // all observations tied: no evidence either way
        res.z = 0.0;
        res.pGreater = 1.0;
        return res;
    }
    res.z = (res.u - mu) / std::sqrt(var);
    res.pGreater = normal_sf(res.z);
    return res;
}

McEstimate binomial_estimate(std::int64_t hits, std::int64_t trials) {
    McEstimate e;
    e.samples = trials;
    e.acceptedSamples = trials;
    if (trials <= 0) return e;
    double p = static_cast<double>(hits) / static_cast<double>(trials);
    e.value = p;
    e.stdError = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    return e;
}

McEstimate mean_estimate(const std::vector<double>& values) {
    McEstimate e;
    e.samples = static_cast<std::int64_t>(values.size());
    e.acceptedSamples = e.samples;
    if (values.empty()) return e;
    double n = static_cast<double>(values.size());
    double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    e.value = mean;
    e.stdError = values.size() > 1 ? std::sqrt(ss / (n * (n - 1.0))) : 0.0;
    return e;
}

}  // namespace rcm
