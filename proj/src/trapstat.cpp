#include "rcm/trapstat.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>

namespace rcm {

std::int64_t ell_n(const CoarseTrace& trace, std::int64_t n) {
    if (n < 1) throw ParameterError("ell_n requires n >= 1");
    std::int64_t sum = 0;
    for (std::size_t m = 0; m < trace.times.size(); ++m) {
        sum += trace.times[m];
        if (sum >= 2 * n) return static_cast<std::int64_t>(m + 1);
    }
    throw InsufficientTraceError("trace covers " + std::to_string(sum) +
                                 " fine steps, needs " + std::to_string(2 * n));
}

namespace {

std::int64_t greedy_remainder(std::span<const std::int64_t> times,
                              std::int64_t r) {
    // remove the r largest values (ties resolved by index; the remainder sum
    // is the same either way)
    std::vector<std::int64_t> sorted(times.begin(), times.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::int64_t total = std::accumulate(times.begin(), times.end(),
                                         std::int64_t{0});
    std::int64_t removed = 0;
    for (std::int64_t i = 0; i < r; ++i) removed += sorted[i];
    return total - removed;
}

std::int64_t brute_force_remainder(std::span<const std::int64_t> times,
                                   std::int64_t r) {
    const std::int64_t ell = static_cast<std::int64_t>(times.size());
    std::int64_t total = std::accumulate(times.begin(), times.end(),
                                         std::int64_t{0});
    if (r == 0) return total;
    std::vector<std::int64_t> idx(r);
    std::iota(idx.begin(), idx.end(), 0);
    std::int64_t best = total;
    while (true) {
        std::int64_t removed = 0;
        for (std::int64_t i : idx) removed += times[i];
        best = std::min(best, total - removed);
        // next combination
        std::int64_t k = r - 1;
        while (k >= 0 && idx[k] == ell - r + k) --k;
        if (k < 0) break;
        ++idx[k];
        for (std::int64_t j = k + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
    return best;
}

}  // namespace

bool g_membership(std::span<const std::int64_t> times, std::int64_t r,
                  std::int64_t theta, GMode mode) {
    if (r < 0) throw ParameterError("g_membership requires r >= 0");
    if (static_cast<std::int64_t>(times.size()) < r)
        throw DomainError("g_membership requires ell >= r");
    std::int64_t remainder = mode == GMode::greedy
                                 ? greedy_remainder(times, r)
                                 : brute_force_remainder(times, r);
    return remainder <= theta;
}

bool detect_event(const CoarseTrace& trace, const TrapEventSpec& spec) {
    spec.validate();
    std::int64_t ell = ell_n(trace, spec.n);
    if (ell < spec.r || ell > spec.theta) return false;
    return g_membership(
        std::span<const std::int64_t>(trace.times.data(), ell), spec.r,
        spec.theta, GMode::greedy);
}

double multiproduct_sum(std::span<const std::int64_t> times, std::int64_t r) {
    const std::int64_t ell = static_cast<std::int64_t>(times.size());
    if (r < 1) throw ParameterError("multiproduct sum requires r >= 1");
    if (ell < r) throw DomainError("multiproduct sum requires ell >= r");
    // e[j] accumulates the elementary symmetric polynomial of degree j
    std::vector<double> e(r + 1, 0.0);
    e[0] = 1.0;
    for (std::int64_t t : times) {
        double tv = static_cast<double>(t);
        for (std::int64_t j = r; j >= 1; --j) e[j] += e[j - 1] * tv;
    }
    return e[r];
}

ImplicationResult implication_check(std::span<const std::int64_t> times,
                                    std::int64_t r, std::int64_t theta,
                                    std::int64_t n) {
    ImplicationResult res;
    bool member = g_membership(times, r, theta, GMode::greedy);
    std::int64_t total = std::accumulate(times.begin(), times.end(),
                                         std::int64_t{0});
    res.applicable = !member && total >= n;
    if (!res.applicable) return res;  // vacuously true

    res.lhs = multiproduct_sum(times, r + 1);
    double factorial = 1.0;
    for (std::int64_t i = 2; i <= r + 1; ++i) factorial *= static_cast<double>(i);
    res.rhs = static_cast<double>(n) *
              std::pow(static_cast<double>(theta), static_cast<double>(r)) /
              factorial;
    res.slack = res.lhs - res.rhs;
    res.holds = res.lhs >= res.rhs;
    return res;
}

CoarseTrace phi_transform(const CoarseTrace& trace, std::int64_t s) {
    if (trace.times.empty()) throw DomainError("phi transform of an empty trace");
    if (s < 1) throw ParameterError("phi transform requires s >= 1");
    CoarseTrace out = trace;
    std::size_t k = 0;
    for (std::size_t i = 1; i < out.times.size(); ++i)
        if (out.times[i] > out.times[k]) k = i;
    out.times[k] += 2 * s;
    return out;
}

namespace {

struct BridgeDriver {
    const CoarseAnalyzer& analyzer;
    Vertex origin;
    std::int64_t horizon2n;
    BridgeMode mode;
    std::unique_ptr<BridgeSampler> exact;  // built once for the exact mode
    std::int64_t forwardAttempts = 0;

    BridgeDriver(const CoarseAnalyzer& a, Vertex o, std::int64_t h,
                 BridgeMode m, bool overrideHorizon)
        : analyzer(a), origin(o), horizon2n(h), mode(m) {
        if (!a.dec().in_giant(o))
            throw DomainError("bridge start must lie on the giant cluster "
                              "(re-anchor the environment by a shift)");
        if (mode == BridgeMode::exactBridge)
            exact = std::make_unique<BridgeSampler>(a.kernel(), o, h,
                                                    overrideHorizon);
        else
            a.kernel().box().require_horizon(o, h, overrideHorizon);
    }

    // One accepted bridge, or nullopt for a rejected forward path.
    std::optional<Path> next(RngStream& rng) {
        if (mode == BridgeMode::exactBridge) return exact->sample(rng);
        ++forwardAttempts;
        Path p = sample_path(analyzer.kernel(), origin, horizon2n, rng);
        if (p.vertices.back() != origin) return std::nullopt;
        p.mode = "rejection";
        return p;
    }
};

}  // namespace

McEstimate conditional_event_prob(const CoarseAnalyzer& analyzer, Vertex origin,
                                  const TrapEventSpec& spec, BridgeMode mode,
                                  std::int64_t mcBudget, RngStream& rng,
                                  bool overrideHorizon) {
    spec.validate();
    BridgeDriver driver(analyzer, origin, 2 * spec.n, mode, overrideHorizon);
    std::int64_t accepted = 0;
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < mcBudget; ++i) {
        auto path = driver.next(rng);
        if (!path) continue;
        ++accepted;
        CoarseTrace trace = coarse_trace(*path, analyzer.dec());
        if (detect_event(trace, spec)) ++hits;
    }
    if (accepted == 0)
        throw BudgetError("no accepted bridge in " + std::to_string(mcBudget) +
                          " attempts (acceptance rate below 1/" +
                          std::to_string(mcBudget) + ")");
    McEstimate est = binomial_estimate(hits, accepted);
    est.samples = mcBudget;
    est.acceptedSamples = accepted;
    return est;
}

ConditionalSweep conditional_event_sweep(const CoarseAnalyzer& analyzer,
                                         Vertex origin, const TrapEventSpec& spec,
                                         BridgeMode mode,
                                         std::int64_t budgetPerHorizon,
                                         RngStream& rng, bool overrideHorizon) {
    spec.validate();
    if (spec.theta > spec.n / 2)
        throw ParameterError("the n* sweep requires theta <= n/2");
    ConditionalSweep sweep;
    double best = -1.0;
    for (std::int64_t m = spec.n - spec.theta; m <= spec.n; ++m) {
        TrapEventSpec local = spec;  // same theta and r, horizon 2m
        local.n = m;
        McEstimate est = conditional_event_prob(analyzer, origin, local, mode,
                                                budgetPerHorizon, rng,
                                                overrideHorizon);
        sweep.entries.push_back({m, est});
        if (est.value > best) {
            best = est.value;
            sweep.nStar = m;
        }
    }
    return sweep;
}

std::vector<double> bridge_max_sojourn_fractions(const CoarseAnalyzer& analyzer,
                                                 Vertex origin, std::int64_t n,
                                                 BridgeMode mode,
                                                 std::int64_t samples,
                                                 RngStream& rng,
                                                 bool overrideHorizon) {
    BridgeDriver driver(analyzer, origin, 2 * n, mode, overrideHorizon);
    std::vector<double> out;
    out.reserve(samples);
    std::int64_t guard = 0;
    while (static_cast<std::int64_t>(out.size()) < samples) {
        auto path = driver.next(rng);
        if (!path) {
            if (++guard > samples * 100000)
                throw BudgetError("bridge acceptance rate too low");
            continue;
        }
        CoarseTrace trace = coarse_trace(*path, analyzer.dec());
        std::int64_t mx = 0;
        for (std::int64_t t : trace.times) mx = std::max(mx, t);
        out.push_back(static_cast<double>(mx) / static_cast<double>(2 * n));
    }
    return out;
}

PropositionSweep proposition_sweep(const CoarseAnalyzer& analyzer, Vertex origin,
                                   std::int64_t n, std::int64_t theta,
                                   std::int64_t delta, std::int64_t r,
                                   std::int64_t mcBudget, RngStream& rng,
                                   bool overrideHorizon) {
    if (theta < 1 || delta < 1 || theta > n / 2 || delta > n / 2)
        throw ParameterError("proposition sweep requires 1 <= theta, delta <= n/2");
    if (!analyzer.dec().in_giant(origin))
        throw DomainError("sweep start must lie on the giant cluster");
    analyzer.kernel().box().require_horizon(origin, 2 * n, overrideHorizon);

    const int d = analyzer.env().box().dimension;
    const std::int64_t mCount = delta + 1;
    const WalkKernel& kernel = analyzer.kernel();
    const ClusterDecomposition& dec = analyzer.dec();

    // Walk until theta coarse steps AND 2n fine steps are both covered, so
    // both the event indicators and the e_{r+1} terms are measurable.
    std::vector<std::int64_t> countHits(mCount, 0), gcompHits(mCount, 0);
    std::vector<double> perRepEsum(mcBudget, 0.0);

    RowBuffer row;
    for (std::int64_t rep = 0; rep < mcBudget; ++rep) {
        Vertex cur = origin;
        CoarseTrace trace;
        trace.sites.push_back(origin);
        std::int64_t fineTime = 0;
        std::int64_t sinceLast = 0;
        std::vector<Vertex> fineAtEvenTimes;  // X_{2t} for t = 0..n
        fineAtEvenTimes.reserve(n + 1);
        fineAtEvenTimes.push_back(origin);
        while (fineTime < 2 * n || trace.steps() < theta) {
            kernel.row(cur, row);
            double target = rng.next_u01();
            double c = 0.0;
            int pick = row.count - 1;
            for (int i = 0; i < row.count; ++i) {
                c += row.prob[i];
                if (target <= c) {
                    pick = i;
                    break;
                }
            }
            cur = row.nbr[pick];
            ++fineTime;
            ++sinceLast;
            if (fineTime % 2 == 0 && fineTime <= 2 * n)
                fineAtEvenTimes.push_back(cur);
            if (dec.in_giant(cur)) {
                trace.sites.push_back(cur);
                trace.times.push_back(sinceLast);
                sinceLast = 0;
            }
        }

        // prefix sums of T
        std::vector<std::int64_t> prefix(trace.times.size() + 1, 0);
        for (std::size_t i = 0; i < trace.times.size(); ++i)
            prefix[i + 1] = prefix[i] + trace.times[i];

        for (std::int64_t m = n - delta; m <= n; ++m) {
            if (fineAtEvenTimes[m] != origin) continue;
            // ell_m: smallest j with prefix[j] >= 2m
            auto it = std::lower_bound(prefix.begin() + 1, prefix.end(), 2 * m);
            std::int64_t ell = it - prefix.begin();
            std::int64_t idx = m - (n - delta);
            if (ell >= theta) ++countHits[idx];
            if (ell <= theta && ell >= r) {
                bool member = g_membership(
                    std::span<const std::int64_t>(trace.times.data(), ell), r,
                    theta, GMode::greedy);
                if (!member) ++gcompHits[idx];
            }
        }
        for (std::int64_t ell = std::max<std::int64_t>(1, r + 1); ell <= theta;
             ++ell) {
            if (trace.sites[ell] != origin) continue;
            perRepEsum[rep] += multiproduct_sum(
                std::span<const std::int64_t>(trace.times.data(), ell), r + 1);
        }
    }

    PropositionSweep out;
    double budget = static_cast<double>(mcBudget);

    // averaged left sides with binomial-style errors on the per-m terms
    auto averaged = [&](const std::vector<std::int64_t>& hits) {
        double sum = 0.0, var = 0.0;
        for (std::int64_t h : hits) {
            double p = static_cast<double>(h) / budget;
            sum += p;
            var += p * (1.0 - p) / budget;
        }
        McEstimate e;
        e.value = sum / static_cast<double>(mCount);
        e.stdError = std::sqrt(var) / static_cast<double>(mCount);
        e.samples = mcBudget;
        e.acceptedSamples = mcBudget;
        return e;
    };
    out.countLhs = averaged(countHits);
    out.gcompLhs = averaged(gcompHits);

    // Prop 4.1 right side: disjointness over m turns the averaged left side
    // into (1/(Delta+1)) sum_ell P(X̂_ell=0, S_ell >= n); each term is then
    // chained through Lemma 3.1 with the measured (2d/alpha) C_A5 and the
    // linear growth E S_{ceil(ell/2)} <= C_T ceil(ell/2). Reversibility only
    // needs the anchor row of P̂^m, so the constant is measured at rho = 0
    // over every m = floor(ell/2) that the chain visits.
    std::vector<std::int64_t> nRange;
    for (std::int64_t v = 1; v <= n; ++v) nRange.push_back(v);
    DiffusiveConstant diff = analyzer.diffusive_constant(origin, 0.0, nRange);
    out.cA5 = diff.value;
    out.cT = analyzer.max_expected_sojourn();
    double chainSum = 0.0;
    for (std::int64_t ell = theta; ell <= 2 * n; ++ell) {
        double floorHalf = std::max<double>(1.0, static_cast<double>(ell / 2));
        double ceilHalf = static_cast<double>((ell + 1) / 2);
        chainSum += ceilHalf * std::pow(floorHalf, -0.5 * d);
    }
    out.countRhs = diff.reversalFactor * out.cA5 * out.cT * chainSum /
                   static_cast<double>(n) / static_cast<double>(mCount);

    // Prop 4.2 right side via Eq. 4.15 + Markov, estimated from the same MC.
    double factorial = 1.0;
    for (std::int64_t i = 2; i <= r + 1; ++i) factorial *= static_cast<double>(i);
    McEstimate esum = mean_estimate(perRepEsum);
    double scale = factorial /
                   (static_cast<double>(n) *
                    std::pow(static_cast<double>(theta), static_cast<double>(r)) *
                    static_cast<double>(mCount));
    out.gcompRhs.value = esum.value * scale;
    out.gcompRhs.stdError = esum.stdError * scale;
    out.gcompRhs.samples = mcBudget;
    out.gcompRhs.acceptedSamples = mcBudget;

    double shape41 = std::pow(static_cast<double>(n), -0.5 * d) *
                     (static_cast<double>(n) / static_cast<double>(delta));
    double ratio = static_cast<double>(n) / static_cast<double>(theta);
    shape41 *= (d == 4) ? std::log(ratio) : std::pow(ratio, 0.5 * d - 2.0);
    double shape42 = std::pow(static_cast<double>(n), -0.5 * d) *
                     (static_cast<double>(n) / static_cast<double>(delta)) *
                     std::pow(ratio, 0.5 * d - 2.0);
    out.countShapeConstant = shape41 > 0.0 ? out.countLhs.value / shape41 : 0.0;
    out.gcompShapeConstant = shape42 > 0.0 ? out.gcompLhs.value / shape42 : 0.0;

    out.countHolds =
        out.countLhs.value - 4.0 * out.countLhs.stdError <= out.countRhs;
    double combined = std::sqrt(out.gcompLhs.stdError * out.gcompLhs.stdError +
                                out.gcompRhs.stdError * out.gcompRhs.stdError);
    out.gcompHolds = out.gcompLhs.value - out.gcompRhs.value <= 4.0 * combined ||
                     out.gcompLhs.value <= out.gcompRhs.value;
    return out;
}

}  // namespace rcm
