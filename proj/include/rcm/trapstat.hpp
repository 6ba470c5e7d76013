#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rcm/coarse.hpp"
#include "rcm/stats.hpp"

namespace rcm {

// Event parameters: by time 2n the walk makes at most theta coarse steps and
// spends all but theta time units in at most r excursions.
struct TrapEventSpec {
    std::int64_t r = 1;
    std::int64_t theta = 1;
    std::int64_t n = 1;

    void validate() const {
        if (r < 0) throw ParameterError("r must be >= 0");
        if (theta < 1 || theta > n)
            throw ParameterError("theta must lie in [1, n]");
        if (r > theta) throw ParameterError("r must be <= theta");
    }

    static std::int64_t default_r(int d) { return d / 2 - 1; }  // floor(d/2-1)
};

// Smallest m with T_1 + ... + T_m >= 2n.
std::int64_t ell_n(const CoarseTrace& trace, std::int64_t n);

enum class GMode { greedy, bruteForce };

// Membership in G_{ell,r}(theta): some r of the entries can be removed so the
// rest sum to at most theta. Greedy removes the r largest entries; brute
// force minimizes over all r-subsets. They always agree.
bool g_membership(std::span<const std::int64_t> times, std::int64_t r,
                  std::int64_t theta, GMode mode = GMode::greedy);

bool detect_event(const CoarseTrace& trace, const TrapEventSpec& spec);

// Elementary symmetric polynomial e_r(t_1..t_ell) via the standard
// recurrence; the sum over I(r,ell) of products.
double multiproduct_sum(std::span<const std::int64_t> times, std::int64_t r);

struct ImplicationResult {
    bool applicable = false;  // times not in G and sum >= n
    bool holds = true;
    double lhs = 0.0;   // sum over I(r+1,ell) of products
    double rhs = 0.0;   // n theta^r / (r+1)!
    double slack = 0.0;
};

// Non-membership plus total >= n forces the (r+1)-fold product sum to be at
// least n theta^r / (r+1)!.
ImplicationResult implication_check(std::span<const std::int64_t> times,
                                    std::int64_t r, std::int64_t theta,
                                    std::int64_t n);

// Path transformation: add 2s to the first maximal sojourn time.
CoarseTrace phi_transform(const CoarseTrace& trace, std::int64_t s);

// P^0(event | X_{2n} = origin) by bridge Monte Carlo.
McEstimate conditional_event_prob(const CoarseAnalyzer& analyzer, Vertex origin,
                                  const TrapEventSpec& spec, BridgeMode mode,
                                  std::int64_t mcBudget, RngStream& rng,
                                  bool overrideHorizon = false);

struct ConditionalSweepEntry {
    std::int64_t m = 0;
    McEstimate estimate;
};

struct ConditionalSweep {
    std::vector<ConditionalSweepEntry> entries;  // m = n-theta .. n
    std::int64_t nStar = 0;                      // argmax of the estimate
};

ConditionalSweep conditional_event_sweep(const CoarseAnalyzer& analyzer,
                                         Vertex origin, const TrapEventSpec& spec,
                                         BridgeMode mode,
                                         std::int64_t budgetPerHorizon,
                                         RngStream& rng,
                                         bool overrideHorizon = false);

// Max-sojourn fraction max_k T_k / 2n over bridge samples; the trapping
// diagnostic compared between planted and baseline environments.
std::vector<double> bridge_max_sojourn_fractions(const CoarseAnalyzer& analyzer,
                                                 Vertex origin, std::int64_t n,
                                                 BridgeMode mode,
                                                 std::int64_t samples,
                                                 RngStream& rng,
                                                 bool overrideHorizon = false);

struct PropositionSweep {
    // averaged left sides over m = n-delta .. n
    McEstimate countLhs;    // P^0(ell_m >= theta, X_{2m} = 0)
    McEstimate gcompLhs;    // P^0(ell_m <= theta, X_{2m} = 0, not in G)
    // measured right sides
    double countRhs = 0.0;  // (2d/alpha) C_A5 C_T chain, summed over ell
    McEstimate gcompRhs;    // (r+1)!/(n theta^r) sum_ell E(e_{r+1}; X̂_ell = 0)
    // shape constants: lhs divided by n^{-d/2} (n/Delta) {log(n/theta) or
    // (n/theta)^{d/2-2}}
    double countShapeConstant = 0.0;
    double gcompShapeConstant = 0.0;
    bool countHolds = false;  // lhs <= rhs at 4 sigma
    bool gcompHolds = false;
    double cA5 = 0.0;
    double cT = 0.0;  // max over giant of E^x T_1
};

PropositionSweep proposition_sweep(const CoarseAnalyzer& analyzer, Vertex origin,
                                   std::int64_t n, std::int64_t theta,
                                   std::int64_t delta, std::int64_t r,
                                   std::int64_t mcBudget, RngStream& rng,
                                   bool overrideHorizon = false);

}  // namespace rcm
