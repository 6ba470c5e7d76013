#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/rng.hpp"

namespace rcm {

struct RowBuffer {
    int count = 0;
    Vertex nbr[2 * kMaxDim];
    double prob[2 * kMaxDim];
};

// Reversible transition kernel P(x,y) = w_xy / pi(x), pi(x) = sum_z w_xz.
// Rows are materialized on demand from the conductance array, so the kernel
// itself stores only pi. Immutable after construction.
class WalkKernel {
  public:
    explicit WalkKernel(const Environment& env);

    const Environment& env() const { return *env_; }
    const BoxSpec& box() const { return env_->box(); }
    double pi(Vertex v) const { return pi_[v]; }
    const std::vector<double>& pi_all() const { return pi_; }

    void row(Vertex v, RowBuffer& out) const;
    double prob(Vertex x, Vertex y) const {
        return env_->conductance(x, y) / pi_[x];
    }

  private:
    const Environment* env_;
    std::vector<double> pi_;
};

// Probability mass on box vertices, support kept sorted. `origin`/`elapsed`
// carry the horizon bookkeeping for distributions grown from a point mass.
struct SparseDistribution {
    std::vector<Vertex> support;
    std::vector<double> mass;
    std::optional<Vertex> origin;
    std::int64_t elapsed = 0;

    static SparseDistribution delta(Vertex v) {
        SparseDistribution d;
        d.support = {v};
        d.mass = {1.0};
        d.origin = v;
        return d;
    }

    double total() const;
    double mass_at(Vertex v) const;
    std::size_t size() const { return support.size(); }
};

struct Path {
    std::vector<Vertex> vertices;  // X_0 .. X_t
    std::string mode;              // forward | rejection | exactBridge
    std::int64_t attempts = 1;     // rejection: forward paths consumed
};

// dist * P^steps, with the horizon rule enforced against dist.origin unless
// overridden. Mass is conserved to 1e-12 per step.
SparseDistribution evolve(const WalkKernel& kernel, const SparseDistribution& dist,
                          std::int64_t steps, bool overrideHorizon = false);

// Exact P^{2n}(origin,origin) for n = 1..nMax.
std::vector<double> heat_diagonal(const WalkKernel& kernel, Vertex origin,
                                  std::int64_t nMax, bool overrideHorizon = false);

// lambda_n = n^{d/2} P^{2n}(0,0); heat[i] holds P^{2(i+1)}(0,0).
std::vector<double> lambda_seq(const std::vector<double>& heat, int d);

// zeta_n per dimension case (d=4 uses n^2/sqrt(log n) and is undefined at
// n=1, reported as NaN; 5<=d<=8 uses n^{d/4+1}; d>=9 uses n^3).
std::vector<double> zeta_seq(const std::vector<double>& heat, int d);

Path sample_path(const WalkKernel& kernel, Vertex start, std::int64_t steps,
                 RngStream& rng);

// Walk conditioned on X_{2n} = origin. Exact mode samples sequentially with
// weights P(z,w) u_{2n-k-1}(w) / u_{2n-k}(z), u_m(z) = P^m(z, origin).
class BridgeSampler {
  public:
    BridgeSampler(const WalkKernel& kernel, Vertex origin, std::int64_t horizon2n,
                  bool overrideHorizon = false,
                  std::size_t memoryBudgetBytes = std::size_t{1} << 30);

    double return_probability() const { return returnProb_; }
    // P^m(z, origin)
    double backward(std::int64_t m, Vertex z) const;
    Path sample(RngStream& rng) const { return sample_horizon(rng, horizon2n_); }
    // Bridge to any even horizon 2m <= the built horizon; the backward
    // vectors are shared.
    Path sample_horizon(RngStream& rng, std::int64_t horizon2m) const;

    Vertex origin() const { return origin_; }
    std::int64_t horizon() const { return horizon2n_; }
    bool checkpointed() const { return checkpointed_; }

  private:
    const WalkKernel* kernel_;
    Vertex origin_;
    std::int64_t horizon2n_;
    bool checkpointed_ = false;
    // backward vectors; in checkpoint mode only even m are kept
    std::vector<SparseDistribution> stored_;
    double returnProb_ = 0.0;

    SparseDistribution rebuild_odd(std::int64_t m) const;
};

enum class BridgeMode { rejection, exactBridge };

Path sample_bridge(const WalkKernel& kernel, Vertex origin, std::int64_t horizon2n,
                   BridgeMode mode, RngStream& rng, bool overrideHorizon = false,
                   std::int64_t maxAttempts = 50'000'000);

}  // namespace rcm
