#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rcm/cluster.hpp"
#include "rcm/kernel.hpp"

namespace rcm {

// Coarse-grained trajectory: the walk observed at its visits to the giant
// cluster. times[k] is T_{k+1}, the fine steps between visit k and k+1.
struct CoarseTrace {
    std::vector<Vertex> sites;        // X̂_0 .. X̂_ell
    std::vector<std::int64_t> times;  // T_1 .. T_ell
    bool incompleteTail = false;      // path ended mid-excursion (truncated)

    std::int64_t steps() const { return static_cast<std::int64_t>(times.size()); }
    std::int64_t fine_length() const {
        std::int64_t s = 0;
        for (auto t : times) s += t;
        return s;
    }
};

CoarseTrace coarse_trace(const Path& path, const ClusterDecomposition& dec);

// P^x(X̂_1 = y, T_1 = n) for n = 1..nMax plus the exact tail mass
// P^x(X̂_1 = y, T_1 > nMax); summing value+tail over y gives 1.
struct SojournLaw {
    Vertex x = 0;
    Vertex y = 0;
    std::vector<double> pmf;  // pmf[n-1] = P(T_1 = n, X̂_1 = y)
    double tailMass = 0.0;

    double at(std::int64_t n) const {
        return (n >= 1 && n <= static_cast<std::int64_t>(pmf.size()))
                   ? pmf[n - 1]
                   : 0.0;
    }
};

struct SojournExpectation {
    double value = 0.0;              // E^x T_1
    double ratioToNeighborhood = 0.0;  // E^x T_1 / |G_x|
};

struct ErgodicAverage {
    std::vector<std::pair<std::int64_t, double>> checkpoints;  // (ell, Z_ell)
    double zFinal = 0.0;
    double zInfinity = 0.0;  // pi-weighted spatial average of E^x T_1
};

struct DiffusiveConstant {
    double value = 0.0;  // max over the sweep of n^{d/2} P̂^n(x,y)
    double reversalFactor = 0.0;  // 2d/alpha
    struct Row {
        std::int64_t n = 0;
        double maxEntry = 0.0;  // max over admissible x and all y of P̂^n(x,y)
        std::int64_t ballSize = 0;
    };
    std::vector<Row> table;
};

// Per-hole absorbing-chain solve: exit probabilities onto the giant boundary
// and expected absorption times.
struct HoleAbsorption {
    std::vector<Vertex> verts;     // the hole, sorted
    std::vector<Vertex> boundary;  // giant vertices adjacent to the hole
    Eigen::MatrixXd hitProb;       // verts x boundary
    Eigen::VectorXd expectedTime;  // per hole vertex

    std::int64_t vert_index(Vertex z) const;
    std::int64_t boundary_index(Vertex b) const;
};

// Coarse kernel over the giant cluster in CSR form.
struct CoarseMatrix {
    std::vector<Vertex> giant;             // index -> vertex (sorted)
    std::vector<std::int32_t> giantIndex;  // vertex -> index or -1
    std::vector<std::int64_t> rowPtr;
    std::vector<std::int32_t> col;
    std::vector<double> val;

    std::int64_t order() const { return static_cast<std::int64_t>(giant.size()); }
    void apply(const std::vector<double>& in, std::vector<double>& out) const;
};

// Exact coarse-walk machinery for one (environment, decomposition) pair.
// Hole solves and the coarse matrix are memoized; queries return identical
// values under concurrency.
class CoarseAnalyzer {
  public:
    CoarseAnalyzer(const Environment& env, const ClusterDecomposition& dec);

    const Environment& env() const { return *env_; }
    const ClusterDecomposition& dec() const { return *dec_; }
    const WalkKernel& kernel() const { return kernel_; }

    const HoleAbsorption& hole_data(std::int32_t holeId) const;

    // P̂(x,·) as a sorted (vertex, probability) list; sums to 1 within 1e-10.
    std::vector<std::pair<Vertex, double>> kernel_row(Vertex x) const;

    SojournLaw sojourn_pmf(Vertex x, Vertex y, std::int64_t nMax) const;
    SojournExpectation expected_sojourn(Vertex x) const;
    double max_expected_sojourn() const;

    // Exact stationary average of E^. T_1 under pi restricted to the giant:
    // the finite-box stand-in for E_{Q_alpha} E^0 T_1.
    double stationary_mean_sojourn() const;

    ErgodicAverage ergodic_average(Vertex start, std::int64_t ell,
                                   RngStream& rng) const;

    DiffusiveConstant diffusive_constant(Vertex anchor, double rho,
                                         const std::vector<std::int64_t>& nRange,
                                         std::int64_t opBudget = 4'000'000'000) const;

    const CoarseMatrix& matrix() const;

    // Fine walk from `start` until `ell` coarse steps are realized.
    CoarseTrace sample_coarse_trace(Vertex start, std::int64_t ell,
                                    RngStream& rng) const;

  private:
    const Environment* env_;
    const ClusterDecomposition* dec_;
    WalkKernel kernel_;

    mutable std::mutex mu_;
    mutable std::vector<std::unique_ptr<HoleAbsorption>> holeCache_;
    mutable std::unique_ptr<CoarseMatrix> matrix_;

    HoleAbsorption solve_hole(std::int32_t holeId) const;
};

}  // namespace rcm
