#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rcm/cluster.hpp"
#include "rcm/coarse.hpp"

namespace rcm {

// Substochastic operator Q on G_xy = (G_x ^ G_y) \ giant, self-adjoint in the
// pi-weighted inner product, together with the vectors h_u(z) = P(z,u).
struct HoleSpectralData {
    Vertex x = 0;
    Vertex y = 0;
    std::vector<Vertex> holeVertices;  // G_xy, sorted
    Eigen::MatrixXd Q;                 // P restricted to G_xy
    Eigen::VectorXd weights;           // pi on G_xy
    Eigen::VectorXd hX, hY;
    // D^{1/2} Q D^{-1/2}, assembled from w_zz'/sqrt(pi_z pi_z') so it is
    // bit-exactly symmetric.
    Eigen::MatrixXd sym;

    bool empty() const { return holeVertices.empty(); }
    std::int64_t size() const {
        return static_cast<std::int64_t>(holeVertices.size());
    }

    // <f,g> = sum_z pi(z) f(z) g(z)
    double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
        return (weights.array() * f.array() * g.array()).sum();
    }
};

// Empty G_xy yields data with empty() == true: all sojourn mass with n >= 2
// through this pair is zero.
HoleSpectralData build_hole_operator(const Environment& env,
                                     const ClusterDecomposition& dec, Vertex x,
                                     Vertex y);

// ||Q|| in the weighted space. Dense eigendecomposition for small holes,
// power iteration on Q^2 (tol 1e-12, <= 1e5 sweeps) for large ones.
double operator_norm(const HoleSpectralData& data);

// <h_x, Q^{n-2} h_y>; equals pi(x) P^x(X̂_1=y, T_1=n, X_1 in G_xy).
double sojourn_inner(const HoleSpectralData& data, std::int64_t n);
// Values for n = 2..nMax in one sweep.
std::vector<double> sojourn_inner_sequence(const HoleSpectralData& data,
                                           std::int64_t nMax);

// <h_x, (1-Q^2) Q^{n-2} h_y> = pi(x) (pmf(n) - pmf(n+2)) through G_xy.
double smoothness_gap(const HoleSpectralData& data, std::int64_t n);

struct NormBoundReport {
    struct Row {
        std::int64_t m = 0;
        double normFirst = 0.0;   // ||(1-Q^2) Q^{2m}||
        double boundFirst = 0.0;  // 1/(m+1)
        double normSecond = 0.0;  // ||(1-Q^2)^2 Q^{2m}||
        double boundSecond = 0.0;  // 4/(m+2)^2
    };
    std::vector<Row> rows;
    double operatorNorm = 0.0;
    double maxViolation = 0.0;  // positive means a bound was exceeded
    bool pass = false;
};

// Checks ||(1-Q^2)Q^{2m}|| <= 1/(m+1) and ||(1-Q^2)^2 Q^{2m}|| <= 4/(m+2)^2
// for m = 0..mMax; these are theorems, so a violation beyond 1e-10 indicates
// an implementation bug.
NormBoundReport norm_bound_check(const HoleSpectralData& data, std::int64_t mMax);

struct PmfBoundReport {
    Vertex x = 0;
    Vertex y = 0;
    std::int64_t gSize = 0;            // |G_x ^ G_y|
    double constFirst = 0.0;           // sup n^2 pmf(n) / |G_x ^ G_y|
    double constSecond = 0.0;          // sup n^3 |pmf(n)-pmf(n+2k)| / (k |G..|)
    double identityMismatch = 0.0;     // k=1 sup vs smoothness-gap route
    // restricted-vs-full pmf discrepancy (expected 0; excursions ending at y
    // are automatically confined to G_xy)
    double crossHoleDiscrepancy = 0.0;
};

PmfBoundReport pmf_bound_check(const CoarseAnalyzer& analyzer, Vertex x, Vertex y,
                               const std::vector<std::int64_t>& nRange,
                               const std::vector<std::int64_t>& kRange);

// Max row sum of Q^{|G_xy|}; strictly below 1 for nonempty holes.
double row_sum_deficiency(const HoleSpectralData& data);

}  // namespace rcm
