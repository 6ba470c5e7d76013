#include "rcm/coarse.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace rcm {

namespace {
constexpr std::int64_t kDenseHoleLimit = 2048;

Vertex sample_step(const WalkKernel& kernel, Vertex cur, RowBuffer& row,
                   RngStream& rng) {
    kernel.row(cur, row);
    double target = rng.next_u01();
    double c = 0.0;
    for (int i = 0; i < row.count; ++i) {
        c += row.prob[i];
        if (target <= c) return row.nbr[i];
    }
    return row.nbr[row.count - 1];
}
}  // namespace

CoarseTrace coarse_trace(const Path& path, const ClusterDecomposition& dec) {
    if (path.vertices.empty()) throw DomainError("empty path");
    if (!dec.in_giant(path.vertices.front()))
        throw DomainError("coarse trace must start on the giant cluster");
    CoarseTrace trace;
    trace.sites.push_back(path.vertices.front());
    std::int64_t sinceLast = 0;
    for (std::size_t i = 1; i < path.vertices.size(); ++i) {
        ++sinceLast;
        if (dec.in_giant(path.vertices[i])) {
            trace.sites.push_back(path.vertices[i]);
            trace.times.push_back(sinceLast);
            sinceLast = 0;
        }
    }
    trace.incompleteTail = sinceLast > 0;
    return trace;
}

std::int64_t HoleAbsorption::vert_index(Vertex z) const {
    auto it = std::lower_bound(verts.begin(), verts.end(), z);
    if (it == verts.end() || *it != z) return -1;
    return it - verts.begin();
}

std::int64_t HoleAbsorption::boundary_index(Vertex b) const {
    auto it = std::lower_bound(boundary.begin(), boundary.end(), b);
    if (it == boundary.end() || *it != b) return -1;
    return it - boundary.begin();
}

void CoarseMatrix::apply(const std::vector<double>& in,
                         std::vector<double>& out) const {
    out.assign(in.size(), 0.0);
    const std::int64_t n = order();
    for (std::int64_t i = 0; i < n; ++i) {
        double m = in[i];
        if (m == 0.0) continue;
        for (std::int64_t k = rowPtr[i]; k < rowPtr[i + 1]; ++k)
            out[col[k]] += m * val[k];
    }
}

CoarseAnalyzer::CoarseAnalyzer(const Environment& env,
                               const ClusterDecomposition& dec)
    : env_(&env), dec_(&dec), kernel_(env) {
    holeCache_.resize(dec.hole_count());
}

HoleAbsorption CoarseAnalyzer::solve_hole(std::int32_t holeId) const {
    const auto& verts = dec_->hole(holeId);
    const auto& boundary = dec_->hole_boundary(holeId);
    const std::int64_t m = static_cast<std::int64_t>(verts.size());
    const std::int64_t b = static_cast<std::int64_t>(boundary.size());

    HoleAbsorption out;
    out.verts = verts;
    out.boundary = boundary;

    // Local index of hole vertices for O(1) row assembly.
    auto local = [&](Vertex z) {
        auto it = std::lower_bound(verts.begin(), verts.end(), z);
        return (it != verts.end() && *it == z)
                   ? static_cast<std::int64_t>(it - verts.begin())
                   : std::int64_t{-1};
    };
    auto boundaryLocal = [&](Vertex z) {
        auto it = std::lower_bound(boundary.begin(), boundary.end(), z);
        return (it != boundary.end() && *it == z)
                   ? static_cast<std::int64_t>(it - boundary.begin())
                   : std::int64_t{-1};
    };

    RowBuffer row;
    if (m <= kDenseHoleLimit) {
        Eigen::MatrixXd M = Eigen::MatrixXd::Identity(m, m);  // I - Q
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, b);
        for (std::int64_t i = 0; i < m; ++i) {
            kernel_.row(verts[i], row);
            for (int k = 0; k < row.count; ++k) {
                std::int64_t j = local(row.nbr[k]);
                if (j >= 0) {
                    M(i, j) -= row.prob[k];
                } else {
                    std::int64_t bj = boundaryLocal(row.nbr[k]);
                    R(i, bj) += row.prob[k];
                }
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
        out.hitProb = lu.solve(R);
        out.expectedTime = lu.solve(Eigen::VectorXd::Ones(m));
        return out;
    }

    // Large hole: conjugate gradient on the pi-symmetrized system
    // (I - S) D^{1/2} h = D^{1/2} r with S = D^{1/2} Q D^{-1/2}.
    Eigen::VectorXd sqrtPi(m);
    for (std::int64_t i = 0; i < m; ++i) sqrtPi(i) = std::sqrt(kernel_.pi(verts[i]));
    std::vector<Eigen::Triplet<double>> trips;
    for (std::int64_t i = 0; i < m; ++i) {
        trips.emplace_back(i, i, 1.0);
        kernel_.row(verts[i], row);
        for (int k = 0; k < row.count; ++k) {
            std::int64_t j = local(row.nbr[k]);
            if (j >= 0)
                trips.emplace_back(i, j,
                                   -row.prob[k] * sqrtPi(i) / sqrtPi(j));
        }
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper>
        cg;
    cg.setTolerance(1e-13);
    cg.compute(A);

    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(m, b);
    for (std::int64_t i = 0; i < m; ++i) {
        kernel_.row(verts[i], row);
        for (int k = 0; k < row.count; ++k) {
            if (local(row.nbr[k]) >= 0) continue;
            R(i, boundaryLocal(row.nbr[k])) += row.prob[k];
        }
    }
    out.hitProb.resize(m, b);
    for (std::int64_t j = 0; j < b; ++j) {
        Eigen::VectorXd rhs = R.col(j).cwiseProduct(sqrtPi);
        Eigen::VectorXd h = cg.solve(rhs);
        if (cg.info() != Eigen::Success)
            throw NumericalError("hole absorbing solve did not converge");
        out.hitProb.col(j) = h.cwiseQuotient(sqrtPi);
    }
    Eigen::VectorXd tau = cg.solve(sqrtPi);  // rhs = D^{1/2} * ones
    if (cg.info() != Eigen::Success)
        throw NumericalError("hole expected-time solve did not converge");
    out.expectedTime = tau.cwiseQuotient(sqrtPi);
    return out;
}

const HoleAbsorption& CoarseAnalyzer::hole_data(std::int32_t holeId) const {
    if (holeId < 0 || static_cast<std::size_t>(holeId) >= holeCache_.size())
        throw DomainError("hole id out of range");
    std::lock_guard<std::mutex> lock(mu_);
    if (!holeCache_[holeId])
        holeCache_[holeId] =
            std::make_unique<HoleAbsorption>(solve_hole(holeId));
    return *holeCache_[holeId];
}

std::vector<std::pair<Vertex, double>> CoarseAnalyzer::kernel_row(Vertex x) const {
    if (!dec_->in_giant(x))
        throw DomainError("coarse kernel row requires a giant vertex");
    std::map<Vertex, double> acc;
    RowBuffer row;
    kernel_.row(x, row);
    for (int k = 0; k < row.count; ++k) {
        Vertex z = row.nbr[k];
        if (dec_->in_giant(z)) {
            acc[z] += row.prob[k];
        } else {
            const HoleAbsorption& hole = hole_data(dec_->hole_id(z));
            std::int64_t zi = hole.vert_index(z);
            for (std::size_t j = 0; j < hole.boundary.size(); ++j) {
                double h = hole.hitProb(zi, j);
                if (h != 0.0) acc[hole.boundary[j]] += row.prob[k] * h;
            }
        }
    }
    return {acc.begin(), acc.end()};
}

SojournLaw CoarseAnalyzer::sojourn_pmf(Vertex x, Vertex y,
                                       std::int64_t nMax) const {
    if (!dec_->in_giant(x) || !dec_->in_giant(y))
        throw DomainError("sojourn law requires giant vertices");
    if (nMax < 1) throw ParameterError("sojourn law requires nMax >= 1");

    SojournLaw law;
    law.x = x;
    law.y = y;
    law.pmf.assign(nMax, 0.0);

    const BoxSpec& box = env_->box();
    if (box.adjacent(x, y)) law.pmf[0] = kernel_.prob(x, y);

    // Excursions: one term per hole adjacent to x, marched exactly.
    RowBuffer rowX, rowZ;
    kernel_.row(x, rowX);
    for (std::int32_t holeId : dec_->holes_adjacent(x)) {
        const auto& verts = dec_->hole(holeId);
        const std::int64_t m = static_cast<std::int64_t>(verts.size());
        const HoleAbsorption& hole = hole_data(holeId);

        Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
        for (int k = 0; k < rowX.count; ++k) {
            std::int64_t zi = hole.vert_index(rowX.nbr[k]);
            if (zi >= 0) v(zi) = rowX.prob[k];
        }
        // exit weights toward y
        Eigen::VectorXd exitToY = Eigen::VectorXd::Zero(m);
        for (std::int64_t i = 0; i < m; ++i)
            if (box.adjacent(verts[i], y))
                exitToY(i) = kernel_.prob(verts[i], y);

        // march v through Q, reading the exit mass at each length
        for (std::int64_t n = 2; n <= nMax; ++n) {
            law.pmf[n - 1] += v.dot(exitToY);
            if (n == nMax) break;
            Eigen::VectorXd next = Eigen::VectorXd::Zero(m);
            for (std::int64_t i = 0; i < m; ++i) {
                if (v(i) == 0.0) continue;
                kernel_.row(verts[i], rowZ);
                for (int k = 0; k < rowZ.count; ++k) {
                    std::int64_t j = hole.vert_index(rowZ.nbr[k]);
                    if (j >= 0) next(j) += v(i) * rowZ.prob[k];
                }
            }
            v.swap(next);
        }
    }

    // Exact tail: total pair mass P̂(x,y) minus what the pmf accounts for.
    double rowMass = 0.0;
    for (const auto& [w, p] : kernel_row(x))
        if (w == y) rowMass = p;
    double seen = kahan_total(law.pmf);
    law.tailMass = std::max(0.0, rowMass - seen);
    return law;
}

SojournExpectation CoarseAnalyzer::expected_sojourn(Vertex x) const {
    if (!dec_->in_giant(x))
        throw DomainError("expected sojourn requires a giant vertex");
    RowBuffer row;
    kernel_.row(x, row);
    double e = 1.0;
    for (int k = 0; k < row.count; ++k) {
        Vertex z = row.nbr[k];
        if (dec_->in_giant(z)) continue;
        const HoleAbsorption& hole = hole_data(dec_->hole_id(z));
        e += row.prob[k] * hole.expectedTime(hole.vert_index(z));
    }
    SojournExpectation out;
    out.value = e;
    out.ratioToNeighborhood = e / static_cast<double>(dec_->neighborhood_size(x));
    return out;
}

double CoarseAnalyzer::max_expected_sojourn() const {
    double best = 0.0;
    for (Vertex x : dec_->giant())
        best = std::max(best, expected_sojourn(x).value);
    return best;
}

double CoarseAnalyzer::stationary_mean_sojourn() const {
    KahanSum num, den;
    for (Vertex x : dec_->giant()) {
        double p = kernel_.pi(x);
        num.add(p * expected_sojourn(x).value);
        den.add(p);
    }
    return num.value() / den.value();
}

ErgodicAverage CoarseAnalyzer::ergodic_average(Vertex start, std::int64_t ell,
                                               RngStream& rng) const {
    if (env_->box().topology != Topology::torus)
        throw UnsupportedTopologyError("ergodic average is defined on the torus");
    if (!dec_->in_giant(start))
        throw DomainError("ergodic average must start on the giant cluster");
    if (ell < 1) throw ParameterError("ergodic average requires ell >= 1");
    auto dist = dec_->markov_distances_from(start);
    for (Vertex x : dec_->giant())
        if (dist[x] < 0)
            throw ErgodicityError("giant cluster is not coarse-connected");

    ErgodicAverage out;
    out.zInfinity = stationary_mean_sojourn();

    RowBuffer row;
    Vertex cur = start;
    std::int64_t coarseSteps = 0;
    std::int64_t fineTime = 0;
    std::int64_t nextCheckpoint = 1;
    while (coarseSteps < ell) {
        cur = sample_step(kernel_, cur, row, rng);
        ++fineTime;
        if (dec_->in_giant(cur)) {
            ++coarseSteps;
            if (coarseSteps == nextCheckpoint || coarseSteps == ell) {
                out.checkpoints.emplace_back(
                    coarseSteps,
                    static_cast<double>(fineTime) /
                        static_cast<double>(coarseSteps));
                if (coarseSteps == nextCheckpoint) nextCheckpoint *= 2;
            }
        }
    }
    out.zFinal = static_cast<double>(fineTime) / static_cast<double>(ell);
    return out;
}

const CoarseMatrix& CoarseAnalyzer::matrix() const {
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (matrix_) return *matrix_;
    }
    auto mat = std::make_unique<CoarseMatrix>();
    mat->giant = dec_->giant();
    mat->giantIndex.assign(env_->box().n_vertices(), -1);
    for (std::size_t i = 0; i < mat->giant.size(); ++i)
        mat->giantIndex[mat->giant[i]] = static_cast<std::int32_t>(i);
    mat->rowPtr.push_back(0);
    for (Vertex x : mat->giant) {
        for (const auto& [y, p] : kernel_row(x)) {
            mat->col.push_back(mat->giantIndex[y]);
            mat->val.push_back(p);
        }
        mat->rowPtr.push_back(static_cast<std::int64_t>(mat->col.size()));
    }
    std::lock_guard<std::mutex> lock(mu_);
    if (!matrix_) matrix_ = std::move(mat);
    return *matrix_;
}

DiffusiveConstant CoarseAnalyzer::diffusive_constant(
    Vertex anchor, double rho, const std::vector<std::int64_t>& nRange,
    std::int64_t opBudget) const {
    if (nRange.empty()) throw ParameterError("empty n range");
    const CoarseMatrix& mat = matrix();
    const int d = env_->box().dimension;
    std::int64_t nMax = *std::max_element(nRange.begin(), nRange.end());

    auto dw = dec_->markov_distances_from(anchor);
    std::vector<std::int32_t> ball;  // giant indices within rho * nMax
    double maxRadius = rho * static_cast<double>(nMax);
    for (std::size_t i = 0; i < mat.giant.size(); ++i) {
        std::int64_t dist = dw[mat.giant[i]];
        if (dist >= 0 && static_cast<double>(dist) <= maxRadius)
            ball.push_back(static_cast<std::int32_t>(i));
    }
    std::int64_t nnz = static_cast<std::int64_t>(mat.val.size());
    if (static_cast<std::int64_t>(ball.size()) * nMax * nnz > opBudget)
        throw ResourceError("diffusive-constant sweep exceeds the op budget");

    DiffusiveConstant out;
    out.reversalFactor = 2.0 * d / dec_->alpha();
    std::vector<DiffusiveConstant::Row> rows;
    for (std::int64_t n : nRange) rows.push_back({n, 0.0, 0});

    std::vector<std::int64_t> sorted(nRange.begin(), nRange.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> cur(mat.order()), next(mat.order());
    for (std::int32_t xi : ball) {
        std::fill(cur.begin(), cur.end(), 0.0);
        cur[xi] = 1.0;
        std::int64_t dist = dw[mat.giant[xi]];
        std::size_t slot = 0;
        for (std::int64_t n = 1; n <= nMax && slot < sorted.size(); ++n) {
            mat.apply(cur, next);
            cur.swap(next);
            if (n == sorted[slot]) {
                // admissible if d_w(anchor, x) <= rho * n
                if (static_cast<double>(dist) <= rho * static_cast<double>(n)) {
                    double mx = *std::max_element(cur.begin(), cur.end());
                    for (auto& r : rows) {
                        if (r.n == n) {
                            r.maxEntry = std::max(r.maxEntry, mx);
                            ++r.ballSize;
                        }
                    }
                }
                ++slot;
            }
        }
    }
    for (auto& r : rows) {
        double scaled = std::pow(static_cast<double>(r.n), 0.5 * d) * r.maxEntry;
        out.value = std::max(out.value, scaled);
    }
    out.table = std::move(rows);
    return out;
}

CoarseTrace CoarseAnalyzer::sample_coarse_trace(Vertex start, std::int64_t ell,
                                                RngStream& rng) const {
    if (!dec_->in_giant(start))
        throw DomainError("coarse trace must start on the giant cluster");
    CoarseTrace trace;
    trace.sites.reserve(ell + 1);
    trace.sites.push_back(start);
    RowBuffer row;
    Vertex cur = start;
    std::int64_t sinceLast = 0;
    while (trace.steps() < ell) {
        cur = sample_step(kernel_, cur, row, rng);
        ++sinceLast;
        if (dec_->in_giant(cur)) {
            trace.sites.push_back(cur);
            trace.times.push_back(sinceLast);
            sinceLast = 0;
        }
    }
    return trace;
}

}  // namespace rcm
