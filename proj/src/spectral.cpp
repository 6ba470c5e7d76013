#include "rcm/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace rcm {

namespace {
constexpr std::int64_t kDenseEigenLimit = 2000;

Eigen::VectorXd eigenvalues_of_sym(const HoleSpectralData& data) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(data.sym,
                                                      Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigen-solve failed on the hole operator");
    return es.eigenvalues();
}

}  // namespace

HoleSpectralData build_hole_operator(const Environment& env,
                                     const ClusterDecomposition& dec, Vertex x,
                                     Vertex y) {
    if (!dec.in_giant(x) || !dec.in_giant(y))
        throw DomainError("hole operator endpoints must be giant vertices");
    HoleSpectralData data;
    data.x = x;
    data.y = y;
    data.holeVertices = dec.g_xy(x, y);
    const std::int64_t m = data.size();
    if (m == 0) return data;

    WalkKernel kernel(env);
    data.weights.resize(m);
    for (std::int64_t i = 0; i < m; ++i)
        data.weights(i) = kernel.pi(data.holeVertices[i]);

    auto local = [&](Vertex z) {
        auto it = std::lower_bound(data.holeVertices.begin(),
                                   data.holeVertices.end(), z);
        return (it != data.holeVertices.end() && *it == z)
                   ? static_cast<std::int64_t>(it - data.holeVertices.begin())
                   : std::int64_t{-1};
    };

    data.Q = Eigen::MatrixXd::Zero(m, m);
    data.sym = Eigen::MatrixXd::Zero(m, m);
    const BoxSpec& box = env.box();
    Vertex nbr[2 * kMaxDim];
    for (std::int64_t i = 0; i < m; ++i) {
        Vertex z = data.holeVertices[i];
        int k = box.collect_neighbors(z, nbr);
        for (int t = 0; t < k; ++t) {
            std::int64_t j = local(nbr[t]);
            if (j < 0) continue;
            double w = env.conductance(z, nbr[t]);
            data.Q(i, j) = w / data.weights(i);
            // one expression for both triangles keeps sym bit-symmetric
            double s = w / std::sqrt(data.weights(i) * data.weights(j));
            data.sym(i, j) = s;
        }
    }

    data.hX.resize(m);
    data.hY.resize(m);
    for (std::int64_t i = 0; i < m; ++i) {
        Vertex z = data.holeVertices[i];
        data.hX(i) = box.adjacent(z, x) ? kernel.prob(z, x) : 0.0;
        data.hY(i) = box.adjacent(z, y) ? kernel.prob(z, y) : 0.0;
    }
    return data;
}

double operator_norm(const HoleSpectralData& data) {
    if (data.empty()) throw DomainError("operator norm of an empty hole");
    const std::int64_t m = data.size();
    if (m <= kDenseEigenLimit) {
        Eigen::VectorXd ev = eigenvalues_of_sym(data);
        return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
    }
    // ||Q||^2 = largest eigenvalue of S^2
    Eigen::VectorXd v = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(double(m)));
    for (std::int64_t i = 0; i < m; ++i)
        v(i) += 1e-3 * std::cos(static_cast<double>(i) + 0.5);
    v.normalize();
    double lambda = 0.0;
    for (std::int64_t it = 0; it < 100000; ++it) {
        Eigen::VectorXd w = data.sym * (data.sym * v);
        double est = w.norm();
        if (est == 0.0) return 0.0;
        w /= est;
        if (std::abs(est - lambda) <= 1e-12 * std::max(est, 1e-300))
            return std::sqrt(est);
        lambda = est;
        v.swap(w);
    }
    throw NumericalError("operator norm: power iteration did not converge; "
                         "last estimate " + std::to_string(std::sqrt(lambda)));
}

double sojourn_inner(const HoleSpectralData& data, std::int64_t n) {
    if (n < 2) throw ParameterError("sojourn inner product requires n >= 2");
    if (data.empty()) return 0.0;
    Eigen::VectorXd w = data.hY;
    for (std::int64_t k = 0; k < n - 2; ++k) w = data.Q * w;
    return data.inner(data.hX, w);
}

std::vector<double> sojourn_inner_sequence(const HoleSpectralData& data,
                                           std::int64_t nMax) {
    if (nMax < 2) throw ParameterError("sojourn sequence requires nMax >= 2");
    std::vector<double> out;
    out.reserve(nMax - 1);
    if (data.empty()) {
        out.assign(nMax - 1, 0.0);
        return out;
    }
    Eigen::VectorXd w = data.hY;
    for (std::int64_t n = 2; n <= nMax; ++n) {
        out.push_back(data.inner(data.hX, w));
        if (n < nMax) w = data.Q * w;
    }
    return out;
}

double smoothness_gap(const HoleSpectralData& data, std::int64_t n) {
    if (n < 2) throw ParameterError("smoothness gap requires n >= 2");
    if (data.empty()) return 0.0;
    Eigen::VectorXd w = data.hY;
    for (std::int64_t k = 0; k < n - 2; ++k) w = data.Q * w;
    Eigen::VectorXd w2 = data.Q * (data.Q * w);
    return data.inner(data.hX, w) - data.inner(data.hX, w2);
}

NormBoundReport norm_bound_check(const HoleSpectralData& data,
                                 std::int64_t mMax) {
    if (data.empty()) throw DomainError("norm bounds need a nonempty hole");
    NormBoundReport report;
    const std::int64_t sz = data.size();
    if (sz > kDenseEigenLimit)
        throw ResourceError("norm bound check needs the dense eigen path");
    Eigen::VectorXd ev = eigenvalues_of_sym(data);
    report.operatorNorm =
        std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
    for (std::int64_t m = 0; m <= mMax; ++m) {
        NormBoundReport::Row row;
        row.m = m;
        for (std::int64_t i = 0; i < sz; ++i) {
            double l = ev(i);
            double contraction = std::pow(l * l, static_cast<double>(m));
            double first = std::abs((1.0 - l * l) * contraction);
            double second = (1.0 - l * l) * (1.0 - l * l) * contraction;
            row.normFirst = std::max(row.normFirst, first);
            row.normSecond = std::max(row.normSecond, second);
        }
        row.boundFirst = 1.0 / static_cast<double>(m + 1);
        row.boundSecond = 4.0 / (static_cast<double>(m + 2) * static_cast<double>(m + 2));
        report.maxViolation = std::max(
            {report.maxViolation, row.normFirst - row.boundFirst,
             row.normSecond - row.boundSecond});
        report.rows.push_back(row);
    }
    report.pass = report.maxViolation <= 1e-10;
    return report;
}

PmfBoundReport pmf_bound_check(const CoarseAnalyzer& analyzer, Vertex x, Vertex y,
                               const std::vector<std::int64_t>& nRange,
                               const std::vector<std::int64_t>& kRange) {
    if (nRange.empty() || kRange.empty())
        throw ParameterError("pmf bound check needs nonempty ranges");
    const ClusterDecomposition& dec = analyzer.dec();
    PmfBoundReport report;
    report.x = x;
    report.y = y;
    report.gSize = dec.g_intersection_size(x, y);
    if (report.gSize == 0) return report;

    std::int64_t nMax = *std::max_element(nRange.begin(), nRange.end());
    std::int64_t kMax = *std::max_element(kRange.begin(), kRange.end());
    SojournLaw law = analyzer.sojourn_pmf(x, y, nMax + 2 * kMax);

    HoleSpectralData data = build_hole_operator(analyzer.env(), dec, x, y);
    double pix = analyzer.kernel().pi(x);

    double gapSup = 0.0;     // sup over n of n^3 |gap(n)| / pi(x)
    double diffSupK1 = 0.0;  // same shape from the two pmf evaluations, k = 1
    for (std::int64_t n : nRange) {
        if (n < 2) continue;
        double nn = static_cast<double>(n);
        report.constFirst = std::max(
            report.constFirst,
            nn * nn * law.at(n) / static_cast<double>(report.gSize));
        for (std::int64_t k : kRange) {
            double diff = std::abs(law.at(n) - law.at(n + 2 * k));
            report.constSecond = std::max(
                report.constSecond, nn * nn * nn * diff /
                                        (static_cast<double>(k) *
                                         static_cast<double>(report.gSize)));
            if (k == 1) diffSupK1 = std::max(diffSupK1, nn * nn * nn * diff);
        }
        if (!data.empty())
            gapSup = std::max(gapSup, nn * nn * nn *
                                          std::abs(smoothness_gap(data, n)) / pix);

        // restricted route vs full pmf; nonzero only if some excursion could
        // end at y without being confined to G_xy (it cannot)
        double restricted = data.empty() ? 0.0 : sojourn_inner(data, n) / pix;
        report.crossHoleDiscrepancy = std::max(
            report.crossHoleDiscrepancy, std::abs(restricted - law.at(n)));
    }
    report.identityMismatch = std::abs(diffSupK1 - gapSup);
    return report;
}

double row_sum_deficiency(const HoleSpectralData& data) {
    if (data.empty()) throw DomainError("row sums of an empty hole");
    const std::int64_t m = data.size();
    if (m > 512) throw ResourceError("row-sum deficiency limited to holes <= 512");
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd v = ones;
    for (std::int64_t k = 0; k < m; ++k) v = data.Q * v;  // Q^m * 1
    return v.maxCoeff();
}

}  // namespace rcm
