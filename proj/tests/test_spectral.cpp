#include "doctest.h"

#include <cmath>

#include <nlohmann/json.hpp>

#include "rcm/oracle.hpp"
#include "rcm/spectral.hpp"

using namespace rcm;

namespace {

Environment constant_env(int d, std::int64_t L) {
    BoxSpec box{d, L, Topology::torus};
    std::vector<double> vals(box.n_vertices() * d, 1.0);
    return Environment(box, std::move(vals), {}, 0);
}

struct WeakVertexInstance {
    Environment env;
    Vertex v;
    double beta;
};

WeakVertexInstance weak_vertex_env(std::int64_t L, double beta) {
    BoxSpec box{2, L, Topology::torus};
    std::vector<double> vals(box.n_vertices() * 2, 1.0);
    Vertex v = box.vertex_at({3, 3, 0, 0, 0});
    Vertex nbr[2 * kMaxDim];
    Environment probe(box, vals, {}, 0);
    int k = box.collect_neighbors(v, nbr);
    for (int i = 0; i < k; ++i) {
        auto [owner, axis] = box.canonical_edge(v, nbr[i]);
        vals[owner * 2 + axis] = beta;
    }
    return {Environment(box, std::move(vals), {}, 0), v, beta};
}

// 1x1 synthetic operator with a chosen contraction q, unit weight.
HoleSpectralData scalar_data(double q) {
    HoleSpectralData d;
    d.holeVertices = {0};
    d.Q = Eigen::MatrixXd::Constant(1, 1, q);
    d.sym = d.Q;
    d.weights = Eigen::VectorXd::Ones(1);
    d.hX = Eigen::VectorXd::Ones(1);
    d.hY = Eigen::VectorXd::Ones(1);
    return d;
}

std::vector<std::pair<Vertex, Vertex>> boundary_pairs(
    const ClusterDecomposition& dec, std::size_t maxCount) {
    std::vector<std::pair<Vertex, Vertex>> out;
    for (std::size_t h = 0; h < dec.hole_count() && out.size() < maxCount; ++h) {
        const auto& bnd = dec.hole_boundary(h);
        for (std::size_t i = 0; i < bnd.size() && out.size() < maxCount; ++i)
            for (std::size_t j = i; j < bnd.size() && out.size() < maxCount; ++j)
                out.emplace_back(bnd[i], bnd[j]);
    }
    return out;
}

}  // namespace

TEST_CASE("single weak vertex: 1x1 zero operator and the beta/4 identity") {
    const double beta = 0.3;
    auto inst = weak_vertex_env(8, beta);
    const BoxSpec& box = inst.env.box();
    ClusterDecomposition dec(inst.env, 0.5);
    Vertex x = box.step(inst.v, 0, +1);
    Vertex y = box.step(inst.v, 1, +1);

    HoleSpectralData data = build_hole_operator(inst.env, dec, x, y);
    REQUIRE(data.size() == 1);
    CHECK(data.holeVertices[0] == inst.v);
    CHECK(data.Q(0, 0) == 0.0);
    CHECK(data.hX(0) == doctest::Approx(0.25).epsilon(1e-14));  // P(v,x)
    CHECK(data.hY(0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(data.weights(0) == doctest::Approx(4 * beta).epsilon(1e-14));

    CHECK(operator_norm(data) == 0.0);
    // <h_x, h_y> = pi(v) P(v,x) P(v,y) = beta/4
    CHECK(sojourn_inner(data, 2) == doctest::Approx(beta / 4.0).epsilon(1e-14));
    CHECK(sojourn_inner(data, 3) == 0.0);  // nilpotent
    CHECK(smoothness_gap(data, 2) ==
          doctest::Approx(beta / 4.0).epsilon(1e-14));

    // n=2 value agrees with the coarse pmf through pi(x)
    CoarseAnalyzer analyzer(inst.env, dec);
    SojournLaw law = analyzer.sojourn_pmf(x, y, 4);
    WalkKernel kernel(inst.env);
    CHECK(sojourn_inner(data, 2) / kernel.pi(x) ==
          doctest::Approx(law.at(2)).epsilon(1e-12));
}

TEST_CASE("two-vertex trap hole: antidiagonal operator, norm sqrt(ab)") {
    Environment base = constant_env(2, 8);
    TrapSpec trap;
    trap.u = 1;
    trap.v = 2;
    trap.scale = 12;
    Environment env = plant_trap(base, trap);
    ClusterDecomposition dec(env, 0.5);
    Vertex x = 0;          // neighbor of u
    Vertex y = 3;          // neighbor of v
    HoleSpectralData data = build_hole_operator(env, dec, x, y);
    REQUIRE(data.size() == 2);
    CHECK(data.Q(0, 0) == 0.0);
    CHECK(data.Q(1, 1) == 0.0);
    WalkKernel kernel(env);
    double puv = kernel.prob(1, 2), pvu = kernel.prob(2, 1);
    CHECK(data.Q(0, 1) == doctest::Approx(puv).epsilon(1e-15));
    CHECK(data.Q(1, 0) == doctest::Approx(pvu).epsilon(1e-15));
    CHECK(operator_norm(data) ==
          doctest::Approx(std::sqrt(puv * pvu)).epsilon(1e-12));
}

TEST_CASE("weighted self-adjointness on random holes") {
    BoxSpec box{2, 16, Topology::torus};
    LawSpec law;
    law.kind = LawSpec::Kind::twoPoint;
    law.p = 0.6;
    law.weakValue = 0.3;
    std::int64_t checked = 0;
    for (std::uint64_t seed = 0; seed < 40 && checked < 100; ++seed) {
        Environment env = sample_iid(law, box, seed);
        ClusterDecomposition dec(env, 0.5);
        for (auto [x, y] : boundary_pairs(dec, 5)) {
            HoleSpectralData data = build_hole_operator(env, dec, x, y);
            if (data.empty()) continue;
            ++checked;
            for (std::int64_t i = 0; i < data.size(); ++i)
                for (std::int64_t j = 0; j < data.size(); ++j) {
                    CHECK(std::abs(data.weights(i) * data.Q(i, j) -
                                   data.weights(j) * data.Q(j, i)) <= 1e-15);
                    CHECK(data.sym(i, j) == data.sym(j, i));  // bit-exact
                }
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("empty intersection yields the empty-hole signal") {
    auto inst = weak_vertex_env(10, 0.3);
    ClusterDecomposition dec(inst.env, 0.5);
    // two giant vertices far from the weak vertex share no hole
    HoleSpectralData data = build_hole_operator(inst.env, dec, 0, 1);
    CHECK(data.empty());
    CHECK(sojourn_inner(data, 5) == 0.0);
    CHECK_THROWS_AS(operator_norm(data), DomainError);
}

TEST_CASE("sojourn inner products match the path-sum oracle to 1e-10") {
    BoxSpec box{2, 16, Topology::torus};
    LawSpec law;
    law.kind = LawSpec::Kind::twoPoint;
    law.p = 0.55;
    law.weakValue = 0.25;
    std::int64_t instances = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 100; seed < 140 && instances < 100; ++seed) {
        Environment env = sample_iid(law, box, seed);
        ClusterDecomposition dec(env, 0.45);
        WalkKernel kernel(env);
        for (auto [x, y] : boundary_pairs(dec, 4)) {
            HoleSpectralData data = build_hole_operator(env, dec, x, y);
            if (data.empty()) continue;
            ++instances;
            auto inner = sojourn_inner_sequence(data, 50);
            auto oracle = excursion_path_sums(env, dec, x, y, 50);
            for (std::size_t i = 0; i < inner.size(); ++i)
                worst = std::max(worst,
                                 std::abs(inner[i] - kernel.pi(x) * oracle[i]));
        }
    }
    CHECK(instances >= 100);
    CHECK(worst <= 1e-10);
}

TEST_CASE("restricted and unrestricted sojourn laws coincide") {
    // an excursion that returns to the giant at y is automatically confined
    // to G_xy; measure the claimed-zero discrepancy
    BoxSpec box{2, 14, Topology::torus};
    LawSpec law;
    law.kind = LawSpec::Kind::twoPoint;
    law.p = 0.6;
    law.weakValue = 0.3;
    double worst = 0.0;
    for (std::uint64_t seed = 7; seed < 15; ++seed) {
        Environment env = sample_iid(law, box, seed);
        ClusterDecomposition dec(env, 0.5);
        for (auto [x, y] : boundary_pairs(dec, 3)) {
            auto restricted = excursion_path_sums(env, dec, x, y, 24);
            auto full = sojourn_path_sums(env, dec, x, y, 24);
            for (std::size_t i = 0; i < restricted.size(); ++i)
                worst = std::max(worst, std::abs(restricted[i] - full[i]));
        }
    }
    CHECK(worst <= 1e-14);
}

TEST_CASE("smoothness gap telescopes and matches pmf differences") {
    auto inst = weak_vertex_env(10, 0.4);
    ClusterDecomposition dec(inst.env, 0.5);
    Vertex x = inst.env.box().step(inst.v, 0, +1);
    Vertex y = inst.env.box().step(inst.v, 1, +1);

    BoxSpec tbox{2, 12, Topology::torus};
    Environment base = constant_env(2, 12);
    TrapSpec trap;
    trap.u = 1;
    trap.v = 2;
    trap.scale = 9;
    Environment trapped = plant_trap(base, trap);
    ClusterDecomposition tdec(trapped, 0.5);

    struct Case {
        const Environment* env;
        const ClusterDecomposition* dec;
        Vertex x, y;
    };
    std::vector<Case> cases{{&inst.env, &dec, x, y},
                            {&trapped, &tdec, 0, 3}};
    for (auto& c : cases) {
        HoleSpectralData data = build_hole_operator(*c.env, *c.dec, c.x, c.y);
        REQUIRE(!data.empty());
        // telescoping sum over K gaps
        for (std::int64_t n : {2, 3, 5}) {
            const std::int64_t K = 6;
            double acc = 0.0;
            for (std::int64_t k = 0; k < K; ++k)
                acc += smoothness_gap(data, n + 2 * k);
            double expect = sojourn_inner(data, n) - sojourn_inner(data, n + 2 * K);
            CHECK(std::abs(acc - expect) <= 1e-12);
        }
        // identity against two pmf evaluations
        CoarseAnalyzer analyzer(*c.env, *c.dec);
        SojournLaw law = analyzer.sojourn_pmf(c.x, c.y, 40);
        WalkKernel kernel(*c.env);
        for (std::int64_t n : {2, 4, 7}) {
            double viaPmf = kernel.pi(c.x) * (law.at(n) - law.at(n + 2));
            CHECK(std::abs(smoothness_gap(data, n) - viaPmf) <= 1e-10);
        }
    }
}

TEST_CASE("norm bounds: zero, scalar grid, and random holes") {
    // Q = 0: bound 1/(m+1) at m=0 is tight
    auto zero = scalar_data(0.0);
    auto rz = norm_bound_check(zero, 5);
    CHECK(rz.pass);
    CHECK(rz.rows[0].normFirst == doctest::Approx(1.0));
    CHECK(rz.rows[1].normFirst == 0.0);

    // scalar contraction grid
    for (double q : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
        auto data = scalar_data(q);
        auto report = norm_bound_check(data, 100);
        CHECK(report.pass);
        for (auto& row : report.rows) {
            double expect = (1 - q * q) * std::pow(q, 2.0 * row.m);
            CHECK(row.normFirst == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    // random two-vertex holes: both inequalities for m <= 100
    BoxSpec box{2, 10, Topology::torus};
    RngStream rng(3, 0);
    for (int rep = 0; rep < 50; ++rep) {
        Environment base = constant_env(2, 10);
        TrapSpec trap;
        trap.u = 1;
        trap.v = 2;
        // scale >= 3 keeps the collar below the 0.5 cut-off
        trap.scale = 3 + static_cast<std::int64_t>(rng.next_u64() % 40);
        Environment env = plant_trap(base, trap);
        ClusterDecomposition dec(env, 0.5);
        HoleSpectralData data = build_hole_operator(env, dec, 0, 3);
        auto report = norm_bound_check(data, 100);
        CHECK(report.pass);
        CHECK(report.operatorNorm <= 1.0 - 1e-9);
    }
}

TEST_CASE("||Q^n|| = ||Q||^n and positivity of 1 - Q^2") {
    BoxSpec box{2, 14, Topology::torus};
    LawSpec law;
    law.kind = LawSpec::Kind::twoPoint;
    law.p = 0.6;
    law.weakValue = 0.3;
    std::int64_t checked = 0;
    for (std::uint64_t seed = 50; seed < 70 && checked < 30; ++seed) {
        Environment env = sample_iid(law, box, seed);
        ClusterDecomposition dec(env, 0.5);
        for (auto [x, y] : boundary_pairs(dec, 2)) {
            HoleSpectralData data = build_hole_operator(env, dec, x, y);
            if (data.empty()) continue;
            ++checked;
            double norm = operator_norm(data);
            Eigen::MatrixXd power = data.sym;
            for (int n = 2; n <= 8; ++n) {
                power = power * data.sym;
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
                    power, Eigen::EigenvaluesOnly);
                double pw = std::max(std::abs(es.eigenvalues().minCoeff()),
                                     std::abs(es.eigenvalues().maxCoeff()));
                CHECK(pw == doctest::Approx(std::pow(norm, n))
                                .epsilon(1e-10)
                                .scale(1.0));
            }
            Eigen::MatrixXd oneMinus =
                Eigen::MatrixXd::Identity(data.size(), data.size()) -
                data.sym * data.sym;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
                oneMinus, Eigen::EigenvaluesOnly);
            CHECK(es.eigenvalues().minCoeff() >= 1e-9);
            if (data.size() <= 256) CHECK(row_sum_deficiency(data) < 1.0);
        }
    }
    CHECK(checked >= 20);
}

TEST_CASE("pmf bound report: nilpotent case and range stability") {
    auto inst = weak_vertex_env(10, 0.35);
    ClusterDecomposition dec(inst.env, 0.5);
    CoarseAnalyzer analyzer(inst.env, dec);
    Vertex x = inst.env.box().step(inst.v, 0, +1);
    Vertex y = inst.env.box().step(inst.v, 1, +1);

    auto report = pmf_bound_check(analyzer, x, y, {2, 3, 4, 8}, {1, 2});
    // pmf vanishes for n >= 3, so the sups sit at n = 2
    double pmf2 = analyzer.sojourn_pmf(x, y, 4).at(2);
    CHECK(report.constFirst ==
          doctest::Approx(4.0 * pmf2 / double(report.gSize)).epsilon(1e-12));
    CHECK(report.constSecond ==
          doctest::Approx(8.0 * pmf2 / double(report.gSize)).epsilon(1e-12));
    CHECK(report.identityMismatch <= 1e-10);
    CHECK(report.crossHoleDiscrepancy <= 1e-12);

    // doubling the range cannot change the sups by more than 2x on a
    // planted two-vertex hole
    Environment base = constant_env(2, 12);
    TrapSpec trap;
    trap.u = 1;
    trap.v = 2;
    trap.scale = 8;
    Environment env = plant_trap(base, trap);
    ClusterDecomposition tdec(env, 0.5);
    CoarseAnalyzer tan(env, tdec);
    auto narrow = pmf_bound_check(tan, 0, 3, {2, 4, 8}, {1});
    auto wide = pmf_bound_check(tan, 0, 3, {2, 4, 8, 16}, {1});
    CHECK(wide.constFirst <= 2.0 * narrow.constFirst + 1e-12);
    CHECK(narrow.constFirst <= wide.constFirst + 1e-12);
}
