#include "rcm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "rcm/oracle.hpp"
#include "rcm/spectral.hpp"

namespace rcm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("box")) {
        const json& b = j.at("box");
        c.box.dimension = b.value("dimension", 2);
        c.box.side = b.value("side", std::int64_t{16});
        std::string topo = b.value("topology", std::string("torus"));
        if (topo == "torus")
            c.box.topology = Topology::torus;
        else if (topo == "free")
            c.box.topology = Topology::free;
        else
            throw ParameterError("unknown topology: " + topo);
    }
    if (j.contains("law")) {
        LawSpec law;
        const json& l = j.at("law");
        std::string kind = l.value("kind", std::string("uniform01"));
        if (kind == "uniform01") {
            law.kind = LawSpec::Kind::uniform01;
        } else if (kind == "powerTail") {
            law.kind = LawSpec::Kind::powerTail;
            law.gamma = l.at("gamma").get<double>();
        } else if (kind == "twoPoint") {
            law.kind = LawSpec::Kind::twoPoint;
            law.p = l.at("p").get<double>();
            law.strongValue = l.value("strongValue", 1.0);
            law.weakValue = l.at("weakValue").get<double>();
        } else {
            throw ParameterError("unknown law kind: " + kind);
        }
        c.law = law;
    }
    if (j.contains("trap")) {
        TrapSpec t;
        const json& tj = j.at("trap");
        t.u = tj.at("u").get<Vertex>();
        t.v = tj.at("v").get<Vertex>();
        t.scale = tj.value("scale", std::int64_t{2});
        if (tj.contains("accessPath"))
            t.accessPath = tj.at("accessPath").get<std::vector<Vertex>>();
        c.trap = t;
    }
    c.envFile = j.value("envFile", std::string());
    c.alpha = j.value("alpha", 0.5);
    c.kind = j.value("kind", std::string("verify-all"));
    c.nMax = j.value("nMax", std::int64_t{8});
    c.theta = j.value("theta", std::int64_t{4});
    c.r = j.value("r", std::int64_t{1});
    c.delta = j.value("delta", std::int64_t{4});
    c.mcBudget = j.value("mcBudget", std::int64_t{10000});
    c.masterSeed = j.value("masterSeed", std::uint64_t{1});
    c.outDir = j.value("out", std::string("rcm-out"));
    c.overrideHorizon = j.value("overrideHorizon", false);
    c.threads = j.value("threads", 1);
    return c;
}

json ExperimentConfig::to_json() const {
    json j;
    j["box"] = {{"dimension", box.dimension},
                {"side", box.side},
                {"topology", box.topology == Topology::torus ? "torus" : "free"}};
    if (law) {
        json l{{"kind", law->name()}};
        if (law->kind == LawSpec::Kind::powerTail) l["gamma"] = law->gamma;
        if (law->kind == LawSpec::Kind::twoPoint) {
            l["p"] = law->p;
            l["strongValue"] = law->strongValue;
            l["weakValue"] = law->weakValue;
        }
        j["law"] = l;
    }
    if (trap)
        j["trap"] = {{"u", trap->u},
                     {"v", trap->v},
                     {"scale", trap->scale},
                     {"accessPath", trap->accessPath}};
    if (!envFile.empty()) j["envFile"] = envFile;
    j["alpha"] = alpha;
    j["kind"] = kind;
    j["nMax"] = nMax;
    j["theta"] = theta;
    j["r"] = r;
    j["delta"] = delta;
    j["mcBudget"] = mcBudget;
    j["masterSeed"] = masterSeed;
    j["out"] = outDir;
    j["overrideHorizon"] = overrideHorizon;
    j["threads"] = threads;
    j["format_version"] = kFormatVersion;
    return j;
}

void ExperimentConfig::validate() const {
    box.validate();
    if (law) law->validate();
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ParameterError("alpha must lie in (0,1]");
    if (nMax < 1 || theta < 1 || delta < 1 || r < 0 || mcBudget < 1)
        throw ParameterError("experiment sizes must be positive");
    static const std::set<std::string> kinds{
        "heat-decay",        "coarse-diagnostics", "spectral-verify",
        "trap-conditional",  "proposition-sweep",  "verify-all"};
    if (!kinds.count(kind)) throw ParameterError("unknown experiment kind: " + kind);
}

Environment ExperimentConfig::make_environment() const {
    if (!envFile.empty()) return Environment::load(envFile);
    LawSpec l = law.value_or(LawSpec{});
    Environment env = sample_iid(l, box, masterSeed);
    if (trap) return plant_trap(env, *trap);
    return env;
}

// ---------------------------------------------------------------------------
// csv

std::string format_significant(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CsvWriter::Impl {
    std::ofstream out;
    std::size_t columns = 0;
};

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& columns,
                     const json& configEcho)
    : impl_(std::make_unique<Impl>()) {
    impl_->out.open(path);
    if (!impl_->out) throw ResourceError("cannot open " + path);
    impl_->columns = columns.size();
    auto now = std::chrono::system_clock::now();
    impl_->out << "# generated: "
               << std::chrono::duration_cast<std::chrono::seconds>(
                      now.time_since_epoch())
                      .count()
               << "\n";
    impl_->out << "# format_version: " << kFormatVersion << "\n";
    impl_->out << "# config: " << configEcho.dump() << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
        impl_->out << columns[i] << (i + 1 < columns.size() ? "," : "\n");
}

void CsvWriter::comment(const std::string& line) { impl_->out << "# " << line << "\n"; }

void CsvWriter::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        impl_->out << format_significant(values[i])
                   << (i + 1 < values.size() ? "," : "\n");
}

void CsvWriter::row_raw(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        impl_->out << cells[i] << (i + 1 < cells.size() ? "," : "\n");
}

CsvWriter::~CsvWriter() = default;

// ---------------------------------------------------------------------------
// deterministic replica parallelism

void run_replicas(std::int64_t total, int threads, std::uint64_t masterSeed,
                  const std::function<void(std::int64_t, RngStream&)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1) {
        for (std::int64_t rep = 0; rep < total; ++rep) {
            RngStream stream(masterSeed, static_cast<std::uint64_t>(rep));
            fn(rep, stream);
        }
        return;
    }
    std::atomic<std::int64_t> nextBlock{0};
    const std::int64_t blockSize = 128;
    auto worker = [&]() {
        while (true) {
            std::int64_t b = nextBlock.fetch_add(1);
            std::int64_t lo = b * blockSize;
            if (lo >= total) return;
            std::int64_t hi = std::min(total, lo + blockSize);
            for (std::int64_t rep = lo; rep < hi; ++rep) {
                RngStream stream(masterSeed, static_cast<std::uint64_t>(rep));
                fn(rep, stream);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// verify suite

namespace {

struct PairInstance {
    Vertex x;
    Vertex y;
    std::int32_t hole;
};

std::vector<PairInstance> hole_pair_instances(const ClusterDecomposition& dec,
                                              std::size_t maxCount) {
    std::vector<PairInstance> out;
    for (std::size_t h = 0; h < dec.hole_count() && out.size() < maxCount; ++h) {
        const auto& bnd = dec.hole_boundary(h);
        if (bnd.empty()) continue;
        std::int32_t id = static_cast<std::int32_t>(h);
        for (std::size_t i = 0; i < bnd.size() && out.size() < maxCount; ++i) {
            for (std::size_t j = i; j < std::min(bnd.size(), i + 3) &&
                                    out.size() < maxCount;
                 ++j)
                out.push_back({bnd[i], bnd[j], id});
            if (bnd.size() > 4) i += 2;  // spread instances across the boundary
        }
    }
    return out;
}

CheckResult check_kernel_identities(const ExperimentConfig& config) {
    CheckResult res{"kernel-identities", false, 0.0, 1e-12, ""};
    try {
        Environment env = config.make_environment();
        WalkKernel kernel(env);
        const BoxSpec& box = env.box();
        RowBuffer row;
        double worst = 0.0;
        for (Vertex v = 0; v < box.n_vertices(); ++v) {
            kernel.row(v, row);
            KahanSum sum;
            for (int i = 0; i < row.count; ++i) sum.add(row.prob[i]);
            worst = std::max(worst, std::abs(sum.value() - 1.0));
        }
        // reversibility: pi(x) P(x,y) and pi(y) P(y,x) both reproduce w_xy
        double worstRev = 0.0;
        for (Vertex v = 0; v < box.n_vertices(); ++v) {
            for (int a = 0; a < box.dimension; ++a) {
                if (!box.edge_exists(v, a)) continue;
                Vertex w = box.step(v, a, +1);
                double lhs = kernel.pi(v) * kernel.prob(v, w);
                double rhs = kernel.pi(w) * kernel.prob(w, v);
                worstRev = std::max(worstRev, std::abs(lhs - rhs));
            }
        }
        // mass conservation over a short evolve
        SparseDistribution dist = SparseDistribution::delta(0);
        dist = evolve(kernel, dist, 6, true);
        double massErr = std::abs(dist.total() - 1.0);
        res.measured = std::max({worst, worstRev, massErr});
        res.pass = res.measured <= res.tolerance;
        res.detail = "row-sum " + format_significant(worst) + ", reversibility " +
                     format_significant(worstRev) + ", mass " +
                     format_significant(massErr);
    } catch (const Error& e) {
        res.pass = false;
        res.detail = std::string("environment/kernel construction failed: ") +
                     e.what();
        res.measured = std::numeric_limits<double>::infinity();
    }
    return res;
}

CheckResult check_heat_monotonicity(const ExperimentConfig& config) {
    CheckResult res{"heat-monotonicity", false, 0.0, 1e-12, ""};
    Environment env = config.make_environment();
    WalkKernel kernel(env);
    std::int64_t nMax = std::min<std::int64_t>(config.nMax, 16);
    auto heat = heat_diagonal(kernel, 0, nMax, true);
    double worst = 0.0;
    for (std::size_t i = 1; i < heat.size(); ++i)
        worst = std::max(worst, heat[i] - heat[i - 1]);
    res.measured = worst;
    res.pass = worst <= res.tolerance;
    res.detail = "max increase across " + std::to_string(heat.size()) + " steps";
    return res;
}

CheckResult check_coarse_reversibility(const CoarseAnalyzer& analyzer) {
    CheckResult res{"coarse-reversibility", false, 0.0, 1e-10, ""};
    const auto& giant = analyzer.dec().giant();
    const WalkKernel& kernel = analyzer.kernel();
    std::map<Vertex, std::map<Vertex, double>> cache;
    auto rowOf = [&](Vertex v) -> const std::map<Vertex, double>& {
        auto it = cache.find(v);
        if (it == cache.end()) {
            std::map<Vertex, double> m;
            for (auto& [y, p] : analyzer.kernel_row(v)) m[y] = p;
            it = cache.emplace(v, std::move(m)).first;
        }
        return it->second;
    };
    double worst = 0.0;
    std::size_t stride = std::max<std::size_t>(1, giant.size() / 24);
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < giant.size(); i += stride) {
        Vertex x = giant[i];
        for (auto& [y, pxy] : rowOf(x)) {
            auto& ry = rowOf(y);
            auto it = ry.find(x);
            double pyx = it == ry.end() ? 0.0 : it->second;
            worst = std::max(worst,
                             std::abs(kernel.pi(x) * pxy - kernel.pi(y) * pyx));
            ++pairs;
        }
    }
    res.measured = worst;
    res.pass = worst <= res.tolerance;
    res.detail = std::to_string(pairs) + " ordered pairs";
    return res;
}

CheckResult check_eq45_identity(const CoarseAnalyzer& analyzer) {
    CheckResult res{"sojourn-identity", false, 0.0, 1e-10, ""};
    const auto& dec = analyzer.dec();
    auto instances = hole_pair_instances(dec, 60);
    if (instances.empty()) {
        res.pass = true;
        res.detail = "no holes at this cut-off; identity vacuous";
        return res;
    }
    double worst = 0.0;
    std::int64_t tested = 0;
    for (const auto& inst : instances) {
        HoleSpectralData data =
            build_hole_operator(analyzer.env(), dec, inst.x, inst.y);
        if (data.empty()) continue;
        std::int64_t nMax = 20;
        auto inner = sojourn_inner_sequence(data, nMax);
        auto oracle =
            excursion_path_sums(analyzer.env(), dec, inst.x, inst.y, nMax);
        double pix = analyzer.kernel().pi(inst.x);
        for (std::size_t i = 0; i < inner.size(); ++i) {
            worst = std::max(worst, std::abs(inner[i] - pix * oracle[i]));
            ++tested;
        }
    }
    res.measured = worst;
    res.pass = worst <= res.tolerance;
    res.detail = std::to_string(tested) + " (pair, n) comparisons";
    return res;
}

CheckResult check_spectral_bounds(const CoarseAnalyzer& analyzer) {
    CheckResult res{"spectral-bounds", false, 0.0, 1e-10, ""};
    const auto& dec = analyzer.dec();
    auto instances = hole_pair_instances(dec, 40);
    if (instances.empty()) {
        res.pass = true;
        res.detail = "no holes at this cut-off; bounds vacuous";
        return res;
    }
    double worstNorm = 0.0;
    double worstViolation = 0.0;
    double worstRowSum = 0.0;
    std::int64_t holesChecked = 0;
    for (const auto& inst : instances) {
        HoleSpectralData data =
            build_hole_operator(analyzer.env(), dec, inst.x, inst.y);
        if (data.empty()) continue;
        ++holesChecked;
        worstNorm = std::max(worstNorm, operator_norm(data));
        auto report = norm_bound_check(data, 50);
        worstViolation = std::max(worstViolation, report.maxViolation);
        if (data.size() <= 256)
            worstRowSum = std::max(worstRowSum, row_sum_deficiency(data));
    }
    bool normOk = worstNorm <= 1.0 - 1e-9;
    bool boundOk = worstViolation <= 1e-10;
    bool rowOk = worstRowSum < 1.0;
    res.measured = worstViolation;
    res.pass = normOk && boundOk && rowOk;
    res.detail = std::to_string(holesChecked) + " holes, max ||Q|| " +
                 format_significant(worstNorm) + ", max row sum of Q^m " +
                 format_significant(worstRowSum);
    return res;
}

CheckResult check_g_membership(std::uint64_t seed) {
    CheckResult res{"g-membership-greedy-vs-bruteforce", false, 0.0, 0.0, ""};
    RngStream rng(seed, 0x67656d62);
    std::int64_t disagreements = 0;
    const std::int64_t trials = 1000;
    for (std::int64_t t = 0; t < trials; ++t) {
        std::int64_t r = static_cast<std::int64_t>(rng.next_u64() % 4);
        std::int64_t ell =
            r + static_cast<std::int64_t>(rng.next_u64() % (13 - r));
        if (ell == 0) ell = 1;
        std::vector<std::int64_t> times(ell);
        for (auto& v : times)
            v = 1 + static_cast<std::int64_t>(rng.next_u64() % 30);
        std::int64_t theta = 1 + static_cast<std::int64_t>(rng.next_u64() % 60);
        if (r > ell) r = ell;
        bool g = g_membership(times, r, theta, GMode::greedy);
        bool b = g_membership(times, r, theta, GMode::bruteForce);
        if (g != b) ++disagreements;
    }
    res.measured = static_cast<double>(disagreements);
    res.pass = disagreements == 0;
    res.detail = std::to_string(trials) + " random tuples";
    return res;
}

CheckResult check_implication(std::uint64_t seed) {
    CheckResult res{"product-sum-implication", false, 0.0, 0.0, ""};
    RngStream rng(seed, 0x696d706c);
    std::int64_t violations = 0, applicable = 0;
    const std::int64_t trials = 10000;
    for (std::int64_t t = 0; t < trials; ++t) {
        std::int64_t r = 1 + static_cast<std::int64_t>(rng.next_u64() % 3);
        std::int64_t ell =
            r + 1 + static_cast<std::int64_t>(rng.next_u64() % 10);
        std::vector<std::int64_t> times(ell);
        for (auto& v : times) {
            // heavy-ish tail so non-membership with a large total is common
            double u = rng.next_u01();
            v = 1 + static_cast<std::int64_t>(30.0 * u * u * u);
        }
        std::int64_t theta = 1 + static_cast<std::int64_t>(rng.next_u64() % 10);
        std::int64_t total = 0;
        for (auto v : times) total += v;
        std::int64_t n = std::max<std::int64_t>(
            1, total - static_cast<std::int64_t>(rng.next_u64() % 10));
        auto check = implication_check(times, r, theta, n);
        if (!check.applicable) continue;
        ++applicable;
        if (!check.holds) ++violations;
    }
    res.measured = static_cast<double>(violations);
    res.pass = violations == 0 && applicable > 100;
    res.detail = std::to_string(applicable) + " applicable tuples of " +
                 std::to_string(trials);
    return res;
}

CheckResult check_phi_properties(const CoarseAnalyzer& analyzer,
                                 const ExperimentConfig& config) {
    CheckResult res{"phi-transform", false, 0.0, 0.0, ""};
    RngStream rng(config.masterSeed, 0x70686921);

    // injectivity on random distinct time-vectors
    std::set<std::vector<std::int64_t>> inputs, outputs;
    const std::int64_t want = 10000;
    while (static_cast<std::int64_t>(inputs.size()) < want) {
        std::int64_t ell = 1 + static_cast<std::int64_t>(rng.next_u64() % 6);
        std::vector<std::int64_t> times(ell);
        for (auto& v : times)
            v = 1 + static_cast<std::int64_t>(rng.next_u64() % 12);
        if (!inputs.insert(times).second) continue;
        CoarseTrace trace;
        trace.sites.assign(ell + 1, 0);
        trace.times = times;
        outputs.insert(phi_transform(trace, 3).times);
    }
    bool injective = outputs.size() == inputs.size();

    // event mapping on bridge traces that realize the event
    std::int64_t mapped = 0, failures = 0;
    Vertex origin = analyzer.dec().in_giant(0) ? 0 : analyzer.dec().giant().front();
    std::int64_t m = std::min<std::int64_t>(config.nMax, 8);
    TrapEventSpec spec{config.r, std::min(config.theta, m), m};
    try {
        BridgeSampler sampler(analyzer.kernel(), origin, 2 * m, true);
        for (std::int64_t i = 0; i < 400; ++i) {
            Path p = sampler.sample(rng);
            CoarseTrace trace = coarse_trace(p, analyzer.dec());
            if (!detect_event(trace, spec)) continue;
            for (std::int64_t s = 1; s <= 3; ++s) {
                TrapEventSpec target = spec;
                target.n = m + s;
                if (!detect_event(phi_transform(trace, s), target)) ++failures;
                ++mapped;
            }
        }
    } catch (const NoBridgeError&) {
        // no return at this horizon; the mapping check is vacuous
    }
    res.measured = static_cast<double>(failures) +
                   (injective ? 0.0 : 1.0);
    res.pass = injective && failures == 0;
    res.detail = "injectivity on " + std::to_string(inputs.size()) +
                 " traces, event mapping on " + std::to_string(mapped) +
                 " realizations";
    return res;
}

}  // namespace

VerifyReport verify_suite(const ExperimentConfig& config) {
    VerifyReport report;
    report.add(check_kernel_identities(config));
    if (!report.pass) return report;  // the environment itself is unusable

    Environment env = config.make_environment();
    report.add(check_heat_monotonicity(config));

    ClusterDecomposition dec(env, config.alpha);
    CoarseAnalyzer analyzer(env, dec);
    report.add(check_coarse_reversibility(analyzer));
    report.add(check_eq45_identity(analyzer));
    report.add(check_spectral_bounds(analyzer));
    report.add(check_g_membership(config.masterSeed));
    report.add(check_implication(config.masterSeed));
    report.add(check_phi_properties(analyzer, config));
    return report;
}

json VerifyReport::to_json() const {
    json j;
    j["pass"] = pass;
    json list = json::array();
    for (const auto& c : checks)
        list.push_back({{"name", c.name},
                        {"pass", c.pass},
                        {"measured", c.measured},
                        {"tolerance", c.tolerance},
                        {"detail", c.detail}});
    j["checks"] = list;
    j["format_version"] = kFormatVersion;
    return j;
}

// ---------------------------------------------------------------------------
// experiments

namespace {

namespace fs = std::filesystem;

void run_heat_decay(const ExperimentConfig& config, json& report) {
    Environment env = config.make_environment();
    WalkKernel kernel(env);
    auto heat = heat_diagonal(kernel, 0, config.nMax, config.overrideHorizon);
    const int d = env.box().dimension;
    auto lambda = lambda_seq(heat, d);
    std::vector<double> zeta;
    if (d >= 4) zeta = zeta_seq(heat, d);

    CsvWriter csv(config.outDir + "/heat.csv", {"n", "P2n", "lambda_n", "zeta_n"},
                  config.to_json());
    for (std::size_t i = 0; i < heat.size(); ++i) {
        std::vector<std::string> cells{
            std::to_string(i + 1), format_significant(heat[i]),
            format_significant(lambda[i]),
            (d >= 4 && !std::isnan(zeta[i])) ? format_significant(zeta[i])
                                             : std::string()};
        csv.row_raw(cells);
    }
    report["rows"] = heat.size();
    report["P2"] = heat.empty() ? 0.0 : heat.front();
    report["final"] = heat.empty() ? 0.0 : heat.back();
}

void run_coarse_diagnostics(const ExperimentConfig& config, json& report) {
    Environment env = config.make_environment();
    ClusterDecomposition dec(env, config.alpha);
    CoarseAnalyzer analyzer(env, dec);
    report["decomposition"] = dec.diagnostics();

    // |G_0| moments over re-sampled environments (Assumption A3 diagnostic)
    if (config.law) {
        std::int64_t reps = std::min<std::int64_t>(config.mcBudget, 1000);
        double m1 = 0, m2 = 0, m4 = 0, mx = 0;
        for (std::int64_t i = 0; i < reps; ++i) {
            Environment e = sample_iid(*config.law, config.box,
                                       config.masterSeed + 1000 + i);
            ClusterDecomposition d0(e, config.alpha);
            double g = static_cast<double>(d0.neighborhood_size(0));
            m1 += g;
            m2 += g * g;
            m4 += g * g * g * g;
            mx = std::max(mx, g);
        }
        report["g0_moments"] = {{"samples", reps},
                                {"mean", m1 / reps},
                                {"second", m2 / reps},
                                {"fourth", m4 / reps},
                                {"max", mx}};
    }

    Vertex start = dec.in_giant(0) ? 0 : dec.giant().front();
    auto es = analyzer.expected_sojourn(start);
    report["expected_sojourn_at_start"] = es.value;
    report["sojourn_ratio_at_start"] = es.ratioToNeighborhood;
    report["z_infinity"] = analyzer.stationary_mean_sojourn();

    if (env.box().topology == Topology::torus) {
        RngStream rng(config.masterSeed, 0x5a5a);
        auto erg = analyzer.ergodic_average(
            start, std::min<std::int64_t>(config.mcBudget, 200000), rng);
        json cps = json::array();
        for (auto& [l, z] : erg.checkpoints) cps.push_back({{"ell", l}, {"Z", z}});
        report["ergodic_average"] = {{"checkpoints", cps},
                                     {"Z_final", erg.zFinal},
                                     {"Z_infinity", erg.zInfinity}};
    }

    std::vector<std::int64_t> nRange;
    for (std::int64_t v = 1; v <= config.nMax; v *= 2) nRange.push_back(v);
    auto diff = analyzer.diffusive_constant(start, 2.0, nRange);
    json table = json::array();
    for (auto& row : diff.table)
        table.push_back({{"n", row.n},
                         {"maxEntry", row.maxEntry},
                         {"ballSize", row.ballSize}});
    report["diffusive_constant"] = {{"value", diff.value},
                                    {"reversalFactor", diff.reversalFactor},
                                    {"table", table}};

    // sojourn pmf export for the first hole-boundary pair, if any
    auto instances = hole_pair_instances(dec, 1);
    if (!instances.empty()) {
        auto law = analyzer.sojourn_pmf(instances[0].x, instances[0].y,
                                        std::min<std::int64_t>(config.nMax, 64));
        CsvWriter csv(config.outDir + "/sojourn_pmf.csv",
                      {"x", "y", "n", "probability"}, config.to_json());
        for (std::size_t i = 0; i < law.pmf.size(); ++i)
            csv.row_raw({std::to_string(law.x), std::to_string(law.y),
                         std::to_string(i + 1), format_significant(law.pmf[i])});
        report["sojourn_pair"] = {{"x", law.x},
                                  {"y", law.y},
                                  {"tailMass", law.tailMass}};
    }
}

void run_spectral_verify(const ExperimentConfig& config, json& report,
                         bool& pass) {
    Environment env = config.make_environment();
    ClusterDecomposition dec(env, config.alpha);
    CoarseAnalyzer analyzer(env, dec);
    auto eq45 = check_eq45_identity(analyzer);
    auto bounds = check_spectral_bounds(analyzer);
    report["sojourn_identity"] = {{"pass", eq45.pass},
                                  {"measured", eq45.measured},
                                  {"detail", eq45.detail}};
    report["spectral_bounds"] = {{"pass", bounds.pass},
                                 {"measured", bounds.measured},
                                 {"detail", bounds.detail}};
    auto instances = hole_pair_instances(dec, 12);
    json pmfReports = json::array();
    for (auto& inst : instances) {
        auto r = pmf_bound_check(analyzer, inst.x, inst.y, {2, 4, 8, 16, 32},
                                 {1, 2, 4});
        pmfReports.push_back({{"x", r.x},
                              {"y", r.y},
                              {"gSize", r.gSize},
                              {"constFirst", r.constFirst},
                              {"constSecond", r.constSecond},
                              {"identityMismatch", r.identityMismatch},
                              {"crossHoleDiscrepancy", r.crossHoleDiscrepancy}});
    }
    report["pmf_bounds"] = pmfReports;
    pass = eq45.pass && bounds.pass;
}

void run_trap_conditional(const ExperimentConfig& config, json& report,
                          bool& pass) {
    Environment env = config.make_environment();
    ClusterDecomposition dec(env, config.alpha);
    CoarseAnalyzer analyzer(env, dec);
    Vertex origin = dec.in_giant(0) ? 0 : dec.giant().front();
    std::int64_t n = config.nMax;

    BridgeSampler sampler(analyzer.kernel(), origin, 2 * n,
                          config.overrideHorizon);
    CsvWriter csv(config.outDir + "/trap_conditional.csv",
                  {"m", "estimate", "stdError", "samples"}, config.to_json());

    double best = -1.0;
    std::int64_t nStar = n;
    json entries = json::array();
    for (std::int64_t m = std::max<std::int64_t>(1, n - config.theta); m <= n;
         ++m) {
        TrapEventSpec spec{config.r, std::min(config.theta, m), m};
        std::vector<char> hits(config.mcBudget, 0);
        run_replicas(config.mcBudget, config.threads,
                     hash_combine(config.masterSeed, 0xa000 + m),
                     [&](std::int64_t rep, RngStream& stream) {
                         Path p = sampler.sample_horizon(stream, 2 * m);
                         CoarseTrace trace = coarse_trace(p, dec);
                         hits[rep] = detect_event(trace, spec) ? 1 : 0;
                     });
        std::int64_t hitCount = 0;
        for (char h : hits) hitCount += h;
        McEstimate est = binomial_estimate(hitCount, config.mcBudget);
        csv.row_raw({std::to_string(m), format_significant(est.value),
                     format_significant(est.stdError),
                     std::to_string(est.samples)});
        entries.push_back({{"m", m},
                           {"estimate", est.value},
                           {"stdError", est.stdError},
                           {"samples", est.samples}});
        if (est.value > best) {
            best = est.value;
            nStar = m;
        }
    }
    report["entries"] = entries;
    report["nStar"] = nStar;
    report["theta"] = config.theta;
    report["r"] = config.r;
    report["alpha"] = config.alpha;
    report["returnProbability"] = sampler.return_probability();
    pass = true;
}

void run_proposition_sweep(const ExperimentConfig& config, json& report,
                           bool& pass) {
    Environment env = config.make_environment();
    ClusterDecomposition dec(env, config.alpha);
    CoarseAnalyzer analyzer(env, dec);
    Vertex origin = dec.in_giant(0) ? 0 : dec.giant().front();
    RngStream rng(config.masterSeed, 0x73776565);
    auto sweep = proposition_sweep(analyzer, origin, config.nMax, config.theta,
                                   config.delta, config.r, config.mcBudget, rng,
                                   config.overrideHorizon);
    report["count"] = {{"lhs", sweep.countLhs.value},
                       {"lhsStdError", sweep.countLhs.stdError},
                       {"rhs", sweep.countRhs},
                       {"shapeConstant", sweep.countShapeConstant},
                       {"holds", sweep.countHolds}};
    report["gcomplement"] = {{"lhs", sweep.gcompLhs.value},
                             {"lhsStdError", sweep.gcompLhs.stdError},
                             {"rhs", sweep.gcompRhs.value},
                             {"rhsStdError", sweep.gcompRhs.stdError},
                             {"shapeConstant", sweep.gcompShapeConstant},
                             {"holds", sweep.gcompHolds}};
    report["cA5"] = sweep.cA5;
    report["cT"] = sweep.cT;
    pass = sweep.countHolds && sweep.gcompHolds;
}

}  // namespace

int run_experiment(const ExperimentConfig& config) {
    config.validate();
    fs::create_directories(config.outDir);
    {
        std::ofstream out(config.outDir + "/config.json");
        out << config.to_json().dump(2) << "\n";
    }

    json report;
    report["kind"] = config.kind;
    report["config"] = config.to_json();
    bool pass = true;

    if (config.kind == "heat-decay") {
        run_heat_decay(config, report);
    } else if (config.kind == "coarse-diagnostics") {
        run_coarse_diagnostics(config, report);
    } else if (config.kind == "spectral-verify") {
        run_spectral_verify(config, report, pass);
    } else if (config.kind == "trap-conditional") {
        run_trap_conditional(config, report, pass);
    } else if (config.kind == "proposition-sweep") {
        run_proposition_sweep(config, report, pass);
    } else if (config.kind == "verify-all") {
        VerifyReport verify = verify_suite(config);
        report["verify"] = verify.to_json();
        pass = verify.pass;
    }

    report["pass"] = pass;
    {
        std::ofstream out(config.outDir + "/report.json");
        out << report.dump(2) << "\n";
    }
    return pass ? 0 : 1;
}

}  // namespace rcm
