#include "rcm/environment.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rcm {

using nlohmann::json;

namespace {
constexpr std::uint64_t kEnvDomainTag = 0x636f6e6475637400ULL;  // edge-value domain

std::string format_17g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

void LawSpec::validate() const {
    switch (kind) {
        case Kind::uniform01:
            return;
        case Kind::powerTail:
            if (!(gamma > 0.0)) throw ParameterError("powerTail requires gamma > 0");
            return;
        case Kind::twoPoint:
            if (!(p >= 0.0 && p <= 1.0))
                throw ParameterError("twoPoint requires p in [0,1]");
            if (!(strongValue > 0.0 && strongValue <= 1.0))
                throw ParameterError("twoPoint strong value must lie in (0,1]");
            if (!(weakValue > 0.0 && weakValue <= 1.0))
                throw ParameterError("twoPoint weak value must lie in (0,1]");
            return;
    }
    throw ParameterError("unknown law kind");
}

double LawSpec::draw(std::uint64_t bits) const {
    double u = u01_from_bits(bits);
    switch (kind) {
        case Kind::uniform01:
            return u;
        case Kind::powerTail:
            // inverse CDF of P(w <= s) = s^gamma on (0,1]
            return std::pow(u, 1.0 / gamma);
        case Kind::twoPoint:
            return u <= p ? strongValue : weakValue;
    }
    return u;
}

std::string LawSpec::name() const {
    switch (kind) {
        case Kind::uniform01:
            return "uniform01";
        case Kind::powerTail:
            return "powerTail";
        case Kind::twoPoint:
            return "twoPoint";
    }
    return "?";
}

Environment::Environment(BoxSpec box, std::vector<double> values,
                         json provenance, std::uint64_t seed)
    : box_(box),
      values_(std::move(values)),
      provenance_(std::make_shared<json>(std::move(provenance))),
      seed_(seed) {
    box_.validate();
    if (values_.size() != static_cast<std::size_t>(box_.n_vertices()) *
                              static_cast<std::size_t>(box_.dimension))
        throw ParameterError("conductance array size mismatch");
}

const json& Environment::provenance() const { return *provenance_; }

Environment sample_iid(const LawSpec& law, const BoxSpec& box,
                       std::uint64_t seed) {
    law.validate();
    box.validate();
    const std::int64_t n = box.n_vertices();
    const int d = box.dimension;
    std::vector<double> vals(static_cast<std::size_t>(n) * d, 0.0);
    for (Vertex v = 0; v < n; ++v) {
        for (int a = 0; a < d; ++a) {
            if (!box.edge_exists(v, a)) continue;
            std::uint64_t bits = hash_combine(seed ^ kEnvDomainTag,
                                              static_cast<std::uint64_t>(
                                                  box.edge_key(v, a)));
            vals[static_cast<std::size_t>(v) * d + a] = law.draw(bits);
        }
    }
    json prov;
    prov["law"] = {{"kind", law.name()}};
    if (law.kind == LawSpec::Kind::powerTail) prov["law"]["gamma"] = law.gamma;
    if (law.kind == LawSpec::Kind::twoPoint) {
        prov["law"]["p"] = law.p;
        prov["law"]["strongValue"] = law.strongValue;
        prov["law"]["weakValue"] = law.weakValue;
    }
    return Environment(box, std::move(vals), std::move(prov), seed);
}

Environment plant_trap(const Environment& env, const TrapSpec& trap) {
    const BoxSpec& box = env.box();
    if (trap.scale < 2) throw ParameterError("trap scale must be >= 2");
    if (trap.u < 0 || trap.u >= box.n_vertices() || trap.v < 0 ||
        trap.v >= box.n_vertices())
        throw DomainError("trap edge outside box");
    auto [owner, axis] = box.canonical_edge(trap.u, trap.v);

    // Under free topology a trap endpoint on the boundary would lack part of
    // its weak collar.
    Vertex nbr[2 * kMaxDim];
    for (Vertex e : {trap.u, trap.v}) {
        if (box.collect_neighbors(e, nbr) != 2 * box.dimension)
            throw BoundaryError("trap endpoint lacks full degree at the free boundary");
    }

    if (!trap.accessPath.empty()) {
        const auto& path = trap.accessPath;
        for (std::size_t i = 0; i < path.size(); ++i) {
            if (path[i] < 0 || path[i] >= box.n_vertices())
                throw DomainError("access path leaves the box");
            if (path[i] == trap.u || path[i] == trap.v)
                throw DomainError("access path may not pass through the trap edge");
            for (std::size_t j = i + 1; j < path.size(); ++j)
                if (path[i] == path[j])
                    throw DomainError("access path must be self-avoiding");
            if (i + 1 < path.size() && !box.adjacent(path[i], path[i + 1]))
                throw DomainError("access path must follow nearest-neighbor edges");
        }
        Vertex last = path.back();
        if (!box.adjacent(last, trap.u) && !box.adjacent(last, trap.v))
            throw DomainError("access path must end next to the trap edge");
    }

    std::vector<double> vals = env.raw_values();
    const int d = box.dimension;
    auto set_edge = [&](Vertex x, Vertex y, double w) {
        auto [o, a] = box.canonical_edge(x, y);
        vals[static_cast<std::size_t>(o) * d + a] = w;
    };

    const double weak = 1.0 / static_cast<double>(trap.scale);
    for (Vertex e : {trap.u, trap.v}) {
        int k = box.collect_neighbors(e, nbr);
        for (int i = 0; i < k; ++i) set_edge(e, nbr[i], weak);
    }
    set_edge(trap.u, trap.v, 1.0);
    if (!trap.accessPath.empty()) {
        for (std::size_t i = 0; i + 1 < trap.accessPath.size(); ++i)
            set_edge(trap.accessPath[i], trap.accessPath[i + 1], 1.0);
    }

    json prov;
    prov["planted"] = {{"base", env.provenance()},
                       {"trap",
                        {{"u", trap.u},
                         {"v", trap.v},
                         {"scale", trap.scale},
                         {"accessPath", trap.accessPath}}}};
    (void)owner;
    (void)axis;
    return Environment(box, std::move(vals), std::move(prov), env.seed());
}

Environment shift(const Environment& env, Vertex x) {
    const BoxSpec& box = env.box();
    if (box.topology != Topology::torus)
        throw UnsupportedTopologyError("shift is exact only on the torus");
    const std::int64_t n = box.n_vertices();
    const int d = box.dimension;
    auto xc = box.coords(x);
    std::vector<double> vals(static_cast<std::size_t>(n) * d);
    for (Vertex w = 0; w < n; ++w) {
        auto wc = box.coords(w);
        for (int a = 0; a < d; ++a)
            wc[a] = static_cast<std::int32_t>((wc[a] + xc[a]) % box.side);
        Vertex src = box.vertex_at(wc);
        for (int a = 0; a < d; ++a)
            vals[static_cast<std::size_t>(w) * d + a] = env.value(src, a);
    }
    json prov;
    std::vector<std::int64_t> by(xc.begin(), xc.begin() + d);
    prov["shifted"] = {{"by", by}, {"base", env.provenance()}};
    return Environment(box, std::move(vals), std::move(prov), env.seed());
}

json Environment::to_json(bool withEdgeList) const {
    json j;
    j["format_version"] = kFormatVersion;
    j["dimension"] = box_.dimension;
    j["side"] = box_.side;
    j["topology"] = box_.topology == Topology::torus ? "torus" : "free";
    j["seed"] = seed_;
    for (auto it = provenance_->begin(); it != provenance_->end(); ++it)
        j[it.key()] = it.value();
    if (withEdgeList) {
        json edges = json::array();
        const int d = box_.dimension;
        for (Vertex v = 0; v < box_.n_vertices(); ++v)
            for (int a = 0; a < d; ++a)
                if (box_.edge_exists(v, a))
                    edges.push_back(json::array({v, a, value(v, a)}));
        j["edges"] = std::move(edges);
    }
    return j;
}

Environment Environment::from_json(const json& j, bool strict) {
    BoxSpec box;
    box.dimension = j.at("dimension").get<int>();
    box.side = j.at("side").get<std::int64_t>();
    std::string topo = j.at("topology").get<std::string>();
    if (topo == "torus")
        box.topology = Topology::torus;
    else if (topo == "free")
        box.topology = Topology::free;
    else
        throw ParameterError("unknown topology: " + topo);
    box.validate();
    std::uint64_t seed = j.value("seed", std::uint64_t{0});

    json prov;
    for (const char* key : {"law", "planted", "shifted", "provenance"})
        if (j.contains(key)) prov[key] = j.at(key);

    const int d = box.dimension;
    const std::int64_t n = box.n_vertices();
    if (j.contains("edges")) {
        std::vector<double> vals(static_cast<std::size_t>(n) * d, 0.0);
        std::vector<char> seen(vals.size(), 0);
        for (const auto& e : j.at("edges")) {
            Vertex v = e.at(0).get<Vertex>();
            int a = e.at(1).get<int>();
            double w = e.at(2).get<double>();
            if (v < 0 || v >= n || a < 0 || a >= d || !box.edge_exists(v, a))
                throw ParameterError("edge list entry outside the box");
            std::size_t idx = static_cast<std::size_t>(v) * d + a;
            if (seen[idx]) throw ParameterError("duplicate edge in edge list");
            if (strict && !(w > 0.0 && w <= 1.0))
                throw ParameterError("conductance outside (0,1] in edge list");
            seen[idx] = 1;
            vals[idx] = w;
        }
        for (Vertex v = 0; v < n; ++v)
            for (int a = 0; a < d; ++a)
                if (box.edge_exists(v, a) &&
                    !seen[static_cast<std::size_t>(v) * d + a])
                    throw ParameterError("edge list does not cover the box");
        return Environment(box, std::move(vals), std::move(prov), seed);
    }

    if (!j.contains("law"))
        throw ParameterError("environment file has neither edges nor a law");
    const json& lj = j.at("law");
    LawSpec law;
    std::string kind = lj.at("kind").get<std::string>();
    if (kind == "uniform01") {
        law.kind = LawSpec::Kind::uniform01;
    } else if (kind == "powerTail") {
        law.kind = LawSpec::Kind::powerTail;
        law.gamma = lj.at("gamma").get<double>();
    } else if (kind == "twoPoint") {
        law.kind = LawSpec::Kind::twoPoint;
        law.p = lj.at("p").get<double>();
        law.strongValue = lj.value("strongValue", 1.0);
        law.weakValue = lj.at("weakValue").get<double>();
    } else {
        throw ParameterError("unknown law kind: " + kind);
    }
    return sample_iid(law, box, seed);
}

void Environment::save(const std::string& path, bool withEdgeList) const {
    // Hand-rolled writer so edge values carry 17 significant digits.
    json header = to_json(false);
    std::ofstream out(path);
    if (!out) throw ResourceError("cannot open " + path + " for writing");
    std::string head = header.dump(2);
    if (withEdgeList) {
        head.pop_back();  // drop closing brace, append the edge block
        out << head << ",\n  \"edges\": [";
        const int d = box_.dimension;
        bool first = true;
        for (Vertex v = 0; v < box_.n_vertices(); ++v) {
            for (int a = 0; a < d; ++a) {
                if (!box_.edge_exists(v, a)) continue;
                out << (first ? "\n" : ",\n");
                out << "    [" << v << ", " << a << ", "
                    << format_17g(value(v, a)) << "]";
                first = false;
            }
        }
        out << "\n  ]\n}\n";
    } else {
        out << head << "\n";
    }
    if (!out) throw ResourceError("write failed: " + path);
}

Environment Environment::load(const std::string& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw ResourceError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParameterError(std::string("malformed environment file: ") +
                             e.what());
    }
    return from_json(j, strict);
}

}  // namespace rcm
