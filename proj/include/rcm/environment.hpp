#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rcm/lattice.hpp"
#include "rcm/rng.hpp"

namespace rcm {

// Conductance law on (0,1].
struct LawSpec {
    enum class Kind { uniform01, powerTail, twoPoint };
    Kind kind = Kind::uniform01;
    double gamma = 1.0;       // powerTail: P(w <= s) = s^gamma
    double p = 0.5;           // twoPoint: probability of the strong value
    double strongValue = 1.0;
    double weakValue = 0.1;

    void validate() const;
    double draw(std::uint64_t bits) const;
    std::string name() const;
};

struct TrapSpec {
    Vertex u = 0;
    Vertex v = 0;                       // trap edge <u,v>
    std::int64_t scale = 2;             // K: weak collar conductance is 1/K
    std::vector<Vertex> accessPath;     // optional strong corridor
};

// A conductance configuration on a finite box. Values are stored once per
// unordered edge at (owner vertex, axis); immutable after construction.
class Environment {
  public:
    Environment(BoxSpec box, std::vector<double> values,
                nlohmann::json provenance, std::uint64_t seed);

    const BoxSpec& box() const { return box_; }
    std::uint64_t seed() const { return seed_; }
    const nlohmann::json& provenance() const;

    // Conductance of the edge (owner, axis); 0 marks a nonexistent edge
    // (free boundary only).
    double value(Vertex owner, int axis) const {
        return values_[static_cast<std::size_t>(owner) *
                           static_cast<std::size_t>(box_.dimension) +
                       static_cast<std::size_t>(axis)];
    }

    // Symmetric lookup: conductance between adjacent x and y.
    double conductance(Vertex x, Vertex y) const {
        auto [owner, axis] = box_.canonical_edge(x, y);
        return value(owner, axis);
    }

    const std::vector<double>& raw_values() const { return values_; }

    bool same_values(const Environment& other) const {
        return box_ == other.box_ && values_ == other.values_;
    }

    nlohmann::json to_json(bool withEdgeList = true) const;
    static Environment from_json(const nlohmann::json& j, bool strict = true);

    void save(const std::string& path, bool withEdgeList = true) const;
    static Environment load(const std::string& path, bool strict = true);

  private:
    BoxSpec box_;
    std::vector<double> values_;  // n_vertices * dimension, 0 = no edge
    std::shared_ptr<nlohmann::json> provenance_;
    std::uint64_t seed_ = 0;
};

// i.i.d. sample, each edge value a pure function of (seed, canonical edge
// index); bit-identical regardless of evaluation order.
Environment sample_iid(const LawSpec& law, const BoxSpec& box,
                       std::uint64_t seed);

// Trap of scale K at <u,v>: the trap edge gets conductance 1, every other
// edge incident to u or v gets 1/K, and the optional access path becomes a
// conductance-one corridor.
Environment plant_trap(const Environment& env, const TrapSpec& trap);

// Torus shift: (shifted w)_{y,z} = w_{y+x,z+x} with coordinates mod L.
Environment shift(const Environment& env, Vertex x);

}  // namespace rcm
