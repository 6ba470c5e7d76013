#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rcm/environment.hpp"

namespace rcm {

// Decomposition of a box at cut-off alpha: the strong-edge graph (w >= alpha),
// its largest cluster standing in for the infinite strong component, and the
// holes = connected components of the complement under full lattice adjacency.
// Immutable after construction; all queries are pure.
class ClusterDecomposition {
  public:
    ClusterDecomposition(const Environment& env, double alpha);

    double alpha() const { return alpha_; }
    const Environment& env() const { return *env_; }
    const BoxSpec& box() const { return env_->box(); }

    bool in_giant(Vertex v) const { return holeId_[v] < 0; }
    // -1 for giant vertices, otherwise the hole index.
    std::int32_t hole_id(Vertex v) const { return holeId_[v]; }

    const std::vector<Vertex>& giant() const { return giant_; }
    std::size_t hole_count() const { return holes_.size(); }
    const std::vector<Vertex>& hole(std::size_t i) const { return holes_[i]; }
    // Giant vertices adjacent to hole i (sorted).
    const std::vector<Vertex>& hole_boundary(std::size_t i) const {
        return holeBoundary_[i];
    }

    double giant_fraction() const { return giantFraction_; }
    bool tie_broken() const { return tieBroken_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    // G_x: union of F_y over the lattice neighbors y of x, where F_y = {y}
    // for giant y and the hole of y otherwise. Sorted.
    std::vector<Vertex> g_neighborhood(Vertex x) const;
    std::int64_t neighborhood_size(Vertex x) const;

    // Hole indices adjacent to x (distinct, ascending).
    std::vector<std::int32_t> holes_adjacent(Vertex x) const;

    // G_x intersect G_y, split into the giant part (common strong neighbors)
    // and the shared holes; |G_x ^ G_y| is the total cardinality.
    std::int64_t g_intersection_size(Vertex x, Vertex y) const;
    // Vertices of (G_x ^ G_y) \ giant, i.e. the union of shared holes; sorted.
    std::vector<Vertex> g_xy(Vertex x, Vertex y) const;

    // Markov distance: BFS over pairs with positive coarse one-step
    // probability (a direct box edge, or a shared adjacent hole).
    std::optional<std::int64_t> markov_distance(Vertex x, Vertex y) const;
    // Distances from x to every giant vertex (-1 where unreachable).
    std::vector<std::int64_t> markov_distances_from(Vertex x) const;

    nlohmann::json diagnostics() const;

  private:
    const Environment* env_;
    double alpha_;
    std::vector<std::int32_t> holeId_;
    std::vector<Vertex> giant_;
    std::vector<std::vector<Vertex>> holes_;
    std::vector<std::vector<Vertex>> holeBoundary_;
    double giantFraction_ = 0.0;
    bool tieBroken_ = false;
    std::vector<std::string> warnings_;
};

}  // namespace rcm
