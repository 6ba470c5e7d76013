#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <utility>

#include "rcm/common.hpp"

namespace rcm {

enum class Topology { torus, free };

inline constexpr int kMaxDim = 5;
inline constexpr std::int64_t kMaxVertices = 200'000'000;  // addressability guard

// Finite box stand-in for Z^d: uniform side L per axis, torus or free
// boundary. Vertices are linear indices x0 + L*x1 + L^2*x2 + ...
struct BoxSpec {
    int dimension = 2;
    std::int64_t side = 4;
    Topology topology = Topology::torus;

    void validate() const {
        if (dimension < 1 || dimension > kMaxDim)
            throw ParameterError("box dimension must be in [1,5]");
        if (side < 2) throw ParameterError("box side must be >= 2");
        if (topology == Topology::torus && side < 3)
            throw ParameterError("torus requires side >= 3");
        std::int64_t n = 1;
        for (int a = 0; a < dimension; ++a) {
            if (n > kMaxVertices / side)
                throw ParameterError("box exceeds vertex guard of 2e8");
            n *= side;
        }
    }

    std::int64_t n_vertices() const {
        std::int64_t n = 1;
        for (int a = 0; a < dimension; ++a) n *= side;
        return n;
    }

    std::int64_t n_edges() const {
        std::int64_t n = n_vertices();
        if (topology == Topology::torus) return n * dimension;
        return (n / side) * (side - 1) * dimension;
    }

    std::array<std::int32_t, kMaxDim> coords(Vertex v) const {
        std::array<std::int32_t, kMaxDim> c{};
        for (int a = 0; a < dimension; ++a) {
            c[a] = static_cast<std::int32_t>(v % side);
            v /= side;
        }
        return c;
    }

    Vertex vertex_at(const std::array<std::int32_t, kMaxDim>& c) const {
        Vertex v = 0;
        for (int a = dimension - 1; a >= 0; --a) v = v * side + c[a];
        return v;
    }

    std::int64_t axis_stride(int axis) const {
        std::int64_t s = 1;
        for (int a = 0; a < axis; ++a) s *= side;
        return s;
    }

    // Neighbor of v along `axis` in direction `dir` (+1/-1); -1 when the edge
    // does not exist (free boundary).
    Vertex step(Vertex v, int axis, int dir) const {
        std::int64_t stride = axis_stride(axis);
        std::int32_t c = static_cast<std::int32_t>((v / stride) % side);
        if (dir > 0) {
            if (c == side - 1) {
                if (topology == Topology::free) return -1;
                return v - stride * (side - 1);
            }
            return v + stride;
        }
        if (c == 0) {
            if (topology == Topology::free) return -1;
            return v + stride * (side - 1);
        }
        return v - stride;
    }

    // Fills out[] with the existing neighbors of v in fixed (axis, +/-) order;
    // returns the count (2d on a torus, fewer on a free boundary).
    int collect_neighbors(Vertex v, Vertex* out) const {
        int k = 0;
        for (int a = 0; a < dimension; ++a) {
            Vertex p = step(v, a, +1);
            if (p >= 0) out[k++] = p;
            Vertex m = step(v, a, -1);
            if (m >= 0) out[k++] = m;
        }
        return k;
    }

    bool adjacent(Vertex u, Vertex w) const {
        Vertex nbr[2 * kMaxDim];
        int k = collect_neighbors(u, nbr);
        for (int i = 0; i < k; ++i)
            if (nbr[i] == w) return true;
        return false;
    }

    // Every edge is stored once, keyed by the endpoint it leaves in the +axis
    // direction: edge (v,axis) is <v, v+e_axis>. O(1) access during matvecs.
    std::int64_t edge_key(Vertex owner, int axis) const {
        return owner * dimension + axis;
    }

    bool edge_exists(Vertex owner, int axis) const {
        if (topology == Topology::torus) return true;
        std::int64_t stride = axis_stride(axis);
        return ((owner / stride) % side) != side - 1;
    }

    // Canonical (owner, axis) for an unordered adjacent pair; throws if the
    // pair is not an edge of the box.
    std::pair<Vertex, int> canonical_edge(Vertex x, Vertex y) const {
        for (int a = 0; a < dimension; ++a) {
            if (step(x, a, +1) == y) return {x, a};
            if (step(y, a, +1) == x) return {y, a};
        }
        throw DomainError("vertices are not nearest neighbors");
    }

    std::int64_t boundary_distance(Vertex v) const {
        std::int64_t best = side;  // torus: unused
        auto c = coords(v);
        for (int a = 0; a < dimension; ++a) {
            std::int64_t d = std::min<std::int64_t>(c[a], side - 1 - c[a]);
            best = std::min(best, d);
        }
        return best;
    }

    // Horizon rule: a time-t statistic started at v is Z^d-exact only if the
    // walk cannot feel the topology within t steps.
    bool horizon_ok(Vertex v, std::int64_t t) const {
        if (topology == Topology::torus) return 2 * t < side;
        return t <= boundary_distance(v);
    }

    void require_horizon(Vertex v, std::int64_t t, bool overridden) const {
        if (overridden || horizon_ok(v, t)) return;
        throw HorizonError(
            "time horizon " + std::to_string(t) +
            " exceeds the Z^d-exact range for this box (use the override to "
            "proceed anyway)");
    }

    bool operator==(const BoxSpec&) const = default;
};

}  // namespace rcm
