#include "rcm/cluster.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include <nlohmann/json.hpp>

namespace rcm {

namespace {

struct UnionFind {
    std::vector<std::int64_t> parent;
    explicit UnionFind(std::int64_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    std::int64_t find(std::int64_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::int64_t a, std::int64_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (a < b)
            parent[b] = a;  // keep the smaller index as root (deterministic)
        else
            parent[a] = b;
    }
};

}  // namespace

ClusterDecomposition::ClusterDecomposition(const Environment& env, double alpha)
    : env_(&env), alpha_(alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw ParameterError("alpha must lie in (0,1]");
    const BoxSpec& box = env.box();
    const std::int64_t n = box.n_vertices();
    const int d = box.dimension;

    UnionFind uf(n);
    std::int64_t strongEdges = 0;
    for (Vertex v = 0; v < n; ++v) {
        for (int a = 0; a < d; ++a) {
            if (!box.edge_exists(v, a)) continue;
            if (env.value(v, a) >= alpha) {
                uf.unite(v, box.step(v, a, +1));
                ++strongEdges;
            }
        }
    }
    if (strongEdges == 0)
        throw DegenerateDecompositionError(
            "no edge reaches the cut-off; the strong graph is empty");

    // Cluster sizes keyed by root; the root is already the smallest member.
    std::vector<std::int64_t> size(n, 0);
    for (Vertex v = 0; v < n; ++v) ++size[uf.find(v)];
    Vertex giantRoot = 0;
    std::int64_t giantSize = -1;
    std::int64_t runnerUp = -1;
    for (Vertex r = 0; r < n; ++r) {
        if (size[r] == 0) continue;
        if (size[r] > giantSize) {
            runnerUp = giantSize;
            giantSize = size[r];
            giantRoot = r;
        } else if (size[r] > runnerUp) {
            runnerUp = size[r];
        }
    }
    tieBroken_ = (runnerUp == giantSize);

    holeId_.assign(n, -1);
    giant_.clear();
    for (Vertex v = 0; v < n; ++v) {
        if (uf.find(v) == giantRoot)
            giant_.push_back(v);
        else
            holeId_[v] = -2;  // not yet assigned to a hole
    }
    giantFraction_ = static_cast<double>(giantSize) / static_cast<double>(n);

    // Holes: components of the complement under full lattice adjacency,
    // indexed in order of their smallest vertex.
    Vertex nbr[2 * kMaxDim];
    for (Vertex v = 0; v < n; ++v) {
        if (holeId_[v] != -2) continue;
        std::int32_t id = static_cast<std::int32_t>(holes_.size());
        std::vector<Vertex> comp;
        std::deque<Vertex> queue{v};
        holeId_[v] = id;
        while (!queue.empty()) {
            Vertex u = queue.front();
            queue.pop_front();
            comp.push_back(u);
            int k = box.collect_neighbors(u, nbr);
            for (int i = 0; i < k; ++i) {
                if (holeId_[nbr[i]] == -2) {
                    holeId_[nbr[i]] = id;
                    queue.push_back(nbr[i]);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        holes_.push_back(std::move(comp));
    }

    holeBoundary_.resize(holes_.size());
    for (std::size_t h = 0; h < holes_.size(); ++h) {
        std::vector<Vertex> bnd;
        for (Vertex u : holes_[h]) {
            int k = box.collect_neighbors(u, nbr);
            for (int i = 0; i < k; ++i)
                if (in_giant(nbr[i])) bnd.push_back(nbr[i]);
        }
        std::sort(bnd.begin(), bnd.end());
        bnd.erase(std::unique(bnd.begin(), bnd.end()), bnd.end());
        holeBoundary_[h] = std::move(bnd);
    }

    if (giantFraction_ < 0.5)
        warnings_.push_back(
            "giant cluster covers " + std::to_string(giantFraction_ * 100) +
            "% of vertices; the infinite-cluster identification is dubious");
    if (tieBroken_)
        warnings_.push_back(
            "largest strong cluster is not unique; tie broken by smallest "
            "vertex index");
}

std::vector<Vertex> ClusterDecomposition::g_neighborhood(Vertex x) const {
    const BoxSpec& box = env_->box();
    Vertex nbr[2 * kMaxDim];
    int k = box.collect_neighbors(x, nbr);
    std::vector<Vertex> out;
    std::vector<std::int32_t> seenHoles;
    for (int i = 0; i < k; ++i) {
        Vertex y = nbr[i];
        if (in_giant(y)) {
            out.push_back(y);
        } else {
            std::int32_t h = holeId_[y];
            if (std::find(seenHoles.begin(), seenHoles.end(), h) ==
                seenHoles.end()) {
                seenHoles.push_back(h);
                out.insert(out.end(), holes_[h].begin(), holes_[h].end());
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::int64_t ClusterDecomposition::neighborhood_size(Vertex x) const {
    const BoxSpec& box = env_->box();
    Vertex nbr[2 * kMaxDim];
    int k = box.collect_neighbors(x, nbr);
    std::int64_t count = 0;
    std::vector<std::int32_t> seenHoles;
    for (int i = 0; i < k; ++i) {
        Vertex y = nbr[i];
        if (in_giant(y)) {
            ++count;  // F_y = {y}, and distinct neighbors are distinct vertices
        } else {
            std::int32_t h = holeId_[y];
            if (std::find(seenHoles.begin(), seenHoles.end(), h) ==
                seenHoles.end()) {
                seenHoles.push_back(h);
                count += static_cast<std::int64_t>(holes_[h].size());
            }
        }
    }
    return count;
}

std::vector<std::int32_t> ClusterDecomposition::holes_adjacent(Vertex x) const {
    const BoxSpec& box = env_->box();
    Vertex nbr[2 * kMaxDim];
    int k = box.collect_neighbors(x, nbr);
    std::vector<std::int32_t> ids;
    for (int i = 0; i < k; ++i)
        if (!in_giant(nbr[i])) ids.push_back(holeId_[nbr[i]]);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::int64_t ClusterDecomposition::g_intersection_size(Vertex x, Vertex y) const {
    const BoxSpec& box = env_->box();
    Vertex nx[2 * kMaxDim], ny[2 * kMaxDim];
    int kx = box.collect_neighbors(x, nx);
    int ky = box.collect_neighbors(y, ny);
    std::int64_t count = 0;
    // common giant neighbors
    for (int i = 0; i < kx; ++i) {
        if (!in_giant(nx[i])) continue;
        for (int j = 0; j < ky; ++j)
            if (ny[j] == nx[i]) {
                ++count;
                break;
            }
    }
    auto hx = holes_adjacent(x);
    auto hy = holes_adjacent(y);
    std::vector<std::int32_t> shared;
    std::set_intersection(hx.begin(), hx.end(), hy.begin(), hy.end(),
                          std::back_inserter(shared));
    for (std::int32_t h : shared)
        count += static_cast<std::int64_t>(holes_[h].size());
    return count;
}

std::vector<Vertex> ClusterDecomposition::g_xy(Vertex x, Vertex y) const {
    auto hx = holes_adjacent(x);
    auto hy = holes_adjacent(y);
    std::vector<std::int32_t> shared;
    std::set_intersection(hx.begin(), hx.end(), hy.begin(), hy.end(),
                          std::back_inserter(shared));
    std::vector<Vertex> out;
    for (std::int32_t h : shared)
        out.insert(out.end(), holes_[h].begin(), holes_[h].end());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::int64_t> ClusterDecomposition::markov_distances_from(
    Vertex x) const {
    if (!in_giant(x)) throw DomainError("markov distance from a non-giant vertex");
    const BoxSpec& box = env_->box();
    const std::int64_t n = box.n_vertices();
    std::vector<std::int64_t> dist(n, -1);
    std::deque<Vertex> queue{x};
    dist[x] = 0;
    Vertex nbr[2 * kMaxDim];
    std::vector<char> holeDone(holes_.size(), 0);
    while (!queue.empty()) {
        Vertex u = queue.front();
        queue.pop_front();
        std::int64_t du = dist[u];
        auto visit = [&](Vertex w) {
            if (dist[w] < 0) {
                dist[w] = du + 1;
                queue.push_back(w);
            }
        };
        int k = box.collect_neighbors(u, nbr);
        for (int i = 0; i < k; ++i) {
            Vertex w = nbr[i];
            if (in_giant(w)) {
                visit(w);  // one fine step, any conductance, is a coarse step
            } else {
                std::int32_t h = holeId_[w];
                if (holeDone[h]) continue;
                holeDone[h] = 1;  // boundary is fully reached at distance du+1
                for (Vertex b : holeBoundary_[h])
                    if (b != u) visit(b);
            }
        }
    }
    return dist;
}

std::optional<std::int64_t> ClusterDecomposition::markov_distance(
    Vertex x, Vertex y) const {
    if (!in_giant(x) || !in_giant(y))
        throw DomainError("markov distance requires giant vertices");
    if (x == y) return 0;
    auto dist = markov_distances_from(x);
    if (dist[y] < 0) return std::nullopt;
    return dist[y];
}

nlohmann::json ClusterDecomposition::diagnostics() const {
    nlohmann::json j;
    j["alpha"] = alpha_;
    j["giant_size"] = giant_.size();
    j["giant_fraction"] = giantFraction_;
    j["hole_count"] = holes_.size();
    j["tie_broken"] = tieBroken_;
    std::map<std::size_t, std::int64_t> histo;
    for (const auto& h : holes_) ++histo[h.size()];
    nlohmann::json hist = nlohmann::json::array();
    for (auto& [sz, cnt] : histo)
        hist.push_back({{"size", sz}, {"count", cnt}});
    j["hole_size_histogram"] = hist;
    j["warnings"] = warnings_;
    return j;
}

}  // namespace rcm
