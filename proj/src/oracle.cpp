#include "rcm/oracle.hpp"

#include <algorithm>
#include <map>

namespace rcm {

namespace {

// March of an excursion-mass map restricted to `allowed` vertices; exit mass
// onto y is read before each interior step.
std::vector<double> march(const Environment& env, Vertex x, Vertex y,
                          std::int64_t nMax,
                          const std::vector<Vertex>& allowed) {
    const BoxSpec& box = env.box();
    auto isAllowed = [&](Vertex z) {
        return std::binary_search(allowed.begin(), allowed.end(), z);
    };
    auto pi = [&](Vertex z) {
        Vertex nbr[2 * kMaxDim];
        int k = box.collect_neighbors(z, nbr);
        double s = 0.0;
        for (int i = 0; i < k; ++i) s += env.conductance(z, nbr[i]);
        return s;
    };

    std::vector<double> out(std::max<std::int64_t>(0, nMax - 1), 0.0);
    if (nMax < 2) return out;

    std::map<Vertex, double> cur;
    {
        Vertex nbr[2 * kMaxDim];
        int k = box.collect_neighbors(x, nbr);
        double px = pi(x);
        for (int i = 0; i < k; ++i)
            if (isAllowed(nbr[i]))
                cur[nbr[i]] = env.conductance(x, nbr[i]) / px;
    }
    for (std::int64_t n = 2; n <= nMax; ++n) {
        double exit = 0.0;
        for (const auto& [z, m] : cur)
            if (box.adjacent(z, y)) exit += m * env.conductance(z, y) / pi(z);
        out[n - 2] = exit;
        if (n == nMax) break;
        std::map<Vertex, double> next;
        Vertex nbr[2 * kMaxDim];
        for (const auto& [z, m] : cur) {
            double pz = pi(z);
            int k = box.collect_neighbors(z, nbr);
            for (int i = 0; i < k; ++i)
                if (isAllowed(nbr[i]))
                    next[nbr[i]] += m * env.conductance(z, nbr[i]) / pz;
        }
        cur.swap(next);
    }
    return out;
}

}  // namespace

double excursion_path_sum(const Environment& env, const ClusterDecomposition& dec,
                          Vertex x, Vertex y, std::int64_t n) {
    if (n < 2) throw ParameterError("excursion path sum requires n >= 2");
    auto sums = excursion_path_sums(env, dec, x, y, n);
    return sums[n - 2];
}

std::vector<double> excursion_path_sums(const Environment& env,
                                        const ClusterDecomposition& dec, Vertex x,
                                        Vertex y, std::int64_t nMax) {
    return march(env, x, y, nMax, dec.g_xy(x, y));
}

std::vector<double> sojourn_path_sums(const Environment& env,
                                      const ClusterDecomposition& dec, Vertex x,
                                      Vertex y, std::int64_t nMax) {
    std::vector<Vertex> offGiant;
    for (Vertex v = 0; v < env.box().n_vertices(); ++v)
        if (!dec.in_giant(v)) offGiant.push_back(v);
    return march(env, x, y, nMax, offGiant);
}

}  // namespace rcm
