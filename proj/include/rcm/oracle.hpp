#pragma once

#include <cstdint>
#include <vector>

#include "rcm/cluster.hpp"

namespace rcm {

// Independent dynamic-programming routes used to cross-check the spectral
// machinery. These work directly on vertex maps over the environment and do
// not touch the operator/matrix code paths.

// P^x(X̂_1 = y, T_1 = n, X_1 in G_xy): sum over length-n excursion paths
// x -> z_1 -> ... -> z_{n-1} -> y with all interior vertices in G_xy.
double excursion_path_sum(const Environment& env, const ClusterDecomposition& dec,
                          Vertex x, Vertex y, std::int64_t n);

// Same for all n = 2..nMax in one sweep.
std::vector<double> excursion_path_sums(const Environment& env,
                                        const ClusterDecomposition& dec, Vertex x,
                                        Vertex y, std::int64_t nMax);

// P^x(X̂_1 = y, T_1 = n) without the G_xy restriction: interior vertices may
// lie anywhere off the giant cluster.
std::vector<double> sojourn_path_sums(const Environment& env,
                                      const ClusterDecomposition& dec, Vertex x,
                                      Vertex y, std::int64_t nMax);

}  // namespace rcm
