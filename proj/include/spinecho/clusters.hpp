#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "spinecho/bath.hpp"

namespace spinecho {

/// Undirected proximity graph: edge (i, j) iff |r_i - r_j| <= r_dipole.
struct NeighborGraph {
    std::vector<std::vector<int>> adj; // sorted neighbor lists
    double r_dipole = 0.0;

    int size() const { return static_cast<int>(adj.size()); }
    bool connected(int i, int j) const;
};

NeighborGraph build_neighbor_graph(const SpinBathConfiguration& config, double r_dipole);

/// All connected vertex subsets of size 1..order, each exactly once, in
/// canonical order (by size, then lexicographic), plus for every cluster the
/// indices of its proper connected subclusters.
struct ClusterSet {
    int order = 0;
    double r_dipole = 0.0;
    std::vector<std::vector<int>> clusters;
    std::vector<std::vector<int>> subclusters; // indices into `clusters`

    std::size_t size() const { return clusters.size(); }
};

inline constexpr int kMaxOrder = 4;
inline constexpr std::size_t kDefaultClusterCap = 5'000'000;

/// Throws std::length_error with advice to reduce r_dipole when the cluster
/// count exceeds `cap` (pathological density guard).
ClusterSet enumerate_clusters(const NeighborGraph& graph, int order,
                              std::size_t cap = kDefaultClusterCap);

/// Debug dump of a cluster set as JSON.
void save_cluster_set(const ClusterSet& set, const std::filesystem::path& path);

} // namespace spinecho
