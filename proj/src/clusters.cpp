#include "spinecho/clusters.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace spinecho {

bool NeighborGraph::connected(int i, int j) const {
    const auto& n = adj[static_cast<std::size_t>(i)];
    return std::binary_search(n.begin(), n.end(), j);
}

NeighborGraph build_neighbor_graph(const SpinBathConfiguration& config, double r_dipole) {
    if (r_dipole <= 0.0)
        throw std::invalid_argument("build_neighbor_graph: r_dipole must be > 0");
    const int n = config.size();
    NeighborGraph graph;
    graph.r_dipole = r_dipole;
    graph.adj.resize(static_cast<std::size_t>(n));
    const double r2 = r_dipole * r_dipole;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d2 = (config.spins[static_cast<std::size_t>(i)].position -
                               config.spins[static_cast<std::size_t>(j)].position)
                                  .squaredNorm();
            if (d2 <= r2) {
                graph.adj[static_cast<std::size_t>(i)].push_back(j);
                graph.adj[static_cast<std::size_t>(j)].push_back(i);
            }
        }
    return graph;
}

namespace {

// Pack a sorted cluster of up to 4 indices (each < 2^16 - 1) into a key.
std::uint64_t pack_cluster(const std::vector<int>& c) {
    std::uint64_t key = 0;
    for (int v : c) key = (key << 16) | static_cast<std::uint64_t>(v + 1);
    return key;
}

// Connected-subgraph enumeration rooted at the minimum vertex: grow with
// vertices greater than the root that neighbor the current set. Each
// connected subset is produced exactly once because its generation path via
// the extension list is unique.
void extend(const NeighborGraph& graph, std::vector<int>& current, std::vector<int>& ext,
            int root, int order, std::size_t cap, std::vector<std::vector<int>>& out) {
    out.push_back(current);
    if (out.size() > cap)
        throw std::length_error(
            "enumerate_clusters: cluster cap exceeded; reduce r_dipole or the order");
    if (static_cast<int>(current.size()) == order) return;
    std::vector<int> local = ext;
    while (!local.empty()) {
        const int w = local.back();
        local.pop_back();
        std::vector<int> next = local;
        for (int u : graph.adj[static_cast<std::size_t>(w)]) {
            if (u <= root) continue;
            if (std::find(current.begin(), current.end(), u) != current.end()) continue;
            bool neighbor_of_current = false;
            for (int v : current)
                if (graph.connected(v, u)) {
                    neighbor_of_current = true;
                    break;
                }
            if (neighbor_of_current) continue;
            if (std::find(next.begin(), next.end(), u) == next.end()) next.push_back(u);
        }
        current.push_back(w);
        extend(graph, current, next, root, order, cap, out);
        current.pop_back();
    }
}

} // namespace

ClusterSet enumerate_clusters(const NeighborGraph& graph, int order, std::size_t cap) {
    if (order < 1) throw std::invalid_argument("enumerate_clusters: order must be >= 1");
    if (order > kMaxOrder)
        throw std::invalid_argument("enumerate_clusters: order above the supported maximum");
    if (graph.size() >= (1 << 16) - 1)
        throw std::length_error("enumerate_clusters: too many bath spins");

    ClusterSet set;
    set.order = order;
    set.r_dipole = graph.r_dipole;

    for (int v = 0; v < graph.size(); ++v) {
        std::vector<int> current{v};
        std::vector<int> ext;
        for (int u : graph.adj[static_cast<std::size_t>(v)])
            if (u > v) ext.push_back(u);
        extend(graph, current, ext, v, order, cap, set.clusters);
    }

    for (auto& c : set.clusters) std::sort(c.begin(), c.end());
    std::sort(set.clusters.begin(), set.clusters.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) {
                  if (a.size() != b.size()) return a.size() < b.size();
                  return a < b;
              });

    std::unordered_map<std::uint64_t, int> index;
    index.reserve(set.clusters.size() * 2);
    for (std::size_t i = 0; i < set.clusters.size(); ++i)
        index.emplace(pack_cluster(set.clusters[i]), static_cast<int>(i));

    // Proper connected subclusters via subset masks; cluster sizes are <= 4.
    set.subclusters.resize(set.clusters.size());
    for (std::size_t i = 0; i < set.clusters.size(); ++i) {
        const auto& c = set.clusters[i];
        const int k = static_cast<int>(c.size());
        if (k == 1) continue;
        for (int mask = 1; mask < (1 << k) - 1; ++mask) {
            std::vector<int> sub;
            for (int b = 0; b < k; ++b)
                if (mask & (1 << b)) sub.push_back(c[static_cast<std::size_t>(b)]);
            const auto it = index.find(pack_cluster(sub));
            if (it != index.end()) set.subclusters[i].push_back(it->second);
        }
        std::sort(set.subclusters[i].begin(), set.subclusters[i].end());
    }
    return set;
}

void save_cluster_set(const ClusterSet& set, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema"] = "spinecho.cluster-set/1";
    j["order"] = set.order;
    j["r_dipole"] = set.r_dipole;
    j["clusters"] = set.clusters;
    j["subclusters"] = set.subclusters;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_cluster_set: cannot open " + path.string());
    out << j.dump(1) << "\n";
}

} // namespace spinecho
