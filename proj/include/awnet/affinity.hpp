#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "awnet/volume.hpp"

namespace awnet {

/// Bandwidths and cutoff for the voxel-pair weights
/// w_ij = exp(-|F_i - F_j|^2 / sigma_i^2) * exp(-|X_i - X_j|^2 / sigma_x^2),
/// zero beyond Euclidean distance `radius`. Weights below `min_weight` are
/// dropped from storage; set it to 0 for the exact graph.
struct AffinityParams {
    double sigma_i = 0.05;
    double sigma_x = 4.0;
    int radius = 4;
    double min_weight = 1e-8;
};

/// Sparse symmetric voxel affinity graph. Each undirected edge is stored
/// once with u < v; degrees are cached at construction.
struct AffinityGraph {
    struct Edge {
        std::uint32_t u;
        std::uint32_t v;
        double w;
    };

    std::size_t n = 0;
    std::vector<Edge> edges;
    std::vector<double> degree_sums;

    /// Cached d(u) = sum_t w(u, t).
    double degree(std::size_t u) const;

    /// Total edge weight, sum over stored (undirected) edges.
    double total_weight() const;
};

/// Build the affinity graph of a normalized volume. Deterministic: the edge
/// list is sorted by (u, v) regardless of construction schedule.
AffinityGraph build_affinity(const Volume& v, const AffinityParams& p);

/// Text dump for oracle cross-checks: header "n m", then one "u v w" line
/// per stored edge.
void save_graph_text(const AffinityGraph& g, const std::filesystem::path& path);

// Binary cache format ".aff": magic "AG31", u32 version, u64 n, u64 m,
// then m edges as (u32 u, u32 v, f64 w); degrees are recomputed on load.
void save_graph(const AffinityGraph& g, const std::filesystem::path& path);
AffinityGraph load_graph(const std::filesystem::path& path);

} // namespace awnet
