#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "leopart/grid.hpp"

namespace leopart {

struct Edge {
  std::uint32_t u = 0;  // u < v
  std::uint32_t v = 0;
  double w = 0.0;
  bool operator==(const Edge&) const = default;
};

// Undirected weighted co-occurrence network over cluster ids 0..n-1.
struct CoocGraph {
  std::size_t n_nodes = 0;
  std::vector<Edge> edges;                // sorted by (u, v); no self-loops
  std::vector<std::uint64_t> pixel_count; // pixels per cluster over all images
  std::vector<std::uint32_t> image_count; // images in which each cluster occurs
  std::vector<double> conditional;        // n x n, entry (i, j) = P(j | i); empty after import

  double cond(std::size_t i, std::size_t j) const { return conditional[i * n_nodes + j]; }
  std::vector<double> degrees() const;
};

// Conditional co-occurrence P(j|i): per image, the fraction of cluster-i
// pixels with a cluster-j pixel along one of the 8 compass directions at
// distance <= d; averaged over the images in which i occurs. Edge weight is
// min(P(j|i), P(i|j)). kUnassigned pixels are ignored.
CoocGraph cooccurrence_graph(const std::vector<LabelMap>& cluster_maps, std::size_t n_clusters, std::size_t d = 1);

// Drops edges with w < threshold.
CoocGraph filter_edges(const CoocGraph& g, double threshold);

inline constexpr std::int32_t kBackground = -1;

// community[node] in 0..M-1, or kBackground.
struct Partition {
  std::vector<std::int32_t> community;
  std::size_t n_communities = 0;
};

// Two-level map equation in bits. Visit rates follow weighted degree; module
// exit flows are multiplied by markov_time. Background and zero-degree nodes
// contribute nothing.
double map_equation(const CoocGraph& g, const Partition& p, double markov_time = 1.0);

struct CommunityParams {
  std::size_t target = 0;  // required number of communities
  double markov_time = 2.0;
  std::uint64_t seed = 0;
};

struct CommunityResult {
  Partition partition;
  std::size_t found = 0;               // communities after local moving, before the constraint phase
  std::size_t merges = 0;              // merges done by the constraint phase
  std::vector<double> sweep_trace;     // map equation after every local-moving sweep
  double codelength = 0.0;
};

// Local moving with module aggregation until no move improves the map
// equation, then pairwise merges (smallest increase, connected pairs first)
// down to params.target. Zero-degree nodes go to background. Throws
// ValidationError if fewer than `target` nodes have nonzero degree.
CommunityResult detect_communities(const CoocGraph& g, const CommunityParams& params);

// Relabels clusters to communities; background nodes, kUnassigned and ids not
// in the partition become `background_label`.
std::vector<LabelMap> merge_by_communities(const std::vector<LabelMap>& cluster_maps, const Partition& p,
                                           std::uint16_t background_label, std::vector<std::string>* warnings = nullptr);

// Text formats: `nodes n`, `node i pixels images` lines, then `i j w` edge lines; and
// `cluster_id community_id|bg` lines.
std::string format_graph(const CoocGraph& g);
CoocGraph parse_graph(const std::string& text);
std::string format_partition(const Partition& p);
Partition parse_partition(const std::string& text);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace leopart
