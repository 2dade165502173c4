#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "leopart/grid.hpp"

namespace leopart {

struct ClusterPrecision {
  std::vector<double> precision;          // per cluster; 0 for clusters absent from the data
  std::vector<std::uint64_t> inside;      // pixels of the cluster inside the hint
  std::vector<std::uint64_t> total;       // pixels of the cluster
  std::vector<std::string> warnings;
};

// Fraction of each cluster's pixels that fall inside the foreground hint,
// aggregated over all images. Maps and masks must share resolution; pixels
// labelled kUnassigned are skipped.
ClusterPrecision cluster_precision(const std::vector<LabelMap>& cluster_maps, const std::vector<BinaryMask>& hints,
                                   std::size_t n_clusters);

// Cluster -> {fg, bg} labelling with its scores and threshold.
struct ForegroundMap {
  std::vector<bool> theta;  // true = foreground
  std::vector<double> precision;
  double threshold = 0.35;

  std::size_t size() const { return theta.size(); }
  std::size_t n_foreground() const;
};

inline constexpr double kThresholdSingleDataset = 0.35;
inline constexpr double kThresholdTwoDatasets = 0.40;

ForegroundMap build_theta(const std::vector<double>& precision, double c);

// Pixelwise lookup of theta. Ids not covered by theta (including kUnassigned)
// become background and are reported once each in `warnings`.
BinaryMask extract_foreground(const LabelMap& cluster_map, const ForegroundMap& fm,
                              std::vector<std::string>* warnings = nullptr);

// |a & b| / |a | b|; 1 when both masks are empty.
double jaccard(const BinaryMask& pred, const BinaryMask& gt);

// Jaccard of the dataset-aggregated intersection and union.
double jaccard(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt);

// Foreground pixels with at least one 4-neighbour (inside the image) in the background.
std::vector<std::pair<std::size_t, std::size_t>> mask_boundary(const BinaryMask& m);

// Default boundary tolerance: 0.75% of the image diagonal.
double default_boundary_tolerance(std::size_t height, std::size_t width);

// Boundary F-measure with Euclidean tolerance `tol_px` (negative = default).
// Both boundaries empty -> 1; exactly one empty -> 0.
double boundary_f1(const BinaryMask& pred, const BinaryMask& gt, double tol_px = -1.0);

// Picks c among `candidates` maximizing the aggregated Jaccard of the
// extracted masks against `targets`; ties keep the smaller c.
double select_threshold(const std::vector<double>& precision, const std::vector<LabelMap>& cluster_maps,
                        const std::vector<BinaryMask>& targets, const std::vector<double>& candidates);

// Text form: one `cluster_id precision fg|bg` line per cluster, after a
// `threshold c` line.
std::string format_foreground_map(const ForegroundMap& fm);
ForegroundMap parse_foreground_map(const std::string& text);
void write_foreground_map(const ForegroundMap& fm, const std::filesystem::path& path);
ForegroundMap read_foreground_map(const std::filesystem::path& path);

}  // namespace leopart
