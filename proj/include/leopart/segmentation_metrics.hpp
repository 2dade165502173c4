#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "leopart/grid.hpp"
#include "leopart/matrix.hpp"

namespace leopart {

using ClassMap = Plane<std::uint8_t>;

// Cluster id for tokens that were not clustered (e.g. background tokens when
// only foreground is clustered).
inline constexpr std::uint16_t kUnassigned = 0xFFFF;
inline constexpr std::uint8_t kIgnoreLabel = 255;

// counts[pred][gt]; pixels whose gt equals the ignore label are only counted
// in `ignored`.
class ConfusionMatrix {
 public:
  ConfusionMatrix(std::size_t n_pred, std::size_t n_gt) : n_pred_(n_pred), n_gt_(n_gt), counts_(n_pred * n_gt, 0) {}

  std::size_t n_pred() const { return n_pred_; }
  std::size_t n_gt() const { return n_gt_; }
  std::uint64_t at(std::size_t p, std::size_t g) const { return counts_[p * n_gt_ + g]; }
  std::uint64_t ignored() const { return ignored_; }
  std::uint64_t total() const;

  // pred and gt must have equal shapes; pred labels >= n_pred (e.g. kUnassigned) throw.
  void add(const LabelMap& pred, const ClassMap& gt, std::uint8_t ignore_label = kIgnoreLabel);

 private:
  std::size_t n_pred_, n_gt_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

struct MiouResult {
  double miou = 0.0;
  std::vector<double> per_class_iou;  // NaN for classes absent from gt
  std::vector<bool> present;
};

// Per-class IoU from the dataset-aggregated confusion (square, labels are
// class ids), averaged over classes that occur in gt.
MiouResult miou_from_confusion(const ConfusionMatrix& cm);

// Prediction maps of another resolution are resized (nearest) to the gt size.
MiouResult miou(const std::vector<LabelMap>& pred, const std::vector<ClassMap>& gt, std::size_t n_classes,
                std::uint8_t ignore_label = kIgnoreLabel);

// Optimal assignment minimizing total cost; result[row] = column. Among optimal
// permutations the lexicographically smallest is returned.
std::vector<std::size_t> hungarian(const MatD& cost);

struct GreedyMatch {
  std::vector<std::uint8_t> cluster_to_class;
  std::vector<double> precision;  // precision of each cluster w.r.t. its assigned class
  std::vector<LabelMap> merged;
  std::vector<std::string> warnings;
};

// Assigns each cluster to the gt class it is most precise for (ties -> lower
// class id) and relabels the maps. Clusters with no labelled pixels go to class 0.
GreedyMatch greedy_precision_match(const std::vector<LabelMap>& cluster_maps, const std::vector<ClassMap>& gt,
                                   std::size_t n_clusters, std::size_t n_classes,
                                   std::uint8_t ignore_label = kIgnoreLabel);

struct MatchedMiou {
  MiouResult result;
  std::vector<std::size_t> mapping;  // pred label -> gt class
};

// Hungarian matching of pred labels (< n_pred) to gt classes on the
// aggregated confusion (cost = -intersection), then mIoU of the relabelled maps.
// n_pred may differ from n_classes; the cost matrix is padded to square.
MatchedMiou hungarian_miou(const std::vector<LabelMap>& pred, const std::vector<ClassMap>& gt, std::size_t n_pred,
                           std::size_t n_classes, std::uint8_t ignore_label = kIgnoreLabel);

}  // namespace leopart
