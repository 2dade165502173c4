#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "leopart/grid.hpp"
#include "leopart/kmeans.hpp"
#include "leopart/segmentation_metrics.hpp"

namespace leopart {

// Stacks the tokens of several D x H x W grids into one (sum H*W) x D matrix.
MatD stack_tokens(const std::vector<FeatureGrid>& features);

// Splits flat per-token labels back into per-image H x W maps.
std::vector<LabelMap> labels_to_maps(const std::vector<std::uint32_t>& labels,
                                     const std::vector<FeatureGrid>& features);

// Bilinear (half-pixel) resize of a feature grid to out_h x out_w.
FeatureGrid upsample_bilinear(const FeatureGrid& g, std::size_t out_h, std::size_t out_w);

// Cluster map of every image at out_h x out_w: features are bilinearly
// upsampled, then each pixel takes its nearest centroid.
std::vector<LabelMap> upsampled_cluster_maps(const std::vector<FeatureGrid>& features, const MatD& centroids,
                                             std::size_t out_h, std::size_t out_w, std::size_t threads = 1);

// Nearest resize of gt masks to size x size (0 keeps the native size).
std::vector<ClassMap> resize_masks(const std::vector<ClassMap>& masks, std::size_t size);

struct OverclusterParams {
  std::size_t k = 0;
  std::size_t n_classes = 0;
  std::size_t n_seeds = 5;
  std::size_t max_iter = 100;
  std::uint64_t seed = 0;
  std::size_t mask_size = 100;  // gt masks are resized to this before matching
  std::size_t threads = 1;
};

struct OverclusterReport {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> per_seed;
  std::vector<double> per_class_iou;  // averaged over seeds
  std::vector<std::string> warnings;
};

// K-means, greedy precision merge to n_classes, Hungarian matching on the
// merged confusion, mIoU. Repeated for n_seeds K-means seeds.
OverclusterReport overcluster_eval(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt,
                                   const OverclusterParams& params);

struct ProbeParams {
  std::size_t n_classes = 0;
  std::size_t epochs = 200;
  double lr = 0.05;
  std::size_t mask_size = 100;
  std::uint64_t seed = 0;
};

struct LinearProbe {
  MatD weight;  // n_classes x D
  MatD bias;    // 1 x n_classes
};

// Mean cross-entropy of softmax(X W^T + b) against labels and its gradient.
// Rows whose label is kIgnoreLabel are skipped.
double probe_loss(const LinearProbe& probe, const MatD& x, const std::vector<std::uint8_t>& labels,
                  LinearProbe* grad = nullptr);

struct ProbeReport {
  LinearProbe probe;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;  // pixel accuracy on the upsampled val split
  MiouResult val;
  std::vector<double> loss_trace;
};

// Trains a per-token affine classifier on frozen features (labels taken from
// gt resized to the token grid) with the adaptive-moment optimizer, then
// evaluates on the val split with features bilinearly upsampled to mask size.
ProbeReport linear_probe(const std::vector<FeatureGrid>& train_features, const std::vector<ClassMap>& train_gt,
                         const std::vector<FeatureGrid>& val_features, const std::vector<ClassMap>& val_gt,
                         const ProbeParams& params);

}  // namespace leopart
