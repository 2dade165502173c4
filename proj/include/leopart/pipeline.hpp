#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "leopart/cbfe.hpp"
#include "leopart/community.hpp"
#include "leopart/grid.hpp"
#include "leopart/model.hpp"
#include "leopart/segmentation_metrics.hpp"
#include "leopart/synth.hpp"
#include "leopart/tensor_io.hpp"
#include "leopart/train.hpp"

namespace leopart {

// Everything the evaluation stages read, at token resolution.
struct EvalData {
  std::vector<FeatureGrid> tokens;   // raw tokens
  std::vector<ClassMap> objects;     // 0 = background, c + 1 = object class c
  std::vector<BinaryMask> hints;     // attention-derived foreground hints
  std::vector<BinaryMask> fg_truth;  // objects > 0
};

EvalData eval_data_from(const SynthDataset& ds, const MaskParams& mask = {});
EvalData eval_data_from(const DatasetManifest& m, const MaskParams& mask = {});
std::vector<TrainImage> train_images_from(const EvalData& d);

// Encoder output of every image (the representation that gets clustered).
std::vector<FeatureGrid> encode_all(const std::vector<FeatureGrid>& tokens, const ModelParams<float>& p);

struct SegParams {
  std::size_t n_classes = 0;  // including background (label 0 in gt)
  std::size_t cbfe_k = 200;
  double cbfe_threshold = kThresholdSingleDataset;
  std::size_t cd_k = 150;
  double edge_threshold = 0.09;
  double markov_time = 2.0;
  std::size_t cooc_distance = 1;
  std::size_t mask_size = 100;
  std::size_t max_iter = 100;
  std::size_t kmeans_restarts = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

// K-means with K = n_classes over all tokens, Hungarian-matched mIoU.
double kmeans_seg_miou(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt,
                       const SegParams& params);

struct CbfeOutput {
  std::vector<LabelMap> cluster_maps;
  ClusterPrecision precision;
  ForegroundMap theta;
  std::vector<BinaryMask> masks;
};

// K-means with cbfe_k clusters, precision against the hints, theta at the threshold.
CbfeOutput run_cbfe(const std::vector<FeatureGrid>& features, const std::vector<BinaryMask>& hints,
                    const SegParams& params);

// Per-token labels from K-means on foreground tokens only; background tokens
// get kUnassigned.
std::vector<LabelMap> cluster_foreground(const std::vector<FeatureGrid>& features,
                                         const std::vector<BinaryMask>& fg, std::size_t k, const SegParams& params);

// Foreground K-means with K = n_classes - 1, background from the masks.
double cbfe_seg_miou(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt,
                     const std::vector<BinaryMask>& fg, const SegParams& params);

struct CdOutput {
  std::vector<LabelMap> cluster_maps;
  CoocGraph graph;  // after filtering
  CommunityResult communities;
  std::vector<LabelMap> segmentation;  // communities 0..M-1, background = M
  MatchedMiou miou;
};

// Foreground overclustering, co-occurrence graph, community detection with
// exactly n_classes - 1 communities, merge and Hungarian-matched mIoU.
CdOutput run_community_seg(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt,
                           const std::vector<BinaryMask>& fg, const SegParams& params);

struct Ladder {
  double raw = 0.0;      // K-means on raw encoder features
  double trained = 0.0;  // K-means on trained features
  double cbfe = 0.0;     // + foreground extraction
  double cd = 0.0;       // + community detection
  double cbfe_jaccard = 0.0;
  double hint_jaccard = 0.0;
  std::vector<double> train_losses;
};

// Trains a fresh model on `data` and scores each stage, averaging every stage
// over n_eval_seeds K-means seeds (params.seed, params.seed + 1, ...). The raw
// stage uses the untrained teacher encoder.
Ladder run_ladder(const EvalData& data, const TrainConfig& cfg, const SegParams& params, std::size_t n_eval_seeds);

}  // namespace leopart
