#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "leopart/crop_geometry.hpp"
#include "leopart/grid.hpp"
#include "leopart/model.hpp"
#include "leopart/sinkhorn.hpp"

namespace leopart {

// Which tokens of a crop intersection carry loss weight.
enum class FgMasking { kAll, kFg, kBg };

struct LossConfig {
  double temperature = 0.1;
  std::size_t align_size = 7;
  FgMasking masking = FgMasking::kFg;
  // Average over cells with nonzero mask weight; otherwise over all cells.
  bool mean_over_masked = true;
  bool encoder_trainable = true;
  SinkhornParams sinkhorn;
};

template <typename T>
struct PairLoss {
  T loss = T(0);
  T mask_weight = T(0);
  bool contributed = false;
  Grid<T> grad;  // d loss / d pred, same shape as pred
};

// Resamples a crop's binary foreground mask onto the intersection box at
// size x size, rounds at 0.5 and applies the masking mode.
BinaryMask intersection_mask(const BinaryMask& crop_fg, const CropBox& box, std::size_t size, FgMasking masking);

// Cross-entropy between the temperature softmax of the aligned prediction
// logits (K x h x w) and the aligned target distribution, weighted per cell
// by `mask` (size x size; nullptr = all ones).
template <typename T>
PairLoss<T> pair_loss(const Grid<T>& pred, const Grid<T>& target, const CropBox& box_pred, const CropBox& box_target,
                      const BinaryMask* mask, const LossConfig& cfg, bool want_grad = true);

template <typename T>
struct CropView {
  CropBox box;
  Grid<T> tokens;                 // raw tokens of the crop (R x h x w)
  std::optional<BinaryMask> fg;  // crop-resolution foreground hint; required for global crops
};

template <typename T>
struct ImageViews {
  std::vector<CropView<T>> views;  // globals first
  BoxMatrix boxes;
  std::size_t n_global = 0;
};

template <typename T>
struct LossResult {
  T loss = T(0);
  std::size_t n_pairs = 0;          // contributing ordered (predictor, target) pairs
  std::size_t n_candidate_pairs = 0;
  std::size_t n_empty = 0;          // pairs whose crops do not overlap
  std::size_t n_all_masked = 0;     // pairs whose intersection has no mask weight
  ModelParams<T> grads;
  Mat<T> teacher_features;          // unit features of every global crop token, batch order
  std::vector<std::string> warnings;
};

// Swapped-prediction loss over a batch. The teacher (no gradient) yields
// Sinkhorn targets for each global crop, jointly over all global-crop tokens of
// the batch plus the queue once it is ready; the student predicts them from
// every other crop. The loss is the mean over contributing pairs.
template <typename T>
LossResult<T> total_loss(const std::vector<ImageViews<T>>& batch, const ModelParams<T>& student,
                         const ModelParams<T>& teacher, const FeatureQueue* queue, const LossConfig& cfg);

}  // namespace leopart
