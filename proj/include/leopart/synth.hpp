#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "leopart/attention_mask.hpp"
#include "leopart/grid.hpp"
#include "leopart/matrix.hpp"
#include "leopart/segmentation_metrics.hpp"
#include "leopart/tensor_io.hpp"

namespace leopart {

struct SynthSpec {
  std::size_t n_images = 200;
  std::size_t height = 10;
  std::size_t width = 10;
  std::size_t raw_dim = 32;
  std::size_t n_objects = 3;  // object classes
  std::size_t parts_per_object = 3;
  std::size_t n_bg_parts = 4;
  double min_angle_deg = 60.0;  // pairwise separation of part prototypes
  double noise_sigma = 0.1;
  std::size_t objects_min = 1;
  std::size_t objects_max = 3;
  std::size_t object_side_min = 3;
  std::size_t object_side_max = 5;
  double flip_fraction = 0.1;  // attention cells flipped
  std::size_t n_heads = 3;
  // Per-image appearance offset living in the trailing channels, orthogonal
  // to every prototype (a global colour cast, say). 0 disables it.
  std::size_t appearance_dims = 8;
  double appearance_sigma = 0.5;
  std::uint64_t seed = 0;
  std::size_t retry_budget = 1000;

  std::size_t n_parts() const { return n_bg_parts + n_objects * parts_per_object; }
  std::size_t n_classes() const { return n_objects + 1; }  // background is class 0

  // Throws ValidationError naming the offending field.
  void validate() const;
};

struct PlacedObject {
  std::size_t cls = 0;  // 0-based object class
  std::size_t y0 = 0, x0 = 0, y1 = 0, x1 = 0;  // half-open token box
  bool horizontal_strips = false;              // strips stacked top to bottom
};

struct SynthImage {
  FeatureGrid tokens;        // raw_dim x H x W, unit rows
  AttentionStack attention;  // n_heads x H x W
  ClassMap objects;          // 0 = background, c + 1 = object class c
  ClassMap parts;            // planted part id per token
  BinaryMask fg;             // objects > 0
  BinaryMask flipped_hint;   // the corrupted indicator the heads are built from
  std::size_t bg_split_y = 0, bg_split_x = 0;
  std::vector<double> appearance;  // appearance_dims entries
  std::vector<PlacedObject> layout;
};

struct SynthDataset {
  SynthSpec spec;
  MatD prototypes;  // n_parts x raw_dim, unit rows; bg parts first, then object c part s at n_bg + c*P + s
  std::vector<SynthImage> images;
  double nearest_prototype_rate = 1.0;  // fraction of tokens whose nearest prototype is their planted part
};

// Part id of part `s` of object class `c`.
inline std::size_t object_part_id(const SynthSpec& spec, std::size_t c, std::size_t s) {
  return spec.n_bg_parts + c * spec.parts_per_object + s;
}

// Deterministic in spec.seed. Throws SamplingError if the prototypes cannot
// be separated within the retry budget, and NumericError if fewer than 99% of
// tokens lie nearest their own prototype while sigma <= 0.1 and the angle >= 60.
SynthDataset generate(const SynthSpec& spec);

// Writes features/, attention/, masks/, parts/, manifest.txt and the oracle
// sidecar oracle.txt under `dir`; returns the manifest.
DatasetManifest write_dataset(const SynthDataset& ds, const std::filesystem::path& dir);

Tensor to_tensor(const FeatureGrid& g);
Tensor to_tensor(const ClassMap& m);
FeatureGrid feature_grid_from(const Tensor& t);
ClassMap class_map_from(const Tensor& t);
LabelMap label_map_from(const Tensor& t);
Tensor to_tensor(const LabelMap& m);

}  // namespace leopart
