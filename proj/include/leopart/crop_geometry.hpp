#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "leopart/grid.hpp"

namespace leopart {

enum class CropKind : std::uint8_t { kGlobal, kLocal };

// Axis-aligned box in normalized [0,1] coordinates of some reference frame
// (the source image for crops, a crop for BoxMatrix entries).
struct CropBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;
  CropKind kind = CropKind::kGlobal;

  static CropBox full() { return {}; }

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool valid() const { return 0.0 <= x0 && x0 < x1 && x1 <= 1.0 && 0.0 <= y0 && y0 < y1 && y1 <= 1.0; }
  bool same_region(const CropBox& o) const { return x0 == o.x0 && y0 == o.y0 && x1 == o.x1 && y1 == o.y1; }
};

// Overlap of two boxes in their shared frame; nullopt when the area is zero.
std::optional<CropBox> intersect(const CropBox& a, const CropBox& b);

// Re-expresses `region` (in the frame of `frame`'s parent) in frame-local coordinates.
CropBox to_local(const CropBox& frame, const CropBox& region);

// Entry (i, j) is the intersection of crops i and j in crop-i-local coordinates.
class BoxMatrix {
 public:
  BoxMatrix() = default;
  explicit BoxMatrix(const std::vector<CropBox>& crops);

  std::size_t size() const { return n_; }
  const std::optional<CropBox>& at(std::size_t i, std::size_t j) const { return boxes_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<std::optional<CropBox>> boxes_;
};

struct CropSpec {
  std::size_t n_global = 2;
  std::size_t n_local = 4;
  std::pair<double, double> global_scale{0.4, 1.0};
  std::pair<double, double> local_scale{0.05, 0.4};
  std::pair<double, double> aspect{3.0 / 4.0, 4.0 / 3.0};
  double min_intersection = 0.01;
  std::size_t retry_budget = 1000;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

struct CropSet {
  std::vector<CropBox> crops;  // globals first, then locals
  BoxMatrix boxes;
};

// Multi-crop sampling. Every pair involving a global crop overlaps by at least
// spec.min_intersection of the image area; local/local pairs are unconstrained.
CropSet sample_crops(const CropSpec& spec, std::uint64_t seed);

// Bilinear taps of one output cell: four source offsets (within a plane) and weights.
struct BilinearTap {
  std::array<std::uint32_t, 4> index{};
  std::array<double, 4> weight{};
};

// Precomputed resampling of an src_h x src_w grid onto the out_h x out_w cell
// centres of `box`. Cell r samples the box at (r + 0.5) / out_h; source
// coordinates follow the same half-pixel convention and clamp at the edges.
class AlignPlan {
 public:
  AlignPlan(const CropBox& box, std::size_t src_h, std::size_t src_w, std::size_t out_h, std::size_t out_w);

  std::size_t src_h() const { return src_h_; }
  std::size_t src_w() const { return src_w_; }
  std::size_t out_h() const { return out_h_; }
  std::size_t out_w() const { return out_w_; }
  const std::vector<BilinearTap>& taps() const { return taps_; }

  template <typename T>
  Grid<T> forward(const Grid<T>& src) const;

  // Adjoint of forward: scatters each output gradient onto its taps.
  template <typename T>
  Grid<T> backward(const Grid<T>& grad_out) const;

 private:
  std::size_t src_h_, src_w_, out_h_, out_w_;
  std::vector<BilinearTap> taps_;
};

template <typename T>
Grid<T> AlignPlan::forward(const Grid<T>& src) const {
  Grid<T> out(src.channels, out_h_, out_w_);
  const std::size_t n_out = out_h_ * out_w_;
  for (std::size_t c = 0; c < src.channels; ++c) {
    const T* s = src.data.data() + c * src.plane();
    T* o = out.data.data() + c * n_out;
    for (std::size_t k = 0; k < n_out; ++k) {
      const auto& t = taps_[k];
      o[k] = static_cast<T>(t.weight[0]) * s[t.index[0]] + static_cast<T>(t.weight[1]) * s[t.index[1]] +
             static_cast<T>(t.weight[2]) * s[t.index[2]] + static_cast<T>(t.weight[3]) * s[t.index[3]];
    }
  }
  return out;
}

template <typename T>
Grid<T> AlignPlan::backward(const Grid<T>& grad_out) const {
  Grid<T> g(grad_out.channels, src_h_, src_w_);
  const std::size_t n_out = out_h_ * out_w_;
  for (std::size_t c = 0; c < grad_out.channels; ++c) {
    const T* go = grad_out.data.data() + c * n_out;
    T* gs = g.data.data() + c * g.plane();
    for (std::size_t k = 0; k < n_out; ++k) {
      const auto& t = taps_[k];
      for (int q = 0; q < 4; ++q) gs[t.index[q]] += static_cast<T>(t.weight[q]) * go[k];
    }
  }
  return g;
}

template <typename T>
Grid<T> align(const Grid<T>& src, const CropBox& box, std::size_t out_h, std::size_t out_w) {
  return AlignPlan(box, src.height, src.width, out_h, out_w).forward(src);
}

template <typename T>
Grid<T> align_backward(const Grid<T>& grad_out, const CropBox& box, std::size_t src_h, std::size_t src_w) {
  return AlignPlan(box, src_h, src_w, grad_out.height, grad_out.width).backward(grad_out);
}

}  // namespace leopart
