#include "leopart/crop_geometry.hpp"

#include <algorithm>
#include <string>

#include "leopart/error.hpp"
#include "leopart/rng.hpp"

namespace leopart {

std::optional<CropBox> intersect(const CropBox& a, const CropBox& b) {
  CropBox r;
  r.x0 = std::max(a.x0, b.x0);
  r.y0 = std::max(a.y0, b.y0);
  r.x1 = std::min(a.x1, b.x1);
  r.y1 = std::min(a.y1, b.y1);
  r.kind = a.kind;
  if (r.x1 <= r.x0 || r.y1 <= r.y0) return std::nullopt;
  return r;
}

CropBox to_local(const CropBox& frame, const CropBox& region) {
  CropBox r;
  r.x0 = (region.x0 - frame.x0) / frame.width();
  r.x1 = (region.x1 - frame.x0) / frame.width();
  r.y0 = (region.y0 - frame.y0) / frame.height();
  r.y1 = (region.y1 - frame.y0) / frame.height();
  // Rounding can push an edge a hair outside the unit square.
  r.x0 = std::clamp(r.x0, 0.0, 1.0);
  r.y0 = std::clamp(r.y0, 0.0, 1.0);
  r.x1 = std::clamp(r.x1, 0.0, 1.0);
  r.y1 = std::clamp(r.y1, 0.0, 1.0);
  r.kind = region.kind;
  return r;
}

BoxMatrix::BoxMatrix(const std::vector<CropBox>& crops) : n_(crops.size()), boxes_(n_ * n_) {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (i == j) {
        boxes_[i * n_ + j] = CropBox::full();
        continue;
      }
      if (auto inter = intersect(crops[i], crops[j])) boxes_[i * n_ + j] = to_local(crops[i], *inter);
    }
  }
}

void CropSpec::validate() const {
  const auto check_range = [](const std::pair<double, double>& r, const char* name, double upper) {
    if (!(0.0 < r.first && r.first <= r.second && r.second <= upper)) {
      throw ValidationError(std::string("crop spec: invalid range for ") + name);
    }
  };
  if (n_global == 0) throw ValidationError("crop spec: n_global must be >= 1");
  check_range(global_scale, "global_scale", 1.0);
  check_range(local_scale, "local_scale", 1.0);
  // Aspect ratios are width/height and may exceed 1.
  check_range(aspect, "aspect", 1e9);
  if (!(0.0 < min_intersection && min_intersection < 1.0)) {
    throw ValidationError("crop spec: min_intersection must lie in (0,1)");
  }
  if (retry_budget == 0) throw ValidationError("crop spec: retry_budget must be positive");
}

namespace {

std::optional<CropBox> draw_box(Rng& rng, std::pair<double, double> scale, std::pair<double, double> aspect,
                                CropKind kind) {
  const double area = rng.uniform(scale.first, scale.second);
  const double log_ratio = rng.uniform(std::log(aspect.first), std::log(aspect.second));
  const double ratio = std::exp(log_ratio);
  const double w = std::sqrt(area * ratio);
  const double h = std::sqrt(area / ratio);
  if (w > 1.0 || h > 1.0) return std::nullopt;
  CropBox b;
  b.x0 = rng.uniform(0.0, 1.0 - w);
  b.y0 = rng.uniform(0.0, 1.0 - h);
  b.x1 = std::min(1.0, b.x0 + w);
  b.y1 = std::min(1.0, b.y0 + h);
  b.kind = kind;
  if (!b.valid()) return std::nullopt;
  return b;
}

}  // namespace

CropSet sample_crops(const CropSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<CropBox> crops;
  crops.reserve(spec.n_global + spec.n_local);

  const auto overlaps_globals = [&](const CropBox& b) {
    for (std::size_t g = 0; g < std::min(crops.size(), spec.n_global); ++g) {
      const auto inter = intersect(crops[g], b);
      if (!inter || inter->area() < spec.min_intersection) return false;
    }
    return true;
  };

  for (std::size_t i = 0; i < spec.n_global + spec.n_local; ++i) {
    const bool global = i < spec.n_global;
    const auto kind = global ? CropKind::kGlobal : CropKind::kLocal;
    std::optional<CropBox> accepted;
    for (std::size_t attempt = 0; attempt < spec.retry_budget && !accepted; ++attempt) {
      auto b = draw_box(rng, global ? spec.global_scale : spec.local_scale, spec.aspect, kind);
      if (b && overlaps_globals(*b)) accepted = b;
    }
    if (!accepted) {
      throw SamplingError("crop sampling: retry budget of " + std::to_string(spec.retry_budget) +
                          " exhausted for crop " + std::to_string(i) +
                          "; loosen min_intersection or widen the scale ranges");
    }
    crops.push_back(*accepted);
  }
  CropSet out;
  out.boxes = BoxMatrix(crops);
  out.crops = std::move(crops);
  return out;
}

AlignPlan::AlignPlan(const CropBox& box, std::size_t src_h, std::size_t src_w, std::size_t out_h,
                     std::size_t out_w)
    : src_h_(src_h), src_w_(src_w), out_h_(out_h), out_w_(out_w) {
  if (src_h == 0 || src_w == 0 || out_h == 0 || out_w == 0) {
    throw ValidationError("align: grid dimensions must be >= 1");
  }
  if (!box.valid()) throw ValidationError("align: invalid box");

  struct Axis {
    std::size_t lo, hi;
    double frac;
  };
  const auto axis = [](double b0, double b1, std::size_t r, std::size_t out, std::size_t src) {
    const double pos = b0 + (static_cast<double>(r) + 0.5) / static_cast<double>(out) * (b1 - b0);
    double s = pos * static_cast<double>(src) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::size_t>(std::floor(s));
    const std::size_t hi = std::min(lo + 1, src - 1);
    return Axis{lo, hi, s - static_cast<double>(lo)};
  };

  taps_.resize(out_h * out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const Axis ay = axis(box.y0, box.y1, r, out_h, src_h);
    for (std::size_t c = 0; c < out_w; ++c) {
      const Axis ax = axis(box.x0, box.x1, c, out_w, src_w);
      auto& t = taps_[r * out_w + c];
      t.index = {static_cast<std::uint32_t>(ay.lo * src_w + ax.lo), static_cast<std::uint32_t>(ay.lo * src_w + ax.hi),
                 static_cast<std::uint32_t>(ay.hi * src_w + ax.lo), static_cast<std::uint32_t>(ay.hi * src_w + ax.hi)};
      t.weight = {(1.0 - ay.frac) * (1.0 - ax.frac), (1.0 - ay.frac) * ax.frac, ay.frac * (1.0 - ax.frac),
                  ay.frac * ax.frac};
    }
  }
}

}  // namespace leopart
