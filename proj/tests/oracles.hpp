#pragma once

// Slow reference implementations used as independent oracles by the unit
// tests and the acceptance binary. Each one follows the textbook definition
// directly and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "leopart/crop_geometry.hpp"
#include "leopart/grid.hpp"
#include "leopart/matrix.hpp"
#include "leopart/rng.hpp"
#include "leopart/segmentation_metrics.hpp"

namespace oracle {

using leopart::BinaryMask;
using leopart::ClassMap;
using leopart::LabelMap;

// Bilinear sampling written as a sum over every source cell with a tent
// kernel: weight = max(0, 1 - |sy - i|) * max(0, 1 - |sx - j|).
inline leopart::Grid<double> bilinear(const leopart::Grid<double>& src, const leopart::CropBox& box, std::size_t out_h,
                                      std::size_t out_w) {
  leopart::Grid<double> out(src.channels, out_h, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const double ny = box.y0 + (static_cast<double>(r) + 0.5) / static_cast<double>(out_h) * box.height();
    const double sy = std::clamp(ny * static_cast<double>(src.height) - 0.5, 0.0, static_cast<double>(src.height - 1));
    for (std::size_t c = 0; c < out_w; ++c) {
      const double nx = box.x0 + (static_cast<double>(c) + 0.5) / static_cast<double>(out_w) * box.width();
      const double sx = std::clamp(nx * static_cast<double>(src.width) - 0.5, 0.0, static_cast<double>(src.width - 1));
      for (std::size_t ch = 0; ch < src.channels; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < src.height; ++i) {
          const double wy = std::max(0.0, 1.0 - std::abs(sy - static_cast<double>(i)));
          if (wy == 0.0) continue;
          for (std::size_t j = 0; j < src.width; ++j) {
            const double wx = std::max(0.0, 1.0 - std::abs(sx - static_cast<double>(j)));
            acc += wy * wx * src.at(ch, i, j);
          }
        }
        out.at(ch, r, c) = acc;
      }
    }
  }
  return out;
}

// Exhaustive assignment: the first permutation in lexicographic order that
// attains the minimum total cost.
inline std::pair<std::vector<std::size_t>, double> brute_assignment(const leopart::MatD& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, best_cost};
}

// Per-class IoU by direct pixel counting over all images; NaN for classes
// absent from gt. Pixels with gt == ignore are skipped.
inline std::vector<double> class_iou(const std::vector<LabelMap>& pred, const std::vector<ClassMap>& gt,
                                     std::size_t n_classes, std::uint8_t ignore = leopart::kIgnoreLabel) {
  std::vector<double> iou(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::uint64_t inter = 0, uni = 0, in_gt = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      for (std::size_t y = 0; y < gt[i].height; ++y) {
        for (std::size_t x = 0; x < gt[i].width; ++x) {
          const auto g = gt[i].at(y, x);
          if (g == ignore) continue;
          const bool p_c = pred[i].at(y, x) == c;
          const bool g_c = g == c;
          inter += p_c && g_c;
          uni += p_c || g_c;
          in_gt += g_c;
        }
      }
    }
    iou[c] = in_gt ? static_cast<double>(inter) / static_cast<double>(uni) : std::nan("");
  }
  return iou;
}

inline double mean_present(const std::vector<double>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    s += x;
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

inline std::pair<std::uint64_t, std::uint64_t> intersection_union(const std::vector<BinaryMask>& a,
                                                                  const std::vector<BinaryMask>& b) {
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t p = 0; p < a[i].data.size(); ++p) {
      inter += a[i].data[p] && b[i].data[p];
      uni += a[i].data[p] || b[i].data[p];
    }
  }
  return {inter, uni};
}

inline double jaccard(const std::vector<BinaryMask>& a, const std::vector<BinaryMask>& b) {
  const auto [i, u] = intersection_union(a, b);
  return u ? static_cast<double>(i) / static_cast<double>(u) : 1.0;
}

// Boundary = mask minus its 4-neighbour erosion, where cells outside the
// image count as foreground.
inline BinaryMask boundary(const BinaryMask& m) {
  BinaryMask out(m.height, m.width);
  const auto get = [&](long y, long x) {
    if (y < 0 || x < 0 || y >= static_cast<long>(m.height) || x >= static_cast<long>(m.width)) return true;
    return m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) != 0;
  };
  for (long y = 0; y < static_cast<long>(m.height); ++y) {
    for (long x = 0; x < static_cast<long>(m.width); ++x) {
      const bool eroded = get(y, x) && get(y - 1, x) && get(y + 1, x) && get(y, x - 1) && get(y, x + 1);
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = get(y, x) && !eroded;
    }
  }
  return out;
}

// Boundary F-measure: window search of radius ceil(tol) around every boundary cell.
inline double boundary_f1(const BinaryMask& pred, const BinaryMask& gt, double tol) {
  const BinaryMask bp = boundary(pred), bg = boundary(gt);
  const auto count = [](const BinaryMask& m) { return std::count(m.data.begin(), m.data.end(), 1); };
  const auto np = count(bp), ng = count(bg);
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const long r = static_cast<long>(std::ceil(tol));
  const auto hits = [&](const BinaryMask& a, const BinaryMask& b) {
    long h = 0;
    for (long y = 0; y < static_cast<long>(a.height); ++y) {
      for (long x = 0; x < static_cast<long>(a.width); ++x) {
        if (!a.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x))) continue;
        bool found = false;
        for (long dy = -r; dy <= r && !found; ++dy) {
          for (long dx = -r; dx <= r && !found; ++dx) {
            const long yy = y + dy, xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<long>(b.height) || xx >= static_cast<long>(b.width)) continue;
            if (static_cast<double>(dy * dy + dx * dx) > tol * tol) continue;
            found = b.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) != 0;
          }
        }
        h += found;
      }
    }
    return h;
  };
  const double p = static_cast<double>(hits(bp, bg)) / static_cast<double>(np);
  const double rc = static_cast<double>(hits(bg, bp)) / static_cast<double>(ng);
  return p + rc > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
}

// Cluster precision counted one cluster at a time.
inline std::pair<std::uint64_t, std::uint64_t> cluster_counts(const std::vector<LabelMap>& maps,
                                                              const std::vector<BinaryMask>& hints,
                                                              std::uint16_t cluster) {
  std::uint64_t inside = 0, total = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    for (std::size_t p = 0; p < maps[i].data.size(); ++p) {
      if (maps[i].data[p] != cluster) continue;
      ++total;
      inside += hints[i].data[p] != 0;
    }
  }
  return {inside, total};
}

inline BinaryMask random_mask(leopart::Rng& rng, std::size_t h, std::size_t w, double p) {
  BinaryMask m(h, w);
  for (auto& v : m.data) v = rng.uniform() < p;
  return m;
}

// Blob-like mask: union of a few random rectangles.
inline BinaryMask random_blobs(leopart::Rng& rng, std::size_t h, std::size_t w, std::size_t n) {
  BinaryMask m(h, w);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t y0 = rng.below(h), x0 = rng.below(w);
    const std::size_t y1 = y0 + 1 + rng.below(h - y0), x1 = x0 + 1 + rng.below(w - x0);
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) m.at(y, x) = 1;
    }
  }
  return m;
}

template <typename T>
leopart::Plane<T> random_labels(leopart::Rng& rng, std::size_t h, std::size_t w, std::size_t n) {
  leopart::Plane<T> m(h, w);
  for (auto& v : m.data) v = static_cast<T>(rng.below(n));
  return m;
}

}  // namespace oracle
