#include "leopart/segmentation_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "leopart/error.hpp"

namespace leopart {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}) + ignored_;
}

void ConfusionMatrix::add(const LabelMap& pred, const ClassMap& gt, std::uint8_t ignore_label) {
  if (!(pred.height == gt.height && pred.width == gt.width)) throw ValidationError("confusion: shape mismatch");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto g = gt.data[i];
    if (g == ignore_label) {
      ++ignored_;
      continue;
    }
    const auto p = pred.data[i];
    if (p >= n_pred_ || g >= n_gt_) {
      throw ValidationError("confusion: label out of range (pred " + std::to_string(p) + ", gt " +
                            std::to_string(g) + ")");
    }
    ++counts_[p * n_gt_ + g];
  }
}

MiouResult miou_from_confusion(const ConfusionMatrix& cm) {
  const std::size_t n = cm.n_gt();
  MiouResult r;
  r.per_class_iou.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.present.assign(n, false);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::uint64_t gt_total = 0, pred_total = 0;
    for (std::size_t p = 0; p < cm.n_pred(); ++p) gt_total += cm.at(p, c);
    if (c < cm.n_pred()) {
      for (std::size_t g = 0; g < n; ++g) pred_total += cm.at(c, g);
    }
    if (gt_total == 0) continue;
    const std::uint64_t inter = c < cm.n_pred() ? cm.at(c, c) : 0;
    const std::uint64_t uni = gt_total + pred_total - inter;
    r.per_class_iou[c] = static_cast<double>(inter) / static_cast<double>(uni);
    r.present[c] = true;
    sum += r.per_class_iou[c];
    ++count;
  }
  r.miou = count ? sum / static_cast<double>(count) : 0.0;
  return r;
}

namespace {

LabelMap to_gt_shape(const LabelMap& pred, const ClassMap& gt) {
  if (pred.height == gt.height && pred.width == gt.width) return pred;
  return resize_nearest(pred, gt.height, gt.width);
}

}  // namespace

MiouResult miou(const std::vector<LabelMap>& pred, const std::vector<ClassMap>& gt, std::size_t n_classes,
                std::uint8_t ignore_label) {
  if (pred.size() != gt.size()) throw ValidationError("miou: map count mismatch");
  ConfusionMatrix cm(n_classes, n_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) cm.add(to_gt_shape(pred[i], gt[i]), gt[i], ignore_label);
  return miou_from_confusion(cm);
}

namespace {

// O(n^3) shortest augmenting path solver; returns row -> column and the cost.
std::pair<std::vector<std::size_t>, double> solve_assignment(const MatD& a) {
  const auto n = static_cast<std::size_t>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    row_to_col[p[j] - 1] = j - 1;
    total += a(static_cast<Eigen::Index>(p[j] - 1), static_cast<Eigen::Index>(j - 1));
  }
  return {row_to_col, total};
}

MatD drop_row_col(const MatD& a, Eigen::Index r, Eigen::Index c) {
  const Eigen::Index n = a.rows();
  MatD out(n - 1, n - 1);
  for (Eigen::Index i = 0, oi = 0; i < n; ++i) {
    if (i == r) continue;
    for (Eigen::Index j = 0, oj = 0; j < n; ++j) {
      if (j == c) continue;
      out(oi, oj++) = a(i, j);
    }
    ++oi;
  }
  return out;
}

}  // namespace

std::vector<std::size_t> hungarian(const MatD& cost) {
  if (cost.rows() != cost.cols()) throw ValidationError("hungarian: cost matrix must be square");
  if (!cost.allFinite()) throw ValidationError("hungarian: cost matrix must be finite");
  const auto n = static_cast<std::size_t>(cost.rows());
  if (n == 0) return {};

  // Fix rows one at a time to the smallest column that still admits an
  // optimal completion; this yields the lexicographically smallest optimum.
  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale * static_cast<double>(n);
  std::vector<std::size_t> result(n);
  std::vector<std::size_t> cols(n);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  MatD rest = cost;
  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t m = n - row;
    if (m == 1) {
      result[row] = cols[0];
      break;
    }
    const double best = solve_assignment(rest).second;
    for (std::size_t c = 0; c < m; ++c) {
      const MatD sub = drop_row_col(rest, 0, static_cast<Eigen::Index>(c));
      const double with_c = rest(0, static_cast<Eigen::Index>(c)) + solve_assignment(sub).second;
      if (with_c <= best + tol) {
        result[row] = cols[c];
        cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(c));
        rest = sub;
        break;
      }
    }
  }
  return result;
}

GreedyMatch greedy_precision_match(const std::vector<LabelMap>& cluster_maps, const std::vector<ClassMap>& gt,
                                   std::size_t n_clusters, std::size_t n_classes, std::uint8_t ignore_label) {
  if (cluster_maps.size() != gt.size()) throw ValidationError("greedy match: map count mismatch");
  if (n_clusters < n_classes) throw ValidationError("greedy match: need at least as many clusters as classes");
  ConfusionMatrix cm(n_clusters, n_classes);
  std::vector<LabelMap> resized;
  resized.reserve(cluster_maps.size());
  for (std::size_t i = 0; i < cluster_maps.size(); ++i) {
    resized.push_back(to_gt_shape(cluster_maps[i], gt[i]));
    cm.add(resized.back(), gt[i], ignore_label);
  }
  GreedyMatch out;
  out.cluster_to_class.assign(n_clusters, 0);
  out.precision.assign(n_clusters, 0.0);
  for (std::size_t k = 0; k < n_clusters; ++k) {
    std::uint64_t total = 0, best = 0;
    std::size_t arg = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      total += cm.at(k, c);
      if (cm.at(k, c) > best) {
        best = cm.at(k, c);
        arg = c;
      }
    }
    if (total == 0) {
      out.warnings.push_back("greedy match: cluster " + std::to_string(k) + " has no labelled pixels; assigned class 0");
      continue;
    }
    out.cluster_to_class[k] = static_cast<std::uint8_t>(arg);
    out.precision[k] = static_cast<double>(best) / static_cast<double>(total);
  }
  out.merged.reserve(resized.size());
  for (auto& m : resized) {
    LabelMap merged(m.height, m.width);
    for (std::size_t i = 0; i < m.size(); ++i) merged.data[i] = out.cluster_to_class[m.data[i]];
    out.merged.push_back(std::move(merged));
  }
  return out;
}

MatchedMiou hungarian_miou(const std::vector<LabelMap>& pred, const std::vector<ClassMap>& gt, std::size_t n_pred,
                           std::size_t n_classes, std::uint8_t ignore_label) {
  if (pred.size() != gt.size()) throw ValidationError("hungarian miou: map count mismatch");
  const std::size_t n = std::max(n_pred, n_classes);
  ConfusionMatrix cm(n_pred, n_classes);
  std::vector<LabelMap> resized;
  resized.reserve(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    resized.push_back(to_gt_shape(pred[i], gt[i]));
    cm.add(resized.back(), gt[i], ignore_label);
  }
  MatD cost = MatD::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t p = 0; p < n_pred; ++p) {
    for (std::size_t g = 0; g < n_classes; ++g) {
      cost(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(g)) = -static_cast<double>(cm.at(p, g));
    }
  }
  const auto perm = hungarian(cost);
  MatchedMiou out;
  out.mapping.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_pred));

  // Pred labels matched to padding columns count as a class that never exists
  // in gt: they only hurt the IoU of nothing, so route them to a dummy row.
  ConfusionMatrix relabelled(n, n_classes);
  for (std::size_t i = 0; i < resized.size(); ++i) {
    LabelMap m = resized[i];
    for (auto& v : m.data) v = static_cast<std::uint16_t>(out.mapping[v]);
    relabelled.add(m, gt[i], ignore_label);
  }
  out.result = miou_from_confusion(relabelled);
  return out;
}

}  // namespace leopart
