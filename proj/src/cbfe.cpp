#include "leopart/cbfe.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "leopart/error.hpp"
#include "leopart/segmentation_metrics.hpp"

namespace leopart {

ClusterPrecision cluster_precision(const std::vector<LabelMap>& cluster_maps, const std::vector<BinaryMask>& hints,
                                   std::size_t n_clusters) {
  if (cluster_maps.size() != hints.size()) throw ValidationError("cluster precision: map/mask count mismatch");
  ClusterPrecision out;
  out.inside.assign(n_clusters, 0);
  out.total.assign(n_clusters, 0);
  for (std::size_t i = 0; i < cluster_maps.size(); ++i) {
    const auto& m = cluster_maps[i];
    if (!(m.height == hints[i].height && m.width == hints[i].width)) {
      throw ValidationError("cluster precision: resolution mismatch in image " + std::to_string(i));
    }
    for (std::size_t p = 0; p < m.size(); ++p) {
      const auto k = m.data[p];
      if (k == kUnassigned) continue;
      if (k >= n_clusters) throw ValidationError("cluster precision: id " + std::to_string(k) + " >= K");
      ++out.total[k];
      out.inside[k] += hints[i].data[p] ? 1 : 0;
    }
  }
  out.precision.assign(n_clusters, 0.0);
  for (std::size_t k = 0; k < n_clusters; ++k) {
    if (out.total[k] == 0) {
      out.warnings.push_back("cluster " + std::to_string(k) + " does not occur; precision set to 0");
      continue;
    }
    out.precision[k] = static_cast<double>(out.inside[k]) / static_cast<double>(out.total[k]);
  }
  return out;
}

std::size_t ForegroundMap::n_foreground() const {
  std::size_t n = 0;
  for (bool t : theta) n += t;
  return n;
}

ForegroundMap build_theta(const std::vector<double>& precision, double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("cbfe: threshold must lie in [0,1]");
  ForegroundMap fm;
  fm.threshold = c;
  fm.precision = precision;
  fm.theta.resize(precision.size());
  for (std::size_t k = 0; k < precision.size(); ++k) fm.theta[k] = precision[k] >= c;
  return fm;
}

BinaryMask extract_foreground(const LabelMap& cluster_map, const ForegroundMap& fm, std::vector<std::string>* warnings) {
  BinaryMask out(cluster_map.height, cluster_map.width, 0);
  std::set<std::uint16_t> unseen;
  for (std::size_t p = 0; p < cluster_map.size(); ++p) {
    const auto k = cluster_map.data[p];
    if (k < fm.size()) {
      out.data[p] = fm.theta[k] ? 1 : 0;
    } else {
      unseen.insert(k);
    }
  }
  if (warnings) {
    for (auto k : unseen) warnings->push_back("cluster id " + std::to_string(k) + " not covered by theta; treated as bg");
  }
  return out;
}

namespace {

std::pair<std::uint64_t, std::uint64_t> inter_union(const BinaryMask& a, const BinaryMask& b) {
  if (!(a.height == b.height && a.width == b.width)) throw ValidationError("jaccard: shape mismatch");
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    const bool x = a.data[p] != 0, y = b.data[p] != 0;
    inter += x && y;
    uni += x || y;
  }
  return {inter, uni};
}

}  // namespace

double jaccard(const BinaryMask& pred, const BinaryMask& gt) {
  const auto [inter, uni] = inter_union(pred, gt);
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt) {
  if (pred.size() != gt.size()) throw ValidationError("jaccard: mask count mismatch");
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto [a, b] = inter_union(pred[i], gt[i]);
    inter += a;
    uni += b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::pair<std::size_t, std::size_t>> mask_boundary(const BinaryMask& m) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t y = 0; y < m.height; ++y) {
    for (std::size_t x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      const bool edge = (y > 0 && !m.at(y - 1, x)) || (y + 1 < m.height && !m.at(y + 1, x)) ||
                        (x > 0 && !m.at(y, x - 1)) || (x + 1 < m.width && !m.at(y, x + 1));
      if (edge) out.emplace_back(y, x);
    }
  }
  return out;
}

double default_boundary_tolerance(std::size_t height, std::size_t width) {
  return 0.0075 * std::hypot(static_cast<double>(height), static_cast<double>(width));
}

namespace {

// Fraction of points in `a` within `tol` of some point in `b`.
double matched_fraction(const std::vector<std::pair<std::size_t, std::size_t>>& a,
                        const std::vector<std::pair<std::size_t, std::size_t>>& b, double tol) {
  const double tol2 = tol * tol;
  std::size_t hit = 0;
  for (const auto& [ay, ax] : a) {
    for (const auto& [by, bx] : b) {
      const double dy = static_cast<double>(ay) - static_cast<double>(by);
      const double dx = static_cast<double>(ax) - static_cast<double>(bx);
      if (dy * dy + dx * dx <= tol2) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

}  // namespace

double boundary_f1(const BinaryMask& pred, const BinaryMask& gt, double tol_px) {
  if (!(pred.height == gt.height && pred.width == gt.width)) throw ValidationError("boundary F1: shape mismatch");
  if (tol_px < 0.0) tol_px = default_boundary_tolerance(gt.height, gt.width);
  const auto bp = mask_boundary(pred);
  const auto bg = mask_boundary(gt);
  if (bp.empty() && bg.empty()) return 1.0;
  if (bp.empty() || bg.empty()) return 0.0;
  const double precision = matched_fraction(bp, bg, tol_px);
  const double recall = matched_fraction(bg, bp, tol_px);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double select_threshold(const std::vector<double>& precision, const std::vector<LabelMap>& cluster_maps,
                        const std::vector<BinaryMask>& targets, const std::vector<double>& candidates) {
  if (candidates.empty()) throw ValidationError("cbfe: no threshold candidates");
  double best_c = candidates.front(), best_j = -1.0;
  for (double c : candidates) {
    const ForegroundMap fm = build_theta(precision, c);
    std::vector<BinaryMask> masks;
    masks.reserve(cluster_maps.size());
    for (const auto& m : cluster_maps) masks.push_back(extract_foreground(m, fm));
    const double j = jaccard(masks, targets);
    if (j > best_j || (j == best_j && c < best_c)) {
      best_j = j;
      best_c = c;
    }
  }
  return best_c;
}

std::string format_foreground_map(const ForegroundMap& fm) {
  std::ostringstream os;
  os.precision(17);
  os << "threshold " << fm.threshold << '\n';
  for (std::size_t k = 0; k < fm.size(); ++k) {
    os << k << ' ' << fm.precision[k] << ' ' << (fm.theta[k] ? "fg" : "bg") << '\n';
  }
  return os.str();
}

ForegroundMap parse_foreground_map(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  ForegroundMap fm;
  bool have_threshold = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    const auto where = "foreground map line " + std::to_string(line_no);
    if (!have_threshold) {
      std::string key;
      if (!(ls >> key >> fm.threshold) || key != "threshold") throw FormatError(where + ": expected 'threshold c'");
      have_threshold = true;
      continue;
    }
    std::size_t id = 0;
    double p = 0.0;
    std::string label;
    if (!(ls >> id >> p >> label) || (label != "fg" && label != "bg")) {
      throw FormatError(where + ": expected 'cluster_id precision fg|bg'");
    }
    if (id != fm.size()) throw FormatError(where + ": cluster ids must be consecutive from 0");
    fm.precision.push_back(p);
    fm.theta.push_back(label == "fg");
  }
  if (!have_threshold) throw FormatError("foreground map: missing threshold line");
  return fm;
}

void write_foreground_map(const ForegroundMap& fm, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << format_foreground_map(fm);
}

ForegroundMap read_foreground_map(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_foreground_map(ss.str());
}

}  // namespace leopart
