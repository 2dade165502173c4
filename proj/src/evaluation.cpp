#include "leopart/evaluation.hpp"

#include <cmath>
#include <limits>

#include "leopart/crop_geometry.hpp"
#include "leopart/error.hpp"
#include "leopart/optimizer.hpp"

namespace leopart {

MatD stack_tokens(const std::vector<FeatureGrid>& features) {
  if (features.empty()) throw ValidationError("no feature grids");
  Eigen::Index rows = 0;
  const std::size_t dim = features.front().channels;
  for (const auto& f : features) {
    if (f.channels != dim) throw ValidationError("feature grids disagree on dimension");
    rows += static_cast<Eigen::Index>(f.plane());
  }
  MatD out(rows, static_cast<Eigen::Index>(dim));
  Eigen::Index r0 = 0;
  for (const auto& f : features) {
    out.middleRows(r0, static_cast<Eigen::Index>(f.plane())) = grid_to_rows(f).cast<double>();
    r0 += static_cast<Eigen::Index>(f.plane());
  }
  return out;
}

std::vector<LabelMap> labels_to_maps(const std::vector<std::uint32_t>& labels,
                                     const std::vector<FeatureGrid>& features) {
  std::vector<LabelMap> maps;
  maps.reserve(features.size());
  std::size_t k = 0;
  for (const auto& f : features) {
    LabelMap m(f.height, f.width);
    for (auto& v : m.data) v = static_cast<std::uint16_t>(labels.at(k++));
    maps.push_back(std::move(m));
  }
  if (k != labels.size()) throw ValidationError("label count does not match token count");
  return maps;
}

FeatureGrid upsample_bilinear(const FeatureGrid& g, std::size_t out_h, std::size_t out_w) {
  if (g.height == out_h && g.width == out_w) return g;
  return align(g, CropBox::full(), out_h, out_w);
}

std::vector<LabelMap> upsampled_cluster_maps(const std::vector<FeatureGrid>& features, const MatD& centroids,
                                             std::size_t out_h, std::size_t out_w, std::size_t threads) {
  std::vector<LabelMap> maps;
  maps.reserve(features.size());
  for (const auto& f : features) {
    const FeatureGrid up = upsample_bilinear(f, out_h, out_w);
    const MatD rows = grid_to_rows(up).cast<double>();
    const auto labels = assign_to_centroids(rows, centroids, threads);
    LabelMap m(out_h, out_w);
    for (std::size_t i = 0; i < labels.size(); ++i) m.data[i] = static_cast<std::uint16_t>(labels[i]);
    maps.push_back(std::move(m));
  }
  return maps;
}

std::vector<ClassMap> resize_masks(const std::vector<ClassMap>& masks, std::size_t size) {
  if (size == 0) return masks;
  std::vector<ClassMap> out;
  out.reserve(masks.size());
  for (const auto& m : masks) out.push_back(resize_nearest(m, size, size));
  return out;
}

OverclusterReport overcluster_eval(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt,
                                   const OverclusterParams& params) {
  if (features.size() != gt.size()) throw ValidationError("overcluster: feature/mask count mismatch");
  if (params.n_seeds == 0) throw ValidationError("overcluster: n_seeds must be >= 1");
  const MatD tokens = stack_tokens(features);
  const auto masks = resize_masks(gt, params.mask_size);

  OverclusterReport rep;
  rep.per_class_iou.assign(params.n_classes, 0.0);
  std::vector<std::size_t> class_hits(params.n_classes, 0);
  for (std::size_t s = 0; s < params.n_seeds; ++s) {
    KMeansParams kp;
    kp.k = params.k;
    kp.n_seeds = 1;
    kp.max_iter = params.max_iter;
    kp.seed = params.seed + s;
    kp.threads = params.threads;
    const KMeansResult km = kmeans(tokens, kp);
    const auto maps = labels_to_maps(km.labels, features);
    GreedyMatch gm = greedy_precision_match(maps, masks, params.k, params.n_classes);
    for (auto& w : gm.warnings) rep.warnings.push_back(std::move(w));
    const MatchedMiou mm = hungarian_miou(gm.merged, masks, params.n_classes, params.n_classes);
    rep.per_seed.push_back(mm.result.miou);
    for (std::size_t c = 0; c < params.n_classes; ++c) {
      if (!mm.result.present[c]) continue;
      rep.per_class_iou[c] += mm.result.per_class_iou[c];
      ++class_hits[c];
    }
  }
  for (std::size_t c = 0; c < params.n_classes; ++c) {
    rep.per_class_iou[c] = class_hits[c] ? rep.per_class_iou[c] / static_cast<double>(class_hits[c])
                                         : std::numeric_limits<double>::quiet_NaN();
  }
  double sum = 0.0;
  for (double v : rep.per_seed) sum += v;
  rep.mean = sum / static_cast<double>(rep.per_seed.size());
  double var = 0.0;
  for (double v : rep.per_seed) var += (v - rep.mean) * (v - rep.mean);
  rep.std = std::sqrt(var / static_cast<double>(rep.per_seed.size()));
  return rep;
}

double probe_loss(const LinearProbe& probe, const MatD& x, const std::vector<std::uint8_t>& labels,
                  LinearProbe* grad) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw ValidationError("probe: label count mismatch");
  MatD logits = x * probe.weight.transpose();
  logits.rowwise() += probe.bias.row(0);
  const Eigen::Index n_classes = probe.weight.rows();
  MatD d_logits = MatD::Zero(logits.rows(), logits.cols());
  double loss = 0.0;
  std::size_t used = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto y = labels[static_cast<std::size_t>(r)];
    if (y == kIgnoreLabel) continue;
    if (y >= n_classes) throw ValidationError("probe: label " + std::to_string(y) + " out of range");
    ++used;
    const double mx = logits.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(r).array() - mx).exp();
    const double z = e.sum();
    loss -= logits(r, y) - mx - std::log(z);
    d_logits.row(r) = e / z;
    d_logits(r, y) -= 1.0;
  }
  if (used == 0) throw ValidationError("probe: no labelled tokens");
  const double inv = 1.0 / static_cast<double>(used);
  if (grad) {
    grad->weight = d_logits.transpose() * x * inv;
    grad->bias = d_logits.colwise().sum() * inv;
  }
  return loss * inv;
}

namespace {

std::vector<std::uint8_t> token_labels(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt) {
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const ClassMap m = resize_nearest(gt[i], features[i].height, features[i].width);
    labels.insert(labels.end(), m.data.begin(), m.data.end());
  }
  return labels;
}

std::vector<std::uint32_t> predict(const LinearProbe& probe, const MatD& x) {
  MatD logits = x * probe.weight.transpose();
  logits.rowwise() += probe.bias.row(0);
  std::vector<std::uint32_t> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    out[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(arg);
  }
  return out;
}

}  // namespace

ProbeReport linear_probe(const std::vector<FeatureGrid>& train_features, const std::vector<ClassMap>& train_gt,
                         const std::vector<FeatureGrid>& val_features, const std::vector<ClassMap>& val_gt,
                         const ProbeParams& params) {
  if (train_features.size() != train_gt.size() || val_features.size() != val_gt.size()) {
    throw ValidationError("probe: feature/mask count mismatch");
  }
  if (params.n_classes == 0) throw ValidationError("probe: n_classes must be >= 1");
  const MatD x = stack_tokens(train_features);
  const auto y = token_labels(train_features, train_gt);
  const auto n = static_cast<Eigen::Index>(params.n_classes);

  ProbeReport rep;
  rep.probe.weight = MatD::Zero(n, x.cols());
  rep.probe.bias = MatD::Zero(1, n);
  LinearProbe m{MatD::Zero(n, x.cols()), MatD::Zero(1, n)};
  LinearProbe v = m;
  LinearProbe g;
  for (std::size_t e = 1; e <= params.epochs; ++e) {
    rep.loss_trace.push_back(probe_loss(rep.probe, x, y, &g));
    adam_update(rep.probe.weight, g.weight, m.weight, v.weight, e, params.lr, 0.0);
    adam_update(rep.probe.bias, g.bias, m.bias, v.bias, e, params.lr, 0.0);
  }

  const auto train_pred = predict(rep.probe, x);
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == kIgnoreLabel) continue;
    ++total;
    hit += train_pred[i] == y[i];
  }
  rep.train_accuracy = total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;

  const auto masks = resize_masks(val_gt, params.mask_size);
  std::vector<LabelMap> preds;
  hit = total = 0;
  for (std::size_t i = 0; i < val_features.size(); ++i) {
    const FeatureGrid up = upsample_bilinear(val_features[i], masks[i].height, masks[i].width);
    const auto labels = predict(rep.probe, grid_to_rows(up).cast<double>());
    LabelMap pm(masks[i].height, masks[i].width);
    for (std::size_t p = 0; p < labels.size(); ++p) {
      pm.data[p] = static_cast<std::uint16_t>(labels[p]);
      if (masks[i].data[p] == kIgnoreLabel) continue;
      ++total;
      hit += labels[p] == masks[i].data[p];
    }
    preds.push_back(std::move(pm));
  }
  rep.val_accuracy = total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
  rep.val = miou(preds, masks, params.n_classes);
  return rep;
}

}  // namespace leopart
