#include "leopart/pipeline.hpp"

#include "leopart/error.hpp"
#include "leopart/evaluation.hpp"
#include "leopart/kmeans.hpp"

namespace leopart {

EvalData eval_data_from(const SynthDataset& ds, const MaskParams& mask) {
  EvalData d;
  for (const auto& img : ds.images) {
    d.tokens.push_back(img.tokens);
    d.objects.push_back(img.objects);
    d.hints.push_back(attention_to_mask(img.attention, mask));
    d.fg_truth.push_back(img.fg);
  }
  return d;
}

EvalData eval_data_from(const DatasetManifest& m, const MaskParams& mask) {
  EvalData d;
  for (const auto& r : m.records) {
    d.tokens.push_back(feature_grid_from(m.load_features(r)));
    if (r.attention_path) {
      const Tensor a = m.load_attention(r);
      AttentionStack stack(a.dim(0), a.dim(1), a.dim(2));
      const auto v = a.f32();
      std::copy(v.begin(), v.end(), stack.data.begin());
      d.hints.push_back(attention_to_mask(stack, mask));
    }
    if (r.mask_path) {
      d.objects.push_back(class_map_from(m.load_mask(r)));
      BinaryMask fg(d.objects.back().height, d.objects.back().width);
      for (std::size_t p = 0; p < fg.size(); ++p) {
        const auto c = d.objects.back().data[p];
        fg.data[p] = c != 0 && c != kIgnoreLabel;
      }
      d.fg_truth.push_back(std::move(fg));
    }
  }
  if (!d.hints.empty() && d.hints.size() != d.tokens.size()) {
    throw ValidationError("manifest: attention maps must be given for every record or none");
  }
  if (!d.objects.empty() && d.objects.size() != d.tokens.size()) {
    throw ValidationError("manifest: masks must be given for every record or none");
  }
  return d;
}

std::vector<TrainImage> train_images_from(const EvalData& d) {
  std::vector<TrainImage> out;
  out.reserve(d.tokens.size());
  for (std::size_t i = 0; i < d.tokens.size(); ++i) {
    TrainImage t;
    t.tokens = d.tokens[i];
    t.hint = i < d.hints.size() ? d.hints[i] : BinaryMask(d.tokens[i].height, d.tokens[i].width, 1);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<FeatureGrid> encode_all(const std::vector<FeatureGrid>& tokens, const ModelParams<float>& p) {
  std::vector<FeatureGrid> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    const MatF rows = encode(p, grid_to_rows(t));
    out.push_back(rows_to_grid<float>(rows, t.height, t.width));
  }
  return out;
}

namespace {

KMeansParams kmeans_params(std::size_t k, const SegParams& params) {
  KMeansParams kp;
  kp.k = k;
  kp.n_seeds = params.kmeans_restarts;
  kp.max_iter = params.max_iter;
  kp.seed = params.seed;
  kp.threads = params.threads;
  return kp;
}

std::vector<ClassMap> eval_masks(const std::vector<ClassMap>& gt, const SegParams& params) {
  return resize_masks(gt, params.mask_size);
}

}  // namespace

double kmeans_seg_miou(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt,
                       const SegParams& params) {
  const KMeansResult km = kmeans(stack_tokens(features), kmeans_params(params.n_classes, params));
  const auto maps = labels_to_maps(km.labels, features);
  return hungarian_miou(maps, eval_masks(gt, params), params.n_classes, params.n_classes).result.miou;
}

CbfeOutput run_cbfe(const std::vector<FeatureGrid>& features, const std::vector<BinaryMask>& hints,
                    const SegParams& params) {
  if (hints.size() != features.size()) throw ValidationError("cbfe: every image needs a foreground hint");
  CbfeOutput out;
  const KMeansResult km = kmeans(stack_tokens(features), kmeans_params(params.cbfe_k, params));
  out.cluster_maps = labels_to_maps(km.labels, features);
  out.precision = cluster_precision(out.cluster_maps, hints, params.cbfe_k);
  out.theta = build_theta(out.precision.precision, params.cbfe_threshold);
  for (const auto& m : out.cluster_maps) out.masks.push_back(extract_foreground(m, out.theta));
  return out;
}

std::vector<LabelMap> cluster_foreground(const std::vector<FeatureGrid>& features,
                                         const std::vector<BinaryMask>& fg, std::size_t k, const SegParams& params) {
  if (fg.size() != features.size()) throw ValidationError("foreground clustering: mask count mismatch");
  std::vector<Eigen::Index> rows;
  const MatD all = stack_tokens(features);
  Eigen::Index r0 = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t p = 0; p < fg[i].size(); ++p) {
      if (fg[i].data[p]) rows.push_back(r0 + static_cast<Eigen::Index>(p));
    }
    r0 += static_cast<Eigen::Index>(features[i].plane());
  }
  if (rows.size() < k) {
    throw ValidationError("foreground clustering: " + std::to_string(rows.size()) + " foreground tokens for K=" +
                          std::to_string(k));
  }
  MatD pts(static_cast<Eigen::Index>(rows.size()), all.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = all.row(rows[i]);
  const KMeansResult km = kmeans(pts, kmeans_params(k, params));

  std::vector<LabelMap> maps;
  std::size_t next = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    LabelMap m(features[i].height, features[i].width, kUnassigned);
    for (std::size_t p = 0; p < m.size(); ++p) {
      if (fg[i].data[p]) m.data[p] = static_cast<std::uint16_t>(km.labels[next++]);
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

double cbfe_seg_miou(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt,
                     const std::vector<BinaryMask>& fg, const SegParams& params) {
  const std::size_t n_fg = params.n_classes - 1;
  auto maps = cluster_foreground(features, fg, n_fg, params);
  for (auto& m : maps) {
    for (auto& v : m.data) {
      if (v == kUnassigned) v = static_cast<std::uint16_t>(n_fg);
    }
  }
  return hungarian_miou(maps, eval_masks(gt, params), params.n_classes, params.n_classes).result.miou;
}

CdOutput run_community_seg(const std::vector<FeatureGrid>& features, const std::vector<ClassMap>& gt,
                           const std::vector<BinaryMask>& fg, const SegParams& params) {
  const std::size_t n_fg = params.n_classes - 1;
  CdOutput out;
  out.cluster_maps = cluster_foreground(features, fg, params.cd_k, params);
  out.graph = filter_edges(cooccurrence_graph(out.cluster_maps, params.cd_k, params.cooc_distance),
                           params.edge_threshold);
  CommunityParams cp;
  cp.target = n_fg;
  cp.markov_time = params.markov_time;
  cp.seed = params.seed;
  out.communities = detect_communities(out.graph, cp);
  out.segmentation =
      merge_by_communities(out.cluster_maps, out.communities.partition, static_cast<std::uint16_t>(n_fg));
  if (!gt.empty()) {
    out.miou = hungarian_miou(out.segmentation, eval_masks(gt, params), params.n_classes, params.n_classes);
  }
  return out;
}

Ladder run_ladder(const EvalData& data, const TrainConfig& cfg, const SegParams& params, std::size_t n_eval_seeds) {
  if (n_eval_seeds == 0) throw ValidationError("ladder: n_eval_seeds must be >= 1");
  const std::size_t raw_dim = data.tokens.at(0).channels;
  TrainState state = init_train_state(cfg, raw_dim);
  const auto raw = encode_all(data.tokens, state.teacher);
  train(train_images_from(data), cfg, state);
  const auto trained = encode_all(data.tokens, state.teacher);

  Ladder l;
  l.train_losses = state.losses;
  l.hint_jaccard = jaccard(data.hints, data.fg_truth);
  for (std::size_t s = 0; s < n_eval_seeds; ++s) {
    SegParams p = params;
    p.seed = params.seed + s;
    l.raw += kmeans_seg_miou(raw, data.objects, p);
    l.trained += kmeans_seg_miou(trained, data.objects, p);
    const CbfeOutput cb = run_cbfe(trained, data.hints, p);
    l.cbfe_jaccard += jaccard(cb.masks, data.fg_truth);
    l.cbfe += cbfe_seg_miou(trained, data.objects, cb.masks, p);
    l.cd += run_community_seg(trained, data.objects, cb.masks, p).miou.result.miou;
  }
  const double n = static_cast<double>(n_eval_seeds);
  l.raw /= n;
  l.trained /= n;
  l.cbfe /= n;
  l.cd /= n;
  l.cbfe_jaccard /= n;
  return l;
}

}  // namespace leopart
