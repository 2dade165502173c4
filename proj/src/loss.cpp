#include "leopart/loss.hpp"

#include <cmath>

#include "leopart/error.hpp"

namespace leopart {

BinaryMask intersection_mask(const BinaryMask& crop_fg, const CropBox& box, std::size_t size, FgMasking masking) {
  BinaryMask out(size, size, 1);
  if (masking == FgMasking::kAll) return out;
  Grid<double> src(1, crop_fg.height, crop_fg.width);
  for (std::size_t k = 0; k < crop_fg.size(); ++k) src.data[k] = crop_fg.data[k] ? 1.0 : 0.0;
  const Grid<double> aligned = align(src, box, size, size);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const bool fg = aligned.data[k] >= 0.5;
    out.data[k] = (masking == FgMasking::kFg) == fg ? 1 : 0;
  }
  return out;
}

template <typename T>
PairLoss<T> pair_loss(const Grid<T>& pred, const Grid<T>& target, const CropBox& box_pred, const CropBox& box_target,
                      const BinaryMask* mask, const LossConfig& cfg, bool want_grad) {
  if (pred.channels != target.channels) throw ValidationError("pair_loss: prototype count mismatch");
  if (!(cfg.temperature > 0.0)) throw ValidationError("pair_loss: temperature must be positive");
  const std::size_t s = cfg.align_size;
  if (mask && (mask->height != s || mask->width != s)) throw ValidationError("pair_loss: mask size mismatch");

  const AlignPlan plan_pred(box_pred, pred.height, pred.width, s, s);
  const Grid<T> logits = plan_pred.forward(pred);
  const Grid<T> tgt = align(target, box_target, s, s);

  const std::size_t k = pred.channels;
  const std::size_t cells = s * s;
  const T inv_tau = T(1) / static_cast<T>(cfg.temperature);

  PairLoss<T> out;
  for (std::size_t c = 0; c < cells; ++c) out.mask_weight += (!mask || mask->data[c]) ? T(1) : T(0);
  if (out.mask_weight == T(0)) return out;
  out.contributed = true;
  const T denom = cfg.mean_over_masked ? out.mask_weight : static_cast<T>(cells);

  Grid<T> d_logits(k, s, s);
  std::vector<T> x(k);
  for (std::size_t c = 0; c < cells; ++c) {
    if (mask && !mask->data[c]) continue;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      x[j] = logits.data[j * cells + c] * inv_tau;
      mx = std::max(mx, x[j]);
    }
    T z = T(0);
    for (std::size_t j = 0; j < k; ++j) z += std::exp(x[j] - mx);
    const T lse = mx + std::log(z);
    T t_sum = T(0), ce = T(0);
    for (std::size_t j = 0; j < k; ++j) {
      const T t = tgt.data[j * cells + c];
      t_sum += t;
      ce -= t * (x[j] - lse);
    }
    out.loss += ce / denom;
    if (want_grad) {
      for (std::size_t j = 0; j < k; ++j) {
        const T p = std::exp(x[j] - lse);
        d_logits.data[j * cells + c] = (p * t_sum - tgt.data[j * cells + c]) * inv_tau / denom;
      }
    }
  }
  if (want_grad) out.grad = plan_pred.backward(d_logits);
  return out;
}

template <typename T>
LossResult<T> total_loss(const std::vector<ImageViews<T>>& batch, const ModelParams<T>& student,
                         const ModelParams<T>& teacher, const FeatureQueue* queue, const LossConfig& cfg) {
  const auto raw_dim = static_cast<Eigen::Index>(student.encoder.in_dim());
  const auto n_proto = static_cast<std::size_t>(student.prototypes.rows());

  // Row ranges of every crop inside the stacked token matrices.
  struct Slot {
    Eigen::Index row0;
    std::size_t h, w;
  };
  std::vector<std::vector<Slot>> student_slots(batch.size()), teacher_slots(batch.size());
  Eigen::Index n_student = 0, n_teacher = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& img = batch[b];
    if (img.n_global == 0) throw ValidationError("total_loss: every image needs at least one global crop");
    if (img.boxes.size() != img.views.size()) throw ValidationError("total_loss: box matrix size mismatch");
    for (std::size_t v = 0; v < img.views.size(); ++v) {
      const auto& t = img.views[v].tokens;
      if (static_cast<Eigen::Index>(t.channels) != raw_dim) throw ValidationError("total_loss: raw token dim mismatch");
      student_slots[b].push_back({n_student, t.height, t.width});
      n_student += static_cast<Eigen::Index>(t.plane());
      if (v < img.n_global) {
        if (!img.views[v].fg && cfg.masking != FgMasking::kAll) {
          throw ValidationError("total_loss: global crop lacks a foreground hint");
        }
        teacher_slots[b].push_back({n_teacher, t.height, t.width});
        n_teacher += static_cast<Eigen::Index>(t.plane());
      }
    }
  }

  Mat<T> student_in(n_student, raw_dim), teacher_in(n_teacher, raw_dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t v = 0; v < batch[b].views.size(); ++v) {
      const Mat<T> rows = grid_to_rows(batch[b].views[v].tokens);
      student_in.middleRows(student_slots[b][v].row0, rows.rows()) = rows;
      if (v < batch[b].n_global) teacher_in.middleRows(teacher_slots[b][v].row0, rows.rows()) = rows;
    }
  }

  LossResult<T> res;

  // Teacher targets.
  const ForwardCache<T> tc = forward(teacher, teacher_in);
  res.teacher_features = tc.features;
  MatD scores;
  if (queue && queue->ready()) {
    const MatD q_rows = queue->contents().template cast<double>();
    MatD all(n_teacher + q_rows.rows(), tc.features.cols());
    all.topRows(n_teacher) = tc.features.template cast<double>();
    all.bottomRows(q_rows.rows()) = q_rows;
    scores = all * teacher.prototypes.template cast<double>().transpose();
  } else {
    scores = tc.scores.template cast<double>();
  }
  Assignment assignment = sinkhorn_from_scores(scores, cfg.sinkhorn, static_cast<std::size_t>(n_teacher));
  res.warnings = std::move(assignment.warnings);
  const Mat<T> q = assignment.q.template cast<T>();

  // Student predictions.
  const ForwardCache<T> sc = forward(student, student_in);
  Mat<T> d_scores = Mat<T>::Zero(sc.scores.rows(), sc.scores.cols());

  T total = T(0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& img = batch[b];
    for (std::size_t j = 0; j < img.n_global; ++j) {
      const auto& ts = teacher_slots[b][j];
      const Grid<T> target = rows_to_grid<T>(q, ts.h, ts.w, ts.row0);
      for (std::size_t i = 0; i < img.views.size(); ++i) {
        if (i == j) continue;
        ++res.n_candidate_pairs;
        const auto& box_pred = img.boxes.at(i, j);
        const auto& box_target = img.boxes.at(j, i);
        if (!box_pred || !box_target) {
          ++res.n_empty;
          continue;
        }
        std::optional<BinaryMask> mask;
        if (cfg.masking != FgMasking::kAll) {
          mask = intersection_mask(*img.views[j].fg, *box_target, cfg.align_size, cfg.masking);
        }
        const auto& ss = student_slots[b][i];
        const Grid<T> pred = rows_to_grid<T>(sc.scores, ss.h, ss.w, ss.row0);
        PairLoss<T> pl = pair_loss(pred, target, *box_pred, *box_target, mask ? &*mask : nullptr, cfg);
        if (!pl.contributed) {
          ++res.n_all_masked;
          continue;
        }
        ++res.n_pairs;
        total += pl.loss;
        const std::size_t plane = ss.h * ss.w;
        for (std::size_t kk = 0; kk < n_proto; ++kk) {
          for (std::size_t p = 0; p < plane; ++p) {
            d_scores(ss.row0 + static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(kk)) +=
                pl.grad.data[kk * plane + p];
          }
        }
      }
    }
  }

  res.grads = student.zeros_like();
  if (res.n_pairs == 0) return res;
  const T scale = T(1) / static_cast<T>(res.n_pairs);
  res.loss = total * scale;
  d_scores *= scale;
  backward(student, sc, d_scores, res.grads, cfg.encoder_trainable);
  return res;
}

template PairLoss<float> pair_loss<float>(const Grid<float>&, const Grid<float>&, const CropBox&, const CropBox&,
                                          const BinaryMask*, const LossConfig&, bool);
template PairLoss<double> pair_loss<double>(const Grid<double>&, const Grid<double>&, const CropBox&, const CropBox&,
                                            const BinaryMask*, const LossConfig&, bool);
template LossResult<float> total_loss<float>(const std::vector<ImageViews<float>>&, const ModelParams<float>&,
                                             const ModelParams<float>&, const FeatureQueue*, const LossConfig&);
template LossResult<double> total_loss<double>(const std::vector<ImageViews<double>>&, const ModelParams<double>&,
                                               const ModelParams<double>&, const FeatureQueue*, const LossConfig&);

}  // namespace leopart
