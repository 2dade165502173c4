#pragma once

#include <cstddef>

#include "leopart/model.hpp"

namespace leopart {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First and second moments for every parameter, plus the step counter.
template <typename T>
struct AdamState {
  ModelParams<T> m;
  ModelParams<T> v;
  std::size_t step = 0;

  static AdamState zeros_like(const ModelParams<T>& p) { return {p.zeros_like(), p.zeros_like(), 0}; }
};

struct StepRates {
  double lr_head = 1e-4;     // head layers and prototypes
  double lr_encoder = 1e-5;  // token encoder
  double weight_decay = 0.0; // L2 term added to weight-matrix gradients
};

// One bias-corrected adaptive-moment update of a single tensor; `step` is the
// 1-based step count after increment.
template <typename T>
void adam_update(Mat<T>& param, const Mat<T>& grad, Mat<T>& m, Mat<T>& v, std::size_t step, double lr,
                 double weight_decay, const AdamParams& adam = {});

// Bias-corrected adaptive-moment update, then prototype rows renormalized to
// unit length. Throws NumericError naming the parameter on a non-finite gradient.
template <typename T>
void optimizer_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, const StepRates& rates,
                    const AdamParams& adam = {}, bool encoder_trainable = true);

// Half-cosine from `start` at t=0 to `end` at t=total.
double cosine_schedule(double start, double end, std::size_t t, std::size_t total);

// 1 - (1 - start) * (cos(pi t / T) + 1) / 2
double ema_momentum(double start, std::size_t t, std::size_t total);

// teacher <- m * teacher + (1 - m) * student; teacher prototypes are then
// renormalized so teacher scores stay cosine similarities.
template <typename T>
void ema_update(ModelParams<T>& teacher, const ModelParams<T>& student, double momentum);

}  // namespace leopart
