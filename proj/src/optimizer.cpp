#include "leopart/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "leopart/error.hpp"

namespace leopart {

namespace {

bool is_encoder(std::string_view name) { return name.starts_with("encoder."); }
bool is_weight_matrix(std::string_view name) { return name.ends_with(".weight"); }

template <typename T>
std::vector<Mat<T>*> collect(ModelParams<T>& p) {
  std::vector<Mat<T>*> out;
  p.visit([&](const char*, Mat<T>& m) { out.push_back(&m); });
  return out;
}

}  // namespace

template <typename T>
void adam_update(Mat<T>& p, const Mat<T>& g, Mat<T>& mom, Mat<T>& vel, std::size_t step, double lr,
                 double weight_decay, const AdamParams& adam) {
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(step));
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double gk = static_cast<double>(g.data()[k]) + weight_decay * static_cast<double>(p.data()[k]);
    const double mk = adam.beta1 * static_cast<double>(mom.data()[k]) + (1.0 - adam.beta1) * gk;
    const double vk = adam.beta2 * static_cast<double>(vel.data()[k]) + (1.0 - adam.beta2) * gk * gk;
    mom.data()[k] = static_cast<T>(mk);
    vel.data()[k] = static_cast<T>(vk);
    const double update = lr * (mk / bc1) / (std::sqrt(vk / bc2) + adam.eps);
    p.data()[k] = static_cast<T>(static_cast<double>(p.data()[k]) - update);
  }
}

template <typename T>
void optimizer_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state, const StepRates& rates,
                    const AdamParams& adam, bool encoder_trainable) {
  auto g_list = collect(const_cast<ModelParams<T>&>(grads));
  auto m_list = collect(state.m);
  auto v_list = collect(state.v);

  std::size_t idx = 0;
  params.visit([&](const char* name, Mat<T>& m) {
    const Mat<T>& g = *g_list[idx];
    if (!g.allFinite()) throw NumericError(std::string("optimizer: non-finite gradient in ") + name);
    if (g.rows() != m.rows() || g.cols() != m.cols() || m_list[idx]->rows() != m.rows()) {
      throw ValidationError(std::string("optimizer: shape mismatch for ") + name);
    }
    ++idx;
  });

  ++state.step;
  idx = 0;
  params.visit([&](const char* name, Mat<T>& p) {
    const std::size_t i = idx++;
    const bool enc = is_encoder(name);
    if (enc && !encoder_trainable) return;
    adam_update(p, *g_list[i], *m_list[i], *v_list[i], state.step, enc ? rates.lr_encoder : rates.lr_head,
                is_weight_matrix(name) ? rates.weight_decay : 0.0, adam);
  });
  normalize_prototypes(params.prototypes);
}

double cosine_schedule(double start, double end, std::size_t t, std::size_t total) {
  if (total == 0) return end;
  const double frac = std::min(1.0, static_cast<double>(t) / static_cast<double>(total));
  return end + (start - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double ema_momentum(double start, std::size_t t, std::size_t total) {
  return 1.0 - (1.0 - start) * (cosine_schedule(1.0, 0.0, t, total));
}

template <typename T>
void ema_update(ModelParams<T>& teacher, const ModelParams<T>& student, double momentum) {
  if (!(momentum > 0.0 && momentum <= 1.0)) throw ValidationError("ema: momentum must lie in (0,1]");
  auto s_list = collect(const_cast<ModelParams<T>&>(student));
  std::size_t idx = 0;
  const T m = static_cast<T>(momentum);
  teacher.visit([&](const char* name, Mat<T>& t) {
    const Mat<T>& s = *s_list[idx++];
    if (s.rows() != t.rows() || s.cols() != t.cols()) throw ValidationError(std::string("ema: shape mismatch for ") + name);
    if (momentum < 1.0) t = m * t + (T(1) - m) * s;
  });
  // m == 1 is a hard freeze.
  if (momentum < 1.0) normalize_prototypes(teacher.prototypes);
}

template void adam_update<float>(Mat<float>&, const Mat<float>&, Mat<float>&, Mat<float>&, std::size_t, double,
                                 double, const AdamParams&);
template void adam_update<double>(Mat<double>&, const Mat<double>&, Mat<double>&, Mat<double>&, std::size_t, double,
                                  double, const AdamParams&);
template void optimizer_step<float>(ModelParams<float>&, const ModelParams<float>&, AdamState<float>&,
                                    const StepRates&, const AdamParams&, bool);
template void optimizer_step<double>(ModelParams<double>&, const ModelParams<double>&, AdamState<double>&,
                                     const StepRates&, const AdamParams&, bool);
template void ema_update<float>(ModelParams<float>&, const ModelParams<float>&, double);
template void ema_update<double>(ModelParams<double>&, const ModelParams<double>&, double);

}  // namespace leopart
