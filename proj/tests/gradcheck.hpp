#pragma once

// Tiny swapped-prediction instance and a central finite-difference sweep over
// every student parameter.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "leopart/crop_geometry.hpp"
#include "leopart/loss.hpp"
#include "leopart/model.hpp"
#include "leopart/rng.hpp"

namespace gradcheck {

struct Instance {
  std::vector<leopart::ImageViews<double>> batch;
  leopart::ModelParams<double> student;
  leopart::ModelParams<double> teacher;
  leopart::LossConfig cfg;
};

// D-dim tokens on 3x3 crop grids, K prototypes, n_global + n_local crops per image.
inline Instance make_instance(std::uint64_t seed, std::size_t d = 8, std::size_t k = 5, std::size_t n_global = 2,
                              std::size_t n_local = 2, std::size_t n_images = 2,
                              leopart::FgMasking masking = leopart::FgMasking::kFg) {
  using namespace leopart;
  Rng rng(seed);
  Instance inst;
  ModelShape shape;
  shape.raw_dim = d;
  shape.feature_dim = d;
  shape.hidden_dim = 7;
  shape.out_dim = 6;
  shape.n_prototypes = k;
  inst.student = init_model(shape, seed, EncoderInit::kRandom).cast<double>();
  inst.teacher = init_model(shape, seed + 1000, EncoderInit::kRandom).cast<double>();
  // Non-zero biases so their gradients are exercised away from the init point.
  inst.student.visit([&](const char* name, Mat<double>& m) {
    if (std::string(name).find("bias") != std::string::npos) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.1 * rng.normal();
    }
  });
  inst.cfg.masking = masking;
  inst.cfg.align_size = 7;
  inst.cfg.temperature = 0.1;

  CropSpec spec;
  spec.n_global = n_global;
  spec.n_local = n_local;
  for (std::size_t b = 0; b < n_images; ++b) {
    Grid<double> image(d, 6, 6);
    for (auto& v : image.data) v = rng.normal();
    const CropSet crops = sample_crops(spec, seed * 31 + b);
    ImageViews<double> views;
    views.n_global = n_global;
    views.boxes = crops.boxes;
    for (std::size_t v = 0; v < crops.crops.size(); ++v) {
      CropView<double> cv;
      cv.box = crops.crops[v];
      cv.tokens = align(image, cv.box, 3, 3);
      if (v < n_global) {
        BinaryMask fg(3, 3);
        for (auto& x : fg.data) x = rng.uniform() < 0.7;
        fg.data[4] = 1;
        cv.fg = fg;
      }
      views.views.push_back(std::move(cv));
    }
    inst.batch.push_back(std::move(views));
  }
  return inst;
}

struct Report {
  double max_rel_error = 0.0;
  std::string worst;  // parameter name and index of the worst entry
  std::size_t checked = 0;
  std::size_t n_pairs = 0;
};

// rel = |analytic - numeric| / max(|analytic|, |numeric|, floor)
inline Report check(Instance& inst, double h = 1e-4, double floor = 1e-6) {
  using namespace leopart;
  const auto analytic = total_loss(inst.batch, inst.student, inst.teacher, nullptr, inst.cfg);
  Report r;
  r.n_pairs = analytic.n_pairs;
  auto grads = analytic.grads;
  std::vector<std::pair<std::string, const Mat<double>*>> g_list;
  grads.visit([&](const char* name, Mat<double>& m) { g_list.emplace_back(name, &m); });
  std::size_t t = 0;
  inst.student.visit([&](const char* name, Mat<double>& p) {
    const Mat<double>& g = *g_list[t++].second;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double orig = p.data()[i];
      p.data()[i] = orig + h;
      const double lp = total_loss(inst.batch, inst.student, inst.teacher, nullptr, inst.cfg).loss;
      p.data()[i] = orig - h;
      const double lm = total_loss(inst.batch, inst.student, inst.teacher, nullptr, inst.cfg).loss;
      p.data()[i] = orig;
      const double numeric = (lp - lm) / (2 * h);
      const double a = g.data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = std::string(name) + "[" + std::to_string(i) + "]";
      }
      ++r.checked;
    }
  });
  return r;
}

}  // namespace gradcheck
