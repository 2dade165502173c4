#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "leopart/grid.hpp"
#include "leopart/matrix.hpp"

namespace leopart {

// Affine layer y = x W^T + b; bias kept as a 1 x out matrix so every
// parameter is a Mat<T>.
template <typename T>
struct Linear {
  Mat<T> weight;  // out x in
  Mat<T> bias;    // 1 x out

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

struct ModelShape {
  std::size_t raw_dim = 0;      // token dimension on disk
  std::size_t feature_dim = 0;  // encoder output D
  std::size_t hidden_dim = 2048;
  std::size_t out_dim = 256;
  std::size_t n_prototypes = 300;
};

// Student or teacher: per-token encoder (stand-in backbone), three-layer GELU
// projection head with an L2 bottleneck, and the prototype matrix (K x out).
template <typename T>
struct ModelParams {
  Linear<T> encoder;
  Linear<T> head1;
  Linear<T> head2;
  Linear<T> head3;
  Mat<T> prototypes;

  ModelShape shape() const;

  // Calls f(name, Mat<T>&) for every parameter tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    f("encoder.weight", encoder.weight);
    f("encoder.bias", encoder.bias);
    f("head1.weight", head1.weight);
    f("head1.bias", head1.bias);
    f("head2.weight", head2.weight);
    f("head2.bias", head2.bias);
    f("head3.weight", head3.weight);
    f("head3.bias", head3.bias);
    f("prototypes", prototypes);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit([&](const char* name, Mat<T>& m) { f(name, static_cast<const Mat<T>&>(m)); });
  }

  // Same shapes, all zeros (gradient accumulators, optimizer moments).
  ModelParams zeros_like() const;

  template <typename U>
  ModelParams<U> cast() const;
};

enum class EncoderInit { kIdentity, kRandom };

// Random init: Xavier-uniform weights, zero biases, unit-norm Gaussian prototypes.
// kIdentity sets the encoder to the identity (requires raw_dim == feature_dim).
ModelParams<float> init_model(const ModelShape& shape, std::uint64_t seed, EncoderInit encoder_init);

void normalize_prototypes(Mat<float>& prototypes);
void normalize_prototypes(Mat<double>& prototypes);

template <typename T>
T gelu(T x);
template <typename T>
T gelu_grad(T x);

// Activations of one forward pass over a stack of tokens (one row each).
template <typename T>
struct ForwardCache {
  Mat<T> input;    // raw tokens
  Mat<T> encoded;  // encoder output
  Mat<T> pre1, act1, pre2, act2;
  Mat<T> projected;  // head output before normalization
  Eigen::Matrix<T, Eigen::Dynamic, 1> norms;
  Mat<T> features;  // unit rows
  Mat<T> scores;    // features * prototypes^T
};

// Encoder output only.
template <typename T>
Mat<T> encode(const ModelParams<T>& p, const Mat<T>& raw_tokens);

// Full forward pass. Throws NumericError when a projected row has norm < 1e-12.
template <typename T>
ForwardCache<T> forward(const ModelParams<T>& p, const Mat<T>& raw_tokens);

// Accumulates parameter gradients for d(loss)/d(scores) into `grads`.
template <typename T>
void backward(const ModelParams<T>& p, const ForwardCache<T>& cache, const Mat<T>& d_scores, ModelParams<T>& grads,
              bool encoder_trainable = true);

// Projects a token grid (D x H x W, already encoded) through the head; the
// result is an out_dim x H x W grid of unit vectors.
template <typename T>
Grid<T> project(const Grid<T>& tokens, const ModelParams<T>& p);

}  // namespace leopart
