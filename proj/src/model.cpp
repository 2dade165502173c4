#include "leopart/model.hpp"

#include <cmath>
#include <numbers>

#include "leopart/error.hpp"
#include "leopart/rng.hpp"

namespace leopart {

template <typename T>
ModelShape ModelParams<T>::shape() const {
  ModelShape s;
  s.raw_dim = encoder.in_dim();
  s.feature_dim = encoder.out_dim();
  s.hidden_dim = head1.out_dim();
  s.out_dim = head3.out_dim();
  s.n_prototypes = static_cast<std::size_t>(prototypes.rows());
  return s;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams<T> z = *this;
  z.visit([](const char*, Mat<T>& m) { m.setZero(); });
  return z;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const {
  ModelParams<U> out;
  out.encoder = {encoder.weight.template cast<U>(), encoder.bias.template cast<U>()};
  out.head1 = {head1.weight.template cast<U>(), head1.bias.template cast<U>()};
  out.head2 = {head2.weight.template cast<U>(), head2.bias.template cast<U>()};
  out.head3 = {head3.weight.template cast<U>(), head3.bias.template cast<U>()};
  out.prototypes = prototypes.template cast<U>();
  return out;
}

namespace {

template <typename T>
void normalize_rows(Mat<T>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const T n = m.row(r).norm();
    if (n > T(0)) m.row(r) /= n;
  }
}

Linear<float> xavier(Rng& rng, std::size_t in, std::size_t out) {
  Linear<float> l;
  l.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
  l.bias = Mat<float>::Zero(1, static_cast<Eigen::Index>(out));
  return l;
}

template <typename T>
Mat<T> affine(const Linear<T>& l, const Mat<T>& x) {
  Mat<T> y = x * l.weight.transpose();
  y.rowwise() += l.bias.row(0);
  return y;
}

}  // namespace

void normalize_prototypes(Mat<float>& prototypes) { normalize_rows(prototypes); }
void normalize_prototypes(Mat<double>& prototypes) { normalize_rows(prototypes); }

ModelParams<float> init_model(const ModelShape& shape, std::uint64_t seed, EncoderInit encoder_init) {
  if (shape.raw_dim == 0 || shape.feature_dim == 0 || shape.hidden_dim == 0 || shape.out_dim == 0 ||
      shape.n_prototypes == 0) {
    throw ValidationError("model shape: all dimensions must be positive");
  }
  Rng rng = Rng::derive(seed, 0x1a17);
  ModelParams<float> p;
  if (encoder_init == EncoderInit::kIdentity) {
    if (shape.raw_dim != shape.feature_dim) {
      throw ValidationError("identity encoder needs raw_dim == feature_dim");
    }
    const auto d = static_cast<Eigen::Index>(shape.raw_dim);
    p.encoder.weight = Mat<float>::Identity(d, d);
    p.encoder.bias = Mat<float>::Zero(1, d);
  } else {
    p.encoder = xavier(rng, shape.raw_dim, shape.feature_dim);
  }
  p.head1 = xavier(rng, shape.feature_dim, shape.hidden_dim);
  p.head2 = xavier(rng, shape.hidden_dim, shape.hidden_dim);
  p.head3 = xavier(rng, shape.hidden_dim, shape.out_dim);
  p.prototypes.resize(static_cast<Eigen::Index>(shape.n_prototypes), static_cast<Eigen::Index>(shape.out_dim));
  for (Eigen::Index i = 0; i < p.prototypes.size(); ++i) p.prototypes.data()[i] = static_cast<float>(rng.normal());
  normalize_rows(p.prototypes);
  return p;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

namespace {

// Head + bottleneck + scores on already-encoded tokens; fills the cache tail.
template <typename T>
void head_forward(const ModelParams<T>& p, ForwardCache<T>& c) {
  if (static_cast<std::size_t>(c.encoded.cols()) != p.head1.in_dim()) {
    throw ValidationError("projection head: token dim " + std::to_string(c.encoded.cols()) +
                          " does not match head input " + std::to_string(p.head1.in_dim()));
  }
  c.pre1 = affine(p.head1, c.encoded);
  c.act1 = c.pre1.unaryExpr([](T v) { return gelu(v); });
  c.pre2 = affine(p.head2, c.act1);
  c.act2 = c.pre2.unaryExpr([](T v) { return gelu(v); });
  c.projected = affine(p.head3, c.act2);
  c.norms = c.projected.rowwise().norm();
  c.features = c.projected;
  for (Eigen::Index r = 0; r < c.features.rows(); ++r) {
    if (!(c.norms(r) >= T(1e-12))) {
      throw NumericError("projection head: degenerate output (norm < 1e-12) at token " + std::to_string(r));
    }
    c.features.row(r) /= c.norms(r);
  }
  c.scores = c.features * p.prototypes.transpose();
}

}  // namespace

template <typename T>
Mat<T> encode(const ModelParams<T>& p, const Mat<T>& raw_tokens) {
  if (static_cast<std::size_t>(raw_tokens.cols()) != p.encoder.in_dim()) {
    throw ValidationError("encoder: token dim " + std::to_string(raw_tokens.cols()) + " does not match " +
                          std::to_string(p.encoder.in_dim()));
  }
  return affine(p.encoder, raw_tokens);
}

template <typename T>
ForwardCache<T> forward(const ModelParams<T>& p, const Mat<T>& raw_tokens) {
  ForwardCache<T> c;
  c.input = raw_tokens;
  c.encoded = encode(p, raw_tokens);
  head_forward(p, c);
  return c;
}

template <typename T>
void backward(const ModelParams<T>& p, const ForwardCache<T>& c, const Mat<T>& d_scores, ModelParams<T>& g,
              bool encoder_trainable) {
  g.prototypes.noalias() += d_scores.transpose() * c.features;
  const Mat<T> d_feat = d_scores * p.prototypes;

  // z = y / |y|  =>  dy = (dz - z <z, dz>) / |y|
  Mat<T> d_proj(d_feat.rows(), d_feat.cols());
  for (Eigen::Index r = 0; r < d_feat.rows(); ++r) {
    const T dot = c.features.row(r).dot(d_feat.row(r));
    d_proj.row(r) = (d_feat.row(r) - dot * c.features.row(r)) / c.norms(r);
  }

  g.head3.weight.noalias() += d_proj.transpose() * c.act2;
  g.head3.bias += d_proj.colwise().sum();
  Mat<T> d_pre2 = d_proj * p.head3.weight;
  d_pre2.array() *= c.pre2.unaryExpr([](T v) { return gelu_grad(v); }).array();

  g.head2.weight.noalias() += d_pre2.transpose() * c.act1;
  g.head2.bias += d_pre2.colwise().sum();
  Mat<T> d_pre1 = d_pre2 * p.head2.weight;
  d_pre1.array() *= c.pre1.unaryExpr([](T v) { return gelu_grad(v); }).array();

  g.head1.weight.noalias() += d_pre1.transpose() * c.encoded;
  g.head1.bias += d_pre1.colwise().sum();
  if (!encoder_trainable) return;

  const Mat<T> d_enc = d_pre1 * p.head1.weight;
  g.encoder.weight.noalias() += d_enc.transpose() * c.input;
  g.encoder.bias += d_enc.colwise().sum();
}

template <typename T>
Grid<T> project(const Grid<T>& tokens, const ModelParams<T>& p) {
  ForwardCache<T> c;
  c.encoded = grid_to_rows(tokens);
  head_forward(p, c);
  return rows_to_grid<T>(c.features, tokens.height, tokens.width);
}

#define LEOPART_INSTANTIATE(T)                                                                               \
  template struct ModelParams<T>;                                                                            \
  template T gelu<T>(T);                                                                                     \
  template T gelu_grad<T>(T);                                                                                \
  template Mat<T> encode<T>(const ModelParams<T>&, const Mat<T>&);                                           \
  template ForwardCache<T> forward<T>(const ModelParams<T>&, const Mat<T>&);                                 \
  template void backward<T>(const ModelParams<T>&, const ForwardCache<T>&, const Mat<T>&, ModelParams<T>&, bool); \
  template Grid<T> project<T>(const Grid<T>&, const ModelParams<T>&);

LEOPART_INSTANTIATE(float)
LEOPART_INSTANTIATE(double)
#undef LEOPART_INSTANTIATE

template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;

}  // namespace leopart
