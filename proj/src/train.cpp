#include "leopart/train.hpp"

#include <cmath>
#include <fstream>

#include "leopart/error.hpp"

namespace leopart {

void TrainConfig::validate() const {
  const auto fail = [](const std::string& key, const std::string& why) {
    throw ValidationError("train." + key + ": " + why);
  };
  if (hidden_dim == 0) fail("hidden_dim", "must be >= 1");
  if (out_dim == 0) fail("out_dim", "must be >= 1");
  if (n_prototypes == 0) fail("n_prototypes", "must be >= 1");
  if (batch_size == 0) fail("batch_size", "must be >= 1");
  if (epochs == 0 && max_steps == 0) fail("epochs", "must be >= 1");
  if (!(lr_head >= 0.0)) fail("lr_head", "must be >= 0");
  if (!(lr_encoder >= 0.0)) fail("lr_encoder", "must be >= 0");
  if (!(weight_decay_start >= 0.0)) fail("weight_decay_start", "must be >= 0");
  if (!(weight_decay_end >= 0.0)) fail("weight_decay_end", "must be >= 0");
  if (!(ema_start > 0.0 && ema_start <= 1.0)) fail("ema_start", "must lie in (0,1]");
  if (!(loss.temperature > 0.0)) fail("temperature", "must be positive");
  if (loss.align_size == 0) fail("align_size", "must be >= 1");
  if (global_tokens == 0) fail("global_tokens", "must be >= 1");
  if (local_tokens == 0) fail("local_tokens", "must be >= 1");
  if (!(loss.sinkhorn.epsilon > 0.0)) throw ValidationError("sinkhorn.epsilon: must be positive");
  if (loss.sinkhorn.n_iters == 0) throw ValidationError("sinkhorn.n_iters: must be >= 1");
  crops.validate();
}

std::size_t TrainConfig::total_steps(std::size_t n_images) const {
  if (max_steps) return max_steps;
  return epochs * ((n_images + batch_size - 1) / batch_size);
}

TrainState init_train_state(const TrainConfig& cfg, std::size_t raw_dim) {
  cfg.validate();
  ModelShape shape;
  shape.raw_dim = raw_dim;
  shape.feature_dim = cfg.feature_dim ? cfg.feature_dim : raw_dim;
  shape.hidden_dim = cfg.hidden_dim;
  shape.out_dim = cfg.out_dim;
  shape.n_prototypes = cfg.n_prototypes;
  TrainState s;
  s.student = init_model(shape, cfg.seed, cfg.encoder_init);
  s.teacher = s.student;
  s.adam = AdamState<float>::zeros_like(s.student);
  if (cfg.queue_size) s.queue.emplace(cfg.queue_size, cfg.out_dim);
  return s;
}

ImageViews<float> make_views(const TrainImage& image, const TrainConfig& cfg, Rng& rng) {
  const CropSet cs = sample_crops(cfg.crops, rng.next());
  const std::size_t jitter = std::min(cfg.augment.jitter_channels, image.tokens.channels);
  Grid<float> hint(1, image.hint.height, image.hint.width);
  for (std::size_t i = 0; i < image.hint.size(); ++i) hint.data[i] = image.hint.data[i] ? 1.0f : 0.0f;

  ImageViews<float> out;
  out.n_global = cfg.crops.n_global;
  out.boxes = cs.boxes;
  for (std::size_t v = 0; v < cs.crops.size(); ++v) {
    const bool global = v < cfg.crops.n_global;
    const std::size_t side = global ? cfg.global_tokens : cfg.local_tokens;
    CropView<float> view;
    view.box = cs.crops[v];
    view.tokens = align(image.tokens, view.box, side, side);
    const std::size_t plane = side * side;
    for (std::size_t c = image.tokens.channels - jitter; c < image.tokens.channels; ++c) {
      const auto offset = static_cast<float>(cfg.augment.jitter_sigma * rng.normal());
      for (std::size_t p = 0; p < plane; ++p) view.tokens.data[c * plane + p] += offset;
    }
    if (cfg.augment.token_noise > 0.0) {
      for (auto& x : view.tokens.data) x += static_cast<float>(cfg.augment.token_noise * rng.normal());
    }
    if (global) {
      const Grid<float> a = align(hint, view.box, side, side);
      BinaryMask fg(side, side);
      for (std::size_t p = 0; p < plane; ++p) fg.data[p] = a.data[p] >= 0.5f ? 1 : 0;
      view.fg = std::move(fg);
    }
    out.views.push_back(std::move(view));
  }
  return out;
}

void train(const std::vector<TrainImage>& images, const TrainConfig& cfg, TrainState& state, std::size_t until_step,
           const std::function<void(const TrainState&)>& on_step) {
  cfg.validate();
  if (images.empty()) throw ValidationError("train: empty dataset");
  const std::size_t n = images.size();
  const std::size_t total = cfg.total_steps(n);
  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  if (until_step == 0 || until_step > total) until_step = total;

  std::vector<std::size_t> order;
  std::size_t order_epoch = SIZE_MAX;
  while (state.step < until_step) {
    const std::size_t t = state.step;
    const std::size_t epoch = t / per_epoch;
    if (epoch != order_epoch) {
      order.resize(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      Rng perm = Rng::derive(cfg.seed, 0x65706f6368, epoch);
      perm.shuffle(order.begin(), order.end());
      order_epoch = epoch;
    }
    Rng rng = Rng::derive(cfg.seed, 0x73746570, t);
    std::vector<ImageViews<float>> batch;
    const std::size_t first = (t % per_epoch) * cfg.batch_size;
    for (std::size_t b = first; b < std::min(n, first + cfg.batch_size); ++b) {
      batch.push_back(make_views(images[order[b]], cfg, rng));
    }

    LossResult<float> res = total_loss(batch, state.student, state.teacher, state.queue ? &*state.queue : nullptr,
                                       cfg.loss);
    StepRates rates;
    rates.lr_head = cosine_schedule(cfg.lr_head, cfg.lr_end, t, total);
    rates.lr_encoder = cosine_schedule(cfg.lr_encoder, cfg.lr_end, t, total);
    rates.weight_decay = cosine_schedule(cfg.weight_decay_start, cfg.weight_decay_end, t, total);
    optimizer_step(state.student, res.grads, state.adam, rates, {}, cfg.loss.encoder_trainable);
    ema_update(state.teacher, state.student, ema_momentum(cfg.ema_start, t, total));
    if (state.queue) state.queue->push(res.teacher_features);
    state.losses.push_back(static_cast<double>(res.loss));
    ++state.step;
    if (on_step) on_step(state);
  }
}

Tensor to_tensor(const MatF& m) {
  std::vector<float> v(m.data(), m.data() + m.size());
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(v));
}

MatF mat_from(const Tensor& t) {
  if (t.ndim() != 2) throw ValidationError("expected a 2-D f32 tensor");
  MatF m(static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
  const auto v = t.f32();
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

void put_model(Checkpoint& ckpt, const std::string& prefix, const ModelParams<float>& p) {
  p.visit([&](const char* name, const MatF& m) { ckpt.tensors[prefix + name] = to_tensor(m); });
}

ModelParams<float> get_model(const Checkpoint& ckpt, const std::string& prefix) {
  ModelParams<float> p;
  p.visit([&](const char* name, MatF& m) {
    const auto it = ckpt.tensors.find(prefix + name);
    if (it == ckpt.tensors.end()) throw ValidationError("checkpoint lacks tensor " + prefix + name);
    m = mat_from(it->second);
  });
  return p;
}

namespace {

void put_moments(Checkpoint& ckpt, const std::string& suffix, const ModelParams<float>& p) {
  p.visit([&](const char* name, const MatF& m) { ckpt.tensors["adam." + std::string(name) + suffix] = to_tensor(m); });
}

ModelParams<float> get_moments(const Checkpoint& ckpt, const std::string& suffix) {
  ModelParams<float> p;
  p.visit([&](const char* name, MatF& m) {
    const auto key = "adam." + std::string(name) + suffix;
    const auto it = ckpt.tensors.find(key);
    if (it == ckpt.tensors.end()) throw ValidationError("checkpoint lacks tensor " + key);
    m = mat_from(it->second);
  });
  return p;
}

}  // namespace

Checkpoint to_checkpoint(const TrainState& state, std::uint64_t config_hash) {
  Checkpoint ckpt;
  ckpt.step = state.step;
  ckpt.config_hash = config_hash;
  put_model(ckpt, "student.", state.student);
  put_model(ckpt, "teacher.", state.teacher);
  put_moments(ckpt, ".m", state.adam.m);
  put_moments(ckpt, ".v", state.adam.v);
  // Losses are kept in f64 precision by splitting each value into two f32 halves.
  std::vector<float> hi(state.losses.size()), lo(state.losses.size());
  for (std::size_t i = 0; i < state.losses.size(); ++i) {
    hi[i] = static_cast<float>(state.losses[i]);
    lo[i] = static_cast<float>(state.losses[i] - static_cast<double>(hi[i]));
  }
  if (!state.losses.empty()) {
    std::vector<float> both(hi);
    both.insert(both.end(), lo.begin(), lo.end());
    ckpt.tensors["train.losses"] = Tensor({2, state.losses.size()}, std::move(both));
  }
  if (state.queue) {
    ckpt.tensors["queue.buffer"] = to_tensor(state.queue->buffer());
    ckpt.tensors["queue.state"] = Tensor({2}, std::vector<float>{static_cast<float>(state.queue->fill()),
                                                                 static_cast<float>(state.queue->head())});
  }
  return ckpt;
}

TrainState from_checkpoint(const Checkpoint& ckpt, const TrainConfig& cfg) {
  ckpt.validate();
  TrainState s;
  s.step = ckpt.step;
  s.student = get_model(ckpt, "student.");
  s.teacher = get_model(ckpt, "teacher.");
  s.adam.m = get_moments(ckpt, ".m");
  s.adam.v = get_moments(ckpt, ".v");
  s.adam.step = ckpt.step;
  if (const auto it = ckpt.tensors.find("train.losses"); it != ckpt.tensors.end()) {
    const auto v = it->second.f32();
    const std::size_t n = it->second.dim(1);
    s.losses.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.losses[i] = static_cast<double>(v[i]) + static_cast<double>(v[n + i]);
  }
  const auto buf = ckpt.tensors.find("queue.buffer");
  if (cfg.queue_size) {
    if (buf == ckpt.tensors.end()) throw ValidationError("checkpoint lacks the feature queue required by train.queue_size");
    const MatF b = mat_from(buf->second);
    s.queue.emplace(static_cast<std::size_t>(b.rows()), static_cast<std::size_t>(b.cols()));
    const auto st = ckpt.tensors.at("queue.state").f32();
    s.queue->restore(b, static_cast<std::size_t>(st[0]), static_cast<std::size_t>(st[1]));
  }
  return s;
}

void write_loss_csv(const std::vector<double>& losses, const std::filesystem::path& path,
                    const std::string& header) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os.precision(9);
  os << header << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) os << i + 1 << ',' << losses[i] << '\n';
}

}  // namespace leopart
