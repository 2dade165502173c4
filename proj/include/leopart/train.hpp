#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "leopart/attention_mask.hpp"
#include "leopart/crop_geometry.hpp"
#include "leopart/loss.hpp"
#include "leopart/model.hpp"
#include "leopart/optimizer.hpp"
#include "leopart/rng.hpp"
#include "leopart/sinkhorn.hpp"
#include "leopart/tensor_io.hpp"

namespace leopart {

// Per-crop photometric stand-in: a random offset added to the trailing
// `jitter_channels` of every token of the crop, plus independent token noise.
struct AugmentParams {
  std::size_t jitter_channels = 0;
  double jitter_sigma = 0.0;
  double token_noise = 0.0;
};

struct TrainConfig {
  std::size_t feature_dim = 0;  // 0 = raw token dim
  std::size_t hidden_dim = 2048;
  std::size_t out_dim = 256;
  std::size_t n_prototypes = 300;
  EncoderInit encoder_init = EncoderInit::kIdentity;

  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t max_steps = 0;  // 0 = epochs * ceil(n_images / batch_size)
  double lr_head = 1e-4;
  double lr_encoder = 1e-5;
  double lr_end = 0.0;  // both rates follow a half cosine down to lr_end
  double weight_decay_start = 0.04;
  double weight_decay_end = 0.4;
  double ema_start = 0.9995;
  std::size_t queue_size = 8192;  // tokens; 0 disables the queue

  LossConfig loss;
  CropSpec crops;
  std::size_t global_tokens = 7;  // side of the token grid resampled for a global crop
  std::size_t local_tokens = 3;
  AugmentParams augment;
  MaskParams mask;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t total_steps(std::size_t n_images) const;
};

struct TrainImage {
  FeatureGrid tokens;  // raw tokens
  BinaryMask hint;     // foreground hint at token resolution
};

struct TrainState {
  ModelParams<float> student;
  ModelParams<float> teacher;
  AdamState<float> adam;
  std::optional<FeatureQueue> queue;
  std::size_t step = 0;
  std::vector<double> losses;  // one per completed step
};

TrainState init_train_state(const TrainConfig& cfg, std::size_t raw_dim);

// Builds the crop views of one image for one step.
ImageViews<float> make_views(const TrainImage& image, const TrainConfig& cfg, Rng& rng);

// Runs steps state.step .. until_step-1 (until_step = 0 means total_steps).
// Every step derives its randomness from (seed, step), so resuming from a
// saved state reproduces an uninterrupted run.
void train(const std::vector<TrainImage>& images, const TrainConfig& cfg, TrainState& state,
           std::size_t until_step = 0, const std::function<void(const TrainState&)>& on_step = {});

Checkpoint to_checkpoint(const TrainState& state, std::uint64_t config_hash);
TrainState from_checkpoint(const Checkpoint& ckpt, const TrainConfig& cfg);

void write_loss_csv(const std::vector<double>& losses, const std::filesystem::path& path,
                    const std::string& header = "");

// Parameter tensors of one model under `prefix` (e.g. "student.").
void put_model(Checkpoint& ckpt, const std::string& prefix, const ModelParams<float>& p);
ModelParams<float> get_model(const Checkpoint& ckpt, const std::string& prefix);

Tensor to_tensor(const MatF& m);
MatF mat_from(const Tensor& t);

}  // namespace leopart
