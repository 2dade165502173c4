#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "leopart/pipeline.hpp"
#include "leopart/synth.hpp"
#include "leopart/train.hpp"

namespace leopart {

enum class PrecisionResolution { kToken, kUpsampled };

struct CbfeConfig {
  std::size_t k = 200;
  double threshold = kThresholdSingleDataset;
  PrecisionResolution resolution = PrecisionResolution::kUpsampled;
};

struct CdConfig {
  std::size_t k = 150;
  double edge_threshold = 0.09;
  double markov_time = 2.0;
  std::size_t distance = 1;
};

struct EvalConfig {
  std::size_t n_seeds = 5;
  std::size_t mask_size = 100;
  std::size_t overcluster_k = 100;
  std::size_t max_iter = 100;
  std::size_t probe_epochs = 200;
  double probe_lr = 0.01;
  std::size_t n_classes = 0;  // 0 = inferred from the masks
};

// Every configurable parameter, grouped by INI section.
struct RunConfig {
  SynthSpec synth;
  TrainConfig train;  // [train] and [sinkhorn]
  CbfeConfig cbfe;
  CdConfig cd;
  EvalConfig eval;
  std::uint64_t seed = 0;  // [run]; also seeds training and clustering
  std::size_t threads = 1;

  // Throws ValidationError naming the offending key.
  void validate() const;
  SegParams seg_params(std::size_t n_classes) const;
};

// Parses `[section]` / `key = value` text; unknown sections or keys and
// unparsable values raise ValidationError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Applies LEOPART_SEED when set.
void apply_environment(RunConfig& cfg);

// Canonical text of every key, sorted by section and key.
std::string format_config(const RunConfig& cfg);

// fnv1a64 of the canonical text, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace leopart
