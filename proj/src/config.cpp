#include "leopart/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "leopart/error.hpp"

namespace leopart {

namespace {

struct Key {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ValidationError(key + ": cannot parse '" + value + "' as " + want);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
Key size_key(T RunConfig::*group, std::size_t T::*field) {
  return {[=](RunConfig& c, const std::string& v) { (c.*group).*field = parse_u64("", v); },
          [=](const RunConfig& c) { return std::to_string((c.*group).*field); }};
}

template <typename T>
Key double_key(T RunConfig::*group, double T::*field) {
  return {[=](RunConfig& c, const std::string& v) { (c.*group).*field = parse_double("", v); },
          [=](const RunConfig& c) { return fmt((c.*group).*field); }};
}

template <typename T>
Key bool_key(T RunConfig::*group, bool T::*field) {
  return {[=](RunConfig& c, const std::string& v) { (c.*group).*field = parse_bool("", v); },
          [=](const RunConfig& c) { return std::string((c.*group).*field ? "true" : "false"); }};
}

const std::map<std::string, Key>& key_table() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> t;
    using R = RunConfig;
    // synth
    t["synth.n_images"] = size_key(&R::synth, &SynthSpec::n_images);
    t["synth.height"] = size_key(&R::synth, &SynthSpec::height);
    t["synth.width"] = size_key(&R::synth, &SynthSpec::width);
    t["synth.raw_dim"] = size_key(&R::synth, &SynthSpec::raw_dim);
    t["synth.n_objects"] = size_key(&R::synth, &SynthSpec::n_objects);
    t["synth.parts_per_object"] = size_key(&R::synth, &SynthSpec::parts_per_object);
    t["synth.n_bg_parts"] = size_key(&R::synth, &SynthSpec::n_bg_parts);
    t["synth.min_angle_deg"] = double_key(&R::synth, &SynthSpec::min_angle_deg);
    t["synth.noise_sigma"] = double_key(&R::synth, &SynthSpec::noise_sigma);
    t["synth.objects_min"] = size_key(&R::synth, &SynthSpec::objects_min);
    t["synth.objects_max"] = size_key(&R::synth, &SynthSpec::objects_max);
    t["synth.object_side_min"] = size_key(&R::synth, &SynthSpec::object_side_min);
    t["synth.object_side_max"] = size_key(&R::synth, &SynthSpec::object_side_max);
    t["synth.flip_fraction"] = double_key(&R::synth, &SynthSpec::flip_fraction);
    t["synth.n_heads"] = size_key(&R::synth, &SynthSpec::n_heads);
    t["synth.appearance_dims"] = size_key(&R::synth, &SynthSpec::appearance_dims);
    t["synth.appearance_sigma"] = double_key(&R::synth, &SynthSpec::appearance_sigma);
    t["synth.seed"] = {[](R& c, const std::string& v) { c.synth.seed = parse_u64("", v); },
                       [](const R& c) { return std::to_string(c.synth.seed); }};
    t["synth.retry_budget"] = size_key(&R::synth, &SynthSpec::retry_budget);
    // train
    t["train.feature_dim"] = size_key(&R::train, &TrainConfig::feature_dim);
    t["train.hidden_dim"] = size_key(&R::train, &TrainConfig::hidden_dim);
    t["train.out_dim"] = size_key(&R::train, &TrainConfig::out_dim);
    t["train.n_prototypes"] = size_key(&R::train, &TrainConfig::n_prototypes);
    t["train.encoder_init"] = {
        [](R& c, const std::string& v) {
          if (v == "identity") {
            c.train.encoder_init = EncoderInit::kIdentity;
          } else if (v == "random") {
            c.train.encoder_init = EncoderInit::kRandom;
          } else {
            bad_value("", v, "identity|random");
          }
        },
        [](const R& c) { return std::string(c.train.encoder_init == EncoderInit::kIdentity ? "identity" : "random"); }};
    t["train.epochs"] = size_key(&R::train, &TrainConfig::epochs);
    t["train.batch_size"] = size_key(&R::train, &TrainConfig::batch_size);
    t["train.max_steps"] = size_key(&R::train, &TrainConfig::max_steps);
    t["train.lr_head"] = double_key(&R::train, &TrainConfig::lr_head);
    t["train.lr_encoder"] = double_key(&R::train, &TrainConfig::lr_encoder);
    t["train.lr_end"] = double_key(&R::train, &TrainConfig::lr_end);
    t["train.weight_decay_start"] = double_key(&R::train, &TrainConfig::weight_decay_start);
    t["train.weight_decay_end"] = double_key(&R::train, &TrainConfig::weight_decay_end);
    t["train.ema_start"] = double_key(&R::train, &TrainConfig::ema_start);
    t["train.queue_size"] = size_key(&R::train, &TrainConfig::queue_size);
    t["train.temperature"] = {[](R& c, const std::string& v) { c.train.loss.temperature = parse_double("", v); },
                              [](const R& c) { return fmt(c.train.loss.temperature); }};
    t["train.align_size"] = {[](R& c, const std::string& v) { c.train.loss.align_size = parse_u64("", v); },
                             [](const R& c) { return std::to_string(c.train.loss.align_size); }};
    t["train.fg_masking"] = {
        [](R& c, const std::string& v) {
          if (v == "all") {
            c.train.loss.masking = FgMasking::kAll;
          } else if (v == "fg") {
            c.train.loss.masking = FgMasking::kFg;
          } else if (v == "bg") {
            c.train.loss.masking = FgMasking::kBg;
          } else {
            bad_value("", v, "all|fg|bg");
          }
        },
        [](const R& c) {
          switch (c.train.loss.masking) {
            case FgMasking::kAll: return std::string("all");
            case FgMasking::kFg: return std::string("fg");
            case FgMasking::kBg: return std::string("bg");
          }
          return std::string();
        }};
    t["train.mean_over_masked"] = {[](R& c, const std::string& v) { c.train.loss.mean_over_masked = parse_bool("", v); },
                                   [](const R& c) { return std::string(c.train.loss.mean_over_masked ? "true" : "false"); }};
    t["train.encoder_trainable"] = {
        [](R& c, const std::string& v) { c.train.loss.encoder_trainable = parse_bool("", v); },
        [](const R& c) { return std::string(c.train.loss.encoder_trainable ? "true" : "false"); }};
    t["train.n_global"] = {[](R& c, const std::string& v) { c.train.crops.n_global = parse_u64("", v); },
                           [](const R& c) { return std::to_string(c.train.crops.n_global); }};
    t["train.n_local"] = {[](R& c, const std::string& v) { c.train.crops.n_local = parse_u64("", v); },
                          [](const R& c) { return std::to_string(c.train.crops.n_local); }};
    t["train.global_scale_min"] = {[](R& c, const std::string& v) { c.train.crops.global_scale.first = parse_double("", v); },
                                   [](const R& c) { return fmt(c.train.crops.global_scale.first); }};
    t["train.global_scale_max"] = {[](R& c, const std::string& v) { c.train.crops.global_scale.second = parse_double("", v); },
                                   [](const R& c) { return fmt(c.train.crops.global_scale.second); }};
    t["train.local_scale_min"] = {[](R& c, const std::string& v) { c.train.crops.local_scale.first = parse_double("", v); },
                                  [](const R& c) { return fmt(c.train.crops.local_scale.first); }};
    t["train.local_scale_max"] = {[](R& c, const std::string& v) { c.train.crops.local_scale.second = parse_double("", v); },
                                  [](const R& c) { return fmt(c.train.crops.local_scale.second); }};
    t["train.min_intersection"] = {[](R& c, const std::string& v) { c.train.crops.min_intersection = parse_double("", v); },
                                   [](const R& c) { return fmt(c.train.crops.min_intersection); }};
    t["train.global_tokens"] = size_key(&R::train, &TrainConfig::global_tokens);
    t["train.local_tokens"] = size_key(&R::train, &TrainConfig::local_tokens);
    t["train.jitter_channels"] = {[](R& c, const std::string& v) { c.train.augment.jitter_channels = parse_u64("", v); },
                                  [](const R& c) { return std::to_string(c.train.augment.jitter_channels); }};
    t["train.jitter_sigma"] = {[](R& c, const std::string& v) { c.train.augment.jitter_sigma = parse_double("", v); },
                               [](const R& c) { return fmt(c.train.augment.jitter_sigma); }};
    t["train.token_noise"] = {[](R& c, const std::string& v) { c.train.augment.token_noise = parse_double("", v); },
                              [](const R& c) { return fmt(c.train.augment.token_noise); }};
    t["train.mask_kernel"] = {[](R& c, const std::string& v) { c.train.mask.kernel = parse_u64("", v); },
                              [](const R& c) { return std::to_string(c.train.mask.kernel); }};
    t["train.mask_sigma"] = {[](R& c, const std::string& v) { c.train.mask.sigma = parse_double("", v); },
                             [](const R& c) { return fmt(c.train.mask.sigma); }};
    t["train.mask_mass"] = {[](R& c, const std::string& v) { c.train.mask.mass = parse_double("", v); },
                            [](const R& c) { return fmt(c.train.mask.mass); }};
    // sinkhorn
    t["sinkhorn.epsilon"] = {[](R& c, const std::string& v) { c.train.loss.sinkhorn.epsilon = parse_double("", v); },
                             [](const R& c) { return fmt(c.train.loss.sinkhorn.epsilon); }};
    t["sinkhorn.n_iters"] = {[](R& c, const std::string& v) { c.train.loss.sinkhorn.n_iters = parse_u64("", v); },
                             [](const R& c) { return std::to_string(c.train.loss.sinkhorn.n_iters); }};
    // cbfe
    t["cbfe.k"] = size_key(&R::cbfe, &CbfeConfig::k);
    t["cbfe.threshold"] = double_key(&R::cbfe, &CbfeConfig::threshold);
    t["cbfe.resolution"] = {
        [](R& c, const std::string& v) {
          if (v == "token") {
            c.cbfe.resolution = PrecisionResolution::kToken;
          } else if (v == "upsampled") {
            c.cbfe.resolution = PrecisionResolution::kUpsampled;
          } else {
            bad_value("", v, "token|upsampled");
          }
        },
        [](const R& c) {
          return std::string(c.cbfe.resolution == PrecisionResolution::kToken ? "token" : "upsampled");
        }};
    // cd
    t["cd.k"] = size_key(&R::cd, &CdConfig::k);
    t["cd.edge_threshold"] = double_key(&R::cd, &CdConfig::edge_threshold);
    t["cd.markov_time"] = double_key(&R::cd, &CdConfig::markov_time);
    t["cd.distance"] = size_key(&R::cd, &CdConfig::distance);
    // eval
    t["eval.n_seeds"] = size_key(&R::eval, &EvalConfig::n_seeds);
    t["eval.mask_size"] = size_key(&R::eval, &EvalConfig::mask_size);
    t["eval.overcluster_k"] = size_key(&R::eval, &EvalConfig::overcluster_k);
    t["eval.max_iter"] = size_key(&R::eval, &EvalConfig::max_iter);
    t["eval.probe_epochs"] = size_key(&R::eval, &EvalConfig::probe_epochs);
    t["eval.probe_lr"] = double_key(&R::eval, &EvalConfig::probe_lr);
    t["eval.n_classes"] = size_key(&R::eval, &EvalConfig::n_classes);
    // run
    t["run.seed"] = {[](R& c, const std::string& v) { c.seed = parse_u64("", v); },
                     [](const R& c) { return std::to_string(c.seed); }};
    t["run.threads"] = {[](R& c, const std::string& v) { c.threads = parse_u64("", v); },
                        [](const R& c) { return std::to_string(c.threads); }};
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  train.validate();
  const auto fail = [](const std::string& key, const std::string& why) { throw ValidationError(key + ": " + why); };
  if (cbfe.k == 0) fail("cbfe.k", "must be >= 1");
  if (!(cbfe.threshold >= 0.0 && cbfe.threshold <= 1.0)) fail("cbfe.threshold", "must lie in [0,1]");
  if (cd.k == 0) fail("cd.k", "must be >= 1");
  if (!(cd.edge_threshold >= 0.0 && cd.edge_threshold <= 1.0)) fail("cd.edge_threshold", "must lie in [0,1]");
  if (!(cd.markov_time > 0.0)) fail("cd.markov_time", "must be positive");
  if (cd.distance == 0) fail("cd.distance", "must be >= 1");
  if (eval.n_seeds == 0) fail("eval.n_seeds", "must be >= 1");
  if (eval.overcluster_k == 0) fail("eval.overcluster_k", "must be >= 1");
  if (eval.max_iter == 0) fail("eval.max_iter", "must be >= 1");
  if (!(eval.probe_lr > 0.0)) fail("eval.probe_lr", "must be positive");
  if (threads == 0) fail("run.threads", "must be >= 1");
}

SegParams RunConfig::seg_params(std::size_t n_classes) const {
  SegParams p;
  p.n_classes = n_classes;
  p.cbfe_k = cbfe.k;
  p.cbfe_threshold = cbfe.threshold;
  p.cd_k = cd.k;
  p.edge_threshold = cd.edge_threshold;
  p.markov_time = cd.markov_time;
  p.cooc_distance = cd.distance;
  p.mask_size = eval.mask_size;
  p.max_iter = eval.max_iter;
  p.seed = seed;
  p.threads = threads;
  return p;
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError("config: " + std::string(e.what()));
  }
  RunConfig cfg;
  cfg.train.seed = 0;
  const auto& table = key_table();
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw ValidationError(section + ": key outside a [section]");
    }
    for (const auto& [name, value] : keys) {
      const std::string key = section + "." + name;
      const auto it = table.find(key);
      if (it == table.end()) throw ValidationError(key + ": unknown key");
      try {
        it->second.set(cfg, value.data());
      } catch (const ValidationError& e) {
        // The setters do not know their key; re-raise with it.
        std::string msg = e.what();
        if (msg.rfind(": ", 0) == 0) msg = key + msg;
        throw ValidationError(msg);
      }
    }
  }
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  RunConfig cfg = parse_config(ss.str());
  apply_environment(cfg);
  return cfg;
}

void apply_environment(RunConfig& cfg) {
  if (const char* s = std::getenv("LEOPART_SEED"); s && *s) {
    cfg.seed = parse_u64("LEOPART_SEED", s);
    cfg.train.seed = cfg.seed;
  }
}

std::string format_config(const RunConfig& cfg) {
  std::ostringstream os;
  std::string current;
  for (const auto& [key, k] : key_table()) {
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) os << '\n';
      os << '[' << section << "]\n";
      current = section;
    }
    os << key.substr(dot + 1) << " = " << k.get(cfg) << '\n';
  }
  return os.str();
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(format_config(cfg))); }

}  // namespace leopart
