#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "leopart/artifacts.hpp"
#include "leopart/cbfe.hpp"
#include "leopart/community.hpp"
#include "leopart/config.hpp"
#include "leopart/error.hpp"
#include "leopart/evaluation.hpp"
#include "leopart/kmeans.hpp"
#include "leopart/pipeline.hpp"
#include "leopart/render.hpp"
#include "leopart/synth.hpp"
#include "leopart/train.hpp"

namespace fs = std::filesystem;
using namespace leopart;

namespace {

struct Context {
  RunConfig cfg;
  std::string hash;
  bool force = false;
  std::string command_line;
};

// Refuses inputs produced under another configuration unless --force.
void check_hash(const Context& ctx, const std::string& what, const std::string& found) {
  if (found.empty() || found == ctx.hash) return;
  if (ctx.force) {
    std::cerr << "warning: " << what << " was produced with config " << found << ", current is " << ctx.hash << '\n';
    return;
  }
  throw ValidationError(what + ": config hash " + found + " differs from current " + ctx.hash +
                        " (pass --force to override)");
}

std::vector<std::string> record_ids(const DatasetManifest& m) {
  std::vector<std::string> ids;
  for (const auto& r : m.records) ids.push_back(r.id);
  return ids;
}

std::vector<FeatureGrid> features_for(const Context& ctx, const EvalData& data, const std::string& checkpoint) {
  if (checkpoint.empty()) return data.tokens;
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  check_hash(ctx, checkpoint, hex64(ckpt.config_hash));
  return encode_all(data.tokens, get_model(ckpt, "teacher."));
}

std::size_t infer_classes(const Context& ctx, const std::vector<ClassMap>& gt) {
  if (ctx.cfg.eval.n_classes) return ctx.cfg.eval.n_classes;
  std::size_t n = 0;
  for (const auto& m : gt) {
    for (auto v : m.data) {
      if (v != kIgnoreLabel) n = std::max<std::size_t>(n, v + 1u);
    }
  }
  if (n == 0) throw ValidationError("eval.n_classes: no labelled pixels to infer the class count from");
  return n;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void ensure_dir(const fs::path& p) { fs::create_directories(p); }

int cmd_gen(const Context& ctx, const std::string& out) {
  SynthSpec spec = ctx.cfg.synth;
  const SynthDataset ds = generate(spec);
  ensure_dir(out);
  write_dataset(ds, out);
  write_run_manifest(out, ctx.command_line, ctx.hash,
                     {fs::path(out) / "manifest.txt", fs::path(out) / "oracle.txt", fs::path(out) / "features",
                      fs::path(out) / "attention", fs::path(out) / "masks", fs::path(out) / "parts"});
  std::printf("generated %zu images (%zu parts, nearest-prototype rate %.4f) in %s\n", ds.images.size(),
              spec.n_parts(), ds.nearest_prototype_rate, out.c_str());
  return 0;
}

int cmd_train(const Context& ctx, const std::string& data_path, const std::string& out, const std::string& resume,
              std::size_t steps) {
  const DatasetManifest m = load_manifest(data_path);
  const EvalData data = eval_data_from(m, ctx.cfg.train.mask);
  const auto images = train_images_from(data);
  TrainState state;
  if (!resume.empty()) {
    const Checkpoint ckpt = read_checkpoint(resume);
    check_hash(ctx, resume, hex64(ckpt.config_hash));
    state = from_checkpoint(ckpt, ctx.cfg.train);
  } else {
    state = init_train_state(ctx.cfg.train, m.feature_dim);
  }
  const std::size_t total = ctx.cfg.train.total_steps(images.size());
  train(images, ctx.cfg.train, state, steps, [&](const TrainState& s) {
    if (s.step % 50 == 0 || s.step == total) std::printf("step %zu loss %.6f\n", s.step, s.losses.back());
  });
  ensure_dir(out);
  const std::uint64_t hash_value = std::stoull(ctx.hash, nullptr, 16);
  write_checkpoint(to_checkpoint(state, hash_value), fs::path(out) / "checkpoint.lpc");
  write_loss_csv(state.losses, fs::path(out) / "loss.csv", hash_header(ctx.hash));
  write_run_manifest(out, ctx.command_line, ctx.hash, {fs::path(out) / "checkpoint.lpc", fs::path(out) / "loss.csv"});
  std::printf("trained %zu steps; final loss %.6f\n", state.step, state.losses.empty() ? 0.0 : state.losses.back());
  return 0;
}

int cmd_cluster(const Context& ctx, const std::string& data_path, const std::string& checkpoint,
                const std::string& fg_dir, std::size_t k, const std::string& out) {
  const DatasetManifest m = load_manifest(data_path);
  const EvalData data = eval_data_from(m, ctx.cfg.train.mask);
  const auto features = features_for(ctx, data, checkpoint);
  SegParams sp = ctx.cfg.seg_params(0);
  MapSet set;
  set.kind = "clusters";
  set.config_hash = ctx.hash;
  set.ids = record_ids(m);
  if (!fg_dir.empty()) {
    const MapSet fg = read_map_set(fg_dir);
    check_hash(ctx, fg_dir, fg.config_hash);
    if (k == 0) k = ctx.cfg.cd.k;
    set.maps = cluster_foreground(features, masks_of(fg), k, sp);
  } else {
    if (k == 0) k = ctx.cfg.cbfe.k;
    KMeansParams kp;
    kp.k = k;
    kp.n_seeds = 1;
    kp.max_iter = ctx.cfg.eval.max_iter;
    kp.seed = ctx.cfg.seed;
    kp.threads = ctx.cfg.threads;
    const KMeansResult km = kmeans(stack_tokens(features), kp);
    set.maps = labels_to_maps(km.labels, features);
    ensure_dir(out);
    MatF c = km.centroids.cast<float>();
    write_tensor(Tensor({static_cast<std::size_t>(c.rows()), static_cast<std::size_t>(c.cols())},
                        std::vector<float>(c.data(), c.data() + c.size())),
                 fs::path(out) / "centroids.lpt");
    std::printf("k-means K=%zu inertia %.6f after %zu iterations\n", k, km.inertia, km.iterations);
  }
  set.n_labels = k;
  write_map_set(set, out);
  write_run_manifest(out, ctx.command_line, ctx.hash, {fs::path(out) / "index.txt", fs::path(out) / "maps"});
  std::printf("wrote %zu cluster maps to %s\n", set.maps.size(), out.c_str());
  return 0;
}

int cmd_cbfe(const Context& ctx, const std::string& data_path, const std::string& clusters_dir,
             const std::string& checkpoint, const std::string& out) {
  const DatasetManifest m = load_manifest(data_path);
  const EvalData data = eval_data_from(m, ctx.cfg.train.mask);
  require(!data.hints.empty(), "cbfe: the manifest has no attention maps");
  const MapSet clusters = read_map_set(clusters_dir);
  check_hash(ctx, clusters_dir, clusters.config_hash);

  ClusterPrecision prec;
  if (ctx.cfg.cbfe.resolution == PrecisionResolution::kUpsampled && ctx.cfg.eval.mask_size > 0) {
    // Precision at mask resolution: features upsampled bilinearly, then nearest centroid.
    const Tensor ct = read_tensor(fs::path(clusters_dir) / "centroids.lpt");
    MatD centroids(static_cast<Eigen::Index>(ct.dim(0)), static_cast<Eigen::Index>(ct.dim(1)));
    for (Eigen::Index i = 0; i < centroids.size(); ++i) centroids.data()[i] = ct.f32()[static_cast<std::size_t>(i)];
    const auto features = features_for(ctx, data, checkpoint);
    const std::size_t s = ctx.cfg.eval.mask_size;
    const auto maps = upsampled_cluster_maps(features, centroids, s, s, ctx.cfg.threads);
    std::vector<BinaryMask> hints;
    for (const auto& h : data.hints) hints.push_back(resize_nearest(h, s, s));
    prec = cluster_precision(maps, hints, clusters.n_labels);
  } else {
    prec = cluster_precision(clusters.maps, data.hints, clusters.n_labels);
  }
  for (const auto& w : prec.warnings) std::cerr << "warning: " << w << '\n';
  const ForegroundMap fm = build_theta(prec.precision, ctx.cfg.cbfe.threshold);
  std::vector<BinaryMask> masks;
  std::vector<std::string> warnings;
  for (const auto& c : clusters.maps) masks.push_back(extract_foreground(c, fm, &warnings));
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  ensure_dir(out);
  write_text_file(fs::path(out) / "theta.txt", hash_header(ctx.hash) + format_foreground_map(fm));
  write_map_set(mask_set(masks, clusters.ids, ctx.hash), fs::path(out) / "foreground");
  write_run_manifest(out, ctx.command_line, ctx.hash, {fs::path(out) / "theta.txt", fs::path(out) / "foreground"});
  std::printf("cbfe: %zu of %zu clusters foreground at c=%.2f\n", fm.n_foreground(), fm.size(), fm.threshold);
  return 0;
}

int cmd_cooc(const Context& ctx, const std::string& clusters_dir, const std::string& out) {
  const MapSet clusters = read_map_set(clusters_dir);
  check_hash(ctx, clusters_dir, clusters.config_hash);
  const CoocGraph g = cooccurrence_graph(clusters.maps, clusters.n_labels, ctx.cfg.cd.distance);
  const fs::path dir = fs::path(out).parent_path().empty() ? fs::path(".") : fs::path(out).parent_path();
  ensure_dir(dir);
  write_text_file(out, hash_header(ctx.hash) + format_graph(g));
  write_run_manifest(dir, ctx.command_line, ctx.hash, {out}, fs::path(out).filename().string() + ".manifest.txt");
  std::printf("co-occurrence graph: %zu nodes, %zu edges\n", g.n_nodes, g.edges.size());
  return 0;
}

int cmd_communities(const Context& ctx, const std::string& graph_path, const std::string& clusters_dir,
                    std::size_t target, const std::string& out) {
  const std::string text = read_text_file(graph_path);
  check_hash(ctx, graph_path, find_hash_header(text).value_or(""));
  if (target == 0) {
    require(ctx.cfg.eval.n_classes > 1, "communities: pass --target or set eval.n_classes (background included)");
    target = ctx.cfg.eval.n_classes - 1;
  }
  const CoocGraph g = filter_edges(parse_graph(text), ctx.cfg.cd.edge_threshold);
  CommunityParams cp;
  cp.target = target;
  cp.markov_time = ctx.cfg.cd.markov_time;
  cp.seed = ctx.cfg.seed;
  const CommunityResult res = detect_communities(g, cp);
  ensure_dir(out);
  std::vector<fs::path> outputs{fs::path(out) / "partition.txt"};
  write_text_file(outputs[0], hash_header(ctx.hash) + format_partition(res.partition));
  if (!clusters_dir.empty()) {
    const MapSet clusters = read_map_set(clusters_dir);
    check_hash(ctx, clusters_dir, clusters.config_hash);
    MapSet seg;
    seg.kind = "segmentation";
    seg.config_hash = ctx.hash;
    seg.n_labels = res.partition.n_communities + 1;
    seg.ids = clusters.ids;
    std::vector<std::string> warnings;
    seg.maps = merge_by_communities(clusters.maps, res.partition,
                                    static_cast<std::uint16_t>(res.partition.n_communities), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    write_map_set(seg, fs::path(out) / "segmentation");
    outputs.push_back(fs::path(out) / "segmentation");
  }
  write_run_manifest(out, ctx.command_line, ctx.hash, outputs);
  std::printf("communities: found %zu, merged %zu times to %zu; codelength %.6f bits\n", res.found, res.merges,
              res.partition.n_communities, res.codelength);
  return 0;
}

void write_report(const std::string& out, const std::string& hash, const std::string& text, const std::string& csv) {
  if (out.empty()) return;
  ensure_dir(out);
  write_text_file(fs::path(out) / "report.txt", hash_header(hash) + text);
  write_text_file(fs::path(out) / "report.csv", hash_header(hash) + csv);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct EvalArgs {
  std::string protocol, data, checkpoint, clusters, partition, fg, val, out;
};

int cmd_eval(const Context& ctx, const EvalArgs& a) {
  const DatasetManifest m = load_manifest(a.data);
  const EvalData data = eval_data_from(m, ctx.cfg.train.mask);
  require(!data.objects.empty(), "eval: the manifest has no ground-truth masks");
  const std::size_t n_classes = infer_classes(ctx, data.objects);
  std::ostringstream text, csv;

  if (a.protocol == "overcluster") {
    const auto features = features_for(ctx, data, a.checkpoint);
    OverclusterParams op;
    op.k = ctx.cfg.eval.overcluster_k;
    op.n_classes = n_classes;
    op.n_seeds = ctx.cfg.eval.n_seeds;
    op.max_iter = ctx.cfg.eval.max_iter;
    op.seed = ctx.cfg.seed;
    op.mask_size = ctx.cfg.eval.mask_size;
    op.threads = ctx.cfg.threads;
    const OverclusterReport rep = overcluster_eval(features, data.objects, op);
    text << "protocol overcluster K=" << op.k << " seeds=" << op.n_seeds << '\n';
    csv << "class,iou\n";
    for (std::size_t c = 0; c < n_classes; ++c) {
      text << "class " << c << " IoU " << fmt("%.4f", rep.per_class_iou[c]) << '\n';
      csv << c << ',' << fmt("%.6f", rep.per_class_iou[c]) << '\n';
    }
    text << "mIoU " << fmt("%.4f", rep.mean) << " +- " << fmt("%.4f", rep.std) << '\n';
    csv << "mean," << fmt("%.6f", rep.mean) << "\nstd," << fmt("%.6f", rep.std) << '\n';
  } else if (a.protocol == "probe") {
    auto features = features_for(ctx, data, a.checkpoint);
    std::vector<FeatureGrid> train_f, val_f;
    std::vector<ClassMap> train_g, val_g;
    if (!a.val.empty()) {
      const DatasetManifest vm = load_manifest(a.val);
      const EvalData vd = eval_data_from(vm, ctx.cfg.train.mask);
      require(!vd.objects.empty(), "eval: the validation manifest has no masks");
      train_f = features;
      train_g = data.objects;
      val_f = features_for(ctx, vd, a.checkpoint);
      val_g = vd.objects;
    } else {
      // Without a separate split, the last fifth of the records is held out.
      const std::size_t n_val = std::max<std::size_t>(1, features.size() / 5);
      require(features.size() > n_val, "eval: need at least two records for a probe split");
      for (std::size_t i = 0; i < features.size(); ++i) {
        const bool val = i >= features.size() - n_val;
        (val ? val_f : train_f).push_back(features[i]);
        (val ? val_g : train_g).push_back(data.objects[i]);
      }
    }
    ProbeParams pp;
    pp.n_classes = n_classes;
    pp.epochs = ctx.cfg.eval.probe_epochs;
    pp.lr = ctx.cfg.eval.probe_lr;
    pp.mask_size = ctx.cfg.eval.mask_size;
    pp.seed = ctx.cfg.seed;
    const ProbeReport rep = linear_probe(train_f, train_g, val_f, val_g, pp);
    text << "protocol probe epochs=" << pp.epochs << " lr=" << pp.lr << '\n';
    csv << "class,iou\n";
    for (std::size_t c = 0; c < n_classes; ++c) {
      text << "class " << c << " IoU " << fmt("%.4f", rep.val.per_class_iou[c]) << '\n';
      csv << c << ',' << fmt("%.6f", rep.val.per_class_iou[c]) << '\n';
    }
    text << "train accuracy " << fmt("%.4f", rep.train_accuracy) << '\n';
    text << "mIoU " << fmt("%.4f", rep.val.miou) << '\n';
    csv << "mean," << fmt("%.6f", rep.val.miou) << '\n';
  } else if (a.protocol == "unsup-seg") {
    require(!a.clusters.empty() && !a.partition.empty(), "eval: unsup-seg needs --clusters and --partition");
    const MapSet clusters = read_map_set(a.clusters);
    check_hash(ctx, a.clusters, clusters.config_hash);
    const std::string ptext = read_text_file(a.partition);
    check_hash(ctx, a.partition, find_hash_header(ptext).value_or(""));
    const Partition p = parse_partition(ptext);
    if (p.n_communities + 1 != n_classes) {
      throw ValidationError("eval.n_classes: unsup-seg needs exactly " + std::to_string(n_classes - 1) +
                            " communities plus background, partition has " + std::to_string(p.n_communities));
    }
    const auto seg = merge_by_communities(clusters.maps, p, static_cast<std::uint16_t>(p.n_communities));
    const MatchedMiou mm = hungarian_miou(seg, resize_masks(data.objects, ctx.cfg.eval.mask_size), n_classes, n_classes);
    text << "protocol unsup-seg communities=" << p.n_communities << '\n';
    csv << "class,iou\n";
    for (std::size_t c = 0; c < n_classes; ++c) {
      text << "class " << c << " IoU " << fmt("%.4f", mm.result.per_class_iou[c]) << '\n';
      csv << c << ',' << fmt("%.6f", mm.result.per_class_iou[c]) << '\n';
    }
    text << "mIoU " << fmt("%.4f", mm.result.miou) << '\n';
    csv << "mean," << fmt("%.6f", mm.result.miou) << '\n';
  } else if (a.protocol == "fg") {
    require(!a.fg.empty(), "eval: fg needs --fg");
    const MapSet fg = read_map_set(a.fg);
    check_hash(ctx, a.fg, fg.config_hash);
    const auto masks = masks_of(fg);
    double bf1 = 0.0;
    for (std::size_t i = 0; i < masks.size(); ++i) bf1 += boundary_f1(masks[i], data.fg_truth.at(i));
    bf1 /= static_cast<double>(masks.size());
    const double jac = jaccard(masks, data.fg_truth);
    text << "protocol fg\n";
    text << "Jaccard " << fmt("%.4f", jac) << '\n' << "Boundary-F1 " << fmt("%.4f", bf1) << '\n';
    csv << "metric,value\njaccard," << fmt("%.6f", jac) << "\nboundary_f1," << fmt("%.6f", bf1) << '\n';
    if (!data.hints.empty()) {
      const double hint = jaccard(data.hints, data.fg_truth);
      text << "hint Jaccard " << fmt("%.4f", hint) << '\n';
      csv << "hint_jaccard," << fmt("%.6f", hint) << '\n';
    }
  } else {
    throw ValidationError("eval: unknown protocol '" + a.protocol + "'");
  }
  std::cout << text.str();
  write_report(a.out, ctx.hash, text.str(), csv.str());
  if (!a.out.empty()) {
    write_run_manifest(a.out, ctx.command_line, ctx.hash,
                       {fs::path(a.out) / "report.txt", fs::path(a.out) / "report.csv"});
  }
  return 0;
}

int cmd_render(const std::string& input, const std::string& out, std::size_t scale) {
  if (fs::is_directory(input)) {
    const MapSet set = read_map_set(input);
    ensure_dir(out);
    for (std::size_t i = 0; i < set.maps.size(); ++i) write_ppm(set.maps[i], fs::path(out) / (set.ids[i] + ".ppm"), scale);
    std::printf("rendered %zu maps to %s\n", set.maps.size(), out.c_str());
    return 0;
  }
  const Tensor t = read_tensor(input);
  LabelMap m;
  if (t.dtype() == DType::kU16) {
    m = label_map_from(t);
  } else if (t.dtype() == DType::kU8) {
    const ClassMap c = class_map_from(t);
    m = LabelMap(c.height, c.width);
    for (std::size_t p = 0; p < c.size(); ++p) m.data[p] = c.data[p];
  } else {
    throw ValidationError("render: expected a u8 or u16 label map");
  }
  write_ppm(m, out, scale);
  std::printf("rendered %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-level clustering, foreground extraction and community detection"};
  app.require_subcommand(1);
  std::string config_path;
  std::size_t threads = 0;
  bool force = false;
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--threads", threads, "worker threads for deterministic-safe stages");
  app.add_flag("--force", force, "accept inputs produced under a different config");

  std::string out, data, checkpoint, resume, clusters, fg, graph, partition, val, protocol, input;
  std::size_t steps = 0, k = 0, target = 0, scale = 1;

  auto* gen = app.add_subcommand("gen", "generate the planted synthetic dataset");
  gen->add_option("--out", out, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train encoder, head and prototypes");
  train_cmd->add_option("--data", data, "dataset manifest")->required();
  train_cmd->add_option("--out", out, "output directory")->required();
  train_cmd->add_option("--resume", resume, "checkpoint to resume from");
  train_cmd->add_option("--steps", steps, "stop after this many total steps");

  auto* cluster = app.add_subcommand("cluster", "k-means over spatial tokens");
  cluster->add_option("--data", data, "dataset manifest")->required();
  cluster->add_option("--checkpoint", checkpoint, "trained checkpoint (raw tokens when omitted)");
  cluster->add_option("--fg", fg, "foreground map set; only foreground tokens are clustered");
  cluster->add_option("--k", k, "number of clusters (default cbfe.k, or cd.k with --fg)");
  cluster->add_option("--out", out, "output directory")->required();

  auto* cbfe = app.add_subcommand("cbfe", "cluster-based foreground extraction");
  cbfe->add_option("--data", data, "dataset manifest")->required();
  cbfe->add_option("--clusters", clusters, "cluster map set")->required();
  cbfe->add_option("--checkpoint", checkpoint, "checkpoint used for the clustering");
  cbfe->add_option("--out", out, "output directory")->required();

  auto* cooc = app.add_subcommand("cooc", "cluster co-occurrence graph");
  cooc->add_option("--clusters", clusters, "cluster map set")->required();
  cooc->add_option("--out", out, "graph file")->required();

  auto* comm = app.add_subcommand("communities", "community detection on the co-occurrence graph");
  comm->add_option("--graph", graph, "graph file")->required();
  comm->add_option("--clusters", clusters, "cluster map set to merge");
  comm->add_option("--target", target, "number of communities (default eval.n_classes - 1)");
  comm->add_option("--out", out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluation protocols");
  eval->add_option("--protocol", protocol, "overcluster | probe | unsup-seg | fg")
      ->required()
      ->check(CLI::IsMember({"overcluster", "probe", "unsup-seg", "fg"}));
  eval->add_option("--data", data, "dataset manifest")->required();
  eval->add_option("--checkpoint", checkpoint, "trained checkpoint");
  eval->add_option("--clusters", clusters, "cluster map set (unsup-seg)");
  eval->add_option("--partition", partition, "partition file (unsup-seg)");
  eval->add_option("--fg", fg, "foreground map set (fg)");
  eval->add_option("--val", val, "validation manifest (probe)");
  eval->add_option("--out", out, "report directory");

  auto* render = app.add_subcommand("render", "label maps to PPM images");
  render->add_option("--input", input, "map set directory or a single label tensor")->required();
  render->add_option("--out", out, "output directory (map set) or .ppm file")->required();
  render->add_option("--scale", scale, "pixels per cell");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return 2;
  }

  try {
    Context ctx;
    ctx.cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (config_path.empty()) apply_environment(ctx.cfg);
    if (threads) ctx.cfg.threads = threads;
    ctx.cfg.validate();
    // Thread count does not change results, so it stays out of the hash.
    RunConfig hashed = ctx.cfg;
    hashed.threads = 1;
    ctx.hash = config_hash(hashed);
    ctx.force = force;
    ctx.command_line = "leopart";
    for (int i = 1; i < argc; ++i) ctx.command_line += " " + std::string(argv[i]);

    if (*gen) return cmd_gen(ctx, out);
    if (*train_cmd) return cmd_train(ctx, data, out, resume, steps);
    if (*cluster) return cmd_cluster(ctx, data, checkpoint, fg, k, out);
    if (*cbfe) return cmd_cbfe(ctx, data, clusters, checkpoint, out);
    if (*cooc) return cmd_cooc(ctx, clusters, out);
    if (*comm) return cmd_communities(ctx, graph, clusters, target, out);
    if (*eval) return cmd_eval(ctx, {protocol, data, checkpoint, clusters, partition, fg, val, out});
    if (*render) return cmd_render(input, out, scale);
  } catch (const leopart::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
