#include "leopart/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "leopart/error.hpp"
#include "leopart/rng.hpp"

namespace leopart {

void SynthSpec::validate() const {
  const auto fail = [](const std::string& field, const std::string& why) {
    throw ValidationError("synth." + field + ": " + why);
  };
  if (n_images == 0) fail("n_images", "must be >= 1");
  if (height < 3 || width < 3) fail("grid", "must be at least 3x3");
  if (n_objects == 0) fail("n_objects", "must be >= 1");
  if (parts_per_object == 0) fail("parts_per_object", "must be >= 1");
  if (n_bg_parts == 0) fail("n_bg_parts", "must be >= 1");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma", "must be >= 0");
  if (!(min_angle_deg >= 0.0 && min_angle_deg < 180.0)) fail("min_angle_deg", "must lie in [0,180)");
  if (objects_min == 0 || objects_min > objects_max) fail("objects_min", "need 1 <= objects_min <= objects_max");
  if (objects_max > n_objects) fail("objects_max", "cannot exceed n_objects");
  if (object_side_min < parts_per_object && object_side_max < parts_per_object) {
    fail("object_side_max", "objects must be long enough to hold every part");
  }
  if (object_side_min == 0 || object_side_min > object_side_max) fail("object_side_min", "need 1 <= min <= max");
  if (object_side_max > std::min(height, width)) fail("object_side_max", "larger than the grid");
  if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0)) fail("flip_fraction", "must lie in [0,1]");
  if (n_heads == 0) fail("n_heads", "must be >= 1");
  if (appearance_dims >= raw_dim) fail("appearance_dims", "must be smaller than raw_dim");
  if (!(appearance_sigma >= 0.0)) fail("appearance_sigma", "must be >= 0");
  if (retry_budget == 0) fail("retry_budget", "must be >= 1");
}

namespace {

MatD sample_prototypes(const SynthSpec& spec) {
  Rng rng = Rng::derive(spec.seed, 0x70726f74);
  const std::size_t n = spec.n_parts();
  const std::size_t dims = spec.raw_dim - spec.appearance_dims;
  const double max_cos = std::cos(spec.min_angle_deg * std::numbers::pi / 180.0);
  MatD protos = MatD::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.raw_dim));
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = false;
    for (std::size_t attempt = 0; attempt < spec.retry_budget && !ok; ++attempt) {
      Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(spec.raw_dim));
      for (std::size_t d = 0; d < dims; ++d) v(static_cast<Eigen::Index>(d)) = rng.normal();
      v.normalize();
      ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) ok = v.dot(protos.row(static_cast<Eigen::Index>(j))) <= max_cos;
      if (ok) protos.row(static_cast<Eigen::Index>(i)) = v;
    }
    if (!ok) {
      throw SamplingError("synth: could not place prototype " + std::to_string(i) + " at " +
                          std::to_string(spec.min_angle_deg) + " degrees separation within " +
                          std::to_string(spec.retry_budget) + " draws");
    }
  }
  return protos;
}

bool overlaps_with_gap(const PlacedObject& a, const PlacedObject& b) {
  // One free cell between objects keeps cross-object neighbours apart.
  return a.y0 < b.y1 + 1 && b.y0 < a.y1 + 1 && a.x0 < b.x1 + 1 && b.x0 < a.x1 + 1;
}

std::vector<PlacedObject> place_objects(const SynthSpec& spec, Rng& rng) {
  const std::size_t n = spec.objects_min + rng.below(spec.objects_max - spec.objects_min + 1);
  std::vector<std::size_t> classes(spec.n_objects);
  for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = c;
  rng.shuffle(classes.begin(), classes.end());
  std::vector<PlacedObject> placed;
  const std::size_t span = spec.object_side_max - spec.object_side_min + 1;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t attempt = 0; attempt < spec.retry_budget; ++attempt) {
      PlacedObject o;
      o.cls = classes[k];
      const std::size_t h = spec.object_side_min + rng.below(span);
      const std::size_t w = spec.object_side_min + rng.below(span);
      if (std::max(h, w) < spec.parts_per_object) continue;
      o.y0 = rng.below(spec.height - h + 1);
      o.x0 = rng.below(spec.width - w + 1);
      o.y1 = o.y0 + h;
      o.x1 = o.x0 + w;
      o.horizontal_strips = h > w || (h == w && rng.below(2) == 0);
      bool clash = false;
      for (const auto& p : placed) clash = clash || overlaps_with_gap(o, p);
      if (!clash) {
        placed.push_back(o);
        break;
      }
    }
    if (placed.size() <= k && k < spec.objects_min) {
      throw SamplingError("synth: could not place " + std::to_string(spec.objects_min) + " objects on a " +
                          std::to_string(spec.height) + "x" + std::to_string(spec.width) + " grid");
    }
  }
  return placed;
}

SynthImage make_image(const SynthSpec& spec, const MatD& protos, std::size_t index) {
  Rng rng = Rng::derive(spec.seed, 0x696d67, index);
  const std::size_t h = spec.height, w = spec.width;
  SynthImage img;
  img.layout = place_objects(spec, rng);
  img.objects = ClassMap(h, w, 0);
  img.parts = ClassMap(h, w, 0);
  img.fg = BinaryMask(h, w, 0);

  img.bg_split_y = 2 + rng.below(h - 3);
  img.bg_split_x = 2 + rng.below(w - 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t quadrant = (y >= img.bg_split_y ? 2 : 0) + (x >= img.bg_split_x ? 1 : 0);
      img.parts.at(y, x) = static_cast<std::uint8_t>(quadrant % spec.n_bg_parts);
    }
  }
  for (const auto& o : img.layout) {
    const std::size_t len = o.horizontal_strips ? o.y1 - o.y0 : o.x1 - o.x0;
    for (std::size_t y = o.y0; y < o.y1; ++y) {
      for (std::size_t x = o.x0; x < o.x1; ++x) {
        const std::size_t off = o.horizontal_strips ? y - o.y0 : x - o.x0;
        const std::size_t strip = off * spec.parts_per_object / len;
        img.parts.at(y, x) = static_cast<std::uint8_t>(object_part_id(spec, o.cls, strip));
        img.objects.at(y, x) = static_cast<std::uint8_t>(o.cls + 1);
        img.fg.at(y, x) = 1;
      }
    }
  }

  img.appearance.resize(spec.appearance_dims);
  for (auto& a : img.appearance) a = spec.appearance_sigma * rng.normal();
  const std::size_t base = spec.raw_dim - spec.appearance_dims;
  img.tokens = FeatureGrid(spec.raw_dim, h, w);
  std::vector<double> v(spec.raw_dim);
  for (std::size_t p = 0; p < h * w; ++p) {
    const auto part = static_cast<Eigen::Index>(img.parts.data[p]);
    double norm2 = 0.0;
    for (std::size_t d = 0; d < spec.raw_dim; ++d) {
      double x = protos(part, static_cast<Eigen::Index>(d)) + spec.noise_sigma * rng.normal();
      if (d >= base) x += img.appearance[d - base];
      v[d] = x;
      norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (std::size_t d = 0; d < spec.raw_dim; ++d) img.tokens.data[d * h * w + p] = static_cast<float>(v[d] * inv);
  }

  // Flip an exact fraction of cells, then build heads with mild per-head gain.
  img.flipped_hint = img.fg;
  std::vector<std::size_t> cells(h * w);
  for (std::size_t p = 0; p < cells.size(); ++p) cells[p] = p;
  rng.shuffle(cells.begin(), cells.end());
  const auto n_flip = static_cast<std::size_t>(std::llround(spec.flip_fraction * static_cast<double>(h * w)));
  for (std::size_t k = 0; k < n_flip; ++k) img.flipped_hint.data[cells[k]] ^= 1;
  img.attention = AttentionStack(spec.n_heads, h, w);
  for (std::size_t head = 0; head < spec.n_heads; ++head) {
    const double gain = rng.uniform(0.8, 1.2);
    for (std::size_t p = 0; p < h * w; ++p) {
      img.attention.data[head * h * w + p] =
          static_cast<float>(0.01 + gain * (img.flipped_hint.data[p] ? 1.0 : 0.0));
    }
  }
  return img;
}

}  // namespace

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  SynthDataset ds;
  ds.spec = spec;
  ds.prototypes = sample_prototypes(spec);
  ds.images.reserve(spec.n_images);
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < spec.n_images; ++i) {
    ds.images.push_back(make_image(spec, ds.prototypes, i));
    const auto& img = ds.images.back();
    const MatD rows = grid_to_rows(img.tokens).cast<double>();
    const MatD cos = rows * ds.prototypes.transpose();
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      Eigen::Index arg = 0;
      cos.row(r).maxCoeff(&arg);
      hit += static_cast<std::size_t>(arg) == img.parts.data[static_cast<std::size_t>(r)];
      ++total;
    }
  }
  ds.nearest_prototype_rate = static_cast<double>(hit) / static_cast<double>(total);
  if (spec.noise_sigma <= 0.1 && spec.min_angle_deg >= 60.0 && ds.nearest_prototype_rate < 0.99) {
    throw NumericError("synth: only " + std::to_string(ds.nearest_prototype_rate) +
                       " of tokens lie nearest their planted prototype");
  }
  return ds;
}

Tensor to_tensor(const FeatureGrid& g) { return Tensor({g.channels, g.height, g.width}, g.data); }
Tensor to_tensor(const ClassMap& m) { return Tensor({m.height, m.width}, m.data); }
Tensor to_tensor(const LabelMap& m) { return Tensor({m.height, m.width}, m.data); }

FeatureGrid feature_grid_from(const Tensor& t) {
  if (t.ndim() != 3) throw ValidationError("expected a C x H x W f32 tensor");
  FeatureGrid g(t.dim(0), t.dim(1), t.dim(2));
  const auto v = t.f32();
  std::copy(v.begin(), v.end(), g.data.begin());
  return g;
}

ClassMap class_map_from(const Tensor& t) {
  if (t.ndim() != 2) throw ValidationError("expected an H x W u8 tensor");
  ClassMap m(t.dim(0), t.dim(1));
  const auto v = t.u8();
  std::copy(v.begin(), v.end(), m.data.begin());
  return m;
}

LabelMap label_map_from(const Tensor& t) {
  if (t.ndim() != 2) throw ValidationError("expected an H x W u16 tensor");
  LabelMap m(t.dim(0), t.dim(1));
  const auto v = t.u16();
  std::copy(v.begin(), v.end(), m.data.begin());
  return m;
}

DatasetManifest write_dataset(const SynthDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  for (const char* sub : {"features", "attention", "masks", "parts"}) fs::create_directories(dir / sub);
  DatasetManifest m;
  m.base_dir = dir;
  m.token_grid = {ds.spec.height, ds.spec.width};
  m.feature_dim = ds.spec.raw_dim;

  std::ostringstream oracle;
  oracle.precision(9);
  oracle << "# planted prototypes: part_id values...\n";
  for (Eigen::Index p = 0; p < ds.prototypes.rows(); ++p) {
    oracle << "prototype " << p;
    for (Eigen::Index d = 0; d < ds.prototypes.cols(); ++d) oracle << ' ' << ds.prototypes(p, d);
    oracle << '\n';
  }
  oracle << "nearest_prototype_rate " << ds.nearest_prototype_rate << '\n';

  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto& img = ds.images[i];
    char id[32];
    std::snprintf(id, sizeof id, "img%05zu", i);
    ManifestRecord r;
    r.id = id;
    r.feature_path = fs::path("features") / (r.id + ".lpt");
    r.attention_path = fs::path("attention") / (r.id + ".lpt");
    r.mask_path = fs::path("masks") / (r.id + ".lpt");
    r.parts_path = fs::path("parts") / (r.id + ".lpt");
    write_tensor(to_tensor(img.tokens), dir / r.feature_path);
    write_tensor(Tensor({img.attention.channels, img.attention.height, img.attention.width}, img.attention.data),
                 dir / *r.attention_path);
    write_tensor(to_tensor(img.objects), dir / *r.mask_path);
    write_tensor(to_tensor(img.parts), dir / *r.parts_path);
    m.records.push_back(r);

    oracle << "image " << r.id << " bg_split " << img.bg_split_y << ' ' << img.bg_split_x << " appearance";
    for (double a : img.appearance) oracle << ' ' << a;
    oracle << '\n';
    for (const auto& o : img.layout) {
      oracle << "  object class " << o.cls << " box " << o.y0 << ' ' << o.x0 << ' ' << o.y1 << ' ' << o.x1
             << " strips " << (o.horizontal_strips ? "rows" : "cols") << '\n';
    }
  }
  std::ofstream os(dir / "oracle.txt", std::ios::binary);
  if (!os) throw IoError("cannot write " + (dir / "oracle.txt").string());
  os << oracle.str();
  save_manifest(m, dir / "manifest.txt");
  return m;
}

}  // namespace leopart
