#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "leopart/error.hpp"
#include "leopart/synth.hpp"

using namespace leopart;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec s;
  s.n_images = 12;
  s.seed = seed;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Synth, NoiselessTokensAreTheirPrototypes) {
  SynthSpec s = small_spec(1);
  s.noise_sigma = 0.0;
  s.appearance_dims = 0;
  const auto ds = generate(s);
  EXPECT_DOUBLE_EQ(ds.nearest_prototype_rate, 1.0);
  for (const auto& img : ds.images) {
    for (std::size_t p = 0; p < img.parts.size(); ++p) {
      for (std::size_t d = 0; d < s.raw_dim; ++d) {
        EXPECT_NEAR(img.tokens.data[d * img.parts.size() + p],
                    ds.prototypes(img.parts.data[p], static_cast<Eigen::Index>(d)), 1e-6);
      }
    }
  }
}

TEST(Synth, PrototypesSeparatedAndUnit) {
  const auto ds = generate(small_spec(2));
  const double max_cos = std::cos(60.0 * std::numbers::pi / 180.0);
  const auto n = ds.prototypes.rows();
  EXPECT_EQ(static_cast<std::size_t>(n), ds.spec.n_parts());
  for (Eigen::Index i = 0; i < n; ++i) {
    EXPECT_NEAR(ds.prototypes.row(i).norm(), 1.0, 1e-12);
    // The appearance channels carry no prototype signal.
    EXPECT_EQ(ds.prototypes.row(i).tail(static_cast<Eigen::Index>(ds.spec.appearance_dims)).norm(), 0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) EXPECT_LE(ds.prototypes.row(i).dot(ds.prototypes.row(j)), max_cos + 1e-12);
  }
}

TEST(Synth, DefaultNoiseKeepsTokensNearTheirPart) {
  const auto ds = generate(small_spec(3));
  EXPECT_GE(ds.nearest_prototype_rate, 0.99);
}

TEST(Synth, ByteIdenticalForEqualSeeds) {
  const auto a = generate(small_spec(4)), b = generate(small_spec(4));
  ASSERT_EQ(a.images.size(), b.images.size());
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    EXPECT_EQ(a.images[i].tokens.data, b.images[i].tokens.data);
    EXPECT_EQ(a.images[i].attention.data, b.images[i].attention.data);
    EXPECT_EQ(a.images[i].parts.data, b.images[i].parts.data);
  }
  const fs::path root = fs::temp_directory_path() / "leopart_synth_det";
  fs::remove_all(root);
  write_dataset(a, root / "a");
  write_dataset(b, root / "b");
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    EXPECT_EQ(slurp(e.path()), slurp(root / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 4 * a.images.size());
  fs::remove_all(root);
  EXPECT_NE(generate(small_spec(5)).images[0].tokens.data, a.images[0].tokens.data);
}

TEST(Synth, ObjectsAreStripedAndSeparated) {
  const auto ds = generate(small_spec(6));
  const auto& s = ds.spec;
  for (const auto& img : ds.images) {
    EXPECT_GE(img.layout.size(), s.objects_min);
    EXPECT_LE(img.layout.size(), s.objects_max);
    for (std::size_t p = 0; p < img.fg.size(); ++p) EXPECT_EQ(img.fg.data[p], img.objects.data[p] > 0);
    for (const auto& o : img.layout) {
      // Every part appears, and consecutive parts touch.
      std::vector<bool> seen(s.parts_per_object, false);
      for (std::size_t y = o.y0; y < o.y1; ++y) {
        for (std::size_t x = o.x0; x < o.x1; ++x) {
          const std::size_t part = img.parts.at(y, x);
          ASSERT_GE(part, object_part_id(s, o.cls, 0));
          const std::size_t strip = part - object_part_id(s, o.cls, 0);
          ASSERT_LT(strip, s.parts_per_object);
          seen[strip] = true;
          const std::size_t ny = o.horizontal_strips ? y + 1 : y, nx = o.horizontal_strips ? x : x + 1;
          if (ny < o.y1 && nx < o.x1) {
            const std::size_t next = img.parts.at(ny, nx) - object_part_id(s, o.cls, 0);
            EXPECT_TRUE(next == strip || next == strip + 1);
          }
        }
      }
      for (bool b : seen) EXPECT_TRUE(b);
    }
    // No two different objects are 8-adjacent.
    for (std::size_t y = 0; y < s.height; ++y) {
      for (std::size_t x = 0; x < s.width; ++x) {
        const auto c = img.objects.at(y, x);
        if (c == 0) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<long>(s.height) || xx >= static_cast<long>(s.width)) continue;
            const auto o = img.objects.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            EXPECT_TRUE(o == 0 || o == c);
          }
        }
      }
    }
  }
}

TEST(Synth, ExactFlipCount) {
  for (double f : {0.0, 0.1, 0.25}) {
    SynthSpec s = small_spec(7);
    s.flip_fraction = f;
    const auto ds = generate(s);
    const auto expect = static_cast<std::size_t>(std::llround(f * static_cast<double>(s.height * s.width)));
    for (const auto& img : ds.images) {
      std::size_t diff = 0;
      for (std::size_t p = 0; p < img.fg.size(); ++p) diff += img.fg.data[p] != img.flipped_hint.data[p];
      EXPECT_EQ(diff, expect);
      const std::size_t plane = img.fg.size();
      for (std::size_t h = 0; h < s.n_heads; ++h) {
        for (std::size_t p = 0; p < plane; ++p) EXPECT_EQ(img.attention.data[h * plane + p] > 0.5f, img.flipped_hint.data[p] != 0);
      }
    }
  }
}

TEST(Synth, ValidationNamesTheField) {
  const auto expect_field = [](SynthSpec s, const std::string& field) {
    try {
      s.validate();
      ADD_FAILURE() << field;
    } catch (const ValidationError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  SynthSpec s;
  s.flip_fraction = 1.5;
  expect_field(s, "flip_fraction");
  s = {};
  s.objects_min = 4;
  expect_field(s, "objects_min");
  s = {};
  s.appearance_dims = 40;
  expect_field(s, "appearance_dims");
}

TEST(Synth, UnseparablePrototypesRaiseSampling) {
  SynthSpec s = small_spec(8);
  s.raw_dim = 4;
  s.appearance_dims = 0;
  s.min_angle_deg = 80.0;
  s.retry_budget = 20;
  EXPECT_THROW(generate(s), SamplingError);
}
