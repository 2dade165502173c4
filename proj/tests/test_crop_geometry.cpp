#include <gtest/gtest.h>

#include "leopart/crop_geometry.hpp"
#include "leopart/error.hpp"
#include "oracles.hpp"

using namespace leopart;

namespace {

Grid<double> random_grid(Rng& rng, std::size_t c, std::size_t h, std::size_t w) {
  Grid<double> g(c, h, w);
  for (auto& v : g.data) v = rng.normal();
  return g;
}

CropBox random_box(Rng& rng) {
  CropBox b;
  const double w = rng.uniform(0.05, 1.0), h = rng.uniform(0.05, 1.0);
  b.x0 = rng.uniform(0.0, 1.0 - w);
  b.y0 = rng.uniform(0.0, 1.0 - h);
  b.x1 = std::min(1.0, b.x0 + w);
  b.y1 = std::min(1.0, b.y0 + h);
  return b;
}

double dot(const Grid<double>& a, const Grid<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

}  // namespace

TEST(CropBoxes, IntersectionInLocalCoordinates) {
  const CropBox a{0, 0, 0.5, 0.5}, b{0.25, 0.25, 1, 1};
  const BoxMatrix m({a, b});
  ASSERT_TRUE(m.at(0, 1).has_value());
  const CropBox& ab = *m.at(0, 1);
  EXPECT_DOUBLE_EQ(ab.x0, 0.5);
  EXPECT_DOUBLE_EQ(ab.y0, 0.5);
  EXPECT_DOUBLE_EQ(ab.x1, 1.0);
  EXPECT_DOUBLE_EQ(ab.y1, 1.0);

  // Pixel-membership cross-check on a 100 x 100 image: pixel centres in
  // A and B, expressed in A's frame, fill exactly the local box.
  const int n = 100;
  int inside = 0, predicted = 0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double px = (x + 0.5) / n, py = (y + 0.5) / n;
      const bool in_a = px >= a.x0 && px < a.x1 && py >= a.y0 && py < a.y1;
      const bool in_b = px >= b.x0 && px < b.x1 && py >= b.y0 && py < b.y1;
      if (!in_a) continue;
      const double lx = (px - a.x0) / a.width(), ly = (py - a.y0) / a.height();
      const bool in_local = lx >= ab.x0 && lx < ab.x1 && ly >= ab.y0 && ly < ab.y1;
      inside += in_b;
      predicted += in_local;
      EXPECT_EQ(in_b, in_local);
    }
  }
  EXPECT_EQ(inside, 25 * 25);
  EXPECT_EQ(predicted, inside);
}

TEST(CropBoxes, FullGlobalsGiveFullEntries) {
  const BoxMatrix m({CropBox::full(), CropBox::full()});
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      ASSERT_TRUE(m.at(i, j).has_value());
      EXPECT_TRUE(m.at(i, j)->same_region(CropBox::full()));
    }
  }
}

TEST(CropBoxes, DisjointCropsHaveNoEntry) {
  const BoxMatrix m({CropBox{0, 0, 0.5, 0.5}, CropBox{0.5, 0.5, 1, 1}});
  EXPECT_FALSE(m.at(0, 1).has_value());
  EXPECT_FALSE(m.at(1, 0).has_value());
}

TEST(CropBoxes, SampledSpecHonoursOverlap) {
  CropSpec spec;
  spec.n_global = 2;
  spec.n_local = 4;
  spec.min_intersection = 0.01;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const CropSet set = sample_crops(spec, seed);
    ASSERT_EQ(set.crops.size(), 6u);
    EXPECT_EQ(set.crops[0].kind, CropKind::kGlobal);
    EXPECT_EQ(set.crops[5].kind, CropKind::kLocal);
    for (std::size_t g = 0; g < 2; ++g) {
      for (std::size_t o = 0; o < 6; ++o) {
        if (o == g) continue;
        const auto inter = intersect(set.crops[g], set.crops[o]);
        ASSERT_TRUE(inter.has_value());
        EXPECT_GE(inter->area(), 0.01 - 1e-12);
      }
    }
    for (const auto& c : set.crops) EXPECT_TRUE(c.valid());
    // Presence is symmetric; the diagonal is the full crop.
    for (std::size_t i = 0; i < 6; ++i) {
      ASSERT_TRUE(set.boxes.at(i, i).has_value());
      EXPECT_TRUE(set.boxes.at(i, i)->same_region(CropBox::full()));
      for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_EQ(set.boxes.at(i, j).has_value(), set.boxes.at(j, i).has_value());
      }
    }
  }
}

TEST(CropBoxes, SamplingIsDeterministic) {
  const CropSpec spec;
  const CropSet a = sample_crops(spec, 42), b = sample_crops(spec, 42);
  for (std::size_t i = 0; i < a.crops.size(); ++i) EXPECT_TRUE(a.crops[i].same_region(b.crops[i]));
}

TEST(CropBoxes, InvalidSpecNamesField) {
  CropSpec spec;
  spec.n_global = 0;
  try {
    spec.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("n_global"), std::string::npos);
  }
}

TEST(Align, IdentityBoxReproducesSource) {
  Rng rng(1);
  const auto src = random_grid(rng, 3, 4, 5);
  const auto out = align(src, CropBox::full(), 4, 5);
  for (std::size_t i = 0; i < src.data.size(); ++i) EXPECT_DOUBLE_EQ(out.data[i], src.data[i]);
  const auto back = align_backward(src, CropBox::full(), 4, 5);
  for (std::size_t i = 0; i < src.data.size(); ++i) EXPECT_DOUBLE_EQ(back.data[i], src.data[i]);
}

TEST(Align, ConstantPreserved) {
  Rng rng(2);
  Grid<double> src(2, 6, 6, 3.7);
  for (int k = 0; k < 20; ++k) {
    const auto out = align(src, random_box(rng), 7, 7);
    for (double v : out.data) EXPECT_NEAR(v, 3.7, 1e-12);
  }
}

TEST(Align, TwoByTwoToThreeByThree) {
  Grid<double> src(1, 2, 2);
  src.data = {0, 1, 2, 3};
  const auto out = align(src, CropBox::full(), 3, 3);
  const auto ref = oracle::bilinear(src, CropBox::full(), 3, 3);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(out.data[i], ref.data[i], 1e-12);
  // Centre samples the middle of the grid.
  EXPECT_NEAR(out.at(0, 1, 1), 1.5, 1e-12);
  // Corners clamp to the edge cells.
  EXPECT_NEAR(out.at(0, 0, 0), 0.0, 1e-12);
  EXPECT_NEAR(out.at(0, 2, 2), 3.0, 1e-12);
}

TEST(Align, MatchesDirectOracle) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto src = random_grid(rng, 2, 1 + rng.below(8), 1 + rng.below(8));
    const CropBox box = random_box(rng);
    const std::size_t oh = 1 + rng.below(8), ow = 1 + rng.below(8);
    const auto out = align(src, box, oh, ow);
    const auto ref = oracle::bilinear(src, box, oh, ow);
    for (std::size_t i = 0; i < out.data.size(); ++i) EXPECT_NEAR(out.data[i], ref.data[i], 1e-9);
  }
}

TEST(Align, EqualTapsSplitGradient) {
  Grid<double> g(1, 1, 1);
  g.data = {2.0};
  const auto back = align_backward(g, CropBox::full(), 2, 2);
  for (double v : back.data) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Align, Linear) {
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const auto x = random_grid(rng, 2, 5, 5), y = random_grid(rng, 2, 5, 5);
    const double a = rng.normal(), b = rng.normal();
    Grid<double> comb(2, 5, 5);
    for (std::size_t i = 0; i < comb.data.size(); ++i) comb.data[i] = a * x.data[i] + b * y.data[i];
    const CropBox box = random_box(rng);
    const auto lhs = align(comb, box, 4, 3);
    const auto ax = align(x, box, 4, 3), ay = align(y, box, 4, 3);
    for (std::size_t i = 0; i < lhs.data.size(); ++i) EXPECT_NEAR(lhs.data[i], a * ax.data[i] + b * ay.data[i], 1e-12);
  }
}

TEST(Align, BackwardIsAdjoint) {
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    const auto x = random_grid(rng, 3, 5, 6);
    const CropBox box = random_box(rng);
    const auto g = random_grid(rng, 3, 7, 7);
    const double lhs = dot(align(x, box, 7, 7), g);
    const double rhs = dot(x, align_backward(g, box, 5, 6));
    EXPECT_NEAR(lhs, rhs, 1e-10 * (1.0 + std::abs(lhs)));
  }
}

TEST(Align, BackwardMatchesFiniteDifferences) {
  Rng rng(6);
  const auto x = random_grid(rng, 1, 5, 5);
  const auto g = random_grid(rng, 1, 3, 3);
  const CropBox box = random_box(rng);
  const auto vjp = align_backward(g, box, 5, 5);
  const double h = 1e-4;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    auto xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    const double fd = (dot(align(xp, box, 3, 3), g) - dot(align(xm, box, 3, 3), g)) / (2 * h);
    EXPECT_LE(std::abs(fd - vjp.data[i]), 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Align, RejectsInvalidBox) {
  Grid<double> src(1, 2, 2);
  EXPECT_THROW(align(src, CropBox{0.5, 0, 0.2, 1}, 2, 2), ValidationError);
  EXPECT_THROW(align(src, CropBox::full(), 0, 2), ValidationError);
}
