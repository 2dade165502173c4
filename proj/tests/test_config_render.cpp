#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "leopart/config.hpp"
#include "leopart/error.hpp"
#include "leopart/render.hpp"

using namespace leopart;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text).validate();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ParsesSections) {
  const RunConfig c = parse_config("[synth]\nn_images = 7\n; comment\n[train]\nbatch_size = 3\nlr_head = 0.5\n[run]\nseed = 9\n");
  EXPECT_EQ(c.synth.n_images, 7u);
  EXPECT_EQ(c.train.batch_size, 3u);
  EXPECT_DOUBLE_EQ(c.train.lr_head, 0.5);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.cbfe.k, RunConfig{}.cbfe.k);
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_NE(error_of("[train]\nfoo = 1\n").find("train.foo"), std::string::npos);
  EXPECT_NE(error_of("[nope]\nx = 1\n").find("nope"), std::string::npos);
  EXPECT_NE(error_of("[train]\nbatch_size = 0\n").find("train.batch_size"), std::string::npos);
  EXPECT_NE(error_of("[train]\nbatch_size = many\n").find("train.batch_size"), std::string::npos);
}

TEST(Config, CanonicalTextRoundTrips) {
  RunConfig c = parse_config("[cd]\nk = 33\nmarkov_time = 1.5\n[eval]\nn_seeds = 2\n");
  const RunConfig back = parse_config(format_config(c));
  EXPECT_EQ(format_config(back), format_config(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  c.cd.k = 34;
  EXPECT_NE(config_hash(c), config_hash(back));
}

TEST(Config, SeedFromEnvironment) {
  RunConfig c;
  ::setenv("LEOPART_SEED", "42", 1);
  apply_environment(c);
  ::unsetenv("LEOPART_SEED");
  EXPECT_EQ(c.seed, 42u);
  RunConfig d;
  apply_environment(d);
  EXPECT_EQ(d.seed, 0u);
}

TEST(Render, SingleColourForUniformMap) {
  const auto ppm = render_ppm(LabelMap(3, 4, 0), 2);
  const std::string header = "P6\n8 6\n255\n";
  ASSERT_EQ(ppm.size(), header.size() + 8 * 6 * 3);
  EXPECT_EQ(std::string(ppm.begin(), ppm.begin() + static_cast<long>(header.size())), header);
  std::set<Rgb> colours;
  for (std::size_t i = header.size(); i < ppm.size(); i += 3) colours.insert({ppm[i], ppm[i + 1], ppm[i + 2]});
  EXPECT_EQ(colours.size(), 1u);
  EXPECT_EQ(*colours.begin(), palette()[0]);
}

TEST(Render, PaletteDistinctAndWraps) {
  const std::set<Rgb> all(palette().begin(), palette().end());
  EXPECT_EQ(all.size(), 64u);
  LabelMap m(1, 2);
  m.data = {3, 67};
  const auto ppm = render_ppm(m);
  const std::size_t off = ppm.size() - 6;
  EXPECT_EQ(ppm[off], ppm[off + 3]);
  EXPECT_EQ(ppm[off + 1], ppm[off + 4]);
  EXPECT_EQ(ppm[off + 2], ppm[off + 5]);
}
