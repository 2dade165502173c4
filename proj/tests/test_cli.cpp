#include <gtest/gtest.h>

#include <sstream>

#include "cli_pipeline.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBinary = LEOPART_CLI;
const fs::path kConfig = fs::path(LEOPART_CONFIG_DIR) / "small.ini";

fs::path scratch(const std::string& name) { return fs::temp_directory_path() / ("leopart_cli_" + name); }

std::string last_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return last;
}

int leopart(const std::string& args, const fs::path& log) {
  return cli::run("\"" + kBinary + "\" " + args, log);
}

// The small pipeline is shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { result_ = cli::run_pipeline(kBinary, kConfig, dir()); }
  static fs::path dir() { return scratch("pipeline"); }
  static cli::PipelineResult result_;
};

cli::PipelineResult CliPipeline::result_;

}  // namespace

TEST(CliUsage, ExitCodes) {
  const fs::path log = scratch("usage.log");
  fs::remove(log);
  EXPECT_EQ(leopart("", log), 2);
  EXPECT_EQ(leopart("frobnicate", log), 2);
  EXPECT_EQ(leopart("gen", log), 2);  // missing --out
  const fs::path bad = scratch("bad.ini");
  std::ofstream(bad) << "[train]\nbatch_size = 0\n";
  fs::remove(log);
  EXPECT_EQ(leopart("--config \"" + bad.string() + "\" gen --out " + scratch("never").string(), log), 1);
  EXPECT_NE(cli::slurp(log).find("train.batch_size"), std::string::npos);
  EXPECT_EQ(leopart("cooc --clusters /nonexistent --out /tmp/x.txt", log), 1);
}

TEST_F(CliPipeline, EndsWithMiouLine) {
  ASSERT_TRUE(result_.ok) << result_.failed_stage << "\n" << cli::slurp(result_.log);
  const std::string report = cli::slurp(dir() / "report" / "report.txt");
  EXPECT_EQ(last_line(report).rfind("mIoU ", 0), 0u) << report;
  EXPECT_EQ(last_line(cli::slurp(result_.log)).rfind("mIoU ", 0), 0u);
  for (const char* f : {"train/checkpoint.lpc", "train/loss.csv", "cbfe/theta.txt", "graph.txt",
                        "communities/partition.txt", "report/run_manifest.txt"}) {
    EXPECT_TRUE(fs::exists(dir() / f)) << f;
  }
}

TEST_F(CliPipeline, RefusesCheckpointFromOtherConfig) {
  ASSERT_TRUE(result_.ok);
  const fs::path other = scratch("other.ini");
  std::string text = cli::slurp(kConfig);
  text.replace(text.find("[cd]"), 4, "[cd]\nmarkov_time = 1.5");
  std::ofstream(other) << text;
  const fs::path log = scratch("mixed.log");
  fs::remove(log);
  const std::string args = "--config \"" + other.string() + "\" cluster --data \"" + (dir() / "data/manifest.txt").string() +
                           "\" --checkpoint \"" + (dir() / "train/checkpoint.lpc").string() + "\" --out \"" +
                           scratch("mixed_out").string() + "\"";
  EXPECT_EQ(leopart(args, log), 1);
  EXPECT_NE(cli::slurp(log).find("--force"), std::string::npos);
  EXPECT_EQ(leopart("--force " + args, log), 0);
  EXPECT_NE(cli::slurp(log).find("warning"), std::string::npos);
}

TEST_F(CliPipeline, ResumedTrainingMatches) {
  ASSERT_TRUE(result_.ok);
  const fs::path d = scratch("resume");
  fs::remove_all(d);
  const std::string base = "--config \"" + kConfig.string() + "\" train --data \"" + (dir() / "data/manifest.txt").string() + "\"";
  const fs::path log = d.string() + ".log";
  EXPECT_EQ(leopart(base + " --out \"" + (d / "half").string() + "\" --steps 25", log), 0);
  EXPECT_EQ(leopart(base + " --out \"" + (d / "full").string() + "\" --resume \"" + (d / "half/checkpoint.lpc").string() + "\"", log), 0);
  EXPECT_EQ(cli::slurp(d / "full/loss.csv"), cli::slurp(dir() / "train/loss.csv"));
  EXPECT_EQ(cli::slurp(d / "full/checkpoint.lpc"), cli::slurp(dir() / "train/checkpoint.lpc"));
}

TEST_F(CliPipeline, UnsupSegRequiresOneCommunityPerObjectClass) {
  ASSERT_TRUE(result_.ok);
  const fs::path d = scratch("wrong_target");
  fs::remove_all(d);
  const fs::path log = d.string() + ".log";
  fs::remove(log);
  const std::string cfg = "--config \"" + kConfig.string() + "\" ";
  EXPECT_EQ(leopart(cfg + "communities --graph \"" + (dir() / "graph.txt").string() + "\" --target 2 --out \"" + d.string() + "\"", log), 0);
  EXPECT_EQ(leopart(cfg + "eval --protocol unsup-seg --data \"" + (dir() / "data/manifest.txt").string() + "\" --clusters \"" +
                        (dir() / "fg_clusters").string() + "\" --partition \"" + (d / "partition.txt").string() + "\"",
                    log),
            1);
}

TEST_F(CliPipeline, RendersSegmentation) {
  ASSERT_TRUE(result_.ok);
  const fs::path out = scratch("render");
  fs::remove_all(out);
  EXPECT_EQ(leopart("render --input \"" + (dir() / "communities/segmentation").string() + "\" --out \"" + out.string() + "\" --scale 4",
                    scratch("render.log")),
            0);
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(out)) n += e.path().extension() == ".ppm";
  EXPECT_EQ(n, 60u);
}
