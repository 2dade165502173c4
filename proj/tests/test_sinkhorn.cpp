#include <gtest/gtest.h>

#include "leopart/error.hpp"
#include "leopart/rng.hpp"
#include "leopart/sinkhorn.hpp"
#include "oracles.hpp"

using namespace leopart;

namespace {

MatD random_unit_rows(Rng& rng, Eigen::Index n, Eigen::Index d) {
  MatD m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  m.rowwise().normalize();
  return m;
}

}  // namespace

TEST(Sinkhorn, SinglePrototype) {
  MatD scores = MatD::Random(10, 1);
  const Assignment a = sinkhorn_from_scores(scores, {}, 10);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_NEAR(a.q(i, 0), 1.0, 1e-12);
}

TEST(Sinkhorn, OrthonormalRecoversOptimalPermutation) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::size_t> perm = {0, 1, 2, 3};
    rng.shuffle(perm.begin(), perm.end());
    MatD protos = MatD::Identity(4, 4);
    MatD feats(4, 4);
    for (std::size_t i = 0; i < 4; ++i) feats.row(static_cast<Eigen::Index>(i)) = protos.row(static_cast<Eigen::Index>(perm[i]));
    SinkhornParams p;
    p.epsilon = 0.01;
    p.n_iters = 100;
    const Assignment a = assign(feats, protos, p, 4);
    // Brute force over assignments of the transport objective (maximize similarity).
    const MatD scores = feats * protos.transpose();
    const auto [best, cost] = oracle::brute_assignment(-scores);
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index k = 0; k < 4; ++k) {
        const double expect = static_cast<std::size_t>(k) == best[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
        EXPECT_NEAR(a.q(i, k), expect, 1e-3);
      }
    }
  }
}

TEST(Sinkhorn, ColumnMarginals) {
  Rng rng(2);
  const MatD feats = random_unit_rows(rng, 64, 16), protos = random_unit_rows(rng, 8, 16);
  SinkhornParams p;
  p.n_iters = 50;
  const Assignment a = assign(feats, protos, p, 64);
  for (Eigen::Index k = 0; k < 8; ++k) EXPECT_NEAR(a.column_sums(k), 8.0, 0.08);
  for (Eigen::Index i = 0; i < 64; ++i) EXPECT_NEAR(a.q.row(i).sum(), 1.0, 1e-6);
}

TEST(Sinkhorn, ViolationDecreasesMonotonically) {
  Rng rng(3);
  for (int t = 0; t < 10; ++t) {
    const MatD feats = random_unit_rows(rng, 128, 8), protos = random_unit_rows(rng, 12, 8);
    SinkhornParams p;
    p.n_iters = 30;
    std::vector<double> trace;
    assign(feats, protos, p, 128, &trace);
    ASSERT_EQ(trace.size(), 30u);
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i], trace[i - 1] + 1e-12);
  }
}

TEST(Sinkhorn, ShiftInvariant) {
  Rng rng(4);
  const MatD feats = random_unit_rows(rng, 20, 6), protos = random_unit_rows(rng, 5, 6);
  const MatD scores = feats * protos.transpose();
  const MatD shifted = scores.array() + 0.37;
  const Assignment a = sinkhorn_from_scores(scores, {}, 20), b = sinkhorn_from_scores(shifted, {}, 20);
  EXPECT_LE((a.q - b.q).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sinkhorn, QueueRowsShapeMarginalsOnly) {
  Rng rng(5);
  const MatD feats = random_unit_rows(rng, 40, 6), protos = random_unit_rows(rng, 5, 6);
  const MatD scores = feats * protos.transpose();
  const Assignment a = sinkhorn_from_scores(scores, {}, 10);
  EXPECT_EQ(a.q.rows(), 10);
  EXPECT_EQ(a.total_rows, 40u);
  for (Eigen::Index i = 0; i < 10; ++i) EXPECT_NEAR(a.q.row(i).sum(), 1.0, 1e-9);
}

TEST(Sinkhorn, RejectsNonUnitInputs) {
  MatD feats = MatD::Ones(2, 2), protos = MatD::Identity(2, 2);
  EXPECT_THROW(assign(feats, protos, {}, 2), ValidationError);
}

TEST(FeatureQueue, FillAndEvict) {
  FeatureQueue q(4, 2);
  EXPECT_TRUE(q.empty());
  MatF rows(3, 2);
  rows << 1, 0, 0, 1, 1, 0;
  q.push(rows);
  EXPECT_EQ(q.fill(), 3u);
  EXPECT_TRUE(q.ready());
  q.push(rows);
  EXPECT_EQ(q.fill(), 4u);
  const MatF c = q.contents();
  // oldest first: rows 2 of the first push, then the second push
  EXPECT_EQ(c.row(0), rows.row(2));
  EXPECT_EQ(c.row(1), rows.row(0));
  EXPECT_EQ(c.row(3), rows.row(2));
}

TEST(FeatureQueue, CapacityTwoKeepsLastTwo) {
  FeatureQueue q(2, 1);
  MatF a(1, 1), b(1, 1), c(1, 1);
  a << 1;
  b << 2;
  c << 3;
  q.push(a);
  q.push(b);
  q.push(c);
  const MatF got = q.contents();
  ASSERT_EQ(got.rows(), 2);
  EXPECT_EQ(got(0, 0), 2.0f);
  EXPECT_EQ(got(1, 0), 3.0f);
}

TEST(FeatureQueue, TenIntoLargeQueue) {
  FeatureQueue q(8192, 3);
  q.push(MatF::Ones(10, 3));
  EXPECT_EQ(q.fill(), 10u);
  EXPECT_FALSE(q.ready());
  q.push(MatF::Ones(8192, 3));
  EXPECT_EQ(q.fill(), 8192u);
  q.push(MatF::Zero(1, 3));
  EXPECT_EQ(q.fill(), 8192u);
  EXPECT_EQ(q.contents().row(8191).sum(), 0.0f);
}

TEST(FeatureQueue, RestoreRoundTrip) {
  FeatureQueue q(3, 1);
  MatF r(4, 1);
  r << 1, 2, 3, 4;
  q.push(r);
  FeatureQueue back(3, 1);
  back.restore(q.buffer(), q.fill(), q.head());
  EXPECT_EQ(back.contents(), q.contents());
  EXPECT_THROW(FeatureQueue(0, 1), ValidationError);
}
