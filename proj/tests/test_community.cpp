#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "leopart/community.hpp"
#include "leopart/error.hpp"
#include "leopart/segmentation_metrics.hpp"
#include "oracles.hpp"

using namespace leopart;

namespace {

LabelMap from_rows(const std::vector<std::vector<std::uint16_t>>& rows) {
  LabelMap m(rows.size(), rows[0].size());
  for (std::size_t y = 0; y < rows.size(); ++y) {
    for (std::size_t x = 0; x < rows[0].size(); ++x) m.at(y, x) = rows[y][x];
  }
  return m;
}

CoocGraph graph_of(std::size_t n, const std::vector<Edge>& edges) {
  CoocGraph g;
  g.n_nodes = n;
  g.edges = edges;
  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  g.pixel_count.assign(n, 1);
  g.image_count.assign(n, 1);
  return g;
}

// Conditional co-occurrence by walking every ray cell of every pixel.
std::vector<double> brute_conditional(const std::vector<LabelMap>& maps, std::size_t n, std::size_t d) {
  std::vector<double> sum(n * n, 0.0);
  std::vector<double> images(n, 0.0);
  for (const auto& m : maps) {
    for (std::size_t i = 0; i < n; ++i) {
      double own = 0;
      std::vector<double> hit(n, 0.0);
      for (std::size_t y = 0; y < m.height; ++y) {
        for (std::size_t x = 0; x < m.width; ++x) {
          if (m.at(y, x) != i) continue;
          ++own;
          std::set<std::uint16_t> near;
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (dy == 0 && dx == 0) continue;
              for (long s = 1; s <= static_cast<long>(d); ++s) {
                const long yy = static_cast<long>(y) + dy * s, xx = static_cast<long>(x) + dx * s;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(m.height) || xx >= static_cast<long>(m.width)) continue;
                near.insert(m.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)));
              }
            }
          }
          for (auto j : near) {
            if (j < n && j != i) hit[j] += 1;
          }
        }
      }
      if (own == 0) continue;
      images[i] += 1;
      for (std::size_t j = 0; j < n; ++j) sum[i * n + j] += hit[j] / own;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sum[i * n + j] = images[i] > 0 ? sum[i * n + j] / images[i] : 0.0;
  }
  return sum;
}

// Map equation in its entropy form: q H(Q) + sum_m p_m H(P_m).
double natural_map_equation(const CoocGraph& g, const Partition& p, double t) {
  const auto deg = g.degrees();
  double two_w = 0.0;
  for (double d : deg) two_w += d;
  std::vector<double> exit(p.n_communities, 0.0), flow(p.n_communities, 0.0);
  for (const auto& e : g.edges) {
    if (p.community[e.u] != p.community[e.v]) {
      exit[static_cast<std::size_t>(p.community[e.u])] += e.w;
      exit[static_cast<std::size_t>(p.community[e.v])] += e.w;
    }
  }
  for (std::size_t a = 0; a < g.n_nodes; ++a) flow[static_cast<std::size_t>(p.community[a])] += deg[a] / two_w;
  const auto h = [](const std::vector<double>& w) {
    double s = 0.0, out = 0.0;
    for (double x : w) s += x;
    if (s <= 0) return 0.0;
    for (double x : w) {
      if (x > 0) out -= (x / s) * std::log2(x / s);
    }
    return out;
  };
  std::vector<double> q(p.n_communities);
  double q_total = 0.0;
  for (std::size_t m = 0; m < p.n_communities; ++m) {
    q[m] = t * exit[m] / two_w;
    q_total += q[m];
  }
  double l = q_total * h(q);
  for (std::size_t m = 0; m < p.n_communities; ++m) {
    std::vector<double> parts = {q[m]};
    for (std::size_t a = 0; a < g.n_nodes; ++a) {
      if (static_cast<std::size_t>(p.community[a]) == m) parts.push_back(deg[a] / two_w);
    }
    l += (q[m] + flow[m]) * h(parts);
  }
  return l;
}

// Three blocks of five nodes, dense inside and weakly chained.
CoocGraph planted_blocks() {
  std::vector<Edge> e;
  for (std::uint32_t b = 0; b < 3; ++b) {
    for (std::uint32_t i = 0; i < 5; ++i) {
      for (std::uint32_t j = i + 1; j < 5; ++j) e.push_back({5 * b + i, 5 * b + j, 0.8});
    }
  }
  e.push_back({0, 5, 0.05});
  e.push_back({6, 10, 0.05});
  e.push_back({1, 11, 0.05});
  return graph_of(15, e);
}

std::set<std::set<std::size_t>> groups(const Partition& p) {
  std::map<std::int32_t, std::set<std::size_t>> by;
  for (std::size_t i = 0; i < p.community.size(); ++i) by[p.community[i]].insert(i);
  std::set<std::set<std::size_t>> out;
  for (auto& [c, s] : by) out.insert(s);
  return out;
}

}  // namespace

TEST(Cooccurrence, LeftRightHalves) {
  const LabelMap m = from_rows({{0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}, {0, 0, 1, 1}});
  const CoocGraph g = cooccurrence_graph({m}, 2);
  EXPECT_DOUBLE_EQ(g.cond(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(g.cond(1, 0), 0.5);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(g.edges[0].w, 0.5);
  EXPECT_EQ(g.pixel_count, (std::vector<std::uint64_t>{8, 8}));
}

TEST(Cooccurrence, AsymmetricUsesMinimum) {
  const CoocGraph g = cooccurrence_graph({from_rows({{0, 0, 0, 1}})}, 2);
  EXPECT_DOUBLE_EQ(g.cond(0, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(g.cond(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.edges[0].w, 1.0 / 3.0);
}

TEST(Cooccurrence, AveragedOverImagesWhereClusterOccurs) {
  const LabelMap a = from_rows({{0, 0, 1, 1}, {0, 0, 1, 1}});
  const LabelMap b = from_rows({{0, 0}, {0, 0}});
  const CoocGraph g = cooccurrence_graph({a, b}, 2);
  EXPECT_DOUBLE_EQ(g.cond(0, 1), 0.25);
  EXPECT_DOUBLE_EQ(g.cond(1, 0), 0.5);
  EXPECT_EQ(g.image_count, (std::vector<std::uint32_t>{2, 1}));
}

TEST(Cooccurrence, SingleClusterHasNoEdges) {
  const CoocGraph g = cooccurrence_graph({LabelMap(5, 5, 2)}, 3);
  EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(g.pixel_count[2], 25u);
}

TEST(Cooccurrence, DiagonalNeighboursCount) {
  const LabelMap m = from_rows({{0, 2}, {2, 1}});
  const CoocGraph g = cooccurrence_graph({m}, 3);
  EXPECT_DOUBLE_EQ(g.cond(0, 1), 1.0);
}

TEST(Cooccurrence, MatchesRayEnumeration) {
  Rng rng(1);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + rng.below(5);
    const std::size_t d = 1 + rng.below(3);
    std::vector<LabelMap> maps;
    for (int i = 0; i < 3; ++i) {
      maps.push_back(oracle::random_labels<std::uint16_t>(rng, 6, 5, n));
      maps.back().data[rng.below(30)] = kUnassigned;
    }
    const CoocGraph g = cooccurrence_graph(maps, n, d);
    const auto ref = brute_conditional(maps, n, d);
    for (std::size_t k = 0; k < n * n; ++k) EXPECT_NEAR(g.conditional[k], ref[k], 1e-12);
    for (const auto& e : g.edges) {
      EXPECT_LT(e.u, e.v);
      EXPECT_DOUBLE_EQ(e.w, std::min(g.cond(e.u, e.v), g.cond(e.v, e.u)));
    }
  }
}

TEST(FilterEdges, Endpoints) {
  const CoocGraph g = planted_blocks();
  EXPECT_EQ(filter_edges(g, 0.0).edges.size(), g.edges.size());
  EXPECT_TRUE(filter_edges(g, 1.0).edges.empty());
  EXPECT_EQ(filter_edges(g, 0.1).edges.size(), 30u);
}

TEST(MapEquation, TwoNodeHandValues) {
  const CoocGraph g = graph_of(2, {{0, 1, 1.0}});
  EXPECT_NEAR(map_equation(g, {{0, 1}, 2}, 1.0), 3.0, 1e-12);
  EXPECT_NEAR(map_equation(g, {{0, 0}, 1}, 1.0), 1.0, 1e-12);
}

TEST(MapEquation, SingleModuleIsNodeEntropy) {
  const CoocGraph g = graph_of(4, {{0, 1, 1.0}, {1, 2, 2.0}, {2, 3, 0.5}});
  const auto deg = g.degrees();
  double h = 0.0;
  for (double d : deg) h -= (d / 7.0) * std::log2(d / 7.0);
  EXPECT_NEAR(map_equation(g, {{0, 0, 0, 0}, 1}, 1.0), h, 1e-12);
  EXPECT_NEAR(map_equation(g, {{0, 0, 0, 0}, 1}, 3.0), h, 1e-12);
}

TEST(MapEquation, MatchesEntropyForm) {
  Rng rng(2);
  for (int t = 0; t < 30; ++t) {
    std::vector<Edge> e;
    for (std::uint32_t u = 0; u < 8; ++u) {
      for (std::uint32_t v = u + 1; v < 8; ++v) {
        if (rng.uniform() < 0.5) e.push_back({u, v, 0.1 + rng.uniform()});
      }
    }
    e.push_back({0, 7, 0.3});
    std::sort(e.begin(), e.end(), [](const Edge& a, const Edge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
    e.erase(std::unique(e.begin(), e.end(), [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; }), e.end());
    const CoocGraph g = graph_of(8, e);
    Partition p;
    p.n_communities = 1 + rng.below(4);
    for (std::size_t i = 0; i < 8; ++i) p.community.push_back(static_cast<std::int32_t>(i < p.n_communities ? i : rng.below(p.n_communities)));
    for (double tau : {1.0, 2.0, 0.5}) EXPECT_NEAR(map_equation(g, p, tau), natural_map_equation(g, p, tau), 1e-9);
  }
}

TEST(MapEquation, TwoCliquesPreferTwoModules) {
  std::vector<Edge> e;
  for (std::uint32_t b = 0; b < 2; ++b) {
    for (std::uint32_t i = 0; i < 4; ++i) {
      for (std::uint32_t j = i + 1; j < 4; ++j) e.push_back({4 * b + i, 4 * b + j, 1.0});
    }
  }
  e.push_back({3, 4, 1.0});
  const CoocGraph g = graph_of(8, e);
  const Partition two{{0, 0, 0, 0, 1, 1, 1, 1}, 2};
  const Partition one{{0, 0, 0, 0, 0, 0, 0, 0}, 1};
  const Partition singles{{0, 1, 2, 3, 4, 5, 6, 7}, 8};
  EXPECT_NEAR(map_equation(g, two, 1.0), natural_map_equation(g, two, 1.0), 1e-12);
  EXPECT_LT(map_equation(g, two, 1.0), map_equation(g, one, 1.0));
  EXPECT_LT(map_equation(g, two, 1.0), map_equation(g, singles, 1.0));
}

TEST(DetectCommunities, PlantedBlocks) {
  CommunityParams p;
  p.target = 3;
  const auto r = detect_communities(planted_blocks(), p);
  EXPECT_EQ(r.partition.n_communities, 3u);
  const std::set<std::set<std::size_t>> expect = {{0, 1, 2, 3, 4}, {5, 6, 7, 8, 9}, {10, 11, 12, 13, 14}};
  EXPECT_EQ(groups(r.partition), expect);
  EXPECT_EQ(r.found, 3u);
  EXPECT_EQ(r.merges, 0u);
  for (std::size_t i = 1; i < r.sweep_trace.size(); ++i) EXPECT_LE(r.sweep_trace[i], r.sweep_trace[i - 1] + 1e-12);
  EXPECT_NEAR(r.codelength, map_equation(planted_blocks(), r.partition, p.markov_time), 1e-12);
}

TEST(DetectCommunities, ConstraintMergesWholeBlocks) {
  CommunityParams p;
  p.target = 2;
  const auto r = detect_communities(planted_blocks(), p);
  EXPECT_EQ(r.partition.n_communities, 2u);
  EXPECT_EQ(r.merges, r.found - 2);
  for (const auto& grp : groups(r.partition)) EXPECT_EQ(grp.size() % 5, 0u);
}

TEST(DetectCommunities, IsolatedNodesBecomeBackground) {
  const CoocGraph g = graph_of(7, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}, {3, 4, 1.0}, {4, 5, 1.0}, {3, 5, 1.0}});
  CommunityParams p;
  p.target = 2;
  const auto r = detect_communities(g, p);
  EXPECT_EQ(r.partition.community[6], kBackground);
  EXPECT_EQ(r.partition.community[0], r.partition.community[2]);
  EXPECT_EQ(r.partition.community[3], r.partition.community[5]);
  EXPECT_NE(r.partition.community[0], r.partition.community[3]);
}

TEST(DetectCommunities, Deterministic) {
  Rng rng(3);
  std::vector<Edge> e;
  for (std::uint32_t u = 0; u < 20; ++u) {
    for (std::uint32_t v = u + 1; v < 20; ++v) {
      if (rng.uniform() < 0.25) e.push_back({u, v, rng.uniform()});
    }
  }
  const CoocGraph g = graph_of(20, e);
  CommunityParams p;
  p.target = 3;
  p.seed = 9;
  const auto a = detect_communities(g, p), b = detect_communities(g, p);
  EXPECT_EQ(a.partition.community, b.partition.community);
  EXPECT_EQ(a.codelength, b.codelength);
}

TEST(DetectCommunities, TooFewNodesThrows) {
  CommunityParams p;
  p.target = 3;
  EXPECT_THROW(detect_communities(graph_of(4, {{0, 1, 1.0}}), p), ValidationError);
}

TEST(MergeByCommunities, IdentityAndAllInOne) {
  Rng rng(4);
  std::vector<LabelMap> maps{oracle::random_labels<std::uint16_t>(rng, 4, 4, 3)};
  maps[0].data[0] = kUnassigned;
  const auto same = merge_by_communities(maps, {{0, 1, 2}, 3}, 3);
  for (std::size_t k = 1; k < 16; ++k) EXPECT_EQ(same[0].data[k], maps[0].data[k]);
  EXPECT_EQ(same[0].data[0], 3);
  const auto one = merge_by_communities(maps, {{0, 0, kBackground}, 1}, 1);
  for (std::size_t k = 1; k < 16; ++k) EXPECT_EQ(one[0].data[k], maps[0].data[k] == 2 ? 1 : 0);
}

TEST(TextFormats, GraphAndPartitionRoundTrip) {
  const CoocGraph g = planted_blocks();
  const CoocGraph back = parse_graph(format_graph(g));
  EXPECT_EQ(back.n_nodes, g.n_nodes);
  ASSERT_EQ(back.edges.size(), g.edges.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    EXPECT_EQ(back.edges[i].u, g.edges[i].u);
    EXPECT_EQ(back.edges[i].v, g.edges[i].v);
    EXPECT_DOUBLE_EQ(back.edges[i].w, g.edges[i].w);
  }
  EXPECT_EQ(back.pixel_count, g.pixel_count);
  const Partition p{{0, kBackground, 1, 0}, 2};
  const Partition q = parse_partition(format_partition(p));
  EXPECT_EQ(q.community, p.community);
  EXPECT_EQ(q.n_communities, 2u);
  EXPECT_THROW(parse_graph("nodes 2\n0 1\n"), FormatError);
}
