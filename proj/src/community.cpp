#include "leopart/community.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "leopart/error.hpp"
#include "leopart/rng.hpp"
#include "leopart/segmentation_metrics.hpp"

namespace leopart {

std::vector<double> CoocGraph::degrees() const {
  std::vector<double> d(n_nodes, 0.0);
  for (const auto& e : edges) {
    d[e.u] += e.w;
    d[e.v] += e.w;
  }
  return d;
}

CoocGraph cooccurrence_graph(const std::vector<LabelMap>& cluster_maps, std::size_t n_clusters, std::size_t d) {
  if (d == 0) throw ValidationError("co-occurrence: distance must be >= 1");
  const std::size_t n = n_clusters;
  CoocGraph g;
  g.n_nodes = n;
  g.pixel_count.assign(n, 0);
  g.image_count.assign(n, 0);
  std::vector<double> sum_cond(n * n, 0.0);
  std::vector<std::uint32_t> adj(n * n, 0);
  std::vector<std::uint64_t> count(n, 0);
  static constexpr int kDirs[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};

  std::vector<std::uint16_t> seen;
  for (const auto& m : cluster_maps) {
    std::fill(adj.begin(), adj.end(), 0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t y = 0; y < m.height; ++y) {
      for (std::size_t x = 0; x < m.width; ++x) {
        const auto i = m.at(y, x);
        if (i == kUnassigned) continue;
        if (i >= n) throw ValidationError("co-occurrence: cluster id " + std::to_string(i) + " >= K");
        ++count[i];
        seen.clear();
        for (const auto& dir : kDirs) {
          for (std::size_t k = 1; k <= d; ++k) {
            const long yy = static_cast<long>(y) + dir[0] * static_cast<long>(k);
            const long xx = static_cast<long>(x) + dir[1] * static_cast<long>(k);
            if (yy < 0 || xx < 0 || yy >= static_cast<long>(m.height) || xx >= static_cast<long>(m.width)) break;
            const auto j = m.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            if (j == i || j == kUnassigned || j >= n) continue;
            if (std::find(seen.begin(), seen.end(), j) == seen.end()) seen.push_back(j);
          }
        }
        for (auto j : seen) ++adj[i * n + j];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (count[i] == 0) continue;
      ++g.image_count[i];
      g.pixel_count[i] += count[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (adj[i * n + j]) sum_cond[i * n + j] += static_cast<double>(adj[i * n + j]) / static_cast<double>(count[i]);
      }
    }
  }
  g.conditional.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.image_count[i] == 0) continue;
    for (std::size_t j = 0; j < n; ++j) g.conditional[i * n + j] = sum_cond[i * n + j] / g.image_count[i];
  }
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      const double w = std::min(g.cond(u, v), g.cond(v, u));
      if (w > 0.0) g.edges.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v), w});
    }
  }
  return g;
}

CoocGraph filter_edges(const CoocGraph& g, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("edge filter: threshold must lie in [0,1]");
  CoocGraph out = g;
  out.edges.clear();
  for (const auto& e : g.edges) {
    if (e.w >= threshold) out.edges.push_back(e);
  }
  return out;
}

namespace {

double plogp(double x) { return x > 0.0 ? x * std::log2(x) : 0.0; }

// Codelength bookkeeping in raw edge-weight units. total2 is twice the total
// edge weight (the sum of degrees).
struct Codebook {
  double total2 = 0.0;
  double t = 1.0;

  double exit_term(double exit_sum) const { return plogp(t * exit_sum / total2); }
  double module_term(double exit, double deg) const {
    return -2.0 * plogp(t * exit / total2) + plogp((t * exit + deg) / total2);
  }
};

void check_partition(const CoocGraph& g, const Partition& p) {
  if (p.community.size() != g.n_nodes) throw ValidationError("partition does not cover the graph nodes");
  for (auto c : p.community) {
    if (c != kBackground && (c < 0 || static_cast<std::size_t>(c) >= p.n_communities)) {
      throw ValidationError("partition: community id " + std::to_string(c) + " out of range");
    }
  }
}

}  // namespace

double map_equation(const CoocGraph& g, const Partition& p, double markov_time) {
  check_partition(g, p);
  if (!(markov_time > 0.0)) throw ValidationError("map equation: Markov time must be positive");
  std::vector<double> deg(g.n_nodes, 0.0);
  std::vector<double> exit(p.n_communities, 0.0), mod_deg(p.n_communities, 0.0);
  double total2 = 0.0;
  for (const auto& e : g.edges) {
    const auto cu = p.community[e.u], cv = p.community[e.v];
    if (cu == kBackground || cv == kBackground) continue;
    deg[e.u] += e.w;
    deg[e.v] += e.w;
    total2 += 2.0 * e.w;
    if (cu != cv) {
      exit[static_cast<std::size_t>(cu)] += e.w;
      exit[static_cast<std::size_t>(cv)] += e.w;
    }
  }
  if (total2 == 0.0) return 0.0;
  for (std::size_t v = 0; v < g.n_nodes; ++v) {
    if (p.community[v] != kBackground) mod_deg[static_cast<std::size_t>(p.community[v])] += deg[v];
  }
  const Codebook cb{total2, markov_time};
  double exit_sum = 0.0, l = 0.0;
  for (std::size_t m = 0; m < p.n_communities; ++m) {
    exit_sum += exit[m];
    l += cb.module_term(exit[m], mod_deg[m]);
  }
  l += cb.exit_term(exit_sum);
  for (double d : deg) l -= plogp(d / total2);
  return l;
}

namespace {

// Graph of super-nodes at one aggregation level.
struct LevelGraph {
  std::vector<double> deg;  // summed degree of the member nodes
  std::vector<double> out;  // weight to other super-nodes
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;

  std::size_t size() const { return deg.size(); }
};

Partition to_partition(const std::vector<std::uint32_t>& active, const std::vector<std::uint32_t>& module_of,
                       std::size_t n_nodes) {
  // Communities numbered by their smallest member node.
  Partition p;
  p.community.assign(n_nodes, kBackground);
  std::map<std::uint32_t, std::int32_t> rename;
  for (std::size_t a = 0; a < active.size(); ++a) {
    auto [it, inserted] = rename.try_emplace(module_of[a], static_cast<std::int32_t>(rename.size()));
    p.community[active[a]] = it->second;
  }
  p.n_communities = rename.size();
  return p;
}

}  // namespace

CommunityResult detect_communities(const CoocGraph& g, const CommunityParams& params) {
  if (params.target == 0) throw ValidationError("communities: target must be >= 1");
  if (!(params.markov_time > 0.0)) throw ValidationError("communities: Markov time must be positive");
  const auto degrees = g.degrees();
  std::vector<std::uint32_t> active;
  std::vector<std::int64_t> index(g.n_nodes, -1);
  for (std::size_t v = 0; v < g.n_nodes; ++v) {
    if (degrees[v] > 0.0) {
      index[v] = static_cast<std::int64_t>(active.size());
      active.push_back(static_cast<std::uint32_t>(v));
    }
  }
  if (active.size() < params.target) {
    throw ValidationError("communities: only " + std::to_string(active.size()) +
                          " connected nodes; at most that many communities are achievable, target is " +
                          std::to_string(params.target));
  }

  LevelGraph level;
  level.deg.resize(active.size());
  level.out.assign(active.size(), 0.0);
  level.adj.resize(active.size());
  double total2 = 0.0;
  for (std::size_t a = 0; a < active.size(); ++a) level.deg[a] = degrees[active[a]];
  for (const auto& e : g.edges) {
    if (e.w <= 0.0) continue;
    const auto a = static_cast<std::uint32_t>(index[e.u]), b = static_cast<std::uint32_t>(index[e.v]);
    level.adj[a].emplace_back(b, e.w);
    level.adj[b].emplace_back(a, e.w);
    level.out[a] += e.w;
    level.out[b] += e.w;
    total2 += 2.0 * e.w;
  }
  const Codebook cb{total2, params.markov_time};

  CommunityResult res;
  Rng rng(params.seed);
  std::vector<std::uint32_t> module_of(active.size());
  std::iota(module_of.begin(), module_of.end(), 0u);
  std::vector<std::vector<std::uint32_t>> history{module_of};
  double last_l = std::numeric_limits<double>::infinity();

  while (true) {
    const std::size_t n = level.size();
    std::vector<std::uint32_t> mod(n);
    std::iota(mod.begin(), mod.end(), 0u);
    std::vector<double> exit = level.out, mdeg = level.deg;
    double exit_sum = std::accumulate(exit.begin(), exit.end(), 0.0);
    std::vector<double> w_to(n, 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    bool any_move = false;

    for (bool moved = true; moved;) {
      moved = false;
      rng.shuffle(order.begin(), order.end());
      for (const auto a : order) {
        const auto home = mod[a];
        touched.clear();
        for (const auto& [b, w] : level.adj[a]) {
          if (w_to[mod[b]] == 0.0) touched.push_back(mod[b]);
          w_to[mod[b]] += w;
        }
        const double w_home = w_to[home];
        const double exit_home = exit[home] - level.out[a] + 2.0 * w_home;
        const double deg_home = mdeg[home] - level.deg[a];
        const double base = cb.exit_term(exit_sum) + cb.module_term(exit[home], mdeg[home]);
        std::sort(touched.begin(), touched.end());
        double best = -1e-10;
        std::uint32_t target = home;
        for (const auto m : touched) {
          if (m == home) continue;
          const double exit_m = exit[m] + level.out[a] - 2.0 * w_to[m];
          const double new_sum = exit_sum - exit[home] - exit[m] + exit_home + exit_m;
          const double delta = cb.exit_term(new_sum) + cb.module_term(exit_home, deg_home) +
                               cb.module_term(exit_m, mdeg[m] + level.deg[a]) - base -
                               cb.module_term(exit[m], mdeg[m]);
          if (delta < best) {
            best = delta;
            target = m;
          }
        }
        if (target != home) {
          const double exit_m = exit[target] + level.out[a] - 2.0 * w_to[target];
          exit_sum += exit_home + exit_m - exit[home] - exit[target];
          exit[home] = exit_home;
          mdeg[home] = deg_home;
          exit[target] = exit_m;
          mdeg[target] += level.deg[a];
          mod[a] = target;
          moved = any_move = true;
        }
        for (const auto m : touched) w_to[m] = 0.0;
      }

      std::vector<std::uint32_t> projected(active.size());
      for (std::size_t a = 0; a < active.size(); ++a) projected[a] = mod[module_of[a]];
      const double l = map_equation(g, to_partition(active, projected, g.n_nodes), params.markov_time);
      if (l > last_l + 1e-9) {
        throw NumericError("communities: map equation increased during local moving");
      }
      last_l = l;
      res.sweep_trace.push_back(l);
    }
    if (!any_move) break;

    // Aggregate modules into super-nodes.
    std::vector<std::int64_t> rename(n, -1);
    std::uint32_t n_mod = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (rename[mod[a]] < 0) rename[mod[a]] = n_mod++;
    }
    LevelGraph next;
    next.deg.assign(n_mod, 0.0);
    next.out.assign(n_mod, 0.0);
    next.adj.resize(n_mod);
    std::vector<std::map<std::uint32_t, double>> links(n_mod);
    for (std::size_t a = 0; a < n; ++a) {
      const auto ma = static_cast<std::uint32_t>(rename[mod[a]]);
      next.deg[ma] += level.deg[a];
      for (const auto& [b, w] : level.adj[a]) {
        const auto mb = static_cast<std::uint32_t>(rename[mod[b]]);
        if (ma != mb) links[ma][mb] += w;
      }
    }
    for (std::uint32_t m = 0; m < n_mod; ++m) {
      for (const auto& [b, w] : links[m]) {
        next.adj[m].emplace_back(b, w);
        next.out[m] += w;
      }
    }
    for (auto& m : module_of) m = static_cast<std::uint32_t>(rename[mod[m]]);
    history.push_back(module_of);
    level = std::move(next);
  }

  const auto count_of = [](const std::vector<std::uint32_t>& v) {
    return std::set<std::uint32_t>(v.begin(), v.end()).size();
  };
  res.found = count_of(module_of);
  std::vector<std::uint32_t> start = module_of;
  if (res.found < params.target) {
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
      if (count_of(*it) >= params.target) {
        start = *it;
        break;
      }
    }
  }

  // Constraint phase on the original graph: merge module pairs greedily.
  Partition p = to_partition(active, start, g.n_nodes);
  const std::size_t m0 = p.n_communities;
  std::vector<double> exit(m0, 0.0), mdeg(m0, 0.0), between(m0 * m0, 0.0);
  for (std::size_t v = 0; v < g.n_nodes; ++v) {
    if (p.community[v] != kBackground) mdeg[static_cast<std::size_t>(p.community[v])] += degrees[v];
  }
  for (const auto& e : g.edges) {
    const auto cu = static_cast<std::size_t>(p.community[e.u]), cv = static_cast<std::size_t>(p.community[e.v]);
    if (cu == cv) continue;
    exit[cu] += e.w;
    exit[cv] += e.w;
    between[cu * m0 + cv] += e.w;
    between[cv * m0 + cu] += e.w;
  }
  double exit_sum = std::accumulate(exit.begin(), exit.end(), 0.0);
  std::vector<bool> alive(m0, true);
  std::vector<std::size_t> merged_into(m0);
  std::iota(merged_into.begin(), merged_into.end(), std::size_t{0});
  for (std::size_t count = m0; count > params.target; --count) {
    double best = std::numeric_limits<double>::infinity();
    bool best_connected = false;
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < m0; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = a + 1; b < m0; ++b) {
        if (!alive[b]) continue;
        const double w = between[a * m0 + b];
        const bool connected = w > 0.0;
        if (best_connected && !connected) continue;
        const double e = exit[a] + exit[b] - 2.0 * w;
        const double delta = cb.exit_term(exit_sum - 2.0 * w) - cb.exit_term(exit_sum) +
                             cb.module_term(e, mdeg[a] + mdeg[b]) - cb.module_term(exit[a], mdeg[a]) -
                             cb.module_term(exit[b], mdeg[b]);
        if ((connected && !best_connected) || delta < best) {
          best = delta;
          best_connected = connected;
          ba = a;
          bb = b;
        }
      }
    }
    const double w = between[ba * m0 + bb];
    exit_sum -= 2.0 * w;
    exit[ba] = exit[ba] + exit[bb] - 2.0 * w;
    mdeg[ba] += mdeg[bb];
    alive[bb] = false;
    for (std::size_t c = 0; c < m0; ++c) {
      if (c == ba || c == bb) continue;
      between[ba * m0 + c] += between[bb * m0 + c];
      between[c * m0 + ba] = between[ba * m0 + c];
    }
    between[ba * m0 + bb] = between[bb * m0 + ba] = 0.0;
    for (auto& r : merged_into) {
      if (r == bb) r = ba;
    }
    ++res.merges;
  }
  std::vector<std::uint32_t> final_mod(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) {
    final_mod[a] = static_cast<std::uint32_t>(merged_into[static_cast<std::size_t>(p.community[active[a]])]);
  }
  res.partition = to_partition(active, final_mod, g.n_nodes);
  res.codelength = map_equation(g, res.partition, params.markov_time);
  return res;
}

std::vector<LabelMap> merge_by_communities(const std::vector<LabelMap>& cluster_maps, const Partition& p,
                                           std::uint16_t background_label, std::vector<std::string>* warnings) {
  std::set<std::uint16_t> unseen;
  std::vector<LabelMap> out;
  out.reserve(cluster_maps.size());
  for (const auto& m : cluster_maps) {
    LabelMap r(m.height, m.width, background_label);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto k = m.data[i];
      if (k == kUnassigned) continue;
      if (k >= p.community.size()) {
        unseen.insert(k);
        continue;
      }
      const auto c = p.community[k];
      if (c != kBackground) r.data[i] = static_cast<std::uint16_t>(c);
    }
    out.push_back(std::move(r));
  }
  if (warnings) {
    for (auto k : unseen) warnings->push_back("cluster id " + std::to_string(k) + " not in partition; set to background");
  }
  return out;
}

std::string format_graph(const CoocGraph& g) {
  std::ostringstream os;
  os.precision(17);
  os << "nodes " << g.n_nodes << '\n';
  for (std::size_t i = 0; i < g.n_nodes; ++i) {
    os << "node " << i << ' ' << (i < g.pixel_count.size() ? g.pixel_count[i] : 0) << ' '
       << (i < g.image_count.size() ? g.image_count[i] : 0) << '\n';
  }
  for (const auto& e : g.edges) os << e.u << ' ' << e.v << ' ' << e.w << '\n';
  return os.str();
}

CoocGraph parse_graph(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  CoocGraph g;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    const auto where = "graph line " + std::to_string(line_no);
    if (!header) {
      std::string key;
      if (!(ls >> key >> g.n_nodes) || key != "nodes") throw FormatError(where + ": expected 'nodes n'");
      g.pixel_count.assign(g.n_nodes, 0);
      g.image_count.assign(g.n_nodes, 0);
      header = true;
      continue;
    }
    if (line.rfind("node ", 0) == 0) {
      std::string key;
      std::size_t i = 0;
      if (!(ls >> key >> i) || i >= g.n_nodes) throw FormatError(where + ": bad node line");
      ls >> g.pixel_count[i] >> g.image_count[i];
      continue;
    }
    Edge e;
    if (!(ls >> e.u >> e.v >> e.w)) throw FormatError(where + ": expected 'i j w'");
    if (e.u >= g.n_nodes || e.v >= g.n_nodes || e.u == e.v) throw FormatError(where + ": invalid edge endpoints");
    if (e.u > e.v) std::swap(e.u, e.v);
    g.edges.push_back(e);
  }
  if (!header) throw FormatError("graph: missing 'nodes n' header");
  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  return g;
}

std::string format_partition(const Partition& p) {
  std::ostringstream os;
  os << "communities " << p.n_communities << '\n';
  for (std::size_t i = 0; i < p.community.size(); ++i) {
    os << i << ' ';
    if (p.community[i] == kBackground) {
      os << "bg";
    } else {
      os << p.community[i];
    }
    os << '\n';
  }
  return os.str();
}

Partition parse_partition(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  Partition p;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    const auto where = "partition line " + std::to_string(line_no);
    if (!header) {
      std::string key;
      if (!(ls >> key >> p.n_communities) || key != "communities") {
        throw FormatError(where + ": expected 'communities M'");
      }
      header = true;
      continue;
    }
    std::size_t id = 0;
    std::string c;
    if (!(ls >> id >> c)) throw FormatError(where + ": expected 'cluster_id community_id|bg'");
    if (id != p.community.size()) throw FormatError(where + ": cluster ids must be consecutive from 0");
    if (c == "bg") {
      p.community.push_back(kBackground);
    } else {
      try {
        p.community.push_back(static_cast<std::int32_t>(std::stol(c)));
      } catch (const std::exception&) {
        throw FormatError(where + ": bad community id '" + c + "'");
      }
    }
  }
  if (!header) throw FormatError("partition: missing 'communities M' header");
  for (auto c : p.community) {
    if (c != kBackground && (c < 0 || static_cast<std::size_t>(c) >= p.n_communities)) {
      throw FormatError("partition: community id out of range");
    }
  }
  return p;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace leopart
