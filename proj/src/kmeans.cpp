#include "leopart/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <thread>

#include "leopart/error.hpp"
#include "leopart/rng.hpp"

namespace leopart {

namespace {

// Squared distances via |x|^2 - 2 x.c + |c|^2, clamped at zero; labels by argmin.
// Blocks of points are independent, so splitting them over threads leaves the
// result unchanged.
void assign_block(const MatD& points, const Eigen::VectorXd& point_sq, const MatD& centroids,
                  const Eigen::VectorXd& centroid_sq, Eigen::Index begin, Eigen::Index end,
                  std::vector<std::uint32_t>& labels, std::vector<double>& dist) {
  constexpr Eigen::Index kChunk = 1024;
  for (Eigen::Index r0 = begin; r0 < end; r0 += kChunk) {
    const Eigen::Index n = std::min(kChunk, end - r0);
    const MatD dots = points.middleRows(r0, n) * centroids.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = std::max(0.0, point_sq(r0 + i) - 2.0 * dots(i, c) + centroid_sq(c));
        if (d < best) {
          best = d;
          arg = static_cast<std::uint32_t>(c);
        }
      }
      labels[static_cast<std::size_t>(r0 + i)] = arg;
      dist[static_cast<std::size_t>(r0 + i)] = best;
    }
  }
}

void assign_all(const MatD& points, const Eigen::VectorXd& point_sq, const MatD& centroids,
                std::vector<std::uint32_t>& labels, std::vector<double>& dist, std::size_t threads) {
  const Eigen::VectorXd centroid_sq = centroids.rowwise().squaredNorm();
  const Eigen::Index m = points.rows();
  if (threads <= 1 || m < 4096) {
    assign_block(points, point_sq, centroids, centroid_sq, 0, m, labels, dist);
    return;
  }
  std::vector<std::thread> pool;
  const Eigen::Index per = (m + static_cast<Eigen::Index>(threads) - 1) / static_cast<Eigen::Index>(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    const Eigen::Index b = static_cast<Eigen::Index>(t) * per;
    const Eigen::Index e = std::min(m, b + per);
    if (b >= e) break;
    pool.emplace_back([&, b, e] { assign_block(points, point_sq, centroids, centroid_sq, b, e, labels, dist); });
  }
  for (auto& th : pool) th.join();
}

double exact_inertia(const MatD& points, const MatD& centroids, const std::vector<std::uint32_t>& labels) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    s += (points.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return s;
}

MatD kmeanspp_init(const MatD& points, std::size_t k, Rng& rng) {
  const Eigen::Index m = points.rows();
  MatD c(static_cast<Eigen::Index>(k), points.cols());
  c.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m))));
  std::vector<double> d2(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) d2[static_cast<std::size_t>(i)] = (points.row(i) - c.row(0)).squaredNorm();
  for (std::size_t j = 1; j < k; ++j) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      pick = m - 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        u -= d2[static_cast<std::size_t>(i)];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
    }
    c.row(static_cast<Eigen::Index>(j)) = points.row(pick);
    for (Eigen::Index i = 0; i < m; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (points.row(i) - c.row(static_cast<Eigen::Index>(j))).squaredNorm());
    }
  }
  return c;
}

}  // namespace

std::vector<std::uint32_t> assign_to_centroids(const MatD& points, const MatD& centroids, std::size_t threads) {
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(points.rows()));
  std::vector<double> dist(labels.size());
  const Eigen::VectorXd point_sq = points.rowwise().squaredNorm();
  assign_all(points, point_sq, centroids, labels, dist, threads);
  return labels;
}

KMeansResult kmeans(const MatD& points, const KMeansParams& params) {
  const auto m = static_cast<std::size_t>(points.rows());
  const std::size_t k = params.k;
  if (k == 0) throw ValidationError("kmeans: k must be positive");
  if (m < k) {
    throw ValidationError("kmeans: " + std::to_string(m) + " points cannot form " + std::to_string(k) + " clusters");
  }
  if (params.n_seeds == 0) throw ValidationError("kmeans: n_seeds must be positive");

  const Eigen::VectorXd point_sq = points.rowwise().squaredNorm();
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  std::vector<double> seed_inertia;

  for (std::size_t s = 0; s < params.n_seeds; ++s) {
    Rng rng = Rng::derive(params.seed, 0x6b6d, s);
    KMeansResult run;
    run.centroids = kmeanspp_init(points, k, rng);
    run.labels.assign(m, 0);
    std::vector<double> dist(m, 0.0);
    std::vector<std::uint32_t> prev;

    for (std::size_t it = 0; it < std::max<std::size_t>(params.max_iter, 1); ++it) {
      assign_all(points, point_sq, run.centroids, run.labels, dist, params.threads);
      run.iterations = it + 1;
      const bool converged = !prev.empty() && prev == run.labels;

      // Update step.
      MatD sums = MatD::Zero(static_cast<Eigen::Index>(k), points.cols());
      std::vector<std::size_t> counts(k, 0);
      for (std::size_t i = 0; i < m; ++i) {
        sums.row(run.labels[i]) += points.row(static_cast<Eigen::Index>(i));
        ++counts[run.labels[i]];
      }
      std::vector<char> taken(m, 0);
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) {
          run.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
          continue;
        }
        // Empty: move onto the farthest not-yet-used point.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
          if (!taken[i] && dist[i] > far_d) {
            far_d = dist[i];
            far = i;
          }
        }
        taken[far] = 1;
        dist[far] = 0.0;
        run.centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
      }
      run.inertia_trace.push_back(exact_inertia(points, run.centroids, run.labels));
      if (converged) break;
      prev = run.labels;
    }
    run.inertia = run.inertia_trace.back();
    seed_inertia.push_back(run.inertia);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  best.seed_inertia = std::move(seed_inertia);
  return best;
}

}  // namespace leopart
