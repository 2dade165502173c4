#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "leopart/matrix.hpp"

namespace leopart {

struct KMeansParams {
  std::size_t k = 0;
  std::size_t n_seeds = 5;
  std::size_t max_iter = 100;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct KMeansResult {
  MatD centroids;                     // k x D
  std::vector<std::uint32_t> labels;  // one per point
  double inertia = 0.0;               // sum of squared distances to assigned centroids
  std::vector<double> inertia_trace;  // best run, one entry per Lloyd iteration
  std::vector<double> seed_inertia;   // final inertia of every restart
  std::size_t iterations = 0;
};

// k-means++ seeding and Lloyd iterations until the labels stop changing or
// max_iter; the lowest-inertia restart wins. Empty clusters are re-seeded from
// the point farthest from its centroid. Ties go to the lower cluster index.
KMeansResult kmeans(const MatD& points, const KMeansParams& params);

// Nearest-centroid labels for new points.
std::vector<std::uint32_t> assign_to_centroids(const MatD& points, const MatD& centroids, std::size_t threads = 1);

}  // namespace leopart
