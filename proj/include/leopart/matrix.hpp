#pragma once

#include <Eigen/Dense>

#include "leopart/grid.hpp"

namespace leopart {

// Token-major matrices: one row per token / sample.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatF = Mat<float>;
using MatD = Mat<double>;

// C x H x W grid -> (H*W) x C matrix.
template <typename T>
Mat<T> grid_to_rows(const Grid<T>& g) {
  Mat<T> m(static_cast<Eigen::Index>(g.plane()), static_cast<Eigen::Index>(g.channels));
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t k = 0; k < g.plane(); ++k) m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = g.data[c * g.plane() + k];
  }
  return m;
}

// Rows [row0, row0 + h*w) of `m` -> m.cols() x h x w grid.
template <typename T, typename Derived>
Grid<T> rows_to_grid(const Eigen::MatrixBase<Derived>& m, std::size_t h, std::size_t w, Eigen::Index row0 = 0) {
  Grid<T> g(static_cast<std::size_t>(m.cols()), h, w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t k = 0; k < h * w; ++k) g.data[c * h * w + k] = m(row0 + static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c));
  }
  return g;
}

}  // namespace leopart
