#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "leopart/matrix.hpp"

namespace leopart {

struct SinkhornParams {
  double epsilon = 0.05;
  std::size_t n_iters = 3;
};

struct Assignment {
  // Row-stochastic soft assignments of the batch rows only (M_batch x K).
  MatD q;
  // Column sums of the full transport plan before the final row
  // normalization, scaled so that the target for each column is M / K.
  Eigen::VectorXd column_sums;
  std::size_t total_rows = 0;
  std::vector<std::string> warnings;
};

// Equipartitioned soft assignment from precomputed scores (M x K, e.g. Z C^T).
// The first `n_batch` rows are batch rows; the remainder (queue rows) shape
// the marginals but are not returned. Computation is in the log domain.
// `violation_trace`, when given, receives the maximum relative column
// marginal violation after each iteration.
Assignment sinkhorn_from_scores(const MatD& scores, const SinkhornParams& params, std::size_t n_batch,
                                std::vector<double>* violation_trace = nullptr);

// Checks unit norms of both operands, then scores = features * prototypes^T.
Assignment assign(const MatD& features, const MatD& prototypes, const SinkhornParams& params,
                  std::size_t n_batch, std::vector<double>* violation_trace = nullptr);

// FIFO ring buffer of unit-norm feature rows.
class FeatureQueue {
 public:
  FeatureQueue(std::size_t capacity, std::size_t dim);

  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::size_t fill() const { return fill_; }
  bool empty() const { return fill_ == 0; }
  // Queue rows join the assignment only once the buffer is at least half full.
  bool ready() const { return 2 * fill_ >= capacity_; }

  // Appends rows in order, evicting the oldest beyond capacity.
  void push(const MatF& rows);
  // Contents oldest -> newest.
  MatF contents() const;

  // Raw state for checkpointing.
  const MatF& buffer() const { return buffer_; }
  std::size_t head() const { return head_; }
  void restore(MatF buffer, std::size_t fill, std::size_t head);

 private:
  std::size_t capacity_;
  std::size_t dim_;
  MatF buffer_;
  std::size_t fill_ = 0;
  std::size_t head_ = 0;  // next write slot
};

}  // namespace leopart
