#include "leopart/sinkhorn.hpp"

#include <cmath>

#include "leopart/error.hpp"

namespace leopart {

namespace {

double log_sum_exp(const double* v, Eigen::Index n, Eigen::Index stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) mx = std::max(mx, v[i * stride]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += std::exp(v[i * stride] - mx);
  return mx + std::log(s);
}

void check_unit_rows(const MatD& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (std::abs(m.row(r).norm() - 1.0) > 1e-5) {
      throw ValidationError(std::string("sinkhorn: ") + what + " row " + std::to_string(r) + " is not unit norm");
    }
  }
}

}  // namespace

Assignment sinkhorn_from_scores(const MatD& scores, const SinkhornParams& params, std::size_t n_batch,
                                std::vector<double>* violation_trace) {
  const Eigen::Index m = scores.rows();
  const Eigen::Index k = scores.cols();
  if (m == 0 || k == 0) throw ValidationError("sinkhorn: empty score matrix");
  if (n_batch == 0 || static_cast<Eigen::Index>(n_batch) > m) throw ValidationError("sinkhorn: bad batch row count");
  if (!(params.epsilon > 0.0)) throw ValidationError("sinkhorn: epsilon must be positive");

  Assignment out;
  out.total_rows = static_cast<std::size_t>(m);
  if (m < k) {
    out.warnings.push_back("sinkhorn: fewer rows (" + std::to_string(m) + ") than prototypes (" +
                           std::to_string(k) + ")");
  }

  // Log transport plan, column-major so that both scalings are cache friendly enough.
  Eigen::MatrixXd log_p = scores / params.epsilon;
  // Start from a plan with total mass 1.
  {
    double mx = log_p.maxCoeff();
    const double total = std::log((log_p.array() - mx).exp().sum()) + mx;
    log_p.array() -= total;
  }
  const double log_row = -std::log(static_cast<double>(m));
  const double log_col = -std::log(static_cast<double>(k));

  Eigen::VectorXd row_lse(m);
  const auto column_violation = [&]() {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double mass = std::exp(log_sum_exp(log_p.col(j).data(), m, 1));
      worst = std::max(worst, std::abs(mass * static_cast<double>(k) - 1.0));
    }
    return worst;
  };

  for (std::size_t it = 0; it < params.n_iters; ++it) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double lse = log_sum_exp(log_p.col(j).data(), m, 1);
      log_p.col(j).array() += log_col - lse;
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const double lse = log_sum_exp(log_p.data() + i, k, m);
      log_p.row(i).array() += log_row - lse;
    }
    if (violation_trace) violation_trace->push_back(column_violation());
  }
  if (!log_p.allFinite()) throw NumericError("sinkhorn: non-finite transport plan");

  out.column_sums.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    out.column_sums(j) = static_cast<double>(m) * std::exp(log_sum_exp(log_p.col(j).data(), m, 1));
  }

  const auto nb = static_cast<Eigen::Index>(n_batch);
  out.q.resize(nb, k);
  for (Eigen::Index i = 0; i < nb; ++i) {
    const double lse = log_sum_exp(log_p.data() + i, k, m);
    for (Eigen::Index j = 0; j < k; ++j) out.q(i, j) = std::exp(log_p(i, j) - lse);
  }
  return out;
}

Assignment assign(const MatD& features, const MatD& prototypes, const SinkhornParams& params, std::size_t n_batch,
                  std::vector<double>* violation_trace) {
  if (features.cols() != prototypes.cols()) throw ValidationError("sinkhorn: feature/prototype dim mismatch");
  check_unit_rows(features, "feature");
  check_unit_rows(prototypes, "prototype");
  const MatD scores = features * prototypes.transpose();
  return sinkhorn_from_scores(scores, params, n_batch, violation_trace);
}

FeatureQueue::FeatureQueue(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), buffer_(static_cast<Eigen::Index>(capacity), static_cast<Eigen::Index>(dim)) {
  if (capacity == 0 || dim == 0) throw ValidationError("feature queue: capacity and dim must be positive");
  buffer_.setZero();
}

void FeatureQueue::push(const MatF& rows) {
  if (rows.cols() != static_cast<Eigen::Index>(dim_)) throw ValidationError("feature queue: dim mismatch");
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    buffer_.row(static_cast<Eigen::Index>(head_)) = rows.row(r);
    head_ = (head_ + 1) % capacity_;
    fill_ = std::min(fill_ + 1, capacity_);
  }
}

MatF FeatureQueue::contents() const {
  MatF out(static_cast<Eigen::Index>(fill_), static_cast<Eigen::Index>(dim_));
  const std::size_t start = (head_ + capacity_ - fill_) % capacity_;
  for (std::size_t i = 0; i < fill_; ++i) {
    out.row(static_cast<Eigen::Index>(i)) = buffer_.row(static_cast<Eigen::Index>((start + i) % capacity_));
  }
  return out;
}

void FeatureQueue::restore(MatF buffer, std::size_t fill, std::size_t head) {
  if (buffer.rows() != static_cast<Eigen::Index>(capacity_) || buffer.cols() != static_cast<Eigen::Index>(dim_) ||
      fill > capacity_ || head >= capacity_) {
    throw ValidationError("feature queue: inconsistent restore state");
  }
  buffer_ = std::move(buffer);
  fill_ = fill;
  head_ = head;
}

}  // namespace leopart
