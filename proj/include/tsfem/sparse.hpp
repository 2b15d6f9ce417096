#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "tsfem/error.hpp"

namespace tsfem {

using Vector = Eigen::VectorXd;

/// Row-compressed square matrix.
class SparseOperator {
 public:
  SparseOperator() = default;

  std::size_t dimension() const noexcept { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t nonzeros() const noexcept { return values_.size(); }
  bool symmetric() const noexcept { return symmetric_; }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  double value(std::size_t row, std::size_t col) const {
    const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row]);
    const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[row + 1]);
    const auto it = std::lower_bound(first, last, col);
    return (it != last && *it == col) ? values_[static_cast<std::size_t>(it - col_idx_.begin())] : 0.0;
  }

  Vector apply(const Eigen::Ref<const Vector>& x) const {
    if (static_cast<std::size_t>(x.size()) != dimension())
      fail(ErrorKind::input, "operator dimension " + std::to_string(dimension()) + " does not match vector size " +
                                 std::to_string(x.size()));
    Vector y(x.size());
    for (std::size_t r = 0; r < dimension(); ++r) {
      double sum = 0.0;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) sum += values_[k] * x[static_cast<Eigen::Index>(col_idx_[k])];
      y[static_cast<Eigen::Index>(r)] = sum;
    }
    return y;
  }

  double row_sum(std::size_t row) const {
    double sum = 0.0;
    for (std::size_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) sum += values_[k];
    return sum;
  }

  double row_abs_max(std::size_t row) const {
    double m = 0.0;
    for (std::size_t k = row_ptr_[row]; k < row_ptr_[row + 1]; ++k) m = std::max(m, std::abs(values_[k]));
    return m;
  }

  Vector diagonal() const {
    Vector d = Vector::Zero(static_cast<Eigen::Index>(dimension()));
    for (std::size_t r = 0; r < dimension(); ++r) d[static_cast<Eigen::Index>(r)] = value(r, r);
    return d;
  }

  /// Exact (bitwise) symmetry check.
  bool is_structurally_symmetric() const {
    for (std::size_t r = 0; r < dimension(); ++r) {
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        if (value(col_idx_[k], r) != values_[k]) return false;
      }
    }
    return true;
  }

  Eigen::SparseMatrix<double> to_eigen() const {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(values_.size());
    for (std::size_t r = 0; r < dimension(); ++r) {
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
        triplets.emplace_back(static_cast<int>(r), static_cast<int>(col_idx_[k]), values_[k]);
    }
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(dimension()), static_cast<Eigen::Index>(dimension()));
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
  }

  friend class SparseBuilder;

 private:
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
  bool symmetric_ = false;
};

/// Accumulates (row, col, value) contributions. Duplicates are summed in
/// insertion order, so mirrored contributions added pairwise give exactly
/// symmetric entries.
class SparseBuilder {
 public:
  explicit SparseBuilder(std::size_t dimension) : dimension_(dimension) {}

  void add(std::size_t row, std::size_t col, double value) {
    entries_.push_back({row, col, value});
  }

  void reserve(std::size_t n) { entries_.reserve(n); }

  SparseOperator build(bool symmetric) && {
    std::stable_sort(entries_.begin(), entries_.end(),
                     [](const Entry& a, const Entry& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    SparseOperator op;
    op.symmetric_ = symmetric;
    op.row_ptr_.assign(dimension_ + 1, 0);
    for (std::size_t k = 0; k < entries_.size();) {
      const auto [row, col, v0] = entries_[k];
      if (row >= dimension_ || col >= dimension_) fail(ErrorKind::assembly, "sparse entry out of range");
      double sum = v0;
      std::size_t j = k + 1;
      for (; j < entries_.size() && entries_[j].row == row && entries_[j].col == col; ++j) sum += entries_[j].value;
      op.col_idx_.push_back(col);
      op.values_.push_back(sum);
      ++op.row_ptr_[row + 1];
      k = j;
    }
    std::partial_sum(op.row_ptr_.begin(), op.row_ptr_.end(), op.row_ptr_.begin());
    return op;
  }

 private:
  struct Entry {
    std::size_t row, col;
    double value;
  };
  std::size_t dimension_;
  std::vector<Entry> entries_;
};

/// Diagonal operator with strictly positive weights (lumped masses).
struct DiagonalOperator {
  Vector values;

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(values.size()); }
  Vector apply(const Vector& x) const { return values.cwiseProduct(x); }
  double total() const { return values.sum(); }
};

inline SparseOperator to_sparse(const DiagonalOperator& d) {
  SparseBuilder builder(d.dimension());
  for (std::size_t i = 0; i < d.dimension(); ++i) builder.add(i, i, d.values[static_cast<Eigen::Index>(i)]);
  return std::move(builder).build(true);
}

/// a*A + b*B for operators of equal dimension.
inline SparseOperator combine(double a, const SparseOperator& A, double b, const SparseOperator& B) {
  if (A.dimension() != B.dimension()) fail(ErrorKind::assembly, "operator dimensions differ");
  SparseBuilder builder(A.dimension());
  builder.reserve(A.nonzeros() + B.nonzeros());
  for (const auto* op : {&A, &B}) {
    const double scale = op == &A ? a : b;
    const auto rp = op->row_ptr();
    const auto ci = op->col_idx();
    const auto v = op->values();
    for (std::size_t r = 0; r < op->dimension(); ++r)
      for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) builder.add(r, ci[k], scale * v[k]);
  }
  return std::move(builder).build(A.symmetric() && B.symmetric());
}

inline SparseOperator combine(double a, const SparseOperator& A, double b, const DiagonalOperator& B) {
  return combine(a, A, b, to_sparse(B));
}

}  // namespace tsfem
