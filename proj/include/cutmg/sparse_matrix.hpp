#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cutmg/common.hpp"

namespace cutmg {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed sparse row matrix. Column indices are sorted and unique in every row.
class SparseMatrix {
public:
  SparseMatrix() = default;

  SparseMatrix(int rows, int cols, std::vector<int> row_ptr, std::vector<int> col_idx, std::vector<double> values)
      : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {}

  /// Duplicates are summed in insertion order, so two entries receiving the same
  /// contributions in the same order end up bitwise identical.
  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<int> row_ptr(static_cast<std::size_t>(rows) + 1, 0);
    std::vector<int> col_idx;
    std::vector<double> values;
    col_idx.reserve(triplets.size());
    values.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size();) {
      const Triplet& t = triplets[k];
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw Error("SparseMatrix::from_triplets: index out of range");
      double v = 0.0;
      std::size_t e = k;
      while (e < triplets.size() && triplets[e].row == t.row && triplets[e].col == t.col) v += triplets[e++].value;
      col_idx.push_back(t.col);
      values.push_back(v);
      ++row_ptr[static_cast<std::size_t>(t.row) + 1];
      k = e;
    }
    std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
    return SparseMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
  }

  static SparseMatrix identity(int n) {
    std::vector<int> rp(static_cast<std::size_t>(n) + 1);
    std::vector<int> ci(static_cast<std::size_t>(n));
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(ci.begin(), ci.end(), 0);
    return SparseMatrix(n, n, std::move(rp), std::move(ci), std::vector<double>(static_cast<std::size_t>(n), 1.0));
  }

  static SparseMatrix diagonal_matrix(std::span<const double> d) {
    SparseMatrix I = identity(static_cast<int>(d.size()));
    std::copy(d.begin(), d.end(), I.values_.begin());
    return I;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  bool is_square() const { return rows_ == cols_; }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  std::span<const int> row_cols(int i) const {
    return {col_idx_.data() + row_ptr_[i], static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i])};
  }
  std::span<const double> row_values(int i) const {
    return {values_.data() + row_ptr_[i], static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i])};
  }

  /// Entry (i, j), zero when not stored.
  double at(int i, int j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return values_[static_cast<std::size_t>(row_ptr_[i] + (it - cols.begin()))];
  }

  bool has_entry(int i, int j) const {
    const auto cols = row_cols(i);
    return std::binary_search(cols.begin(), cols.end(), j);
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(static_cast<std::size_t>(std::min(rows_, cols_)), 0.0);
    for (int i = 0; i < static_cast<int>(d.size()); ++i) d[static_cast<std::size_t>(i)] = at(i, i);
    return d;
  }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    if (static_cast<int>(x.size()) != cols_ || static_cast<int>(y.size()) != rows_)
      throw Error("SparseMatrix::multiply: dimension mismatch");
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[i] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(rows_));
    multiply(x, y);
    return y;
  }

  /// y = A^T x
  void multiply_transpose(std::span<const double> x, std::span<double> y) const {
    if (static_cast<int>(x.size()) != rows_ || static_cast<int>(y.size()) != cols_)
      throw Error("SparseMatrix::multiply_transpose: dimension mismatch");
    std::fill(y.begin(), y.end(), 0.0);
    for (int i = 0; i < rows_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += values_[k] * x[i];
  }

  SparseMatrix transpose() const {
    std::vector<int> rp(static_cast<std::size_t>(cols_) + 1, 0);
    for (int c : col_idx_) ++rp[static_cast<std::size_t>(c) + 1];
    std::partial_sum(rp.begin(), rp.end(), rp.begin());
    std::vector<int> next(rp.begin(), rp.end() - 1);
    std::vector<int> ci(nnz());
    std::vector<double> v(nnz());
    for (int i = 0; i < rows_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const int pos = next[col_idx_[k]]++;
        ci[pos] = i;
        v[pos] = values_[k];
      }
    return SparseMatrix(cols_, rows_, std::move(rp), std::move(ci), std::move(v));
  }

  /// Sparse product this * B.
  SparseMatrix multiply(const SparseMatrix& B) const {
    if (cols_ != B.rows_) throw Error("SparseMatrix::multiply: dimension mismatch");
    std::vector<int> rp(static_cast<std::size_t>(rows_) + 1, 0);
    std::vector<int> ci;
    std::vector<double> v;
    std::vector<double> acc(static_cast<std::size_t>(B.cols_), 0.0);
    std::vector<int> marker(static_cast<std::size_t>(B.cols_), -1);
    std::vector<int> pattern;
    for (int i = 0; i < rows_; ++i) {
      pattern.clear();
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const int j = col_idx_[k];
        const double a = values_[k];
        for (int l = B.row_ptr_[j]; l < B.row_ptr_[j + 1]; ++l) {
          const int c = B.col_idx_[l];
          if (marker[c] != i) {
            marker[c] = i;
            acc[c] = 0.0;
            pattern.push_back(c);
          }
          acc[c] += a * B.values_[l];
        }
      }
      std::sort(pattern.begin(), pattern.end());
      for (int c : pattern) {
        ci.push_back(c);
        v.push_back(acc[c]);
      }
      rp[static_cast<std::size_t>(i) + 1] = static_cast<int>(ci.size());
    }
    return SparseMatrix(rows_, B.cols_, std::move(rp), std::move(ci), std::move(v));
  }

  /// Principal submatrix on the given index list, rows/cols ordered as listed.
  SparseMatrix principal_submatrix(std::span<const int> idx) const {
    std::vector<int> local(static_cast<std::size_t>(cols_), -1);
    for (std::size_t k = 0; k < idx.size(); ++k) local[static_cast<std::size_t>(idx[k])] = static_cast<int>(k);
    std::vector<Triplet> t;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const int i = idx[k];
      for (int p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const int lj = local[static_cast<std::size_t>(col_idx_[p])];
        if (lj >= 0) t.push_back({static_cast<int>(k), lj, values_[p]});
      }
    }
    const int n = static_cast<int>(idx.size());
    return from_triplets(n, n, std::move(t));
  }

  /// max |A_ij - A_ji| over all stored entries.
  double max_asymmetry() const {
    double m = 0.0;
    for (int i = 0; i < rows_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) m = std::max(m, std::abs(values_[k] - at(col_idx_[k], i)));
    return m;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  /// (A + A^T) / 2, assuming a structurally symmetric pattern.
  SparseMatrix symmetrized() const {
    SparseMatrix S = *this;
    for (int i = 0; i < rows_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) S.values_[k] = 0.5 * (values_[k] + at(col_idx_[k], i));
    return S;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) D(i, col_idx_[k]) += values_[k];
    return D;
  }

  static SparseMatrix from_dense(const Eigen::MatrixXd& D, double drop = 0.0) {
    std::vector<Triplet> t;
    for (int i = 0; i < D.rows(); ++i)
      for (int j = 0; j < D.cols(); ++j)
        if (std::abs(D(i, j)) > drop) t.push_back({i, j, D(i, j)});
    return from_triplets(static_cast<int>(D.rows()), static_cast<int>(D.cols()), std::move(t));
  }

  /// Matrix Market coordinate format (general, real).
  void write_matrix_market(std::ostream& os) const {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << rows_ << ' ' << cols_ << ' ' << nnz() << '\n';
    os.precision(17);
    for (int i = 0; i < rows_; ++i)
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) os << i + 1 << ' ' << col_idx_[k] + 1 << ' ' << values_[k] << '\n';
  }

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Lower envelope in the natural ordering: first stored column of each row, capped at the diagonal.
inline std::vector<int> envelope_profile(const SparseMatrix& A) {
  std::vector<int> first(static_cast<std::size_t>(A.rows()));
  for (int i = 0; i < A.rows(); ++i) {
    const auto c = A.row_cols(i);
    first[i] = c.empty() ? i : std::min(c.front(), i);
  }
  return first;
}

/// r = b - A x
inline void residual(const SparseMatrix& A, std::span<const double> x, std::span<const double> b, std::span<double> r) {
  A.multiply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
}

}  // namespace cutmg
