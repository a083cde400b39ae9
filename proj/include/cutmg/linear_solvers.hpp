#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "cutmg/sparse_matrix.hpp"

namespace cutmg {

enum class SweepDirection { Forward, Backward };

/// One in-place Gauss-Seidel sweep for A x = b.
inline void gauss_seidel_sweep(const SparseMatrix& A, std::span<double> x, std::span<const double> b,
                               SweepDirection dir) {
  const int n = A.rows();
  if (static_cast<int>(x.size()) != n || static_cast<int>(b.size()) != n)
    throw Error("gauss_seidel_sweep: dimension mismatch");
  const auto& rp = A.row_ptr();
  const auto& ci = A.col_idx();
  const auto& v = A.values();
  auto relax = [&](int i) {
    double s = b[i];
    double d = 0.0;
    for (int k = rp[i]; k < rp[i + 1]; ++k) {
      if (ci[k] == i)
        d = v[k];
      else
        s -= v[k] * x[ci[k]];
    }
    if (d == 0.0) throw NumericalError("gauss_seidel_sweep: zero diagonal in row " + std::to_string(i));
    x[i] = s / d;
  };
  if (dir == SweepDirection::Forward)
    for (int i = 0; i < n; ++i) relax(i);
  else
    for (int i = n - 1; i >= 0; --i) relax(i);
}

struct PcgResult {
  int iterations = 0;
  bool converged = false;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. Stops once ||b - A x|| <= rel_tol ||b||
/// (Euclidean norm of the true recursive residual). Throws on negative curvature.
inline PcgResult pcg_jacobi(const SparseMatrix& A, std::span<const double> b, std::span<double> x, double rel_tol,
                            int max_iter) {
  const int n = A.rows();
  if (static_cast<int>(b.size()) != n || static_cast<int>(x.size()) != n) throw Error("pcg_jacobi: dimension mismatch");
  PcgResult res;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  std::vector<double> dinv = A.diagonal();
  for (double& d : dinv) {
    if (d <= 0.0) throw NumericalError("pcg_jacobi: non-positive diagonal, matrix is not SPD");
    d = 1.0 / d;
  }
  std::vector<double> r(n), z(n), p(n), q(n);
  residual(A, x, b, r);
  double rnorm = norm2(r);
  res.relative_residual = rnorm / bnorm;
  if (res.relative_residual <= rel_tol) {
    res.converged = true;
    return res;
  }
  for (int i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
  p = z;
  double rz = dot(r, z);
  while (res.iterations < max_iter) {
    A.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) throw NumericalError("pcg_jacobi: non-positive curvature, matrix is not SPD");
    const double alpha = rz / pq;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    ++res.iterations;
    rnorm = norm2(r);
    res.relative_residual = rnorm / bnorm;
    if (res.relative_residual <= rel_tol) {
      res.converged = true;
      break;
    }
    for (int i = 0; i < n; ++i) z[i] = dinv[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

/// Breadth first search ordering of an undirected graph. Every connected
/// component is started from its lowest-numbered node; neighbours are visited
/// in increasing order.
inline std::vector<int> bfs_order(const std::vector<std::vector<int>>& adjacency) {
  const int n = static_cast<int>(adjacency.size());
  std::vector<int> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  std::deque<int> queue;
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    seen[s] = 1;
    queue.push_back(s);
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (int w : adjacency[v])
        if (!seen[w]) {
          seen[w] = 1;
          queue.push_back(w);
        }
    }
  }
  return order;
}

/// Graph of the off-diagonal pattern of a square matrix.
inline std::vector<std::vector<int>> matrix_graph(const SparseMatrix& A) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(A.rows()));
  for (int i = 0; i < A.rows(); ++i)
    for (int j : A.row_cols(i))
      if (j != i) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

/// Cholesky factorization P A P^T = L L^T stored row-wise inside the
/// envelope (profile) of the permuted matrix. Fill stays within the envelope.
class EnvelopeCholesky {
public:
  EnvelopeCholesky() = default;

  /// `perm[k]` is the original index placed at position k.
  static EnvelopeCholesky factor(const SparseMatrix& A, std::vector<int> perm) {
    const int n = A.rows();
    if (!A.is_square()) throw Error("EnvelopeCholesky: matrix not square");
    if (static_cast<int>(perm.size()) != n) throw Error("EnvelopeCholesky: permutation size mismatch");
    EnvelopeCholesky C;
    C.n_ = n;
    C.perm_ = std::move(perm);
    C.inv_.assign(n, -1);
    for (int k = 0; k < n; ++k) {
      if (C.perm_[k] < 0 || C.perm_[k] >= n || C.inv_[C.perm_[k]] >= 0) throw Error("EnvelopeCholesky: invalid permutation");
      C.inv_[C.perm_[k]] = k;
    }
    C.nnz_a_ = A.nnz();
    // envelope: first column per permuted row
    C.first_.assign(n, 0);
    for (int k = 0; k < n; ++k) {
      int f = k;
      for (int j : A.row_cols(C.perm_[k])) f = std::min(f, C.inv_[j]);
      C.first_[k] = f;
    }
    C.start_.assign(n + 1, 0);
    for (int k = 0; k < n; ++k) C.start_[k + 1] = C.start_[k] + (k - C.first_[k] + 1);
    C.values_.assign(static_cast<std::size_t>(C.start_[n]), 0.0);
    for (int k = 0; k < n; ++k) {
      const auto cols = A.row_cols(C.perm_[k]);
      const auto vals = A.row_values(C.perm_[k]);
      for (std::size_t p = 0; p < cols.size(); ++p) {
        const int j = C.inv_[cols[p]];
        if (j <= k) C.values_[C.start_[k] + (j - C.first_[k])] = vals[p];
      }
    }
    std::vector<double> inv_pivot(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double* Li = &C.values_[C.start_[i]];
      const int fi = C.first_[i];
      double d = Li[i - fi];
      for (int j = fi; j < i; ++j) {
        const double* Lj = &C.values_[C.start_[j]];
        const int fj = C.first_[j];
        const int k0 = std::max(fi, fj);
        double s = Li[j - fi];
        const double* a = Li + (k0 - fi);
        const double* b = Lj + (k0 - fj);
        for (int k = 0; k < j - k0; ++k) s -= a[k] * b[k];
        s *= inv_pivot[j];
        Li[j - fi] = s;
        d -= s * s;
      }
      if (!(d > 0.0))
        throw NumericalError("EnvelopeCholesky: non-positive pivot at position " + std::to_string(i) +
                             ", matrix is not SPD");
      Li[i - fi] = std::sqrt(d);
      inv_pivot[i] = 1.0 / Li[i - fi];
    }
    C.nnz_l_ = 0;
    for (double v : C.values_)
      if (v != 0.0) ++C.nnz_l_;
    return C;
  }

  /// Envelope Cholesky under the breadth first search ordering of the matrix graph.
  static EnvelopeCholesky factor_bfs(const SparseMatrix& A) { return factor(A, bfs_order(matrix_graph(A))); }

  int size() const { return n_; }
  std::size_t nnz_a() const { return nnz_a_; }
  /// Numerically nonzero entries of L (diagonal included).
  std::size_t nnz_l() const { return nnz_l_; }
  std::size_t envelope_size() const { return values_.size(); }
  const std::vector<int>& permutation() const { return perm_; }

  /// Entry L(i, j) in permuted numbering.
  double l(int i, int j) const {
    if (j > i || j < first_[i]) return 0.0;
    return values_[start_[i] + (j - first_[i])];
  }

  void solve(std::span<const double> b, std::span<double> x) const {
    if (static_cast<int>(b.size()) != n_ || static_cast<int>(x.size()) != n_) throw Error("EnvelopeCholesky::solve: size");
    std::vector<double> y(n_);
    for (int i = 0; i < n_; ++i) {
      const double* Li = &values_[start_[i]];
      double s = b[perm_[i]];
      for (int k = first_[i]; k < i; ++k) s -= Li[k - first_[i]] * y[k];
      y[i] = s / Li[i - first_[i]];
    }
    for (int i = n_ - 1; i >= 0; --i) {
      const double* Li = &values_[start_[i]];
      y[i] /= Li[i - first_[i]];
      const double yi = y[i];
      for (int k = first_[i]; k < i; ++k) y[k] -= Li[k - first_[i]] * yi;
    }
    for (int i = 0; i < n_; ++i) x[perm_[i]] = y[i];
  }

  std::vector<double> solve(std::span<const double> b) const {
    std::vector<double> x(n_);
    solve(b, x);
    return x;
  }

private:
  int n_ = 0;
  std::vector<int> perm_;
  std::vector<int> inv_;
  std::vector<int> first_;
  std::vector<int> start_;
  std::vector<double> values_;
  std::size_t nnz_a_ = 0;
  std::size_t nnz_l_ = 0;
};

/// Blocked BFS permutation: nodes of `adjacency` are ordered by BFS and each
/// node expands to its dofs `dofs_of_node[node]` kept consecutive.
inline std::vector<int> blocked_bfs_permutation(const std::vector<std::vector<int>>& adjacency,
                                                const std::vector<std::vector<int>>& dofs_of_node) {
  std::vector<int> perm;
  for (int v : bfs_order(adjacency))
    for (int d : dofs_of_node[v]) perm.push_back(d);
  return perm;
}

/// Envelope Cholesky of an interface matrix: the node graph is the interface
/// vertex adjacency and the dofs of each vertex stay adjacent in the ordering.
inline EnvelopeCholesky sparse_cholesky_bfs(const SparseMatrix& A, const std::vector<std::vector<int>>& node_adjacency,
                                            const std::vector<std::vector<int>>& dofs_of_node) {
  return EnvelopeCholesky::factor(A, blocked_bfs_permutation(node_adjacency, dofs_of_node));
}

}  // namespace cutmg
