#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cutmg/linear_solvers.hpp"
#include "cutmg/sparse_matrix.hpp"

namespace cutmg {

struct RitzBounds {
  double smallest = 0.0;
  double largest = 0.0;
  int steps = 0;
};

/// Lanczos with full reorthogonalization on a symmetric operator; returns the
/// extreme Ritz values once both have settled to `tol` (relative) or after
/// `max_steps` steps. The start vector is drawn from a fixed-seed generator.
inline RitzBounds lanczos_extremes(const std::function<void(std::span<const double>, std::span<double>)>& apply, int n,
                                   int max_steps = 200, double tol = 1e-10) {
  RitzBounds out;
  if (n == 0) return out;
  const int m = std::min(max_steps, n);
  std::mt19937 gen(12345);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<std::vector<double>> V;
  V.reserve(m);
  std::vector<double> q(n);
  for (double& v : q) v = dist(gen) + 0.1;
  {
    const double s = norm2(q);
    for (double& v : q) v /= s;
  }
  std::vector<double> alpha, beta;
  std::vector<double> w(n);
  double prev_lo = 0.0, prev_hi = 0.0;
  int settled = 0;
  for (int k = 0; k < m; ++k) {
    V.push_back(q);
    apply(V.back(), w);
    const double a = dot(w, V.back());
    alpha.push_back(a);
    for (int i = 0; i < n; ++i) w[i] -= a * V[k][i] + (k > 0 ? beta.back() * V[k - 1][i] : 0.0);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& v : V) {
        const double c = dot(w, v);
        for (int i = 0; i < n; ++i) w[i] -= c * v[i];
      }
    const double b = norm2(w);

    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    Eigen::VectorXd e(std::max<Eigen::Index>(0, static_cast<Eigen::Index>(alpha.size()) - 1));
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues()(0);
    const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
    out.smallest = lo;
    out.largest = hi;
    out.steps = k + 1;
    const double scale = std::max(std::abs(hi), std::numeric_limits<double>::min());
    if (k > 0 && std::abs(lo - prev_lo) <= tol * scale && std::abs(hi - prev_hi) <= tol * std::abs(hi))
      ++settled;
    else
      settled = 0;
    prev_lo = lo;
    prev_hi = hi;
    if (settled >= 3) break;
    if (b <= 1e-14 * scale) break;  // invariant subspace found
    beta.push_back(b);
    for (int i = 0; i < n; ++i) q[i] = w[i] / b;
  }
  return out;
}

struct ConditionEstimate {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double condition = 0.0;
  bool inverse_iteration = false;  // lambda_min from Lanczos on the inverse
};

/// D^{-1/2} A D^{-1/2} with D = diag(A); its spectrum equals that of D^{-1} A.
inline SparseMatrix jacobi_scaled(const SparseMatrix& A) {
  std::vector<double> s = A.diagonal();
  for (double& d : s) {
    if (!(d > 0.0)) throw NumericalError("jacobi_scaled: non-positive diagonal");
    d = 1.0 / std::sqrt(d);
  }
  SparseMatrix S = A;
  auto& v = S.values();
  for (int i = 0; i < A.rows(); ++i)
    for (int k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k) v[k] *= s[i] * s[A.col_idx()[k]];
  return S;
}

/// Spectral condition number estimate of an SPD matrix, optionally of the
/// Jacobi-scaled matrix. The largest eigenvalue comes from Lanczos on the
/// operator; the smallest from Lanczos on its inverse (via the envelope
/// Cholesky factor), falling back to the smallest Ritz value when the factor
/// does not exist.
inline ConditionEstimate estimate_condition(const SparseMatrix& A, bool jacobi_scaling, int max_steps = 200,
                                            double tol = 1e-10) {
  ConditionEstimate est;
  const SparseMatrix S = jacobi_scaling ? jacobi_scaled(A) : A;
  const int n = S.rows();
  if (n == 0) return est;
  const RitzBounds fwd = lanczos_extremes([&](std::span<const double> x, std::span<double> y) { S.multiply(x, y); }, n,
                                          max_steps, tol);
  est.lambda_max = fwd.largest;
  est.lambda_min = fwd.smallest;
  try {
    const EnvelopeCholesky C = EnvelopeCholesky::factor_bfs(S);
    const RitzBounds inv =
        lanczos_extremes([&](std::span<const double> x, std::span<double> y) { C.solve(x, y); }, n, max_steps, tol);
    if (inv.largest > 0.0) {
      est.lambda_min = 1.0 / inv.largest;
      est.inverse_iteration = true;
    }
  } catch (const NumericalError&) {
  }
  est.condition = est.lambda_min > 0.0 ? est.lambda_max / est.lambda_min : std::numeric_limits<double>::infinity();
  return est;
}

}  // namespace cutmg
