#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "cutmg/common.hpp"

namespace cutmg {

/// Points in barycentric coordinates and weights on the reference Dim-simplex.
/// Weights sum to the reference measure 1/Dim!.
template <int Dim>
struct QuadratureRule {
  int degree = 0;
  std::vector<std::array<double, Dim + 1>> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Gauss-Legendre nodes and weights on [0, 1].
inline void gauss_legendre_01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

namespace detail {

/// Collapsed (Duffy) tensor Gauss rule, exact for polynomials of total degree `degree`.
template <int Dim>
QuadratureRule<Dim> collapsed_gauss(int degree) {
  const int n = (degree + Dim) / 2 + 1;
  std::vector<double> gx, gw;
  gauss_legendre_01(n, gx, gw);
  QuadratureRule<Dim> r;
  r.degree = degree;
  std::array<int, Dim> idx{};
  while (true) {
    std::array<double, Dim> x{};
    double weight = 1.0;
    double rest = 1.0;
    for (int k = 0; k < Dim; ++k) {
      const double u = gx[idx[k]];
      x[k] = u * rest;
      weight *= gw[idx[k]] * rest;  // Duffy Jacobian factor
      rest *= (1.0 - u);
    }
    std::array<double, Dim + 1> lam{};
    double s = 0.0;
    for (int k = 0; k < Dim; ++k) {
      lam[k + 1] = x[k];
      s += x[k];
    }
    lam[0] = 1.0 - s;
    r.points.push_back(lam);
    r.weights.push_back(weight);
    int k = 0;
    while (k < Dim && ++idx[k] == n) idx[k++] = 0;
    if (k == Dim) break;
  }
  return r;
}

}  // namespace detail

/// Rule on the reference Dim-simplex exact up to the given degree (0..8).
template <int Dim>
const QuadratureRule<Dim>& simplex_rule(int degree) {
  static_assert(Dim >= 1 && Dim <= 3);
  static const std::array<QuadratureRule<Dim>, 9> rules = [] {
    std::array<QuadratureRule<Dim>, 9> r;
    for (int p = 0; p < 9; ++p) r[p] = detail::collapsed_gauss<Dim>(p);
    return r;
  }();
  if (degree < 0 || degree > 8) throw Error("simplex_rule: unsupported degree");
  return rules[degree];
}

}  // namespace cutmg
