#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cutmg {

/// Points never take part in template argument deduction; the dimension
/// comes from the mesh or is given explicitly.
template <int Dim>
using Point = std::array<double, static_cast<std::size_t>(Dim)>;

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied parameters (dimension, counts, coefficients).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A geometric assumption on the level hierarchy does not hold.
class AssumptionError : public Error {
public:
  using Error::Error;
};

/// Breakdown inside a numerical kernel (zero pivot, lost definiteness, ...).
class NumericalError : public Error {
public:
  using Error::Error;
};

template <std::size_t N>
inline std::array<double, N> operator+(const std::array<double, N>& a, const std::array<double, N>& b) {
  std::array<double, N> r;
  for (std::size_t k = 0; k < N; ++k) r[k] = a[k] + b[k];
  return r;
}

template <std::size_t N>
inline std::array<double, N> operator-(const std::array<double, N>& a, const std::array<double, N>& b) {
  std::array<double, N> r;
  for (std::size_t k = 0; k < N; ++k) r[k] = a[k] - b[k];
  return r;
}

template <std::size_t N>
inline std::array<double, N> operator*(double s, const std::array<double, N>& a) {
  std::array<double, N> r;
  for (std::size_t k = 0; k < N; ++k) r[k] = s * a[k];
  return r;
}

template <std::size_t N>
inline double dot(const std::array<double, N>& a, const std::array<double, N>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < N; ++k) s += a[k] * b[k];
  return s;
}

template <std::size_t N>
inline double norm(const std::array<double, N>& a) {
  return std::sqrt(dot(a, a));
}

template <std::size_t N>
inline std::array<double, N> midpoint(const std::array<double, N>& a, const std::array<double, N>& b) {
  std::array<double, N> r;
  for (std::size_t k = 0; k < N; ++k) r[k] = 0.5 * (a[k] + b[k]);
  return r;
}

inline constexpr double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

/// Signed volume of a Dim-simplex given by Dim+1 corners.
template <int Dim>
inline double signed_volume(const std::array<Point<Dim>, Dim + 1>& c) {
  Eigen::Matrix<double, Dim, Dim> J;
  for (int j = 0; j < Dim; ++j)
    for (int k = 0; k < Dim; ++k) J(k, j) = c[j + 1][k] - c[0][k];
  return J.determinant() / factorial(Dim);
}

template <int Dim>
inline double volume(const std::array<Point<Dim>, Dim + 1>& c) {
  return std::abs(signed_volume<Dim>(c));
}

/// Measure of a (Dim-1)-simplex embedded in R^Dim (segment length, triangle area).
template <int Dim>
inline double facet_measure(const std::array<Point<Dim>, Dim>& c) {
  if constexpr (Dim == 1) {
    return 1.0;
  } else if constexpr (Dim == 2) {
    return norm<2>(c[1] - c[0]);
  } else {
    const Point<3> a = c[1] - c[0];
    const Point<3> b = c[2] - c[0];
    const Point<3> x{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    return 0.5 * norm<3>(x);
  }
}

/// Largest pairwise distance among the given corners.
template <int Dim, std::size_t N>
inline double diameter(const std::array<Point<Dim>, N>& c) {
  double h = 0.0;
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = a + 1; b < N; ++b) h = std::max(h, norm<Dim>(c[a] - c[b]));
  return h;
}

/// Gradients of the barycentric coordinates of a simplex, one row per corner.
template <int Dim>
inline std::array<Point<Dim>, Dim + 1> barycentric_gradients(const std::array<Point<Dim>, Dim + 1>& c) {
  Eigen::Matrix<double, Dim, Dim> J;
  for (int j = 0; j < Dim; ++j)
    for (int k = 0; k < Dim; ++k) J(k, j) = c[j + 1][k] - c[0][k];
  const Eigen::Matrix<double, Dim, Dim> Jinv = J.inverse();
  std::array<Point<Dim>, Dim + 1> g{};
  for (int a = 1; a <= Dim; ++a)
    for (int k = 0; k < Dim; ++k) g[a][k] = Jinv(a - 1, k);
  for (int k = 0; k < Dim; ++k) {
    double s = 0.0;
    for (int a = 1; a <= Dim; ++a) s += g[a][k];
    g[0][k] = -s;
  }
  return g;
}

/// Barycentric coordinates of x with respect to the simplex c.
template <int Dim>
inline std::array<double, Dim + 1> barycentric(const std::array<Point<Dim>, Dim + 1>& c, const Point<Dim>& x) {
  Eigen::Matrix<double, Dim, Dim> J;
  Eigen::Matrix<double, Dim, 1> rhs;
  for (int j = 0; j < Dim; ++j)
    for (int k = 0; k < Dim; ++k) J(k, j) = c[j + 1][k] - c[0][k];
  for (int k = 0; k < Dim; ++k) rhs(k) = x[k] - c[0][k];
  const Eigen::Matrix<double, Dim, 1> t = J.partialPivLu().solve(rhs);
  std::array<double, Dim + 1> lam{};
  double s = 0.0;
  for (int a = 1; a <= Dim; ++a) {
    lam[a] = t(a - 1);
    s += t(a - 1);
  }
  lam[0] = 1.0 - s;
  return lam;
}

/// Point with the given barycentric coordinates.
template <int Dim, std::size_t N>
inline Point<Dim> from_barycentric(const std::array<Point<Dim>, N>& c, const std::array<double, N>& lam) {
  Point<Dim> x{};
  for (std::size_t a = 0; a < N; ++a)
    for (int k = 0; k < Dim; ++k) x[k] += lam[a] * c[a][k];
  return x;
}

template <int Dim, std::size_t N>
inline Point<Dim> centroid(const std::array<Point<Dim>, N>& c) {
  Point<Dim> x{};
  for (std::size_t a = 0; a < N; ++a)
    for (int k = 0; k < Dim; ++k) x[k] += c[a][k];
  for (int k = 0; k < Dim; ++k) x[k] /= static_cast<double>(N);
  return x;
}

enum class Side : int { Negative = 0, Positive = 1 };

inline constexpr int index(Side s) { return static_cast<int>(s); }
inline constexpr Side other(Side s) { return s == Side::Negative ? Side::Positive : Side::Negative; }
/// +1 on the negative (Omega_1) side, -1 on the positive side: the sign in u_1 - u_2.
inline constexpr double jump_sign(Side s) { return s == Side::Negative ? 1.0 : -1.0; }

}  // namespace cutmg
