#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cutmg/common.hpp"
#include "cutmg/mesh.hpp"

namespace cutmg {

/// Analytic level set; negative inside the first subdomain.
template <int Dim>
struct LevelSet {
  enum class Kind { Planar, Spherical };

  Kind kind = Kind::Spherical;
  double x_gamma = 0.0;  // planar: phi = x_1 - x_gamma
  Point<Dim> center{};   // spherical: phi = |x - m|^2 - r^2
  double radius = 1.0;

  static LevelSet planar(double x) {
    LevelSet l;
    l.kind = Kind::Planar;
    l.x_gamma = x;
    return l;
  }

  static LevelSet spherical(const Point<Dim>& m, double r) {
    LevelSet l;
    l.kind = Kind::Spherical;
    l.center = m;
    l.radius = r;
    return l;
  }

  double value(const Point<Dim>& x) const {
    if (kind == Kind::Planar) return x[0] - x_gamma;
    const Point<Dim> d = x - center;
    return dot(d, d) - radius * radius;
  }

  Point<Dim> gradient(const Point<Dim>& x) const {
    Point<Dim> g{};
    if (kind == Kind::Planar) {
      g[0] = 1.0;
    } else {
      for (int k = 0; k < Dim; ++k) g[k] = 2.0 * (x[k] - center[k]);
    }
    return g;
  }

  /// Distance from x to the zero level.
  double distance(const Point<Dim>& x) const {
    if (kind == Kind::Planar) return std::abs(x[0] - x_gamma);
    return std::abs(norm(x - center) - radius);
  }

  /// sup of |grad phi| over the box.
  double gradient_bound(const Box<Dim>& box) const {
    if (kind == Kind::Planar) return 1.0;
    double m2 = 0.0;
    for (int k = 0; k < Dim; ++k) {
      const double a = std::max(std::abs(box.lower[k] - center[k]), std::abs(box.upper[k] - center[k]));
      m2 += a * a;
    }
    return 2.0 * std::sqrt(m2);
  }
};

enum class ElementClass { Negative, Positive, Cut };

inline Side side_of_value(double phi) { return phi < 0.0 ? Side::Negative : Side::Positive; }

/// Flat piece of the discrete interface inside one (virtual) simplex.
template <int Dim>
struct InterfaceFacet {
  std::array<Point<Dim>, Dim> corners;
  Point<Dim> normal{};  // unit, from the negative into the positive side
  double measure = 0.0;
};

template <int Dim>
struct SubSimplex {
  std::array<Point<Dim>, Dim + 1> corners;
  Side side = Side::Negative;
  double volume = 0.0;
};

template <int Dim>
struct CutElement {
  int element = -1;
  std::vector<InterfaceFacet<Dim>> facets;
  std::vector<SubSimplex<Dim>> parts;
  std::array<double, 2> side_volume{};
  std::array<double, 2> kappa{};  // |T_i| / |T|
};

/// Interface approximation, element classes, extended domains and ghost faces of one level.
template <int Dim>
struct CutTopology {
  bool iso_p2 = false;
  std::vector<double> nodal_phi;
  std::vector<ElementClass> element_class;
  std::vector<int> cut_index;  // per simplex, -1 when not cut
  std::vector<CutElement<Dim>> cut_elements;
  std::array<std::vector<char>, 2> extended;  // element masks of the extended domains
  std::array<std::vector<int>, 2> ghost_faces;

  Side vertex_side(int v) const { return side_of_value(nodal_phi[v]); }
  bool in_extended(int t, Side s) const { return extended[index(s)][t] != 0; }
  int num_cut() const { return static_cast<int>(cut_elements.size()); }
};

namespace detail {

inline double perturbation_threshold(double h, double grad_bound) { return 1e-10 * h * grad_bound; }

inline double perturb(double v, double threshold) { return std::abs(v) < threshold ? -threshold : v; }

template <int Dim>
Point<Dim> lerp_zero(const Point<Dim>& a, const Point<Dim>& b, double fa, double fb) {
  const double t = fa / (fa - fb);
  Point<Dim> p{};
  for (int k = 0; k < Dim; ++k) p[k] = a[k] + t * (b[k] - a[k]);
  return p;
}

template <int Dim>
void push_part(std::vector<SubSimplex<Dim>>& parts, const std::array<Point<Dim>, Dim + 1>& c, Side s) {
  parts.push_back({c, s, volume<Dim>(c)});
}

template <int Dim>
void push_facet(std::vector<InterfaceFacet<Dim>>& facets, const std::array<Point<Dim>, Dim>& c, const Point<Dim>& grad) {
  const double g = norm(grad);
  InterfaceFacet<Dim> f;
  f.corners = c;
  for (int k = 0; k < Dim; ++k) f.normal[k] = grad[k] / g;
  f.measure = facet_measure<Dim>(c);
  facets.push_back(f);
}

/// Cuts one simplex along the zero level of the linear interpolant of `phi`.
/// No value may be zero.
template <int Dim>
void cut_simplex(const std::array<Point<Dim>, Dim + 1>& x, const std::array<double, Dim + 1>& phi,
                 std::vector<SubSimplex<Dim>>& parts, std::vector<InterfaceFacet<Dim>>& facets) {
  std::vector<int> neg, pos;
  for (int k = 0; k <= Dim; ++k) (phi[k] < 0.0 ? neg : pos).push_back(k);
  if (pos.empty() || neg.empty()) {
    push_part<Dim>(parts, x, pos.empty() ? Side::Negative : Side::Positive);
    return;
  }
  const auto grads = barycentric_gradients<Dim>(x);
  Point<Dim> grad{};
  for (int k = 0; k <= Dim; ++k)
    for (int j = 0; j < Dim; ++j) grad[j] += phi[k] * grads[k][j];
  auto cross = [&](int a, int b) { return lerp_zero<Dim>(x[a], x[b], phi[a], phi[b]); };
  if constexpr (Dim == 2) {
    const bool lone_neg = neg.size() == 1;
    const int k = lone_neg ? neg[0] : pos[0];
    const auto& rest = lone_neg ? pos : neg;
    const int i = rest[0], j = rest[1];
    const Point<2> pi = cross(k, i), pj = cross(k, j);
    const Side sk = lone_neg ? Side::Negative : Side::Positive;
    push_part<2>(parts, {x[k], pi, pj}, sk);
    push_part<2>(parts, {x[i], x[j], pj}, other(sk));
    push_part<2>(parts, {x[i], pj, pi}, other(sk));
    push_facet<2>(facets, {pi, pj}, grad);
  } else {
    if (neg.size() == 1 || pos.size() == 1) {
      const bool lone_neg = neg.size() == 1;
      const int k = lone_neg ? neg[0] : pos[0];
      const auto& a = lone_neg ? pos : neg;
      const Side sk = lone_neg ? Side::Negative : Side::Positive;
      const Point<3> b0 = cross(k, a[0]), b1 = cross(k, a[1]), b2 = cross(k, a[2]);
      push_part<3>(parts, {x[k], b0, b1, b2}, sk);
      push_part<3>(parts, {x[a[0]], x[a[1]], x[a[2]], b2}, other(sk));
      push_part<3>(parts, {x[a[0]], x[a[1]], b1, b2}, other(sk));
      push_part<3>(parts, {x[a[0]], b0, b1, b2}, other(sk));
      push_facet<3>(facets, {b0, b1, b2}, grad);
    } else {
      const int v0 = neg[0], v1 = neg[1], v2 = pos[0], v3 = pos[1];
      const Point<3> p02 = cross(v0, v2), p03 = cross(v0, v3), p12 = cross(v1, v2), p13 = cross(v1, v3);
      auto prism = [&](const std::array<Point<3>, 3>& a, const std::array<Point<3>, 3>& b, Side s) {
        push_part<3>(parts, {a[0], a[1], a[2], b[2]}, s);
        push_part<3>(parts, {a[0], a[1], b[1], b[2]}, s);
        push_part<3>(parts, {a[0], b[0], b[1], b[2]}, s);
      };
      prism({x[v0], p02, p03}, {x[v1], p12, p13}, Side::Negative);
      prism({x[v2], p02, p12}, {x[v3], p03, p13}, Side::Positive);
      push_facet<3>(facets, {p02, p12, p13}, grad);
      push_facet<3>(facets, {p02, p13, p03}, grad);
    }
  }
}

}  // namespace detail

/// Nodal values of the level set interpolant, perturbed away from zero.
template <int Dim>
std::vector<double> interpolate_levelset(const LevelSet<Dim>& phi, const MeshLevel<Dim>& mesh) {
  const double thr = detail::perturbation_threshold(mesh.h, phi.gradient_bound(mesh.box));
  std::vector<double> v(mesh.vertices.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = detail::perturb(phi.value(mesh.vertices[i]), thr);
  return v;
}

/// Level set values on the corners and edge midpoints of simplex t (perturbed).
template <int Dim>
std::array<double, Dim + 1 + detail::num_edges<Dim>> element_phi_iso_p2(const LevelSet<Dim>& phi,
                                                                         const MeshLevel<Dim>& mesh,
                                                                         const std::vector<double>& nodal, int t) {
  const double thr = detail::perturbation_threshold(mesh.h, phi.gradient_bound(mesh.box));
  std::array<double, Dim + 1 + detail::num_edges<Dim>> v{};
  const auto& s = mesh.simplices[t];
  for (int k = 0; k <= Dim; ++k) v[k] = nodal[s[k]];
  const auto edges = detail::simplex_edges<Dim>();
  for (int e = 0; e < detail::num_edges<Dim>; ++e) {
    const Point<Dim> m = midpoint(mesh.vertices[s[edges[e][0]]], mesh.vertices[s[edges[e][1]]]);
    v[Dim + 1 + e] = detail::perturb(phi.value(m), thr);
  }
  return v;
}

/// Classifies every simplex and cuts the cut ones. With `iso_p2` each simplex
/// is treated as its 2^d red children carrying the level set interpolant of
/// the once refined mesh.
template <int Dim>
CutTopology<Dim> classify_and_cut(const MeshLevel<Dim>& mesh, const LevelSet<Dim>& phi, bool iso_p2) {
  CutTopology<Dim> topo;
  topo.iso_p2 = iso_p2;
  topo.nodal_phi = interpolate_levelset(phi, mesh);
  const int nt = mesh.num_simplices();
  topo.element_class.assign(nt, ElementClass::Negative);
  topo.cut_index.assign(nt, -1);
  for (int t = 0; t < nt; ++t) {
    const auto x = mesh.corners(t);
    CutElement<Dim> ce;
    ce.element = t;
    bool has_neg = false, has_pos = false;
    if (!iso_p2) {
      std::array<double, Dim + 1> v{};
      for (int k = 0; k <= Dim; ++k) v[k] = topo.nodal_phi[mesh.simplices[t][k]];
      for (double a : v) (a < 0.0 ? has_neg : has_pos) = true;
      if (has_neg && has_pos) detail::cut_simplex<Dim>(x, v, ce.parts, ce.facets);
    } else {
      const auto v = element_phi_iso_p2(phi, mesh, topo.nodal_phi, t);
      for (double a : v) (a < 0.0 ? has_neg : has_pos) = true;
      if (has_neg && has_pos) {
        std::array<Point<Dim>, Dim + 1 + detail::num_edges<Dim>> pts{};
        for (int k = 0; k <= Dim; ++k) pts[k] = x[k];
        const auto edges = detail::simplex_edges<Dim>();
        for (int e = 0; e < detail::num_edges<Dim>; ++e) pts[Dim + 1 + e] = midpoint(x[edges[e][0]], x[edges[e][1]]);
        for (const auto& child : detail::red_children<Dim>()) {
          std::array<Point<Dim>, Dim + 1> cx{};
          std::array<double, Dim + 1> cv{};
          for (int k = 0; k <= Dim; ++k) {
            cx[k] = pts[child[k]];
            cv[k] = v[child[k]];
          }
          detail::cut_simplex<Dim>(cx, cv, ce.parts, ce.facets);
        }
      }
    }
    if (!(has_neg && has_pos)) {
      topo.element_class[t] = has_neg ? ElementClass::Negative : ElementClass::Positive;
      continue;
    }
    for (const auto& p : ce.parts) ce.side_volume[index(p.side)] += p.volume;
    for (int s = 0; s < 2; ++s) {
      // tiny pieces are legitimate small cuts; only an empty side is degenerate
      if (!(ce.side_volume[s] > 0.0))
        throw NumericalError("classify_and_cut: degenerate cut of element " + std::to_string(t));
    }
    // normalize so that kappa_1 + kappa_2 = 1 holds to rounding
    const double total = ce.side_volume[0] + ce.side_volume[1];
    ce.kappa = {ce.side_volume[0] / total, ce.side_volume[1] / total};
    topo.element_class[t] = ElementClass::Cut;
    topo.cut_index[t] = static_cast<int>(topo.cut_elements.size());
    topo.cut_elements.push_back(std::move(ce));
  }
  return topo;
}

/// Extended element sets (all elements meeting the open subdomain) and ghost face sets.
template <int Dim>
void build_extended_and_ghost(const MeshLevel<Dim>& mesh, CutTopology<Dim>& topo) {
  const int nt = mesh.num_simplices();
  for (int s = 0; s < 2; ++s) {
    topo.extended[s].assign(nt, 0);
    topo.ghost_faces[s].clear();
  }
  for (int t = 0; t < nt; ++t) {
    const ElementClass c = topo.element_class[t];
    topo.extended[0][t] = c != ElementClass::Positive;
    topo.extended[1][t] = c != ElementClass::Negative;
  }
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    const auto& face = mesh.faces[f];
    if (face.on_boundary()) continue;
    const int a = face.owners[0], b = face.owners[1];
    const bool touches_cut = topo.element_class[a] == ElementClass::Cut || topo.element_class[b] == ElementClass::Cut;
    if (!touches_cut) continue;
    for (int s = 0; s < 2; ++s)
      if (topo.extended[s][a] && topo.extended[s][b]) topo.ghost_faces[s].push_back(f);
  }
}

/// Full cut topology of one level.
template <int Dim>
CutTopology<Dim> build_cut_topology(const MeshLevel<Dim>& mesh, const LevelSet<Dim>& phi, bool iso_p2) {
  CutTopology<Dim> topo = classify_and_cut(mesh, phi, iso_p2);
  build_extended_and_ghost(mesh, topo);
  return topo;
}

/// Side of a point inside simplex t; on cut elements the sub-simplex containing it decides.
template <int Dim>
Side side_at(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo, int t, const Point<Dim>& x) {
  const ElementClass c = topo.element_class[t];
  if (c == ElementClass::Negative) return Side::Negative;
  if (c == ElementClass::Positive) return Side::Positive;
  const auto& ce = topo.cut_elements[topo.cut_index[t]];
  double best = -std::numeric_limits<double>::infinity();
  Side side = Side::Negative;
  for (const auto& p : ce.parts) {
    const auto lam = barycentric<Dim>(p.corners, x);
    const double m = *std::min_element(lam.begin(), lam.end());
    if (m > best) {
      best = m;
      side = p.side;
    }
  }
  (void)mesh;
  return side;
}

struct AssumptionReport {
  bool nested_extended = true;      // fine extended elements have coarse extended parents
  std::string violation;            // first offending element, empty when fine
  std::vector<double> interface_distance;  // per level: max distance of facet points to the exact interface
};

/// Checks nestedness of the extended domains between consecutive levels and
/// samples the distance of the discrete interface to the exact one. Throws
/// AssumptionError on the first nestedness violation when `throw_on_failure`.
template <int Dim>
AssumptionReport check_assumptions(const std::vector<MeshLevel<Dim>>& meshes, const std::vector<CutTopology<Dim>>& topos,
                                   const LevelSet<Dim>& phi, bool throw_on_failure = true) {
  AssumptionReport rep;
  for (std::size_t l = 0; l < topos.size(); ++l) {
    double dmax = 0.0;
    for (const auto& ce : topos[l].cut_elements)
      for (const auto& f : ce.facets) {
        dmax = std::max(dmax, phi.distance(centroid<Dim>(f.corners)));
        for (const auto& c : f.corners) dmax = std::max(dmax, phi.distance(c));
      }
    rep.interface_distance.push_back(dmax);
  }
  for (std::size_t l = 1; l < topos.size() && rep.nested_extended; ++l) {
    const auto& fine = meshes[l];
    for (int t = 0; t < fine.num_simplices() && rep.nested_extended; ++t)
      for (int s = 0; s < 2; ++s) {
        if (!topos[l].extended[s][t]) continue;
        const int parent = fine.parent_of_simplex[t];
        if (!topos[l - 1].extended[s][parent]) {
          rep.nested_extended = false;
          rep.violation = "extended domain " + std::to_string(s + 1) + ": element " + std::to_string(t) + " on level " +
                          std::to_string(l) + " has parent " + std::to_string(parent) + " outside level " +
                          std::to_string(l - 1);
          break;
        }
      }
  }
  if (!rep.nested_extended && throw_on_failure) throw AssumptionError("check_assumptions: " + rep.violation);
  return rep;
}

}  // namespace cutmg
