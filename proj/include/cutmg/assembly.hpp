#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutmg/common.hpp"
#include "cutmg/cut_geometry.hpp"
#include "cutmg/cut_space.hpp"
#include "cutmg/mesh.hpp"
#include "cutmg/quadrature.hpp"
#include "cutmg/sparse_matrix.hpp"

namespace cutmg {

enum class Method { Nitsche, PNitsche, MuNitsche };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Nitsche: return "nitsche";
    case Method::PNitsche: return "p-nitsche";
    case Method::MuNitsche: return "mu-nitsche";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "nitsche") return Method::Nitsche;
  if (s == "p-nitsche" || s == "pnitsche") return Method::PNitsche;
  if (s == "mu-nitsche" || s == "munitsche") return Method::MuNitsche;
  throw ConfigError("unknown method '" + s + "' (expected nitsche, p-nitsche or mu-nitsche)");
}

struct DiscretizationConfig {
  Method method = Method::Nitsche;
  double mu1 = 1.0;
  double mu2 = 1.0;
  double lambda_N = 10.0;
  double eps_g = 0.1;
  bool local_h = false;  // penalty scaled with the element diameter instead of the level mesh size

  void validate() const {
    if (!(mu1 > 0.0) || !(mu2 > 0.0)) throw ConfigError("diffusion coefficients must be positive");
    if (!(lambda_N > 0.0)) throw ConfigError("lambda_N must be positive");
    if (method == Method::MuNitsche && !(eps_g > 0.0)) throw ConfigError("eps_g must be positive for mu-nitsche");
  }

  double mu(Side s) const { return s == Side::Negative ? mu1 : mu2; }

  /// Averaging weights on a cut element with area fractions `kappa`.
  std::array<double, 2> weights(const std::array<double, 2>& kappa) const {
    if (method == Method::MuNitsche) return {mu2 / (mu1 + mu2), mu1 / (mu1 + mu2)};
    return kappa;
  }

  /// Interface penalty coefficient before division by h.
  double penalty() const {
    switch (method) {
      case Method::Nitsche: return lambda_N;
      case Method::PNitsche: return 1.0;
      case Method::MuNitsche: return 2.0 * mu1 * mu2 / (mu1 + mu2) * lambda_N;
    }
    return lambda_N;
  }
};

template <int Dim>
using SideFunction = std::function<double(const Point<Dim>&, Side)>;

/// Element (or face patch) matrix over (vertex, side) slots.
struct LocalMatrix {
  std::vector<std::pair<int, Side>> slots;
  Eigen::MatrixXd K;
  Eigen::VectorXd f;  // load over the slots, may be empty
};

namespace detail {

template <int Dim>
std::array<Point<Dim>, Dim + 1> gradients_of(const MeshLevel<Dim>& mesh, int t) {
  return barycentric_gradients<Dim>(mesh.corners(t));
}

template <int Dim>
LocalMatrix cut_slots(const MeshLevel<Dim>& mesh, int t) {
  LocalMatrix L;
  for (int s = 0; s < 2; ++s)
    for (int k = 0; k <= Dim; ++k) L.slots.push_back({mesh.simplices[t][k], static_cast<Side>(s)});
  L.K = Eigen::MatrixXd::Zero(2 * (Dim + 1), 2 * (Dim + 1));
  return L;
}

/// Integral of lambda_a lambda_b over a facet (lambda: barycentric coordinates of the element).
template <int Dim>
Eigen::MatrixXd facet_mass(const std::array<Point<Dim>, Dim + 1>& x, const InterfaceFacet<Dim>& F) {
  const auto& rule = simplex_rule<Dim - 1>(2);
  const double scale = F.measure * factorial(Dim - 1);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(Dim + 1, Dim + 1);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    Point<Dim> p{};
    for (int j = 0; j < Dim; ++j)
      for (int k = 0; k < Dim; ++k) p[k] += rule.points[q][j] * F.corners[j][k];
    const auto lam = barycentric<Dim>(x, p);
    for (int a = 0; a <= Dim; ++a)
      for (int b = 0; b <= Dim; ++b) M(a, b) += rule.weights[q] * scale * lam[a] * lam[b];
  }
  return M;
}

/// Integrals of f lambda_a over a simplex piece.
template <int Dim>
void add_load(const std::array<Point<Dim>, Dim + 1>& elem, const std::array<Point<Dim>, Dim + 1>& piece, Side s,
              const SideFunction<Dim>& f, Eigen::Ref<Eigen::VectorXd> out) {
  const auto& rule = simplex_rule<Dim>(4);
  const double scale = volume<Dim>(piece) * factorial(Dim);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const Point<Dim> p = from_barycentric<Dim, Dim + 1>(piece, rule.points[q]);
    const auto lam = barycentric<Dim>(elem, p);
    const double w = rule.weights[q] * scale * f(p, s);
    for (int a = 0; a <= Dim; ++a) out(a) += w * lam[a];
  }
}

}  // namespace detail

/// Bulk diffusion on simplex t (side-wise on cut elements).
template <int Dim>
LocalMatrix local_bulk(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo, const DiscretizationConfig& cfg,
                       int t) {
  const auto g = detail::gradients_of(mesh, t);
  Eigen::MatrixXd G(Dim + 1, Dim);
  for (int a = 0; a <= Dim; ++a)
    for (int k = 0; k < Dim; ++k) G(a, k) = g[a][k];
  const Eigen::MatrixXd GG = G * G.transpose();
  const ElementClass c = topo.element_class[t];
  if (c != ElementClass::Cut) {
    const Side s = c == ElementClass::Negative ? Side::Negative : Side::Positive;
    LocalMatrix L;
    for (int k = 0; k <= Dim; ++k) L.slots.push_back({mesh.simplices[t][k], s});
    L.K = cfg.mu(s) * mesh.simplex_volume(t) * GG;
    return L;
  }
  const auto& ce = topo.cut_elements[topo.cut_index[t]];
  LocalMatrix L = detail::cut_slots(mesh, t);
  for (int s = 0; s < 2; ++s)
    L.K.block(s * (Dim + 1), s * (Dim + 1), Dim + 1, Dim + 1) = cfg.mu(static_cast<Side>(s)) * ce.side_volume[s] * GG;
  return L;
}

/// Consistency, symmetry and penalty interface terms on cut simplex t.
template <int Dim>
LocalMatrix local_nitsche(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo, const DiscretizationConfig& cfg,
                          int t) {
  const auto& ce = topo.cut_elements[topo.cut_index[t]];
  const auto x = mesh.corners(t);
  const auto g = barycentric_gradients<Dim>(x);
  const auto w = cfg.weights(ce.kappa);
  const double h = cfg.local_h ? mesh.simplex_diameter(t) : mesh.h;
  const double gamma = cfg.penalty() / h;
  LocalMatrix L = detail::cut_slots(mesh, t);
  constexpr int n = Dim + 1;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2 * n, 2 * n);  // rows: test slot, cols: trial slot
  for (const auto& F : ce.facets) {
    const Point<Dim> cF = centroid<Dim>(F.corners);
    const auto lamc = barycentric<Dim>(x, cF);
    const Eigen::MatrixXd M = detail::facet_mass<Dim>(x, F);
    for (int s = 0; s < 2; ++s) {
      const Side ss = static_cast<Side>(s);
      for (int a = 0; a < n; ++a) {
        const double flux = -w[s] * cfg.mu(ss) * dot(g[a], F.normal);
        for (int r = 0; r < 2; ++r)
          for (int b = 0; b < n; ++b) B(r * n + b, s * n + a) += F.measure * flux * jump_sign(static_cast<Side>(r)) * lamc[b];
      }
    }
    for (int r = 0; r < 2; ++r)
      for (int s = 0; s < 2; ++s)
        L.K.block(r * n, s * n, n, n) +=
            gamma * jump_sign(static_cast<Side>(r)) * jump_sign(static_cast<Side>(s)) * M;
  }
  L.K += B + B.transpose();
  return L;
}

/// Gradient lifting of the trial slots on cut simplex t: column j holds the
/// side-wise gradients (d entries per side) of the lifting of slot j.
template <int Dim>
Eigen::MatrixXd lifting_operator(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo,
                                 const DiscretizationConfig& cfg, int t) {
  const auto& ce = topo.cut_elements[topo.cut_index[t]];
  const auto x = mesh.corners(t);
  const auto w = ce.kappa;
  constexpr int n = Dim + 1;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * Dim, 2 * Dim);
  for (int s = 0; s < 2; ++s)
    M.block(s * Dim, s * Dim, Dim, Dim) =
        cfg.mu(static_cast<Side>(s)) * ce.side_volume[s] * Eigen::MatrixXd::Identity(Dim, Dim);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(2 * Dim, 2 * n);
  for (const auto& F : ce.facets) {
    const auto lamc = barycentric<Dim>(x, centroid<Dim>(F.corners));
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < n; ++a) {
        const double jump_int = F.measure * jump_sign(static_cast<Side>(s)) * lamc[a];
        for (int r = 0; r < 2; ++r)
          for (int k = 0; k < Dim; ++k)
            R(r * Dim + k, s * n + a) += -w[r] * cfg.mu(static_cast<Side>(r)) * jump_int * F.normal[k];
      }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw NumericalError("lifting: singular local system on element " + std::to_string(t));
  return llt.solve(R);
}

/// 2 a_T(L u, L v) plus the unit-penalty term on cut simplex t.
template <int Dim>
LocalMatrix local_lifting(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo, const DiscretizationConfig& cfg,
                          int t) {
  const auto& ce = topo.cut_elements[topo.cut_index[t]];
  LocalMatrix L = detail::cut_slots(mesh, t);
  const Eigen::MatrixXd Gl = lifting_operator(mesh, topo, cfg, t);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * Dim, 2 * Dim);
  for (int s = 0; s < 2; ++s)
    M.block(s * Dim, s * Dim, Dim, Dim) =
        cfg.mu(static_cast<Side>(s)) * ce.side_volume[s] * Eigen::MatrixXd::Identity(Dim, Dim);
  L.K = 2.0 * Gl.transpose() * M * Gl;
  return L;
}

/// Ghost penalty on interior face f for side s.
template <int Dim>
LocalMatrix local_ghost(const MeshLevel<Dim>& mesh, const DiscretizationConfig& cfg, int f, Side s) {
  const auto& face = mesh.faces[f];
  const auto fc = mesh.face_corners(f);
  const double hF = diameter<Dim>(fc);
  const double area = facet_measure<Dim>(fc);
  // unit normal from the gradient of the vertex opposite to the face in the first owner
  const int t0 = face.owners[0], t1 = face.owners[1];
  const auto g0 = detail::gradients_of(mesh, t0);
  const auto g1 = detail::gradients_of(mesh, t1);
  int opp = -1;
  for (int k = 0; k <= Dim; ++k)
    if (!std::binary_search(face.vertices.begin(), face.vertices.end(), mesh.simplices[t0][k])) opp = k;
  Point<Dim> nF = g0[opp];
  const double nn = norm(nF);
  for (auto& c : nF) c /= nn;

  LocalMatrix L;
  std::vector<double> jump;
  auto add = [&](int v, double val) {
    for (std::size_t i = 0; i < L.slots.size(); ++i)
      if (L.slots[i].first == v) {
        jump[i] += val;
        return;
      }
    L.slots.push_back({v, s});
    jump.push_back(val);
  };
  for (int k = 0; k <= Dim; ++k) add(mesh.simplices[t0][k], dot(g0[k], nF));
  for (int k = 0; k <= Dim; ++k) add(mesh.simplices[t1][k], -dot(g1[k], nF));
  const Eigen::Map<const Eigen::VectorXd> j(jump.data(), static_cast<Eigen::Index>(jump.size()));
  L.K = cfg.eps_g * cfg.mu(s) * hF * area * j * j.transpose();
  return L;
}

/// Accumulates local matrices into a global matrix over XFEM dofs, moving
/// Dirichlet data of boundary slots to the right hand side.
template <int Dim>
class GlobalAssembler {
public:
  GlobalAssembler(const MeshLevel<Dim>& mesh, const CutSpace<Dim>& space, SideFunction<Dim> dirichlet = nullptr)
      : mesh_(mesh), space_(space), dirichlet_(std::move(dirichlet)), rhs_(static_cast<std::size_t>(space.size()), 0.0) {}

  void add(const LocalMatrix& L) {
    const int ns = static_cast<int>(L.slots.size());
    std::vector<int> dofs;
    std::vector<SlotDofs> sd(ns);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(ns);
    for (int i = 0; i < ns; ++i) {
      const auto [v, s] = L.slots[i];
      sd[i] = space_.slot(v, s);
      for (int k = 0; k < sd[i].count; ++k) dofs.push_back(sd[i].dofs[k]);
      if (sd[i].count == 0 && dirichlet_) g(i) = dirichlet_(mesh_.vertices[v], s);
    }
    std::sort(dofs.begin(), dofs.end());
    dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
    const int nd = static_cast<int>(dofs.size());
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(ns, nd);
    for (int i = 0; i < ns; ++i)
      for (int k = 0; k < sd[i].count; ++k)
        C(i, std::lower_bound(dofs.begin(), dofs.end(), sd[i].dofs[k]) - dofs.begin()) = 1.0;
    Eigen::MatrixXd E = C.transpose() * L.K * C;
    E = 0.5 * (E + E.transpose()).eval();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nd);
    if (L.f.size() == ns) r += C.transpose() * L.f;
    if (g.squaredNorm() > 0.0) r -= C.transpose() * (L.K * g);
    for (int a = 0; a < nd; ++a) {
      rhs_[dofs[a]] += r(a);
      for (int b = 0; b < nd; ++b) triplets_.push_back({dofs[a], dofs[b], E(a, b)});
    }
  }

  SparseMatrix matrix() const { return SparseMatrix::from_triplets(space_.size(), space_.size(), triplets_); }
  const std::vector<double>& rhs() const { return rhs_; }

private:
  const MeshLevel<Dim>& mesh_;
  const CutSpace<Dim>& space_;
  SideFunction<Dim> dirichlet_;
  std::vector<Triplet> triplets_;
  std::vector<double> rhs_;
};

template <int Dim>
SparseMatrix assemble_bulk(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo, const CutSpace<Dim>& space,
                           const DiscretizationConfig& cfg) {
  GlobalAssembler<Dim> G(mesh, space);
  for (int t = 0; t < mesh.num_simplices(); ++t) G.add(local_bulk(mesh, topo, cfg, t));
  return G.matrix();
}

/// Nitsche interface terms; also valid for the parameter-free method (its consistency and unit penalty part).
template <int Dim>
SparseMatrix assemble_nitsche_terms(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo,
                                    const CutSpace<Dim>& space, const DiscretizationConfig& cfg) {
  GlobalAssembler<Dim> G(mesh, space);
  for (const auto& ce : topo.cut_elements) G.add(local_nitsche(mesh, topo, cfg, ce.element));
  return G.matrix();
}

template <int Dim>
SparseMatrix assemble_lifting_terms(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo,
                                    const CutSpace<Dim>& space, const DiscretizationConfig& cfg) {
  GlobalAssembler<Dim> G(mesh, space);
  for (const auto& ce : topo.cut_elements) G.add(local_lifting(mesh, topo, cfg, ce.element));
  return G.matrix();
}

template <int Dim>
SparseMatrix assemble_ghost_penalty(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo,
                                    const CutSpace<Dim>& space, const DiscretizationConfig& cfg) {
  GlobalAssembler<Dim> G(mesh, space);
  for (int s = 0; s < 2; ++s)
    for (int f : topo.ghost_faces[s]) G.add(local_ghost(mesh, cfg, f, static_cast<Side>(s)));
  return G.matrix();
}

struct LinearSystem {
  SparseMatrix A;
  std::vector<double> b;
};

/// Stiffness matrix and load vector of the configured method. `f` and the
/// Dirichlet data may be empty (zero).
template <int Dim>
LinearSystem assemble_system(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo, const CutSpace<Dim>& space,
                             const DiscretizationConfig& cfg, const SideFunction<Dim>& f,
                             const SideFunction<Dim>& dirichlet) {
  cfg.validate();
  GlobalAssembler<Dim> G(mesh, space, dirichlet);
  for (int t = 0; t < mesh.num_simplices(); ++t) {
    LocalMatrix L = local_bulk(mesh, topo, cfg, t);
    if (topo.element_class[t] == ElementClass::Cut) {
      L.K += local_nitsche(mesh, topo, cfg, t).K;
      if (cfg.method == Method::PNitsche) L.K += local_lifting(mesh, topo, cfg, t).K;
    }
    if (f) {
      const auto x = mesh.corners(t);
      L.f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L.slots.size()));
      if (topo.element_class[t] != ElementClass::Cut) {
        detail::add_load<Dim>(x, x, L.slots[0].second, f, L.f.segment(0, Dim + 1));
      } else {
        for (const auto& p : topo.cut_elements[topo.cut_index[t]].parts)
          detail::add_load<Dim>(x, p.corners, p.side, f, L.f.segment(index(p.side) * (Dim + 1), Dim + 1));
      }
    }
    G.add(L);
  }
  if (cfg.method == Method::MuNitsche)
    for (int s = 0; s < 2; ++s)
      for (int fc : topo.ghost_faces[s]) G.add(local_ghost(mesh, cfg, fc, static_cast<Side>(s)));
  return {G.matrix(), G.rhs()};
}

/// L2 norm of u_h - u_star over the discrete subdomains; u_h is given by its
/// side-wise nodal values (boundary data included).
template <int Dim>
double l2_error(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo, const NodalValues& uh,
                const SideFunction<Dim>& u_star) {
  const auto& rule = simplex_rule<Dim>(4);
  double sum = 0.0;
  auto piece = [&](int t, const std::array<Point<Dim>, Dim + 1>& x, const std::array<Point<Dim>, Dim + 1>& c, Side s) {
    const double scale = volume<Dim>(c) * factorial(Dim);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Point<Dim> p = from_barycentric<Dim, Dim + 1>(c, rule.points[q]);
      const auto lam = barycentric<Dim>(x, p);
      double v = 0.0;
      for (int k = 0; k <= Dim; ++k) v += lam[k] * uh.side[index(s)][mesh.simplices[t][k]];
      const double e = v - (u_star ? u_star(p, s) : 0.0);
      sum += rule.weights[q] * scale * e * e;
    }
  };
  for (int t = 0; t < mesh.num_simplices(); ++t) {
    const auto x = mesh.corners(t);
    const ElementClass c = topo.element_class[t];
    if (c == ElementClass::Cut) {
      for (const auto& p : topo.cut_elements[topo.cut_index[t]].parts) piece(t, x, p.corners, p.side);
    } else {
      piece(t, x, x, c == ElementClass::Negative ? Side::Negative : Side::Positive);
    }
  }
  return std::sqrt(sum);
}

}  // namespace cutmg
