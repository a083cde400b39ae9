#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <ostream>
#include <vector>

#include "cutmg/common.hpp"
#include "cutmg/sparse_matrix.hpp"

namespace cutmg {

template <int Dim>
struct Box {
  Point<Dim> lower{};
  Point<Dim> upper{};

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < Dim; ++k) v *= upper[k] - lower[k];
    return v;
  }
};

template <int Dim>
using SimplexVertices = std::array<int, Dim + 1>;

template <int Dim>
struct Face {
  std::array<int, Dim> vertices;  // sorted
  std::array<int, 2> owners{-1, -1};  // owners[1] == -1 on the domain boundary

  bool on_boundary() const { return owners[1] < 0; }
};

/// Where a vertex of a refined mesh comes from: either a coarse vertex
/// (`b == -1`) or the midpoint of the coarse edge (a, b).
struct VertexParent {
  int a = -1;
  int b = -1;

  bool is_vertex() const { return b < 0; }
};

namespace detail {

template <int Dim>
constexpr int num_edges = (Dim + 1) * Dim / 2;

/// Local edge list of a simplex; midpoint of edge e gets local index Dim+1+e.
template <int Dim>
constexpr std::array<std::array<int, 2>, num_edges<Dim>> simplex_edges() {
  std::array<std::array<int, 2>, num_edges<Dim>> e{};
  int k = 0;
  for (int a = 0; a <= Dim; ++a)
    for (int b = a + 1; b <= Dim; ++b) e[k++] = {a, b};
  return e;
}

/// Red refinement in the vertex ordering of Bey: applied to Kuhn simplices it
/// returns Kuhn simplices of half the size, so the refined hierarchy stays
/// congruent and shape regular.
template <int Dim>
constexpr std::array<std::array<int, Dim + 1>, (1 << Dim)> red_children() {
  if constexpr (Dim == 2) {
    // edges: 3=(0,1) 4=(0,2) 5=(1,2)
    return {{{0, 3, 4}, {3, 1, 5}, {4, 5, 2}, {3, 4, 5}}};
  } else {
    // edges: 4=(0,1) 5=(0,2) 6=(0,3) 7=(1,2) 8=(1,3) 9=(2,3)
    return {{{0, 4, 5, 6}, {4, 1, 7, 8}, {5, 7, 2, 9}, {6, 8, 9, 3},
             {4, 5, 6, 8}, {4, 5, 7, 8}, {5, 6, 8, 9}, {5, 7, 8, 9}}};
  }
}

}  // namespace detail

/// One level of a nested simplicial hierarchy of a box.
template <int Dim>
struct MeshLevel {
  static_assert(Dim == 2 || Dim == 3, "only 2D and 3D meshes are supported");

  int level = 0;
  Box<Dim> box;
  std::vector<Point<Dim>> vertices;
  std::vector<SimplexVertices<Dim>> simplices;
  std::vector<Face<Dim>> faces;
  /// faces_of_simplex[t][k] is the face opposite local vertex k.
  std::vector<std::array<int, Dim + 1>> faces_of_simplex;
  std::vector<char> boundary_vertex;
  double h = 0.0;
  /// Only on refined levels.
  std::vector<VertexParent> parent_of_vertex;
  std::vector<int> parent_of_simplex;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_simplices() const { return static_cast<int>(simplices.size()); }

  std::array<Point<Dim>, Dim + 1> corners(int t) const {
    std::array<Point<Dim>, Dim + 1> c;
    for (int a = 0; a <= Dim; ++a) c[a] = vertices[simplices[t][a]];
    return c;
  }

  std::array<Point<Dim>, Dim> face_corners(int f) const {
    std::array<Point<Dim>, Dim> c;
    for (int a = 0; a < Dim; ++a) c[a] = vertices[faces[f].vertices[a]];
    return c;
  }

  double simplex_volume(int t) const { return volume<Dim>(corners(t)); }
  double simplex_diameter(int t) const { return diameter<Dim>(corners(t)); }

  /// Undirected vertex graph (mesh edges), neighbours sorted.
  std::vector<std::vector<int>> vertex_adjacency() const {
    std::vector<std::vector<int>> adj(vertices.size());
    for (const auto& s : simplices)
      for (int a = 0; a <= Dim; ++a)
        for (int b = 0; b <= Dim; ++b)
          if (a != b) adj[s[a]].push_back(s[b]);
    for (auto& n : adj) {
      std::sort(n.begin(), n.end());
      n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return adj;
  }

  /// Plaintext dump: vertex count, one vertex per line, simplex count, one simplex per line.
  void write_plaintext(std::ostream& os) const {
    os.precision(17);
    os << "vertices " << vertices.size() << '\n';
    for (const auto& v : vertices) {
      for (int k = 0; k < Dim; ++k) os << (k ? " " : "") << v[k];
      os << '\n';
    }
    os << "cells " << simplices.size() << '\n';
    for (const auto& s : simplices) {
      for (int a = 0; a <= Dim; ++a) os << (a ? " " : "") << s[a];
      os << '\n';
    }
  }
};

namespace detail {

template <int Dim>
void finalize_topology(MeshLevel<Dim>& m) {
  std::map<std::array<int, Dim>, int> face_id;
  m.faces.clear();
  m.faces_of_simplex.assign(m.simplices.size(), {});
  for (int t = 0; t < m.num_simplices(); ++t) {
    for (int k = 0; k <= Dim; ++k) {
      std::array<int, Dim> key;
      int p = 0;
      for (int a = 0; a <= Dim; ++a)
        if (a != k) key[p++] = m.simplices[t][a];
      std::sort(key.begin(), key.end());
      auto [it, inserted] = face_id.try_emplace(key, static_cast<int>(m.faces.size()));
      if (inserted) {
        m.faces.push_back({key, {t, -1}});
      } else {
        auto& f = m.faces[it->second];
        if (f.owners[1] >= 0) throw Error("mesh: face shared by more than two simplices");
        f.owners[1] = t;
      }
      m.faces_of_simplex[t][k] = it->second;
    }
  }
  m.boundary_vertex.assign(m.vertices.size(), 0);
  for (const auto& f : m.faces)
    if (f.on_boundary())
      for (int v : f.vertices) m.boundary_vertex[v] = 1;
  m.h = 0.0;
  for (int t = 0; t < m.num_simplices(); ++t) m.h = std::max(m.h, m.simplex_diameter(t));
}

}  // namespace detail

/// Structured Kuhn (Freudenthal) triangulation of a box: every one of the
/// n0^Dim cells is split into Dim! simplices along the main diagonal.
template <int Dim>
MeshLevel<Dim> build_initial_mesh(const Box<Dim>& box, int n0) {
  if (n0 < 2) throw ConfigError("build_initial_mesh: need at least 2 subdivisions per axis");
  for (int k = 0; k < Dim; ++k)
    if (!(box.upper[k] > box.lower[k])) throw ConfigError("build_initial_mesh: empty box");

  MeshLevel<Dim> m;
  m.box = box;
  const int np = n0 + 1;
  auto vid = [&](const std::array<int, Dim>& ijk) {
    int id = 0;
    for (int k = Dim - 1; k >= 0; --k) id = id * np + ijk[k];
    return id;
  };
  int total = 1;
  for (int k = 0; k < Dim; ++k) total *= np;
  m.vertices.resize(static_cast<std::size_t>(total));
  for (int id = 0; id < total; ++id) {
    int r = id;
    for (int k = 0; k < Dim; ++k) {
      const int i = r % np;
      r /= np;
      m.vertices[id][k] = box.lower[k] + (box.upper[k] - box.lower[k]) * i / n0;
    }
  }
  int cells = 1;
  for (int k = 0; k < Dim; ++k) cells *= n0;
  for (int c = 0; c < cells; ++c) {
    std::array<int, Dim> base;
    int r = c;
    for (int k = 0; k < Dim; ++k) {
      base[k] = r % n0;
      r /= n0;
    }
    std::array<int, Dim> perm;
    std::iota(perm.begin(), perm.end(), 0);
    do {
      SimplexVertices<Dim> s;
      std::array<int, Dim> cur = base;
      s[0] = vid(cur);
      for (int a = 0; a < Dim; ++a) {
        ++cur[perm[a]];
        s[a + 1] = vid(cur);
      }
      m.simplices.push_back(s);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  detail::finalize_topology(m);
  return m;
}

/// Uniform red refinement: 2^Dim children per simplex, children of simplex t
/// are stored at indices 2^Dim * t + k. Coarse vertices keep their indices.
template <int Dim>
MeshLevel<Dim> refine_uniform(const MeshLevel<Dim>& coarse) {
  constexpr auto edges = detail::simplex_edges<Dim>();
  constexpr auto children = detail::red_children<Dim>();
  MeshLevel<Dim> f;
  f.level = coarse.level + 1;
  f.box = coarse.box;
  f.vertices = coarse.vertices;
  f.parent_of_vertex.resize(coarse.vertices.size());
  for (int v = 0; v < coarse.num_vertices(); ++v) f.parent_of_vertex[v] = {v, -1};

  std::map<std::pair<int, int>, int> midpoint_of;
  f.simplices.reserve(coarse.simplices.size() << Dim);
  f.parent_of_simplex.reserve(coarse.simplices.size() << Dim);
  for (int t = 0; t < coarse.num_simplices(); ++t) {
    const auto& s = coarse.simplices[t];
    std::array<int, Dim + 1 + detail::num_edges<Dim>> local;
    for (int a = 0; a <= Dim; ++a) local[a] = s[a];
    for (int e = 0; e < detail::num_edges<Dim>; ++e) {
      const int a = s[edges[e][0]];
      const int b = s[edges[e][1]];
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoint_of.try_emplace(key, static_cast<int>(f.vertices.size()));
      if (inserted) {
        f.vertices.push_back(midpoint<Dim>(coarse.vertices[key.first], coarse.vertices[key.second]));
        f.parent_of_vertex.push_back({key.first, key.second});
      }
      local[Dim + 1 + e] = it->second;
    }
    for (const auto& ch : children) {
      SimplexVertices<Dim> c;
      for (int a = 0; a <= Dim; ++a) c[a] = local[ch[a]];
      f.simplices.push_back(c);
      f.parent_of_simplex.push_back(t);
    }
  }
  detail::finalize_topology(f);
  return f;
}

/// Meshes 0..levels-1, each the uniform refinement of the previous one.
template <int Dim>
std::vector<MeshLevel<Dim>> build_mesh_hierarchy(const Box<Dim>& box, int n0, int levels) {
  if (levels < 1) throw ConfigError("build_mesh_hierarchy: need at least one level");
  std::vector<MeshLevel<Dim>> h;
  h.push_back(build_initial_mesh<Dim>(box, n0));
  for (int l = 1; l < levels; ++l) h.push_back(refine_uniform(h.back()));
  return h;
}

/// Enumeration of a subset of mesh vertices as degrees of freedom.
struct DofMap {
  std::vector<int> dof_of_vertex;  // -1: no dof
  std::vector<int> vertex_of_dof;

  int size() const { return static_cast<int>(vertex_of_dof.size()); }
  bool has(int v) const { return dof_of_vertex[v] >= 0; }

  /// Dofs on the masked vertices in increasing vertex order.
  static DofMap from_mask(const std::vector<char>& mask) {
    DofMap d;
    d.dof_of_vertex.assign(mask.size(), -1);
    for (std::size_t v = 0; v < mask.size(); ++v)
      if (mask[v]) {
        d.dof_of_vertex[v] = static_cast<int>(d.vertex_of_dof.size());
        d.vertex_of_dof.push_back(static_cast<int>(v));
      }
    return d;
  }
};

/// Standard P1 space with zero trace: one dof per interior vertex.
template <int Dim>
DofMap standard_dofs(const MeshLevel<Dim>& mesh) {
  std::vector<char> mask(mesh.vertices.size());
  for (std::size_t v = 0; v < mask.size(); ++v) mask[v] = !mesh.boundary_vertex[v];
  return DofMap::from_mask(mask);
}

/// Nodal interpolation of coarse piecewise-linear functions on a fine dof set.
/// A parent vertex without a coarse dof is allowed only on the domain boundary
/// (zero trace); anywhere else the fine dof set is not covered by the coarse one.
template <int Dim>
SparseMatrix std_prolongation(const MeshLevel<Dim>& fine, const DofMap& coarse_dofs, const DofMap& fine_dofs) {
  if (fine.parent_of_vertex.empty()) throw Error("std_prolongation: mesh level has no parent");
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(2 * fine_dofs.size()));
  auto parent_dof = [&](int cv, int fv) {
    const int d = coarse_dofs.dof_of_vertex[cv];
    if (d < 0 && !fine.boundary_vertex[cv])
      throw AssumptionError("std_prolongation: fine vertex " + std::to_string(fv) + " has coarse parent vertex " +
                            std::to_string(cv) + " outside the coarse dof set (nested extended domains violated)");
    return d;
  };
  for (int i = 0; i < fine_dofs.size(); ++i) {
    const int fv = fine_dofs.vertex_of_dof[i];
    const VertexParent p = fine.parent_of_vertex[fv];
    if (p.is_vertex()) {
      const int d = parent_dof(p.a, fv);
      if (d >= 0) t.push_back({i, d, 1.0});
    } else {
      for (int cv : {p.a, p.b}) {
        const int d = parent_dof(cv, fv);
        if (d >= 0) t.push_back({i, d, 0.5});
      }
    }
  }
  return SparseMatrix::from_triplets(fine_dofs.size(), coarse_dofs.size(), std::move(t));
}

}  // namespace cutmg
