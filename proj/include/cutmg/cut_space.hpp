#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cutmg/cut_geometry.hpp"
#include "cutmg/linear_solvers.hpp"
#include "cutmg/mesh.hpp"
#include "cutmg/sparse_matrix.hpp"

namespace cutmg {

/// Global dofs carrying the side-s trace of the nodal function of a vertex.
/// `count == 0` marks a boundary vertex (Dirichlet data, no dof).
struct SlotDofs {
  int count = 0;
  std::array<int, 2> dofs{-1, -1};
};

/// Unfitted P1 space of one level.
///
/// XFEM numbering: one standard dof per interior vertex (vertex order), then
/// one extended dof per doubled vertex, ordered breadth first along the
/// interface. The extended function of vertex v is the nodal function of v
/// restricted to the side opposite to v.
///
/// Two-copy numbering: interior vertices of the first extended domain, then
/// those of the second one, each in vertex order.
template <int Dim>
struct CutSpace {
  std::vector<Side> home;        // side containing each vertex
  std::vector<int> std_dof;      // per vertex, -1 on the boundary
  std::vector<int> ext_dof;      // per vertex, -1 unless doubled
  std::vector<int> vertex_of_dof;
  int n_std = 0;
  int n_ext = 0;
  std::array<DofMap, 2> side_dofs;
  std::array<std::vector<int>, 2> doubled;  // doubled vertices lying in each side
  std::vector<int> interface_vertices;      // doubled vertices in extended dof order

  int size() const { return n_std + n_ext; }
  int twocopy_size() const { return side_dofs[0].size() + side_dofs[1].size(); }
  int twocopy_offset(Side s) const { return s == Side::Negative ? 0 : side_dofs[0].size(); }
  bool is_extended(int dof) const { return dof >= n_std; }

  SlotDofs slot(int v, Side s) const {
    SlotDofs d;
    if (std_dof[v] < 0) return d;
    d.dofs[d.count++] = std_dof[v];
    if (home[v] != s && ext_dof[v] >= 0) d.dofs[d.count++] = ext_dof[v];
    return d;
  }

  /// Interface index set: (standard, extended) pairs of all doubled vertices,
  /// vertices in extended dof order.
  std::vector<int> interface_dofs() const {
    std::vector<int> idx;
    idx.reserve(2 * interface_vertices.size());
    for (int v : interface_vertices) {
      idx.push_back(std_dof[v]);
      idx.push_back(ext_dof[v]);
    }
    return idx;
  }

  /// Matrix mapping XFEM coefficients to two-copy coefficients.
  SparseMatrix xfem_to_twocopy_matrix() const {
    std::vector<Triplet> t;
    for (int s = 0; s < 2; ++s) {
      const Side side = static_cast<Side>(s);
      const int off = twocopy_offset(side);
      for (int k = 0; k < side_dofs[s].size(); ++k) {
        const SlotDofs d = slot(side_dofs[s].vertex_of_dof[k], side);
        for (int j = 0; j < d.count; ++j) t.push_back({off + k, d.dofs[j], 1.0});
      }
    }
    return SparseMatrix::from_triplets(twocopy_size(), size(), std::move(t));
  }

  /// Matrix mapping two-copy coefficients to XFEM coefficients.
  SparseMatrix twocopy_to_xfem_matrix() const {
    std::vector<Triplet> t;
    for (int v = 0; v < static_cast<int>(home.size()); ++v) {
      if (std_dof[v] < 0) continue;
      const Side h = home[v];
      const int ih = twocopy_offset(h) + side_dofs[index(h)].dof_of_vertex[v];
      t.push_back({std_dof[v], ih, 1.0});
      if (ext_dof[v] >= 0) {
        const Side o = other(h);
        const int io = twocopy_offset(o) + side_dofs[index(o)].dof_of_vertex[v];
        t.push_back({ext_dof[v], io, 1.0});
        t.push_back({ext_dof[v], ih, -1.0});
      }
    }
    return SparseMatrix::from_triplets(size(), twocopy_size(), std::move(t));
  }

  std::vector<double> to_twocopy(std::span<const double> xfem) const { return xfem_to_twocopy_matrix() * xfem; }
  std::vector<double> to_xfem(std::span<const double> twocopy) const { return twocopy_to_xfem_matrix() * twocopy; }

  /// Side-s value at vertex v of the function with XFEM coefficients u (zero on the boundary).
  double vertex_value(std::span<const double> u, int v, Side s) const {
    const SlotDofs d = slot(v, s);
    double val = 0.0;
    for (int j = 0; j < d.count; ++j) val += u[d.dofs[j]];
    return val;
  }
};

/// Builds the unfitted space on a classified mesh level.
template <int Dim>
CutSpace<Dim> build_cut_space(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo) {
  const int nv = mesh.num_vertices();
  CutSpace<Dim> sp;
  sp.home.resize(nv);
  for (int v = 0; v < nv; ++v) sp.home[v] = topo.vertex_side(v);

  std::array<std::vector<char>, 2> in_ext;
  for (int s = 0; s < 2; ++s) {
    in_ext[s].assign(nv, 0);
    for (int t = 0; t < mesh.num_simplices(); ++t)
      if (topo.extended[s][t])
        for (int v : mesh.simplices[t]) in_ext[s][v] = 1;
    std::vector<char> mask(nv, 0);
    for (int v = 0; v < nv; ++v) mask[v] = in_ext[s][v] && !mesh.boundary_vertex[v];
    sp.side_dofs[s] = DofMap::from_mask(mask);
  }

  sp.std_dof.assign(nv, -1);
  for (int v = 0; v < nv; ++v)
    if (!mesh.boundary_vertex[v]) {
      sp.std_dof[v] = sp.n_std++;
      sp.vertex_of_dof.push_back(v);
    }

  // doubled: interior vertex of side i that is also a vertex of the other extended domain
  std::vector<char> is_doubled(nv, 0);
  for (int v = 0; v < nv; ++v) {
    if (mesh.boundary_vertex[v]) continue;
    const Side o = other(sp.home[v]);
    if (in_ext[index(o)][v]) {
      is_doubled[v] = 1;
      sp.doubled[index(sp.home[v])].push_back(v);
    }
  }

  // breadth first numbering of the doubled vertices along the interface
  std::vector<int> local(nv, -1), members;
  for (int v = 0; v < nv; ++v)
    if (is_doubled[v]) {
      local[v] = static_cast<int>(members.size());
      members.push_back(v);
    }
  const auto adj = mesh.vertex_adjacency();
  std::vector<std::vector<int>> graph(members.size());
  for (std::size_t k = 0; k < members.size(); ++k)
    for (int w : adj[members[k]])
      if (local[w] >= 0) graph[k].push_back(local[w]);
  sp.ext_dof.assign(nv, -1);
  for (int k : bfs_order(graph)) {
    const int v = members[k];
    sp.ext_dof[v] = sp.n_std + sp.n_ext++;
    sp.vertex_of_dof.push_back(v);
    sp.interface_vertices.push_back(v);
  }
  return sp;
}

/// Adjacency of the interface vertices (indices into `interface_vertices`).
template <int Dim>
std::vector<std::vector<int>> interface_vertex_graph(const MeshLevel<Dim>& mesh, const CutSpace<Dim>& sp) {
  std::vector<int> local(mesh.vertices.size(), -1);
  for (std::size_t k = 0; k < sp.interface_vertices.size(); ++k) local[sp.interface_vertices[k]] = static_cast<int>(k);
  const auto adj = mesh.vertex_adjacency();
  std::vector<std::vector<int>> g(sp.interface_vertices.size());
  for (std::size_t k = 0; k < sp.interface_vertices.size(); ++k)
    for (int w : adj[sp.interface_vertices[k]])
      if (local[w] >= 0) g[k].push_back(local[w]);
  return g;
}

/// Per-vertex, per-side nodal values of a discrete function including boundary data.
struct NodalValues {
  std::array<std::vector<double>, 2> side;
};

template <int Dim>
NodalValues nodal_values(const MeshLevel<Dim>& mesh, const CutSpace<Dim>& sp, std::span<const double> u,
                         const std::function<double(const Point<Dim>&, Side)>& dirichlet = nullptr) {
  NodalValues n;
  const int nv = mesh.num_vertices();
  for (int s = 0; s < 2; ++s) {
    n.side[s].assign(nv, 0.0);
    for (int v = 0; v < nv; ++v) {
      if (mesh.boundary_vertex[v])
        n.side[s][v] = dirichlet ? dirichlet(mesh.vertices[v], sp.home[v]) : 0.0;
      else
        n.side[s][v] = sp.vertex_value(u, v, static_cast<Side>(s));
    }
  }
  return n;
}

/// Index of a simplex containing x (brute force), -1 when outside.
template <int Dim>
int locate_simplex(const MeshLevel<Dim>& mesh, const Point<Dim>& x, double tol = 1e-12) {
  for (int t = 0; t < mesh.num_simplices(); ++t) {
    const auto lam = barycentric<Dim>(mesh.corners(t), x);
    if (*std::min_element(lam.begin(), lam.end()) >= -tol) return t;
  }
  return -1;
}

/// Side-s value of the function with XFEM coefficients u at x in simplex t.
template <int Dim>
double eval_in_simplex(const MeshLevel<Dim>& mesh, const CutSpace<Dim>& sp, std::span<const double> u, int t,
                       const Point<Dim>& x, Side s) {
  const auto lam = barycentric<Dim>(mesh.corners(t), x);
  double val = 0.0;
  for (int k = 0; k <= Dim; ++k) val += lam[k] * sp.vertex_value(u, mesh.simplices[t][k], s);
  return val;
}

/// Evaluates the discrete function at x on the side the discrete interface assigns to x.
template <int Dim>
double eval_cut_function(const MeshLevel<Dim>& mesh, const CutTopology<Dim>& topo, const CutSpace<Dim>& sp,
                         std::span<const double> u, const Point<Dim>& x) {
  const int t = locate_simplex(mesh, x);
  if (t < 0) throw Error("eval_cut_function: point outside the mesh");
  return eval_in_simplex(mesh, sp, u, t, x, side_at(mesh, topo, t, x));
}

/// Same, with the side given explicitly.
template <int Dim>
double eval_cut_function(const MeshLevel<Dim>& mesh, const CutSpace<Dim>& sp, std::span<const double> u,
                         const Point<Dim>& x, Side s) {
  const int t = locate_simplex(mesh, x);
  if (t < 0) throw Error("eval_cut_function: point outside the mesh");
  return eval_in_simplex(mesh, sp, u, t, x, s);
}

}  // namespace cutmg
