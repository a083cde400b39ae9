#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cutmg/assembly.hpp"
#include "cutmg/linear_solvers.hpp"

namespace cutmg {

enum class Smoother { GS, GSIC };
enum class GammaSolverKind { Auto, PCG, Cholesky };
enum class CoarseMatrixMode { Direct, Galerkin };

inline std::string to_string(Smoother s) { return s == Smoother::GS ? "gs" : "gsic"; }
inline std::string to_string(GammaSolverKind k) {
  switch (k) {
    case GammaSolverKind::Auto: return "auto";
    case GammaSolverKind::PCG: return "pcg";
    case GammaSolverKind::Cholesky: return "cholesky";
  }
  return "auto";
}
inline std::string to_string(CoarseMatrixMode m) { return m == CoarseMatrixMode::Direct ? "direct" : "galerkin"; }

inline Smoother parse_smoother(const std::string& s) {
  if (s == "gs") return Smoother::GS;
  if (s == "gsic" || s == "gs-ic") return Smoother::GSIC;
  throw ConfigError("unknown smoother '" + s + "' (expected gs or gsic)");
}
inline GammaSolverKind parse_gamma_solver(const std::string& s) {
  if (s == "auto") return GammaSolverKind::Auto;
  if (s == "pcg") return GammaSolverKind::PCG;
  if (s == "cholesky") return GammaSolverKind::Cholesky;
  throw ConfigError("unknown interface solver '" + s + "' (expected auto, pcg or cholesky)");
}
inline CoarseMatrixMode parse_coarse_mode(const std::string& s) {
  if (s == "direct") return CoarseMatrixMode::Direct;
  if (s == "galerkin") return CoarseMatrixMode::Galerkin;
  throw ConfigError("unknown coarse matrix mode '" + s + "' (expected direct or galerkin)");
}

struct MgConfig {
  int pre_smooth = 2;
  int post_smooth = 2;
  Smoother smoother = Smoother::GS;
  GammaSolverKind gamma_solver = GammaSolverKind::Auto;
  CoarseMatrixMode coarse_mode = CoarseMatrixMode::Direct;
  double rel_tol = 1e-8;
  int max_iter = 500;
  double gamma_pcg_tol = 1e-2;
  int gamma_pcg_max_iter = 1000;
  double divergence_factor = 1e6;

  void validate() const {
    if (pre_smooth < 0 || post_smooth < 0) throw ConfigError("smoothing step counts must be non-negative");
    if (!(rel_tol > 0.0)) throw ConfigError("rel_tol must be positive");
    if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (!(gamma_pcg_tol > 0.0) || gamma_pcg_max_iter < 1) throw ConfigError("invalid interface PCG settings");
  }

  /// Inner solver actually used for a given coefficient contrast.
  GammaSolverKind resolved_gamma_solver(const DiscretizationConfig& d) const {
    if (gamma_solver != GammaSolverKind::Auto) return gamma_solver;
    const double contrast = std::max(d.mu1, d.mu2) / std::min(d.mu1, d.mu2);
    return contrast <= 1e2 ? GammaSolverKind::PCG : GammaSolverKind::Cholesky;
  }
};

template <int Dim>
struct MgLevel {
  MeshLevel<Dim> mesh;
  CutTopology<Dim> topo;
  CutSpace<Dim> space;
  SparseMatrix A;
  SparseMatrix P;  // prolongation from the next coarser level; empty on level 0

  // interface block, built when GS-IC is active
  std::vector<int> interface_idx;
  SparseMatrix A_gamma;
  std::optional<EnvelopeCholesky> gamma_chol;
  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> gamma_lu;  // indefinite A^Gamma
  bool has_interface_block = false;
};

template <int Dim>
struct MgHierarchy {
  std::vector<MgLevel<Dim>> levels;
  DiscretizationConfig disc;
  MgConfig mg;
  GammaSolverKind gamma_kind = GammaSolverKind::PCG;
  Eigen::LLT<Eigen::MatrixXd> coarse;
  std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> coarse_lu;  // level-0 matrix not SPD
  AssumptionReport assumptions;

  int finest() const { return static_cast<int>(levels.size()) - 1; }
};

/// p = T_fine * blockdiag(p_1, p_2) * T_coarse^{-1}, with p_i the standard
/// prolongation between the side-i extended domain spaces.
template <int Dim>
SparseMatrix build_prolongation(const MeshLevel<Dim>& fine_mesh, const CutSpace<Dim>& coarse, const CutSpace<Dim>& fine) {
  std::vector<Triplet> t;
  for (int s = 0; s < 2; ++s) {
    const SparseMatrix ps = std_prolongation(fine_mesh, coarse.side_dofs[s], fine.side_dofs[s]);
    const int ro = fine.twocopy_offset(static_cast<Side>(s));
    const int co = coarse.twocopy_offset(static_cast<Side>(s));
    for (int i = 0; i < ps.rows(); ++i) {
      const auto cols = ps.row_cols(i);
      const auto vals = ps.row_values(i);
      for (std::size_t k = 0; k < cols.size(); ++k) t.push_back({ro + i, co + cols[k], vals[k]});
    }
  }
  const SparseMatrix block = SparseMatrix::from_triplets(fine.twocopy_size(), coarse.twocopy_size(), std::move(t));
  return fine.twocopy_to_xfem_matrix().multiply(block).multiply(coarse.xfem_to_twocopy_matrix());
}

inline std::vector<double> restrict_residual(const SparseMatrix& P, std::span<const double> r_fine) {
  if (static_cast<int>(r_fine.size()) != P.rows()) throw Error("restrict: dimension mismatch");
  std::vector<double> rc(static_cast<std::size_t>(P.cols()), 0.0);
  P.multiply_transpose(r_fine, rc);
  return rc;
}

inline Eigen::SparseMatrix<double> to_eigen(const SparseMatrix& A) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nnz());
  for (int i = 0; i < A.rows(); ++i) {
    const auto c = A.row_cols(i);
    const auto v = A.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) t.emplace_back(i, c[k], v[k]);
  }
  Eigen::SparseMatrix<double> E(A.rows(), A.cols());
  E.setFromTriplets(t.begin(), t.end());
  return E;
}

/// Interface block A^Gamma on the (standard, extended) dofs of all doubled
/// vertices, with the configured inner solver prepared. A Cholesky request on
/// an indefinite block falls back to sparse LU.
template <int Dim>
void build_interface_block(MgLevel<Dim>& L, GammaSolverKind kind) {
  L.interface_idx = L.space.interface_dofs();
  L.A_gamma = L.A.principal_submatrix(L.interface_idx);
  L.gamma_chol.reset();
  L.gamma_lu.reset();
  if (kind == GammaSolverKind::Cholesky && !L.interface_idx.empty()) {
    const auto graph = interface_vertex_graph(L.mesh, L.space);
    std::vector<std::vector<int>> dofs_of_node(graph.size());
    for (std::size_t k = 0; k < graph.size(); ++k)
      dofs_of_node[k] = {static_cast<int>(2 * k), static_cast<int>(2 * k + 1)};
    try {
      L.gamma_chol = sparse_cholesky_bfs(L.A_gamma, graph, dofs_of_node);
    } catch (const NumericalError&) {
      auto lu = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
      lu->compute(to_eigen(L.A_gamma));
      if (lu->info() != Eigen::Success) throw NumericalError("interface block is singular");
      L.gamma_lu = std::move(lu);
    }
  }
  L.has_interface_block = true;
}

template <int Dim>
void prepare_coarse_solver(MgHierarchy<Dim>& H) {
  const Eigen::MatrixXd D = H.levels[0].A.to_dense();
  H.coarse.compute(D);
  H.coarse_lu.reset();
  if (H.coarse.info() != Eigen::Success) H.coarse_lu.emplace(D);
}

/// Builds level data on all meshes: topology and space per level with the
/// level's own discrete interface, prolongations, and the level matrices
/// (direct discretization or Galerkin products).
template <int Dim>
MgHierarchy<Dim> build_hierarchy(const std::vector<MeshLevel<Dim>>& meshes, const LevelSet<Dim>& phi,
                                 const DiscretizationConfig& disc, const MgConfig& mg, bool iso_p2 = true) {
  disc.validate();
  mg.validate();
  if (meshes.empty()) throw ConfigError("build_hierarchy: no levels");
  MgHierarchy<Dim> H;
  H.disc = disc;
  H.mg = mg;
  H.gamma_kind = mg.resolved_gamma_solver(disc);
  const int nl = static_cast<int>(meshes.size());
  H.levels.resize(static_cast<std::size_t>(nl));
  std::vector<CutTopology<Dim>> topos;
  for (int l = 0; l < nl; ++l) {
    auto& L = H.levels[l];
    L.mesh = meshes[l];
    L.topo = build_cut_topology(L.mesh, phi, iso_p2);
    L.space = build_cut_space(L.mesh, L.topo);
    topos.push_back(L.topo);
  }
  H.assumptions = check_assumptions(meshes, topos, phi, true);
  for (int l = 1; l < nl; ++l) {
    try {
      H.levels[l].P = build_prolongation(H.levels[l].mesh, H.levels[l - 1].space, H.levels[l].space);
    } catch (const AssumptionError& e) {
      throw AssumptionError("levels " + std::to_string(l - 1) + "->" + std::to_string(l) + ": " + e.what());
    }
  }
  if (mg.coarse_mode == CoarseMatrixMode::Direct) {
    for (auto& L : H.levels) L.A = assemble_system<Dim>(L.mesh, L.topo, L.space, disc, nullptr, nullptr).A;
  } else {
    auto& F = H.levels.back();
    F.A = assemble_system<Dim>(F.mesh, F.topo, F.space, disc, nullptr, nullptr).A;
    for (int l = nl - 1; l > 0; --l) {
      const SparseMatrix& P = H.levels[l].P;
      H.levels[l - 1].A = P.transpose().multiply(H.levels[l].A).multiply(P).symmetrized();
    }
  }
  if (mg.smoother == Smoother::GSIC)
    for (int l = 1; l < nl; ++l) build_interface_block(H.levels[l], H.gamma_kind);
  prepare_coarse_solver(H);
  return H;
}

struct SmootherStats {
  int max_inner_iterations = 0;
  int inner_failures = 0;
};

/// Interface correction x += R^T (A^Gamma)^{-1} R (b - A x).
template <int Dim>
void interface_correction(const MgHierarchy<Dim>& H, const MgLevel<Dim>& L, std::span<double> x,
                          std::span<const double> b, SmootherStats& stats) {
  const int n = L.A.rows();
  const int m = static_cast<int>(L.interface_idx.size());
  if (m == 0) return;
  std::vector<double> r(static_cast<std::size_t>(n));
  residual(L.A, x, b, r);
  std::vector<double> rg(static_cast<std::size_t>(m)), y(static_cast<std::size_t>(m), 0.0);
  for (int k = 0; k < m; ++k) rg[k] = r[L.interface_idx[k]];
  if (L.gamma_chol) {
    L.gamma_chol->solve(rg, y);
  } else if (L.gamma_lu) {
    const Eigen::Map<const Eigen::VectorXd> rm(rg.data(), m);
    Eigen::Map<Eigen::VectorXd>(y.data(), m) = L.gamma_lu->solve(rm);
  } else {
    PcgResult res;
    try {
      res = pcg_jacobi(L.A_gamma, rg, y, H.mg.gamma_pcg_tol, H.mg.gamma_pcg_max_iter);
    } catch (const NumericalError&) {
      res.converged = false;  // indefinite block
    }
    stats.max_inner_iterations = std::max(stats.max_inner_iterations, res.iterations);
    if (!res.converged) {
      ++stats.inner_failures;
      return;
    }
  }
  for (int k = 0; k < m; ++k) x[L.interface_idx[k]] += y[k];
}

/// One pre-smoothing step: forward GS, then the interface correction for GS-IC.
template <int Dim>
void smooth_pre(const MgHierarchy<Dim>& H, const MgLevel<Dim>& L, std::span<double> x, std::span<const double> b,
                SmootherStats& stats) {
  gauss_seidel_sweep(L.A, x, b, SweepDirection::Forward);
  if (H.mg.smoother == Smoother::GSIC) interface_correction(H, L, x, b, stats);
}

/// One post-smoothing step: backward GS, then the interface correction for GS-IC.
template <int Dim>
void smooth_post(const MgHierarchy<Dim>& H, const MgLevel<Dim>& L, std::span<double> x, std::span<const double> b,
                 SmootherStats& stats) {
  gauss_seidel_sweep(L.A, x, b, SweepDirection::Backward);
  if (H.mg.smoother == Smoother::GSIC) interface_correction(H, L, x, b, stats);
}

/// GS sweep followed by the interface correction (one GS-IC step).
template <int Dim>
void smooth_gsic(const MgHierarchy<Dim>& H, int level, std::span<double> x, std::span<const double> b,
                 SmootherStats& stats) {
  const auto& L = H.levels[level];
  if (!L.has_interface_block) throw Error("smooth_gsic: interface block not built on level " + std::to_string(level));
  gauss_seidel_sweep(L.A, x, b, SweepDirection::Forward);
  interface_correction(H, L, x, b, stats);
}

template <int Dim>
void coarse_solve(const MgHierarchy<Dim>& H, std::span<double> x, std::span<const double> b) {
  const Eigen::Map<const Eigen::VectorXd> bb(b.data(), static_cast<Eigen::Index>(b.size()));
  Eigen::Map<Eigen::VectorXd> xx(x.data(), static_cast<Eigen::Index>(x.size()));
  if (H.coarse_lu) xx = H.coarse_lu->solve(bb);
  else xx = H.coarse.solve(bb);
}

template <int Dim>
void v_cycle(const MgHierarchy<Dim>& H, int level, std::span<double> x, std::span<const double> b,
             SmootherStats& stats) {
  if (level == 0) {
    coarse_solve(H, x, b);
    return;
  }
  const auto& L = H.levels[level];
  for (int k = 0; k < H.mg.pre_smooth; ++k) smooth_pre(H, L, x, b, stats);
  std::vector<double> r(x.size());
  residual(L.A, x, b, r);
  const std::vector<double> rc = restrict_residual(L.P, r);
  std::vector<double> ec(rc.size(), 0.0);
  v_cycle(H, level - 1, ec, rc, stats);
  std::vector<double> e(x.size());
  L.P.multiply(ec, e);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += e[i];
  for (int k = 0; k < H.mg.post_smooth; ++k) smooth_post(H, L, x, b, stats);
}

struct MgResult {
  std::vector<double> x;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  double relative_residual = 0.0;
  std::vector<double> history;  // relative residual after each cycle
  SmootherStats smoother;
};

/// Stand-alone V-cycle iteration from x = 0 on the finest level.
template <int Dim>
MgResult mg_solve(const MgHierarchy<Dim>& H, std::span<const double> b) {
  const auto& F = H.levels.back();
  const int n = F.A.rows();
  if (static_cast<int>(b.size()) != n) throw Error("mg_solve: rhs dimension mismatch");
  MgResult out;
  out.x.assign(static_cast<std::size_t>(n), 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  std::vector<double> r(static_cast<std::size_t>(n));
  while (out.iterations < H.mg.max_iter) {
    v_cycle(H, H.finest(), out.x, b, out.smoother);
    ++out.iterations;
    residual(F.A, out.x, b, r);
    const double rn = norm2(r);
    out.relative_residual = rn / bnorm;
    out.history.push_back(out.relative_residual);
    if (!std::isfinite(rn) || rn > H.mg.divergence_factor * bnorm) {
      out.diverged = true;
      return out;
    }
    if (out.relative_residual <= H.mg.rel_tol) {
      out.converged = true;
      return out;
    }
  }
  out.diverged = true;  // iteration cap reached
  return out;
}

}  // namespace cutmg
