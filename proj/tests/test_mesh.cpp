#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "cutmg/mesh.hpp"

using namespace cutmg;

namespace {

Box<2> box2() { return {{0.0, 0.0}, {2.0, 2.0}}; }
Box<3> box3() { return {{0.0, 0.0, 0.0}, {2.0, 2.0, 2.0}}; }

template <int Dim>
double total_volume(const MeshLevel<Dim>& m) {
  double s = 0.0;
  for (int t = 0; t < m.num_simplices(); ++t) s += m.simplex_volume(t);
  return s;
}

// Evaluates a coarse P1 function (values on all vertices) at x by searching the containing simplex.
template <int Dim>
double eval_p1(const MeshLevel<Dim>& m, const std::vector<double>& vals, const Point<Dim>& x) {
  for (int t = 0; t < m.num_simplices(); ++t) {
    const auto lam = barycentric<Dim>(m.corners(t), x);
    if (*std::min_element(lam.begin(), lam.end()) >= -1e-12) {
      double v = 0.0;
      for (int k = 0; k <= Dim; ++k) v += lam[k] * vals[m.simplices[t][k]];
      return v;
    }
  }
  ADD_FAILURE() << "point outside mesh";
  return 0.0;
}

}  // namespace

TEST(Mesh, Initial2DCounts) {
  const auto m = build_initial_mesh<2>(box2(), 4);
  EXPECT_EQ(m.num_simplices(), 32);
  EXPECT_EQ(m.num_vertices(), 25);
  EXPECT_NEAR(total_volume(m), 4.0, 1e-12 * 4.0);
}

TEST(Mesh, Initial3DCounts) {
  const auto m = build_initial_mesh<3>(box3(), 4);
  EXPECT_EQ(m.num_simplices(), 6 * 64);
  EXPECT_EQ(m.num_vertices(), 125);
  EXPECT_NEAR(total_volume(m), 8.0, 1e-12 * 8.0);
}

TEST(Mesh, InvalidInput) {
  EXPECT_THROW(build_initial_mesh<2>(box2(), 1), ConfigError);
  EXPECT_THROW(build_initial_mesh<2>(Box<2>{{0.0, 0.0}, {0.0, 1.0}}, 4), ConfigError);
}

TEST(Mesh, PositiveOrientationUnderFixedConvention) {
  // Kuhn simplices come in two mirror classes; the sign of each is fixed by
  // its path permutation and must be nonzero.
  const auto m = build_initial_mesh<3>(box3(), 2);
  for (int t = 0; t < m.num_simplices(); ++t) EXPECT_GT(std::abs(signed_volume<3>(m.corners(t))), 0.0);
}

TEST(Mesh, Refinement2D) {
  const auto c = build_initial_mesh<2>(box2(), 4);
  const auto f = refine_uniform(c);
  EXPECT_EQ(f.num_simplices(), 128);
  EXPECT_EQ(f.num_vertices(), 81);
  EXPECT_NEAR(f.h, c.h / 2.0, 1e-14);
  for (int v = 0; v < c.num_vertices(); ++v) EXPECT_EQ(f.vertices[v], c.vertices[v]);
}

TEST(Mesh, Refinement3D) {
  const auto c = build_initial_mesh<3>(box3(), 4);
  const auto f = refine_uniform(c);
  EXPECT_EQ(f.num_simplices(), 3072);
  EXPECT_EQ(f.num_vertices(), 729);
  EXPECT_NEAR(total_volume(f), 8.0, 1e-12 * 8.0);
  EXPECT_NEAR(f.h, c.h / 2.0, 1e-14);
}

template <int Dim>
void check_nested(const MeshLevel<Dim>& c, const MeshLevel<Dim>& f) {
  for (int t = 0; t < f.num_simplices(); ++t) {
    const auto pc = c.corners(f.parent_of_simplex[t]);
    for (const auto& x : f.corners(t)) {
      const auto lam = barycentric<Dim>(pc, x);
      EXPECT_GE(*std::min_element(lam.begin(), lam.end()), -1e-12);
    }
  }
}

TEST(Mesh, NestednessAndVolume) {
  auto h2 = build_mesh_hierarchy<2>(box2(), 4, 4);
  for (std::size_t l = 1; l < h2.size(); ++l) {
    check_nested(h2[l - 1], h2[l]);
    EXPECT_NEAR(total_volume(h2[l]), 4.0, 1e-12 * 4.0);
    EXPECT_NEAR(h2[l].h, h2[l - 1].h / 2, 1e-13);
  }
  auto h3 = build_mesh_hierarchy<3>(box3(), 2, 3);
  for (std::size_t l = 1; l < h3.size(); ++l) {
    check_nested(h3[l - 1], h3[l]);
    EXPECT_NEAR(total_volume(h3[l]), 8.0, 1e-12 * 8.0);
    EXPECT_NEAR(h3[l].h, h3[l - 1].h / 2, 1e-13);
  }
}

TEST(Mesh, RefinedMeshIsShapeRegular) {
  // red refinement of Kuhn simplices keeps all simplices congruent up to scaling
  auto h = build_mesh_hierarchy<3>(box3(), 2, 3);
  const double v0 = h[0].simplex_volume(0);
  for (int t = 0; t < h[2].num_simplices(); ++t) EXPECT_NEAR(h[2].simplex_volume(t), v0 / 64.0, 1e-14);
}

TEST(Mesh, FaceAdjacency) {
  const auto m = build_initial_mesh<2>(box2(), 4);
  int boundary = 0;
  for (const auto& f : m.faces) boundary += f.on_boundary();
  EXPECT_EQ(boundary, 16);
  EXPECT_EQ(static_cast<int>(m.faces.size()), 56);  // 2*4*5 axis edges + 16 diagonals
  int bverts = 0;
  for (char b : m.boundary_vertex) bverts += b;
  EXPECT_EQ(bverts, 16);
}

TEST(Mesh, PlaintextDump) {
  const auto m = build_initial_mesh<2>(box2(), 2);
  std::ostringstream os;
  m.write_plaintext(os);
  EXPECT_NE(os.str().find("vertices 9"), std::string::npos);
  EXPECT_NE(os.str().find("cells 8"), std::string::npos);
}

TEST(StdProlongation, ConstantsAndLinears) {
  const auto c = build_initial_mesh<2>(box2(), 4);
  const auto f = refine_uniform(c);
  // all vertices as dofs so that constants are representable
  const DofMap dc = DofMap::from_mask(std::vector<char>(c.vertices.size(), 1));
  const DofMap df = DofMap::from_mask(std::vector<char>(f.vertices.size(), 1));
  const SparseMatrix P = std_prolongation(f, dc, df);
  std::vector<double> ones(dc.size(), 1.0), x1(dc.size());
  for (int i = 0; i < dc.size(); ++i) x1[i] = c.vertices[dc.vertex_of_dof[i]][0];
  const auto po = P * std::span<const double>(ones);
  const auto px = P * std::span<const double>(x1);
  for (int i = 0; i < df.size(); ++i) {
    EXPECT_DOUBLE_EQ(po[i], 1.0);
    EXPECT_NEAR(px[i], f.vertices[df.vertex_of_dof[i]][0], 1e-15);
    EXPECT_LE(P.row_cols(i).size(), 2u);
  }
}

TEST(StdProlongation, PointwiseEvaluationOracle) {
  for (int trial = 0; trial < 2; ++trial) {
    const auto c = build_initial_mesh<2>(box2(), 4);
    const auto f = refine_uniform(c);
    const DofMap dc = standard_dofs(c);
    const DofMap df = standard_dofs(f);
    const SparseMatrix P = std_prolongation(f, dc, df);
    std::mt19937 gen(7 + trial);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<double> u(dc.size()), full(c.vertices.size(), 0.0);
    for (int i = 0; i < dc.size(); ++i) full[dc.vertex_of_dof[i]] = u[i] = U(gen);
    const auto pu = P * std::span<const double>(u);
    for (int i = 0; i < df.size(); ++i) EXPECT_NEAR(pu[i], eval_p1(c, full, f.vertices[df.vertex_of_dof[i]]), 1e-14);
  }
}

TEST(StdProlongation, PointwiseOracle3D) {
  const auto c = build_initial_mesh<3>(box3(), 2);
  const auto f = refine_uniform(c);
  const DofMap dc = DofMap::from_mask(std::vector<char>(c.vertices.size(), 1));
  const DofMap df = DofMap::from_mask(std::vector<char>(f.vertices.size(), 1));
  const SparseMatrix P = std_prolongation(f, dc, df);
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<double> u(dc.size());
  for (auto& v : u) v = U(gen);
  const auto pu = P * std::span<const double>(u);
  for (int i = 0; i < df.size(); ++i) {
    EXPECT_NEAR(pu[i], eval_p1(c, u, f.vertices[i]), 1e-14);
    double rs = 0.0;
    for (double v : P.row_values(i)) rs += v;
    EXPECT_DOUBLE_EQ(rs, 1.0);
  }
}

TEST(StdProlongation, MissingParentIsAnAssumptionViolation) {
  const auto c = build_initial_mesh<2>(box2(), 4);
  const auto f = refine_uniform(c);
  std::vector<char> cm(c.vertices.size(), 0);
  cm[12] = 1;  // centre vertex only
  const DofMap dc = DofMap::from_mask(cm);
  const DofMap df = standard_dofs(f);
  EXPECT_THROW(std_prolongation(f, dc, df), AssumptionError);
}
