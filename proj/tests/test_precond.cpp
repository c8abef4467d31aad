#include <gtest/gtest.h>

#include "opprecond/io.hpp"
#include "opprecond/operators.hpp"
#include "opprecond/precond.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace opprecond;

namespace {

SimplicialMesh make(Geometry g, int n, DirichletSpec d = DirichletSpec::none) {
  GeometrySpec s;
  s.kind = g;
  s.elements = n;
  s.dirichlet = d;
  return make_structured(s);
}

std::shared_ptr<const OppositeOperator> mass_bs(const SimplicialMesh& m, const MeshCombinatorics& c) {
  return std::make_shared<OppositeOperator>(OppositeOperator::from_sparse(assemble_p1(m, c, 1.0, 1.0)));
}

std::vector<SimplicialMesh> meshes() {
  return {make(Geometry::interval, 6, DirichletSpec::left), make(Geometry::polygon, 2),
          make(Geometry::unit_square, 3, DirichletSpec::all), make(Geometry::cube_surface, 1),
          corner_refine(make(Geometry::unit_square, 2))};
}

double sym_err(const Eigen::MatrixXd& G) { return (G - G.transpose()).cwiseAbs().maxCoeff() / G.cwiseAbs().maxCoeff(); }

double min_eig(const Eigen::MatrixXd& G) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (G + G.transpose())).eigenvalues()[0];
}

// coefficients of the dual expansion as dense (hat, bubble) blocks
void dual_blocks(const std::vector<DualFunction>& psi, int nv, int nb, Eigen::MatrixXd& P, Eigen::MatrixXd& Q) {
  P = Eigen::MatrixXd::Zero(nv, psi.size());
  Q = Eigen::MatrixXd::Zero(nb, psi.size());
  for (std::size_t j = 0; j < psi.size(); ++j) {
    for (auto [v, w] : psi[j].hats) P(v, j) += w;
    for (auto [k, w] : psi[j].bubbles) Q(k, j) += w;
  }
}

}  // namespace

TEST(Disc0, PerimeterFourSquare) {
  GeometrySpec g;
  g.kind = Geometry::polygon;
  g.radius = std::sqrt(2.0) / 2.0;
  const auto m = make_structured(g);
  const auto c = combinatorics(m);
  for (double len : c.volume) EXPECT_NEAR(len, 1.0, 1e-15);
  const auto F = build_disc0(m, c, mass_bs(m, c), 0.5, 1.25);
  const Eigen::MatrixXd p(F.p), q(F.q);
  for (int v = 0; v < 4; ++v)
    for (int t = 0; t < 4; ++t) {
      const bool touches = m.simplices[t][0] == c.free_vertices[v] || m.simplices[t][1] == c.free_vertices[v];
      EXPECT_DOUBLE_EQ(p(v, t), touches ? 0.5 : 0.0);
    }
  for (int t = 0; t < 4; ++t) {
    EXPECT_DOUBLE_EQ(q(t, t), 0.5);
    EXPECT_DOUBLE_EQ(q((t + 1) % 4, t), -0.25);
    EXPECT_DOUBLE_EQ(q((t + 3) % 4, t), -0.25);
    EXPECT_DOUBLE_EQ(q((t + 2) % 4, t), 0.0);
    EXPECT_NEAR(F.D[t], 1.0, 1e-15);
    EXPECT_NEAR(F.BB[t], 1.25, 1e-15);
  }
}

TEST(Disc0, SingleTriangleOnGamma) {
  SimplicialMesh m;
  m.dim = 2;
  m.embed_dim = 2;
  m.vertices = {Point(0, 0, 0), Point(0.5, 0, 0), Point(0, 0.5, 0)};
  m.simplices = {{0, 1, 2}};
  m.dirichlet = {{0, 1}, {1, 2}, {0, 2}};
  const auto c = combinatorics(m);
  ASSERT_EQ(c.n_free(), 0);
  auto bs = std::make_shared<OppositeOperator>(OppositeOperator::from_dense(Eigen::MatrixXd(0, 0)));
  const auto F = build_disc0(m, c, bs, 0.5, 2.0);
  EXPECT_EQ(F.p.rows(), 0);
  EXPECT_EQ(F.p.cols(), 1);
  EXPECT_DOUBLE_EQ(Eigen::MatrixXd(F.q)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(F.D[0], 0.125);
  EXPECT_NEAR(F.BB[0], 2.0 * std::sqrt(0.125), 1e-15);
  // G = BB / D^2
  EXPECT_NEAR(F.dense()(0, 0), 2.0 * std::sqrt(0.125) / (0.125 * 0.125), 1e-12);
}

TEST(Disc0, FactorsMatchDualExpansion) {
  for (const auto& m : meshes()) {
    const auto c = combinatorics(m);
    const auto L = dof_layout(m, SpaceKind::disc, 0);
    const auto F = build_disc0(m, c, mass_bs(m, c), 0.5, 1.0);
    Eigen::MatrixXd P, Q;
    dual_blocks(lowest_dual(m, c, L), m.n_vertices(), L.n_dofs, P, Q);
    Eigen::MatrixXd Pf = Eigen::MatrixXd::Zero(m.n_vertices(), L.n_dofs);
    const Eigen::MatrixXd p(F.p);
    for (int k = 0; k < c.n_free(); ++k) Pf.row(c.free_vertices[k]) = p.row(k);
    EXPECT_EQ((Pf - P).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT((Eigen::MatrixXd(F.q) - Q).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Disc0, QColumnSums) {
  // sum over rows of q(., T) = 1 - #(free vertices of T) / (d + 1)
  for (const auto& m : meshes()) {
    const auto c = combinatorics(m);
    const auto F = build_disc0(m, c, mass_bs(m, c), 0.5, 1.0);
    const Eigen::VectorXd cs = Eigen::RowVectorXd::Ones(F.q.rows()) * F.q;
    for (int t = 0; t < m.n_simplices(); ++t) {
      int nfree = 0;
      for (int i = 0; i <= m.dim; ++i) nfree += c.is_free(m.simplices[t][i]);
      EXPECT_NEAR(cs[t], 1.0 - nfree / (m.dim + 1.0), 1e-14);
    }
  }
}

TEST(Cont1, UniformIntervalEntries) {
  const auto m = make(Geometry::interval, 8, DirichletSpec::left);
  const auto c = combinatorics(m);
  const auto F = build_cont1(m, c, mass_bs(m, c), 0.5, 1.0);
  const Eigen::MatrixXd q(F.q);
  const double h = 1.0 / 8;
  EXPECT_DOUBLE_EQ(q(0, 0), 0.5);  // gamma column e / (d + 1)
  EXPECT_EQ(q.col(0).cwiseAbs().sum(), 0.5);
  for (int v = 2; v < 7; ++v) {
    EXPECT_NEAR(q(v, v), 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(q(v - 1, v), -1.0 / 12.0, 1e-15);
    EXPECT_NEAR(q(v + 1, v), -1.0 / 12.0, 1e-15);
    EXPECT_NEAR(F.D[v], h, 1e-15);
    EXPECT_NEAR(F.BB[v], 1.0, 1e-15);  // |omega|^(1 - 2s/d) with s = 1/2, d = 1
  }
  EXPECT_NEAR(F.D[8], h / 2, 1e-15);
}

TEST(Cont1, FactorsMatchDualExpansion) {
  for (const auto& m : meshes()) {
    const auto c = combinatorics(m);
    const auto L = dof_layout(m, SpaceKind::cont, 1);
    const auto F = build_cont1(m, c, mass_bs(m, c), 0.5, 1.0);
    Eigen::MatrixXd P, Q;
    dual_blocks(lowest_dual(m, c, L), m.n_vertices(), L.n_dofs, P, Q);
    Eigen::MatrixXd Pf = Eigen::MatrixXd::Zero(m.n_vertices(), L.n_dofs);
    const Eigen::MatrixXd p(F.p);
    for (int k = 0; k < c.n_free(); ++k) Pf.row(c.free_vertices[k]) = p.row(k);
    EXPECT_EQ((Pf - P).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT((Eigen::MatrixXd(F.q) - Q).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Factors, ApplyMatchesDenseAndIsLinearCost) {
  for (const auto& m : meshes())
    for (auto [kind, l] : {std::pair{SpaceKind::disc, 0}, {SpaceKind::cont, 1}, {SpaceKind::disc, 2},
                           {SpaceKind::cont, 2}, {SpaceKind::cont, 3}})
      for (bool ssc : {false, true}) {
        if (l <= 1 && kind == SpaceKind::cont && ssc) continue;
        if (l == 0 && ssc) continue;
        const auto c = combinatorics(m);
        const auto L = dof_layout(m, kind, l);
        const SpMat H = assemble_hat_mass(m, L);
        PrecondFactors F;
        if (L.n_higher() == 0) F = detail::build_lowest(m, c, L, mass_bs(m, c), 0.5, 1.3);
        else if (ssc) F = build_high_ssc(m, c, L, H, mass_bs(m, c), 0.5, 1.3);
        else F = build_high_opp(m, c, L, H, mass_bs(m, c), 0.5, 1.3);
        const Eigen::MatrixXd G = F.dense();
        ASSERT_EQ(G.rows(), L.n_dofs);
        EXPECT_LT(sym_err(G), 1e-14);
        EXPECT_GT(min_eig(G), 0.0);
        Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(L.n_dofs, -1.0, 2.0).array().sin();
        ApplyStats st;
        const Eigen::VectorXd y = F.apply(r, &st);
        EXPECT_LT((y - G * r).norm(), 1e-12 * (G * r).norm()) << variant_name(F.variant);
        EXPECT_EQ(F.apply(Eigen::VectorXd::Zero(L.n_dofs)).norm(), 0.0);
        // traversal bounded by a fixed multiple of the dof count (valence is bounded on these meshes)
        EXPECT_LE(st.traversed, 200u * static_cast<std::size_t>(L.n_dofs)) << variant_name(F.variant);
      }
}

TEST(Factors, DiscSscBlockAndZeroCoupling) {
  const auto m = make(Geometry::polygon, 3);
  const auto c = combinatorics(m);
  const auto L = dof_layout(m, SpaceKind::disc, 2);
  const SpMat H = assemble_hat_mass(m, L);
  const double s = 0.5, beta = 1.7;
  const auto ssc = build_high_ssc(m, c, L, H, mass_bs(m, c), s, beta);
  auto opp = build_high_opp(m, c, L, H, mass_bs(m, c), s, beta);
  EXPECT_GT(opp.R.nonZeros(), 0);
  EXPECT_EQ(ssc.R.nonZeros(), 0);
  opp.R = SpMat(opp.n1, opp.n0);
  EXPECT_EQ((ssc.dense() - opp.dense()).cwiseAbs().maxCoeff(), 0.0);
  const Eigen::MatrixXd G = ssc.dense();
  for (int j = L.n_lowest; j < L.n_dofs; ++j) {
    const double vol = c.volume[L.support[j].front()];
    EXPECT_NEAR(G(j, j), beta * std::pow(vol, -1.0 - 2.0 * s / m.dim), 1e-12 * G(j, j));
    for (int i = 0; i < L.n_dofs; ++i)
      if (i != j) EXPECT_EQ(G(i, j), 0.0);
  }
}

TEST(Factors, DiscSscNeedsOrthogonalBasis) {
  const auto m = make(Geometry::polygon, 2);
  const auto c = combinatorics(m);
  const auto L = dof_layout(m, SpaceKind::disc, 2, false);
  EXPECT_THROW(build_high_ssc(m, c, L, assemble_hat_mass(m, L), mass_bs(m, c), 0.5, 1.0), std::invalid_argument);
  // the opp variant does not care
  EXPECT_NO_THROW(build_high_opp(m, c, L, assemble_hat_mass(m, L), mass_bs(m, c), 0.5, 1.0));
}

// R(j, .) = -<xi_j, psi0> / D1_j, with psi0 the lowest-order dual functions built from bubbles
TEST(Factors, CouplingMatchesDualGram) {
  for (const auto& m : meshes())
    for (auto [kind, l] : {std::pair{SpaceKind::disc, 1}, {SpaceKind::disc, 2}, {SpaceKind::cont, 2},
                           {SpaceKind::cont, 3}}) {
      const auto c = combinatorics(m);
      const auto L = dof_layout(m, kind, l);
      const auto F = build_high_opp(m, c, L, assemble_hat_mass(m, L), mass_bs(m, c), 0.5, 1.0);
      const auto B = realize_bubbles(m, c, L, BubbleKind::element_poly);
      const Eigen::MatrixXd G0 = dual_gram(m, c, L, B, lowest_dual(m, c, L));
      const Eigen::MatrixXd R(F.R);
      double worst = 0.0;
      for (int j = 0; j < L.n_higher(); ++j) {
        const double D1 = support_volume(c, L, L.n_lowest + j);
        EXPECT_NEAR(F.C1[j], std::pow(D1, 1.0 - 1.0 / m.dim), 1e-13 * F.C1[j]);
        for (int k = 0; k < L.n_lowest; ++k) worst = std::max(worst, std::abs(R(j, k) + G0(L.n_lowest + j, k) / D1));
      }
      EXPECT_LT(worst, 1e-12) << (kind == SpaceKind::disc ? "dg" : "cg") << l;
      if (kind == SpaceKind::cont)
        for (int v = 0; v < m.n_vertices(); ++v)
          if (!c.is_free(v)) EXPECT_EQ(R.col(v).norm(), 0.0);
    }
}

TEST(Factors, ContSscCouplingAndHigherBlock) {
  for (const auto& m : meshes())
    for (int l : {2, 3}) {
      const double s = 0.5;
      const auto c = combinatorics(m);
      const auto L = dof_layout(m, SpaceKind::cont, l);
      const auto F = build_high_ssc(m, c, L, assemble_hat_mass(m, L), mass_bs(m, c), s, 1.0);
      const auto B = realize_bubbles(m, c, L, BubbleKind::element_poly);
      const Eigen::MatrixXd G0 = dual_gram(m, c, L, B, lowest_dual(m, c, L));
      const Eigen::MatrixXd S(F.S);
      for (int v = 0; v < m.n_vertices(); ++v)
        for (int j = 0; j < L.n_higher(); ++j) {
          const double ref = c.is_free(v) ? -(m.dim + 1.0) * G0(L.n_lowest + j, v) / c.patch_volume[v] : 0.0;
          EXPECT_NEAR(S(v, j), ref, 1e-12);
        }
      // C1 = 1 / sum_T h_T^{2s} int_T xi^2, by an independent rule
      const auto rule = simplex_rule(m.dim, 2 * l + 2);
      Eigen::VectorXd nrm = Eigen::VectorXd::Zero(L.n_higher());
      std::vector<double> v(L.local_size());
      for (int t = 0; t < m.n_simplices(); ++t)
        for (std::size_t q = 0; q < rule.weights.size(); ++q) {
          L.eval(t, rule.bary[q], v.data());
          for (int i = 0; i < L.local_size(); ++i) {
            const int dof = L.element_dofs[t][i];
            if (dof >= L.n_lowest)
              nrm[dof - L.n_lowest] += std::pow(c.h[t], 2 * s) * rule.weights[q] * c.volume[t] * v[i] * v[i];
          }
        }
      EXPECT_LT((F.C1.cwiseProduct(nrm).array() - 1.0).abs().maxCoeff(), 1e-12);
    }
}

TEST(Factors, Jacobi) {
  Eigen::MatrixXd A(2, 2);
  A << 4.0, 1.0, 1.0, 2.0;
  const auto F = build_jacobi(A);
  EXPECT_EQ(F.size(), 2);
  EXPECT_EQ(F.apply(Eigen::Vector2d(1.0, 1.0)), Eigen::Vector2d(0.25, 0.5));
  EXPECT_EQ(F.dense(), Eigen::MatrixXd(Eigen::Vector2d(0.25, 0.5).asDiagonal()));
  A(1, 1) = 0.0;
  EXPECT_THROW(build_jacobi(A), std::invalid_argument);
}

TEST(Factors, InputErrors) {
  const auto m = make(Geometry::polygon, 2);
  const auto c = combinatorics(m);
  auto wrong = std::make_shared<OppositeOperator>(OppositeOperator::from_dense(Eigen::MatrixXd::Identity(3, 3)));
  EXPECT_THROW(build_disc0(m, c, wrong, 0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(build_cont1(m, c, wrong, 0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(build_disc0(m, c, mass_bs(m, c), 0.5, 0.0), std::invalid_argument);
  const auto L0 = dof_layout(m, SpaceKind::disc, 0);
  EXPECT_THROW(build_high_opp(m, c, L0, assemble_hat_mass(m, L0), mass_bs(m, c), 0.5, 1.0), std::invalid_argument);
  const auto L1 = dof_layout(m, SpaceKind::disc, 1);
  EXPECT_THROW(build_high_opp(m, c, L1, assemble_hat_mass(m, L0), mass_bs(m, c), 0.5, 1.0), std::invalid_argument);
  const auto F = build_disc0(m, c, mass_bs(m, c), 0.5, 1.0);
  EXPECT_THROW(F.apply(Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST(Factors, WriteFactorsRoundTrip) {
  const auto m = make(Geometry::polygon, 2);
  const auto c = combinatorics(m);
  const auto L = dof_layout(m, SpaceKind::cont, 2);
  const auto F = build_high_ssc(m, c, L, assemble_hat_mass(m, L), mass_bs(m, c), 0.5, 1.0);
  const auto dir = std::filesystem::temp_directory_path() / "opprecond_factor_test";
  std::filesystem::create_directories(dir);
  const std::string prefix = (dir / "f").string();
  write_factors(prefix, F);
  std::ifstream fd(prefix + ".D.txt"), fq(prefix + ".q.txt"), fs(prefix + ".S.txt"), fc(prefix + ".C1.txt");
  EXPECT_EQ(read_vector(fd), F.D);
  EXPECT_EQ(read_vector(fc), F.C1);
  EXPECT_EQ(Eigen::MatrixXd(read_coo(fq, F.n0, F.n0)), Eigen::MatrixXd(F.q));
  EXPECT_EQ(Eigen::MatrixXd(read_coo(fs, F.n0, F.n1)), Eigen::MatrixXd(F.S));
  EXPECT_FALSE(std::filesystem::exists(prefix + ".R.txt"));
  std::filesystem::remove_all(dir);
}
