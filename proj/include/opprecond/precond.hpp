#pragma once

#include "opprecond/discretization.hpp"
#include "opprecond/mesh.hpp"
#include "opprecond/operators.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace opprecond {

enum class Variant { disc0, cont1, disc_high_opp, disc_high_ssc, cont_high_opp, cont_high_ssc, jacobi };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::disc0: return "disc0";
    case Variant::cont1: return "cont1";
    case Variant::disc_high_opp: return "disc_high_opp";
    case Variant::disc_high_ssc: return "disc_high_ssc";
    case Variant::cont_high_opp: return "cont_high_opp";
    case Variant::cont_high_ssc: return "cont_high_ssc";
    case Variant::jacobi: return "jacobi";
  }
  return "?";
}

/// Work counter for apply(): sparse nonzeros and diagonal entries touched, excluding B^S.
struct ApplyStats {
  std::size_t traversed = 0;
};

/// Explicit factors of a preconditioner.
///
/// Lowest order:  G = D^-1 (p^T BS p + q^T diag(BB) q) D^-1
/// opp variants:  G = D^-1 [I R^T; 0 I] blockdiag(B0, diag(C1)) [I 0; R I] D^-1
/// cont ssc:      G = [I S; 0 I] blockdiag(G0, diag(C1)) [I 0; S^T I]
/// jacobi:        G = diag(A)^-1
struct PrecondFactors {
  Variant variant = Variant::disc0;
  double s = 0.0, beta = 1.0;
  int n0 = 0, n1 = 0;
  Eigen::VectorXd D;   // n0 + n1 (opp), n0 (lowest, cont ssc)
  SpMat p, q;          // p: #N0 x n0, q: n0 x n0
  Eigen::VectorXd BB;  // n0
  SpMat R;             // n1 x n0
  SpMat S;             // n0 x n1
  Eigen::VectorXd C1;  // n1: beta (D1)^(1-2s/d) (opp) or ||h^s xi||^-2 (cont ssc)
  std::shared_ptr<const OppositeOperator> BS;
  Eigen::VectorXd jacobi;

  int size() const { return variant == Variant::jacobi ? static_cast<int>(jacobi.size()) : n0 + n1; }
  bool has_block() const { return n1 > 0; }

  /// B0 y for the lowest-order block (y already scaled by D^-1).
  Eigen::VectorXd apply_b0(const Eigen::VectorXd& y, ApplyStats* st) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n0);
    if (p.rows() > 0) {
      const Eigen::VectorXd py = p * y;
      out += p.transpose() * BS->apply(py);
      if (st) st->traversed += 2 * static_cast<std::size_t>(p.nonZeros());
    }
    const Eigen::VectorXd qy = q * y;
    out += q.transpose() * BB.cwiseProduct(qy);
    if (st) st->traversed += 2 * static_cast<std::size_t>(q.nonZeros()) + n0;
    return out;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& r, ApplyStats* st = nullptr) const {
    if (r.size() != size()) throw std::invalid_argument("apply: dimension mismatch");
    if (variant == Variant::jacobi) {
      if (st) st->traversed += r.size();
      return jacobi.cwiseProduct(r);
    }
    if (variant == Variant::cont_high_ssc) {
      const Eigen::VectorXd r0 = r.head(n0), r1 = r.tail(n1);
      const Eigen::VectorXd w1 = Eigen::VectorXd(S.transpose() * r0) + r1;
      const Eigen::VectorXd d0 = D.head(n0).cwiseInverse();
      const Eigen::VectorXd c0 = d0.cwiseProduct(apply_b0(d0.cwiseProduct(r0), st));
      const Eigen::VectorXd c1 = C1.cwiseProduct(w1);
      Eigen::VectorXd out(n0 + n1);
      out.head(n0) = c0 + S * c1;
      out.tail(n1) = c1;
      if (st) st->traversed += 2 * static_cast<std::size_t>(S.nonZeros()) + 2 * n0 + 2 * n1;
      return out;
    }
    const Eigen::VectorXd y = r.cwiseQuotient(D);
    if (st) st->traversed += r.size();
    if (!has_block()) return apply_b0(y, st).cwiseQuotient(D);
    const Eigen::VectorXd y0 = y.head(n0);
    Eigen::VectorXd w1 = y.tail(n1);
    if (R.nonZeros() > 0) w1 += R * y0;
    const Eigen::VectorXd c1 = C1.cwiseProduct(w1);
    Eigen::VectorXd v(n0 + n1);
    v.head(n0) = apply_b0(y0, st);
    if (R.nonZeros() > 0) v.head(n0) += R.transpose() * c1;
    v.tail(n1) = c1;
    if (st) st->traversed += 2 * static_cast<std::size_t>(R.nonZeros()) + n1 + r.size();
    return v.cwiseQuotient(D);
  }

  /// Explicitly assembled G by block matrix products.
  Eigen::MatrixXd dense() const {
    if (variant == Variant::jacobi) return jacobi.asDiagonal();
    Eigen::MatrixXd B0 = Eigen::MatrixXd(q.transpose() * BB.asDiagonal() * q);
    if (p.rows() > 0) B0 += Eigen::MatrixXd(p.transpose()) * BS->to_dense() * Eigen::MatrixXd(p);
    if (!has_block()) {
      const Eigen::VectorXd di = D.cwiseInverse();
      return di.asDiagonal() * B0 * di.asDiagonal();
    }
    const int n = n0 + n1;
    Eigen::MatrixXd G(n, n);
    if (variant == Variant::cont_high_ssc) {
      const Eigen::VectorXd di = D.head(n0).cwiseInverse();
      const Eigen::MatrixXd G0 = di.asDiagonal() * B0 * di.asDiagonal();
      const Eigen::MatrixXd Sd = S;
      G.topLeftCorner(n0, n0) = G0 + Sd * C1.asDiagonal() * Sd.transpose();
      G.topRightCorner(n0, n1) = Sd * C1.asDiagonal();
      G.bottomLeftCorner(n1, n0) = C1.asDiagonal() * Sd.transpose();
      G.bottomRightCorner(n1, n1) = C1.asDiagonal();
      return G;
    }
    const Eigen::MatrixXd Rd = R;
    Eigen::MatrixXd B(n, n);
    B.topLeftCorner(n0, n0) = B0 + Rd.transpose() * C1.asDiagonal() * Rd;
    B.topRightCorner(n0, n1) = Rd.transpose() * C1.asDiagonal();
    B.bottomLeftCorner(n1, n0) = C1.asDiagonal() * Rd;
    B.bottomRightCorner(n1, n1) = C1.asDiagonal();
    const Eigen::VectorXd di = D.cwiseInverse();
    return di.asDiagonal() * B * di.asDiagonal();
  }
};

namespace detail {

inline void check_bs(const MeshCombinatorics& c, const OppositeOperator& BS) {
  if (BS.rows() != c.n_free()) throw std::invalid_argument("precond: B^S dimension does not match #N0");
}

inline Eigen::VectorXd scale_or_ones(const DofLayout* L, int n) {
  if (L) return L->scale.head(n);
  return Eigen::VectorXd::Ones(n);
}

inline double bubble_power(double vol, double s, int d) { return std::pow(vol, 1.0 - 2.0 * s / d); }

}  // namespace detail

/// Piecewise constants. `layout` (optional) supplies per-dof trial basis scaling.
inline PrecondFactors build_disc0(const SimplicialMesh& m, const MeshCombinatorics& c,
                                  std::shared_ptr<const OppositeOperator> BS, double s, double beta,
                                  const DofLayout* layout = nullptr) {
  detail::check_bs(c, *BS);
  if (!(beta > 0.0)) throw std::invalid_argument("precond: beta must be positive");
  const int nt = m.n_simplices(), d = m.dim;
  PrecondFactors F;
  F.variant = Variant::disc0;
  F.s = s;
  F.beta = beta;
  F.n0 = nt;
  F.BS = std::move(BS);
  const Eigen::VectorXd sc = detail::scale_or_ones(layout, nt);
  F.D.resize(nt);
  F.BB.resize(nt);
  std::vector<Triplet> pt, qt;
  for (int t = 0; t < nt; ++t) {
    F.D[t] = sc[t] * c.volume[t];
    F.BB[t] = beta * detail::bubble_power(c.volume[t], s, d);
    const auto& sx = m.simplices[t];
    double own = 1.0;
    for (int i = 0; i <= d; ++i)
      if (c.is_free(sx[i])) {
        pt.emplace_back(c.free_index[sx[i]], t, 1.0 / c.valence[sx[i]]);
        own -= 1.0 / ((d + 1.0) * c.valence[sx[i]]);
      }
    qt.emplace_back(t, t, own);
    for (int t2 : c.element_neighbors[t]) {
      double w = 0.0;
      for (int i = 0; i <= d; ++i) {
        if (!c.is_free(sx[i])) continue;
        for (int k = 0; k <= d; ++k)
          if (m.simplices[t2][k] == sx[i]) w += 1.0 / c.valence[sx[i]];
      }
      if (w != 0.0) qt.emplace_back(t2, t, -w / (d + 1.0));
    }
  }
  F.p.resize(c.n_free(), nt);
  F.p.setFromTriplets(pt.begin(), pt.end());
  F.q.resize(nt, nt);
  F.q.setFromTriplets(qt.begin(), qt.end());
  return F;
}

/// Continuous piecewise linears (dofs = all vertices).
inline PrecondFactors build_cont1(const SimplicialMesh& m, const MeshCombinatorics& c,
                                  std::shared_ptr<const OppositeOperator> BS, double s, double beta,
                                  const DofLayout* layout = nullptr) {
  detail::check_bs(c, *BS);
  if (!(beta > 0.0)) throw std::invalid_argument("precond: beta must be positive");
  const int nv = m.n_vertices(), d = m.dim;
  const double dd = d;
  PrecondFactors F;
  F.variant = Variant::cont1;
  F.s = s;
  F.beta = beta;
  F.n0 = nv;
  F.BS = std::move(BS);
  const Eigen::VectorXd sc = detail::scale_or_ones(layout, nv);
  F.D.resize(nv);
  F.BB.resize(nv);
  std::vector<Triplet> pt, qt;
  for (int v = 0; v < nv; ++v) {
    F.D[v] = sc[v] * c.patch_volume[v] / (dd + 1.0);
    F.BB[v] = beta * detail::bubble_power(c.patch_volume[v], s, d);
    if (!c.is_free(v)) {
      qt.emplace_back(v, v, 1.0 / (dd + 1.0));
      continue;
    }
    pt.emplace_back(c.free_index[v], v, 1.0);
    qt.emplace_back(v, v, dd / ((dd + 2.0) * (dd + 1.0)));
    std::vector<int> nb;
    for (int t : c.vertex_elements[v])
      for (int i = 0; i <= d; ++i)
        if (m.simplices[t][i] != v) nb.push_back(m.simplices[t][i]);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    for (int w : nb)
      qt.emplace_back(w, v, -patch_intersection(m, c, v, w) / ((dd + 2.0) * (dd + 1.0) * c.patch_volume[w]));
  }
  F.p.resize(c.n_free(), nv);
  F.p.setFromTriplets(pt.begin(), pt.end());
  F.q.resize(nv, nv);
  F.q.setFromTriplets(qt.begin(), qt.end());
  return F;
}

namespace detail {

inline PrecondFactors build_lowest(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                   std::shared_ptr<const OppositeOperator> BS, double s, double beta) {
  return L.kind == SpaceKind::disc ? build_disc0(m, c, std::move(BS), s, beta, &L)
                                   : build_cont1(m, c, std::move(BS), s, beta, &L);
}

/// R for the opp variants; `hat_mass` holds <phi_nu, xi> for all vertices (rows) and dofs (cols).
inline SpMat build_r(const MeshCombinatorics& c, const DofLayout& L, const SpMat& hat_mass,
                     const Eigen::VectorXd& D1) {
  const int n0 = L.n_lowest, n1 = L.n_higher();
  std::vector<Triplet> rt;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Mrow = hat_mass.transpose();
  for (int j = n0; j < L.n_dofs; ++j) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Mrow, j); it; ++it) {
      const int nu = static_cast<int>(it.col());
      if (!c.is_free(nu)) continue;
      if (L.kind == SpaceKind::disc) {
        for (int t : c.vertex_elements[nu]) rt.emplace_back(j - n0, t, -it.value() / (c.valence[nu] * D1[j - n0]));
      } else {
        rt.emplace_back(j - n0, nu, -it.value() / D1[j - n0]);
      }
    }
  }
  SpMat R(n1, n0);
  R.setFromTriplets(rt.begin(), rt.end());
  return R;
}

}  // namespace detail

/// Higher order via operator preconditioning (block formula with R). `hat_mass` = assemble_hat_mass.
inline PrecondFactors build_high_opp(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                     const SpMat& hat_mass, std::shared_ptr<const OppositeOperator> BS, double s,
                                     double beta) {
  if (L.n_higher() == 0) throw std::invalid_argument("build_high_opp: layout has no higher-order block");
  if (hat_mass.rows() != m.n_vertices() || hat_mass.cols() != L.n_dofs)
    throw std::invalid_argument("build_high_opp: mixed mass does not match the layouts");
  PrecondFactors F = detail::build_lowest(m, c, L, std::move(BS), s, beta);
  F.variant = L.kind == SpaceKind::disc ? Variant::disc_high_opp : Variant::cont_high_opp;
  const int n0 = L.n_lowest, n1 = L.n_higher();
  F.n1 = n1;
  Eigen::VectorXd D1(n1);
  F.C1.resize(n1);
  for (int j = 0; j < n1; ++j) {
    const double vol = support_volume(c, L, n0 + j);
    D1[j] = L.scale[n0 + j] * vol;
    F.C1[j] = beta * detail::bubble_power(vol, s, m.dim);
  }
  F.D.conservativeResize(n0 + n1);
  F.D.tail(n1) = D1;
  F.R = detail::build_r(c, L, hat_mass, D1);
  return F;
}

/// Higher order via subspace correction.
inline PrecondFactors build_high_ssc(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                     const SpMat& hat_mass, std::shared_ptr<const OppositeOperator> BS, double s,
                                     double beta) {
  if (L.n_higher() == 0) throw std::invalid_argument("build_high_ssc: layout has no higher-order block");
  if (hat_mass.rows() != m.n_vertices() || hat_mass.cols() != L.n_dofs)
    throw std::invalid_argument("build_high_ssc: mixed mass does not match the layouts");
  const int n0 = L.n_lowest, n1 = L.n_higher();
  if (L.kind == SpaceKind::disc) {
    for (int t = 0; t < m.n_simplices(); ++t) {
      Eigen::MatrixXd G = local_gram(m, L, t);
      const double scale = G.diagonal().cwiseAbs().maxCoeff();
      G.diagonal().setZero();
      if (G.cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument("build_high_ssc: disc basis is not locally L2-orthogonal");
    }
    PrecondFactors F = build_high_opp(m, c, L, hat_mass, std::move(BS), s, beta);
    F.variant = Variant::disc_high_ssc;
    F.R = SpMat(n1, n0);
    return F;
  }
  PrecondFactors F = detail::build_lowest(m, c, L, std::move(BS), s, beta);
  F.variant = Variant::cont_high_ssc;
  F.n1 = n1;
  // S(nu, xi) = -<xi, psi0_nu> / D0_nu = -<xi, phi_nu> / D0_nu for free nu, 0 on gamma
  std::vector<Triplet> st;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Mrow = hat_mass;
  for (int nu = 0; nu < m.n_vertices(); ++nu) {
    if (!c.is_free(nu)) continue;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Mrow, nu); it; ++it)
      if (it.col() >= n0) st.emplace_back(nu, it.col() - n0, -it.value() / F.D[nu]);
  }
  F.S.resize(n0, n1);
  F.S.setFromTriplets(st.begin(), st.end());
  // ||h^s xi||^2 = sum_T h_T^{2s} int_T xi^2
  Eigen::VectorXd nrm = Eigen::VectorXd::Zero(n1);
  for (int t = 0; t < m.n_simplices(); ++t) {
    const Eigen::MatrixXd G = local_gram(m, L, t);
    const double w = std::pow(c.h[t], 2.0 * s);
    for (int i = 0; i < L.local_size(); ++i) {
      const int dof = L.element_dofs[t][i];
      if (dof >= n0) nrm[dof - n0] += w * G(i, i);
    }
  }
  F.C1 = nrm.cwiseInverse();
  return F;
}

/// G = diag(A)^-1.
inline PrecondFactors build_jacobi(const Eigen::MatrixXd& A) {
  PrecondFactors F;
  F.variant = Variant::jacobi;
  const Eigen::VectorXd d = A.diagonal();
  if ((d.array() <= 0.0).any()) throw std::invalid_argument("build_jacobi: nonpositive diagonal");
  F.jacobi = d.cwiseInverse();
  F.n0 = static_cast<int>(d.size());
  return F;
}

}  // namespace opprecond
