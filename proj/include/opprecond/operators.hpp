#pragma once

#include "opprecond/discretization.hpp"
#include "opprecond/mesh.hpp"
#include "opprecond/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace opprecond {

/// The opposite-order matrix B^S on S^{0,1}_{T,0}, either dense (curve BEM) or sparse (FEM).
struct OppositeOperator {
  Eigen::MatrixXd dense;
  SpMat sparse;
  bool is_sparse = false;

  Eigen::Index rows() const { return is_sparse ? sparse.rows() : dense.rows(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return is_sparse ? Eigen::VectorXd(sparse * x) : Eigen::VectorXd(dense * x); }
  Eigen::MatrixXd to_dense() const { return is_sparse ? Eigen::MatrixXd(sparse) : dense; }
  std::size_t nonzeros() const { return is_sparse ? static_cast<std::size_t>(sparse.nonZeros()) : static_cast<std::size_t>(dense.size()); }

  static OppositeOperator from_dense(Eigen::MatrixXd m) {
    OppositeOperator o;
    o.dense = std::move(m);
    return o;
  }
  static OppositeOperator from_sparse(SpMat m) {
    OppositeOperator o;
    o.sparse = std::move(m);
    o.is_sparse = true;
    return o;
  }
};

namespace detail {

inline double harmonic(int n) {
  double h = 0.0;
  for (int k = 1; k <= n; ++k) h += 1.0 / k;
  return h;
}

/// int_0^1 int_0^u log(u - v) u^a v^b dv du
inline double self_log_half(int a, int b) {
  const double n = a + b + 2;
  return -1.0 / (n * n * (b + 1)) - harmonic(b + 1) / (n * (b + 1));
}

/// int_0^1 int_0^1 log|u - v| u^a v^b du dv
inline double self_log_moment(int a, int b) { return self_log_half(a, b) + self_log_half(b, a); }

inline double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const Point e = b - a;
  const double l2 = e.squaredNorm();
  const double t = l2 > 0 ? std::clamp((p - a).dot(e) / l2, 0.0, 1.0) : 0.0;
  return (p - (a + t * e)).norm();
}

/// Distance of two non-intersecting segments.
inline double segment_distance(const Point& a0, const Point& a1, const Point& b0, const Point& b1) {
  return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                   point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

/// K(a,b) += int_{u0}^{u1} int_{v0}^{v1} log|x(u) - y(v)| u^a v^b, x(u) = x0 + u (x1 - x0).
/// Sub-panels closer than their size are split recursively.
inline void far_log_moments(const Point& x0, const Point& x1, double u0, double u1, const Point& y0, const Point& y1,
                            double v0, double v1, int L, Eigen::MatrixXd& K, int depth = 0) {
  const Point ex = x1 - x0, ey = y1 - y0;
  const Point a0 = x0 + u0 * ex, a1 = x0 + u1 * ex, b0 = y0 + v0 * ey, b1 = y0 + v1 * ey;
  const double sa = (a1 - a0).norm(), sb = (b1 - b0).norm();
  const double dist = segment_distance(a0, a1, b0, b1);
  const double size = std::max(sa, sb);
  if (dist < size && depth < 60) {
    if (sa >= sb) {
      const double um = 0.5 * (u0 + u1);
      far_log_moments(x0, x1, u0, um, y0, y1, v0, v1, L, K, depth + 1);
      far_log_moments(x0, x1, um, u1, y0, y1, v0, v1, L, K, depth + 1);
    } else {
      const double vm = 0.5 * (v0 + v1);
      far_log_moments(x0, x1, u0, u1, y0, y1, v0, vm, L, K, depth + 1);
      far_log_moments(x0, x1, u0, u1, y0, y1, vm, v1, L, K, depth + 1);
    }
    return;
  }
  static const LineRule g8 = gauss_legendre(8);
  static const LineRule g12 = gauss_legendre(12);
  const LineRule& g = dist >= 2.0 * size ? g8 : g12;
  const int n = static_cast<int>(g.points.size());
  std::vector<double> pu(L + 1), pv(L + 1);
  for (int i = 0; i < n; ++i) {
    const double u = u0 + (u1 - u0) * g.points[i];
    const Point x = x0 + u * ex;
    pu[0] = 1.0;
    for (int a = 1; a <= L; ++a) pu[a] = pu[a - 1] * u;
    for (int j = 0; j < n; ++j) {
      const double v = v0 + (v1 - v0) * g.points[j];
      const double w = g.weights[i] * g.weights[j] * (u1 - u0) * (v1 - v0) * std::log((x - (y0 + v * ey)).norm());
      pv[0] = 1.0;
      for (int b = 1; b <= L; ++b) pv[b] = pv[b - 1] * v;
      for (int a = 0; a <= L; ++a)
        for (int b = 0; b <= L; ++b) K(a, b) += w * pu[a] * pv[b];
    }
  }
}

/// Moments for panels sharing the vertex P: panel 1 is P + s A, panel 2 is P + t B (s, t in [0,1]).
/// Ks(a,b) = int int log|s A - t B| s^a t^b, via a Duffy split at the shared vertex; the log of the
/// radial variable is integrated exactly, the remaining smooth 1D integrals by 32-point Gauss.
inline Eigen::MatrixXd corner_log_moments(const Point& A, const Point& B, int L) {
  static const LineRule g = gauss_legendre(32);
  Eigen::MatrixXd K(L + 1, L + 1);
  std::vector<double> fa(L + 1, 0.0), fb(L + 1, 0.0);  // int log|A - w B| w^b, int log|w A - B| w^a
  for (std::size_t q = 0; q < g.points.size(); ++q) {
    const double w = g.points[q];
    const double l1 = std::log((A - w * B).norm());
    const double l2 = std::log((w * A - B).norm());
    double p = 1.0;
    for (int k = 0; k <= L; ++k) {
      fa[k] += g.weights[q] * l1 * p;
      fb[k] += g.weights[q] * l2 * p;
      p *= w;
    }
  }
  for (int a = 0; a <= L; ++a)
    for (int b = 0; b <= L; ++b) {
      const double n = a + b + 2;
      K(a, b) = -1.0 / (n * n * (b + 1)) + fa[b] / n - 1.0 / (n * n * (a + 1)) + fb[a] / n;
    }
  return K;
}

/// Change of variables u = 1 - s on monomials: row a holds the coefficients of (1-s)^a in s^k.
inline Eigen::MatrixXd flip_matrix(int L, bool flip) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(L + 1, L + 1);
  for (int a = 0; a <= L; ++a) {
    if (!flip) {
      F(a, a) = 1.0;
    } else {
      for (int k = 0; k <= a; ++k) F(a, k) = binomial(a, k) * ((k % 2) ? -1.0 : 1.0);
    }
  }
  return F;
}

/// int_0^1 int_0^1 log|x(u) - y(v)| u^a v^b du dv for panels T and T2 of a d = 1 mesh.
inline Eigen::MatrixXd panel_log_moments(const SimplicialMesh& m, int T, int T2, int L) {
  const auto& s = m.simplices[T];
  const auto& r = m.simplices[T2];
  const Point &x0 = m.vertices[s[0]], &x1 = m.vertices[s[1]];
  const Point &y0 = m.vertices[r[0]], &y1 = m.vertices[r[1]];
  if (T == T2) {
    const double lh = std::log((x1 - x0).norm());
    Eigen::MatrixXd K(L + 1, L + 1);
    for (int a = 0; a <= L; ++a)
      for (int b = 0; b <= L; ++b) K(a, b) = lh / ((a + 1.0) * (b + 1.0)) + self_log_moment(a, b);
    return K;
  }
  int shared = 0, us = -1, vs = -1;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (s[i] == r[j]) {
        ++shared;
        us = i;
        vs = j;
      }
  if (shared > 1) throw std::invalid_argument("single layer: panels sharing both vertices");
  if (shared == 1) {
    const Point& P = m.vertices[s[us]];
    const Point A = m.vertices[s[1 - us]] - P;
    const Point B = m.vertices[r[1 - vs]] - P;
    const Eigen::MatrixXd Ks = corner_log_moments(A, B, L);
    const Eigen::MatrixXd Fu = flip_matrix(L, us == 1), Fv = flip_matrix(L, vs == 1);
    return Fu * Ks * Fv.transpose();
  }
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(L + 1, L + 1);
  far_log_moments(x0, x1, 0.0, 1.0, y0, y1, 0.0, 1.0, L, K);
  return K;
}

/// Transfer E with (disc coefficients) = E * (layout coefficients), for a disc layout `D` of the same
/// degree on the same mesh. Exact since every local function is a polynomial of that degree.
inline SpMat transfer_to_disc(const SimplicialMesh& m, const DofLayout& L, const DofLayout& D) {
  const SimplexRule rule = simplex_rule(m.dim, 2 * L.degree);
  const int loc = L.local_size();
  std::vector<Triplet> trip;
  std::vector<double> f(loc), xi(loc);
  for (int t = 0; t < m.n_simplices(); ++t) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(loc, loc);
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      L.eval(t, rule.bary[q], f.data());
      D.eval(t, rule.bary[q], xi.data());
      for (int i = 0; i < loc; ++i)
        for (int j = 0; j < loc; ++j) E(i, j) += rule.weights[q] * xi[i] * f[j];
    }
    for (int i = 0; i < loc; ++i)
      for (int j = 0; j < loc; ++j)
        if (E(i, j) != 0.0) trip.emplace_back(D.element_dofs[t][i], L.element_dofs[t][j], E(i, j));
  }
  SpMat E(D.n_dofs, L.n_dofs);
  E.setFromTriplets(trip.begin(), trip.end());
  return E;
}

}  // namespace detail

/// Galerkin matrix of the single layer operator with kernel -(1/2pi) log|x-y| on a closed curve
/// made of straight panels. Continuous layouts are mapped through the equivalent disc basis.
inline Eigen::MatrixXd assemble_single_layer_curve(const SimplicialMesh& m, const DofLayout& L) {
  if (m.dim != 1 || m.embed_dim < 2) throw std::invalid_argument("single layer: needs a curve in the plane");
  if (!m.closed) throw std::invalid_argument("single layer: open curves are not supported");
  if (m.n_simplices() < 3) throw std::invalid_argument("single layer: need at least 3 panels");
  if (L.kind == SpaceKind::cont) {
    DofLayout D = dof_layout(m, SpaceKind::disc, L.degree);
    const Eigen::MatrixXd V = assemble_single_layer_curve(m, D);
    const SpMat E = detail::transfer_to_disc(m, L, D);
    Eigen::MatrixXd A = Eigen::MatrixXd(E.transpose() * V * E);
    return 0.5 * (A + A.transpose());
  }
  const int nt = m.n_simplices();
  const int deg = L.degree;
  const int loc = L.local_size();
  const Eigen::MatrixXd C = L.coeffs;  // rows: local functions, cols: u^a
  std::vector<double> h(nt);
  for (int t = 0; t < nt; ++t) h[t] = m.volume(t);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(L.n_dofs, L.n_dofs);
  const double c0 = -1.0 / (2.0 * std::numbers::pi);
  for (int t = 0; t < nt; ++t)
    for (int t2 = t; t2 < nt; ++t2) {
      const Eigen::MatrixXd K = detail::panel_log_moments(m, t, t2, deg);
      const Eigen::MatrixXd blk = c0 * h[t] * h[t2] * (C * K * C.transpose());
      for (int i = 0; i < loc; ++i)
        for (int j = 0; j < loc; ++j) {
          const int di = L.element_dofs[t][i], dj = L.element_dofs[t2][j];
          const double v = blk(i, j) * L.scale[di] * L.scale[dj];
          A(di, dj) = v;
          A(dj, di) = v;
        }
    }
  return A;
}

/// Arclength derivative of the hats: G(T, v) = +-1/|T| for the end/start vertex of panel T.
inline SpMat hat_derivative_matrix(const SimplicialMesh& m) {
  std::vector<int> starts(m.n_vertices(), 0), ends(m.n_vertices(), 0);
  std::vector<Triplet> trip;
  for (int t = 0; t < m.n_simplices(); ++t) {
    const auto& s = m.simplices[t];
    const double h = m.volume(t);
    trip.emplace_back(t, s[0], -1.0 / h);
    trip.emplace_back(t, s[1], 1.0 / h);
    ++starts[s[0]];
    ++ends[s[1]];
  }
  for (int v = 0; v < m.n_vertices(); ++v)
    if (starts[v] != 1 || ends[v] != 1) throw std::invalid_argument("hypersingular: inconsistent panel orientation");
  SpMat G(m.n_simplices(), m.n_vertices());
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

/// Hypersingular operator on continuous piecewise linears via <W u, v> = <V u', v'>.
inline Eigen::MatrixXd assemble_hypersingular_curve(const SimplicialMesh& m) {
  const DofLayout D0 = dof_layout(m, SpaceKind::disc, 0);
  const Eigen::MatrixXd V0 = assemble_single_layer_curve(m, D0);
  const SpMat G = hat_derivative_matrix(m);
  Eigen::MatrixXd B = Eigen::MatrixXd(G.transpose() * V0 * G);
  return 0.5 * (B + B.transpose());
}

/// B^S = Btilde + alpha m m^T with m_nu = <phi_nu, 1>.
inline Eigen::MatrixXd adapt_hypersingular(const Eigen::MatrixXd& Bt, double alpha, const Eigen::VectorXd& mass_with_one) {
  if (!(alpha > 0.0)) throw std::invalid_argument("adapt_hypersingular: alpha must be positive");
  return Bt + alpha * mass_with_one * mass_with_one.transpose();
}

/// <phi_nu, 1> = |omega(nu)| / (d+1) for the free vertices.
inline Eigen::VectorXd hat_integrals(const MeshCombinatorics& c) {
  Eigen::VectorXd v(c.n_free());
  for (int k = 0; k < c.n_free(); ++k) v[k] = c.patch_volume[c.free_vertices[k]] / (c.dim + 1);
  return v;
}

/// stiff_w * (grad, grad) + mass_w * (., .) on continuous piecewise linears at the free vertices.
inline SpMat assemble_p1(const SimplicialMesh& m, const MeshCombinatorics& c, double stiff_w, double mass_w) {
  const int d = m.dim;
  std::vector<Triplet> trip;
  Eigen::MatrixXd Dh = Eigen::MatrixXd::Zero(d, d + 1);
  for (int i = 0; i < d; ++i) {
    Dh(i, 0) = -1.0;
    Dh(i, i + 1) = 1.0;
  }
  for (int t = 0; t < m.n_simplices(); ++t) {
    const auto& s = m.simplices[t];
    Eigen::MatrixXd J(3, d);
    for (int i = 0; i < d; ++i) J.col(i) = m.vertices[s[i + 1]] - m.vertices[s[0]];
    const Eigen::MatrixXd Gm = J.transpose() * J;
    const double vol = c.volume[t];
    const Eigen::MatrixXd K = vol * Dh.transpose() * Gm.inverse() * Dh;
    for (int a = 0; a <= d; ++a) {
      const int ia = c.free_index[s[a]];
      if (ia < 0) continue;
      for (int b = 0; b <= d; ++b) {
        const int ib = c.free_index[s[b]];
        if (ib < 0) continue;
        const double mass = vol * (a == b ? 2.0 : 1.0) / ((d + 1.0) * (d + 2.0));
        trip.emplace_back(ia, ib, stiff_w * K(a, b) + mass_w * mass);
      }
    }
  }
  SpMat A(c.n_free(), c.n_free());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

namespace detail {

/// Barycentric coordinates of x with respect to simplex t of a flat mesh.
inline std::array<double, 3> barycentric_of(const SimplicialMesh& m, int t, const Point& x) {
  const auto& s = m.simplices[t];
  std::array<double, 3> b{0, 0, 0};
  if (m.dim == 1) {
    const Point e = m.vertices[s[1]] - m.vertices[s[0]];
    b[1] = (x - m.vertices[s[0]]).dot(e) / e.squaredNorm();
    b[0] = 1.0 - b[1];
    return b;
  }
  Eigen::Matrix<double, 3, 2> J;
  J.col(0) = m.vertices[s[1]] - m.vertices[s[0]];
  J.col(1) = m.vertices[s[2]] - m.vertices[s[0]];
  const Eigen::Vector2d l = (J.transpose() * J).ldlt().solve(J.transpose() * (x - m.vertices[s[0]]));
  b[1] = l[0];
  b[2] = l[1];
  b[0] = 1.0 - l[0] - l[1];
  return b;
}

}  // namespace detail

/// A_T = M_c^T K_f^{-1} M_c with K_f the stiffness + mass matrix on the `depth`-times uniformly
/// refined mesh (Dirichlet on gamma) and M_c the fine-hat x coarse-trial mass matrix.
inline Eigen::MatrixXd order2_oracle(const SimplicialMesh& m, const DofLayout& L, int depth) {
  SimplicialMesh fine = m;
  std::vector<int> to_coarse(m.n_simplices());
  for (int t = 0; t < m.n_simplices(); ++t) to_coarse[t] = t;
  for (int k = 0; k < depth; ++k) {
    std::vector<int> parent;
    fine = uniform_refine(fine, &parent);
    std::vector<int> next(parent.size());
    for (std::size_t i = 0; i < parent.size(); ++i) next[i] = to_coarse[parent[i]];
    to_coarse = std::move(next);
  }
  const MeshCombinatorics fc = combinatorics(fine);
  const SpMat K = assemble_p1(fine, fc, 1.0, 1.0);
  const SimplexRule rule = simplex_rule(m.dim, L.degree + 1);
  const int loc = L.local_size();
  std::vector<Triplet> trip;
  std::vector<double> vals(loc);
  for (int tf = 0; tf < fine.n_simplices(); ++tf) {
    const int T = to_coarse[tf];
    const double vol = fc.volume[tf];
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const Point x = fine.point(tf, rule.bary[q]);
      L.eval(T, detail::barycentric_of(m, T, x), vals.data());
      for (int a = 0; a <= m.dim; ++a) {
        const int fa = fc.free_index[fine.simplices[tf][a]];
        if (fa < 0) continue;
        for (int i = 0; i < loc; ++i)
          trip.emplace_back(fa, L.element_dofs[T][i], rule.weights[q] * vol * rule.bary[q][a] * vals[i]);
      }
    }
  }
  SpMat Mc(fc.n_free(), L.n_dofs);
  Mc.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SpMat> solver(K);
  if (solver.info() != Eigen::Success) throw std::runtime_error("order2 oracle: factorization failed");
  Eigen::MatrixXd A(L.n_dofs, L.n_dofs);
  const int block = 32;
  for (int c0 = 0; c0 < L.n_dofs; c0 += block) {
    const int nc = std::min(block, L.n_dofs - c0);
    const Eigen::MatrixXd rhs = Eigen::MatrixXd(Mc.middleCols(c0, nc));
    const Eigen::MatrixXd X = solver.solve(rhs);
    A.middleCols(c0, nc) = Mc.transpose() * X;
  }
  return 0.5 * (A + A.transpose());
}

enum class Backend { sl_curve, order2, identity };

inline Backend parse_backend(const std::string& s) {
  if (s == "sl-curve" || s == "minus1_curve") return Backend::sl_curve;
  if (s == "order2" || s == "minus2_fem_oracle") return Backend::order2;
  if (s == "identity" || s == "zero_identity") return Backend::identity;
  throw std::invalid_argument("unknown backend '" + s + "'");
}

inline std::string backend_name(Backend b) {
  switch (b) {
    case Backend::sl_curve: return "sl-curve";
    case Backend::order2: return "order2";
    case Backend::identity: return "identity";
  }
  return "?";
}

/// Sobolev index of the trial space's dual for each backend.
inline double backend_sobolev_index(Backend b) {
  switch (b) {
    case Backend::sl_curve: return 0.5;
    case Backend::order2: return 1.0;
    case Backend::identity: return 0.0;
  }
  return 0.0;
}

struct BackendOptions {
  double alpha = 0.05;
  int oracle_depth = 4;
  bool oracle_guard = true;
};

struct OperatorPair {
  Eigen::MatrixXd A;
  OppositeOperator BS;
  double s = 0.0;
  double guard_change = 0.0;  // order2: max |A_k - A_{k-1}| / max |A_k|
};

inline double relative_change(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff();
}

/// order -2 pair: B^S is stiffness + mass on S^{0,1}_{T,0}, A_T from the refined-mesh oracle.
inline OperatorPair assemble_order2_pair(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                         int depth, bool guard = true) {
  if (depth < 2) throw std::invalid_argument("order2: oracle depth must be >= 2");
  if (m.embed_dim != m.dim) throw std::invalid_argument("order2: needs a flat domain");
  OperatorPair p;
  p.s = 1.0;
  p.BS = OppositeOperator::from_sparse(assemble_p1(m, c, 1.0, 1.0));
  p.A = order2_oracle(m, L, depth);
  if (guard) p.guard_change = relative_change(p.A, order2_oracle(m, L, depth - 1));
  return p;
}

/// s = 0: A_T is the trial mass matrix, B^S the mass matrix on S^{0,1}_{T,0}.
inline OperatorPair assemble_identity_pair(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L) {
  OperatorPair p;
  p.s = 0.0;
  p.A = assemble_trial_mass(m, L);
  p.BS = OppositeOperator::from_sparse(assemble_p1(m, c, 0.0, 1.0));
  return p;
}

inline OperatorPair assemble_sl_curve_pair(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                           double alpha) {
  OperatorPair p;
  p.s = 0.5;
  p.A = assemble_single_layer_curve(m, L);
  p.BS = OppositeOperator::from_dense(adapt_hypersingular(assemble_hypersingular_curve(m), alpha, hat_integrals(c)));
  return p;
}

inline OperatorPair assemble_pair(Backend b, const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                  const BackendOptions& opt = {}) {
  switch (b) {
    case Backend::sl_curve: return assemble_sl_curve_pair(m, c, L, opt.alpha);
    case Backend::order2: return assemble_order2_pair(m, c, L, opt.oracle_depth, opt.oracle_guard);
    case Backend::identity: return assemble_identity_pair(m, c, L);
  }
  throw std::invalid_argument("assemble_pair: unknown backend");
}

// ---------------------------------------------------------------------------------------------
// Mesh-dependent inner product on charted curves: on every chi^{-1}(T) the Jacobian is frozen to
// its panel average w_T = |T| / |chi^{-1}(T)|.

struct MeshInnerProduct {
  std::vector<double> weight;        // w_T
  std::vector<double> param_length;  // |chi^{-1}(T)|
  std::vector<double> measure;       // |T| on the curve
};

inline MeshInnerProduct mesh_inner_product(const SimplicialMesh& m) {
  if (m.dim != 1 || !m.chart || m.params.size() != static_cast<std::size_t>(m.n_simplices()))
    throw std::invalid_argument("mesh_inner_product: needs a charted curve");
  static const LineRule g = gauss_legendre(20);
  MeshInnerProduct ip;
  for (int t = 0; t < m.n_simplices(); ++t) {
    const double t0 = m.params[t][0], t1 = m.params[t][1];
    const double len = t1 - t0;
    double meas = 0.0;
    for (std::size_t q = 0; q < g.points.size(); ++q) meas += g.weights[q] * m.chart->speed(t0 + len * g.points[q]);
    meas *= len;
    const double w = meas / len;
    if (!(w > 0.0)) throw std::runtime_error("mesh_inner_product: degenerate chart");
    ip.weight.push_back(w);
    ip.param_length.push_back(len);
    ip.measure.push_back(meas);
  }
  return ip;
}

/// Gram matrices of a disc layout lifted through the chart (xi o chi affine in the parameter):
/// `frozen` uses the frozen Jacobian, otherwise the true L2(Gamma) product.
inline Eigen::MatrixXd chart_gram(const SimplicialMesh& m, const DofLayout& L, const MeshInnerProduct& ip, bool frozen) {
  const LineRule g = gauss_legendre(L.degree + 20);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(L.n_dofs, L.n_dofs);
  const int loc = L.local_size();
  std::vector<double> v(loc);
  for (int t = 0; t < m.n_simplices(); ++t) {
    const double t0 = m.params[t][0], len = ip.param_length[t];
    for (std::size_t q = 0; q < g.points.size(); ++q) {
      const double u = g.points[q];
      L.eval(t, {1.0 - u, u, 0.0}, v.data());
      const double jac = frozen ? ip.weight[t] : m.chart->speed(t0 + len * u);
      const double w = g.weights[q] * len * jac;
      for (int i = 0; i < loc; ++i)
        for (int j = 0; j < loc; ++j) G(L.element_dofs[t][i], L.element_dofs[t][j]) += w * v[i] * v[j];
    }
  }
  return G;
}

}  // namespace opprecond
