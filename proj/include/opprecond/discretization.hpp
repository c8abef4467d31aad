#pragma once

#include "opprecond/mesh.hpp"
#include "opprecond/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace opprecond {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

inline double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

inline double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

/// Exponents (alpha_1..alpha_d) of the monomials lambda_1^a1 ... lambda_d^ad of total degree <= l,
/// ordered by degree, then lexicographically descending in alpha_1.
inline std::vector<std::array<int, 2>> monomial_exponents(int dim, int degree) {
  std::vector<std::array<int, 2>> e;
  for (int k = 0; k <= degree; ++k) {
    if (dim == 1) {
      e.push_back({k, 0});
    } else {
      for (int a = k; a >= 0; --a) e.push_back({a, k - a});
    }
  }
  return e;
}

/// int_T lambda^alpha / |T| for barycentric exponents alpha (over all d+1 coordinates).
inline double reference_moment(int dim, const std::array<int, 3>& alpha) {
  int total = 0;
  double num = factorial(dim);
  for (int i = 0; i <= dim; ++i) {
    total += alpha[i];
    num *= factorial(alpha[i]);
  }
  return num / factorial(dim + total);
}

inline double eval_monomial(const std::array<int, 2>& e, const std::array<double, 3>& bary) {
  return std::pow(bary[1], e[0]) * std::pow(bary[2], e[1]);
}

/// Coefficients C (rows: basis functions, cols: monomials from monomial_exponents) of the
/// L2(T)-orthogonal basis with xi_0 = 1 and ||xi_i||^2 = |T|. Independent of T up to the
/// degeneracy check, since the Gram matrix of barycentric monomials scales with |T|.
inline Eigen::MatrixXd local_orthonormal_basis(int dim, int degree, double volume = 1.0) {
  if (degree < 0) throw std::invalid_argument("local_orthonormal_basis: degree must be >= 0");
  if (!(volume > 0.0)) throw std::invalid_argument("local_orthonormal_basis: degenerate simplex");
  const auto ex = monomial_exponents(dim, degree);
  const int n = static_cast<int>(ex.size());
  Eigen::MatrixXd G(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      G(a, b) = reference_moment(dim, {0, ex[a][0] + ex[b][0], ex[a][1] + ex[b][1]});
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  const Eigen::MatrixXd L = llt.matrixL();
  return L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
}

inline Eigen::MatrixXd local_orthonormal_basis(const SimplicialMesh& m, int t, int degree) {
  return local_orthonormal_basis(m.dim, degree, m.volume(t));
}

enum class SpaceKind { disc, cont };

/// Number of polynomials of degree <= l in d variables.
inline int poly_dim(int dim, int degree) { return static_cast<int>(std::lround(binomial(dim + degree, degree))); }

/// A local shape function of a continuous layout on one element.
struct ContShape {
  enum Type { vertex, edge, interior } type = vertex;
  int a = 0, b = 0;  // local vertex indices (edge: oriented by ascending global index)
  int k = 0;         // edge power, or interior exponent of lambda_1
  int j = 0;         // interior exponent of lambda_2
};

/// Enumeration of trial basis functions.
///
/// disc, degree l: dof T (0 <= T < #T) is xi_{T,0} = 1|_T; dof #T + T*m + (i-1) is xi_{T,i}, i >= 1.
/// cont, degree l: dof v is the hat of vertex v; then l-1 functions per edge (edges in order of first
/// appearance, scanning simplices in order); then interior functions per triangle for l >= 3.
/// The lowest-order block always comes first.
struct DofLayout {
  SpaceKind kind = SpaceKind::disc;
  int degree = 0;
  int dim = 1;
  int n_dofs = 0;
  int n_lowest = 0;
  std::vector<std::vector<int>> element_dofs;  // per element, global dof of each local function
  std::vector<std::vector<int>> support;       // per dof, ascending element list
  Eigen::VectorXd scale;                       // per-dof multiplier of the basis function
  Eigen::MatrixXd coeffs;                      // disc: local orthonormal basis coefficients
  std::vector<std::array<int, 2>> exps;        // disc: monomial exponents
  std::vector<std::vector<ContShape>> shapes;  // cont: per element local shapes
  bool orthogonal = true;                      // disc: basis is locally L2-orthogonal

  int local_size() const { return poly_dim(dim, degree); }
  bool is_lowest(int dof) const { return dof < n_lowest; }
  int n_higher() const { return n_dofs - n_lowest; }

  /// Values of the element's local functions (scaled) at a barycentric point.
  void eval(int t, const std::array<double, 3>& bary, double* out) const {
    const int n = local_size();
    if (kind == SpaceKind::disc) {
      double mono[32];
      for (std::size_t a = 0; a < exps.size(); ++a) mono[a] = eval_monomial(exps[a], bary);
      for (int i = 0; i < n; ++i) {
        double v = 0.0;
        for (std::size_t a = 0; a < exps.size(); ++a) v += coeffs(i, a) * mono[a];
        out[i] = v;
      }
    } else {
      const auto& sh = shapes[t];
      for (int i = 0; i < n; ++i) {
        const ContShape& s = sh[i];
        double v;
        switch (s.type) {
          case ContShape::vertex: v = bary[s.a]; break;
          case ContShape::edge: v = bary[s.a] * bary[s.b] * std::pow(bary[s.b] - bary[s.a], s.k); break;
          default: v = bary[0] * bary[1] * bary[2] * std::pow(bary[1], s.k) * std::pow(bary[2], s.j); break;
        }
        out[i] = v;
      }
    }
    const auto& dofs = element_dofs[t];
    for (int i = 0; i < n; ++i) out[i] *= scale[dofs[i]];
  }
};

/// Build the dof layout. `orthogonal = false` (disc only) uses raw barycentric monomials.
inline DofLayout dof_layout(const SimplicialMesh& m, SpaceKind kind, int degree, bool orthogonal = true) {
  if (degree < 0) throw std::invalid_argument("dof_layout: degree must be >= 0");
  if (kind == SpaceKind::cont && degree < 1)
    throw std::invalid_argument("dof_layout: continuous spaces need degree >= 1");
  if (m.dim == 2 && kind == SpaceKind::cont && degree > 3)
    throw std::invalid_argument("dof_layout: continuous degree > 3 not supported for d = 2");
  if (poly_dim(m.dim, degree) > 32) throw std::invalid_argument("dof_layout: degree too large");
  DofLayout L;
  L.kind = kind;
  L.degree = degree;
  L.dim = m.dim;
  const int nt = m.n_simplices();
  const int loc = L.local_size();
  L.element_dofs.assign(nt, std::vector<int>(loc, -1));
  if (kind == SpaceKind::disc) {
    L.exps = monomial_exponents(m.dim, degree);
    L.orthogonal = orthogonal;
    if (orthogonal) {
      L.coeffs = local_orthonormal_basis(m.dim, degree);
    } else {
      L.coeffs = Eigen::MatrixXd::Identity(loc, loc);
    }
    const int mm = loc - 1;
    L.n_lowest = nt;
    L.n_dofs = nt * loc;
    for (int t = 0; t < nt; ++t) {
      L.element_dofs[t][0] = t;
      for (int i = 1; i < loc; ++i) L.element_dofs[t][i] = nt + t * mm + (i - 1);
    }
  } else {
    const int nv = m.n_vertices();
    L.n_lowest = nv;
    int next = nv;
    std::map<std::array<int, 2>, int> edge_first;  // sorted edge -> first dof
    L.shapes.assign(nt, {});
    std::vector<std::array<int, 2>> local_edges = m.dim == 1 ? std::vector<std::array<int, 2>>{{0, 1}}
                                                             : std::vector<std::array<int, 2>>{{0, 1}, {1, 2}, {0, 2}};
    // edges first (over all elements), interiors after
    std::vector<std::vector<std::pair<int, int>>> edge_dof_base(nt);
    for (int t = 0; t < nt; ++t) {
      const auto& s = m.simplices[t];
      for (const auto& le : local_edges) {
        const auto key = detail::sorted_edge(s[le[0]], s[le[1]]);
        auto it = edge_first.find(key);
        if (it == edge_first.end()) {
          it = edge_first.emplace(key, next).first;
          next += degree - 1;
        }
        edge_dof_base[t].push_back({it->second, 0});
      }
    }
    std::vector<int> interior_base(nt, -1);
    const int n_int = (m.dim == 2 && degree >= 3) ? poly_dim(2, degree - 3) : 0;
    for (int t = 0; t < nt; ++t) {
      if (n_int > 0) {
        interior_base[t] = next;
        next += n_int;
      }
    }
    L.n_dofs = next;
    for (int t = 0; t < nt; ++t) {
      const auto& s = m.simplices[t];
      int li = 0;
      for (int i = 0; i <= m.dim; ++i) {
        L.shapes[t].push_back({ContShape::vertex, i, i, 0, 0});
        L.element_dofs[t][li++] = s[i];
      }
      for (std::size_t e = 0; e < local_edges.size(); ++e) {
        int a = local_edges[e][0], b = local_edges[e][1];
        if (s[a] > s[b]) std::swap(a, b);
        for (int k = 0; k <= degree - 2; ++k) {
          L.shapes[t].push_back({ContShape::edge, a, b, k, 0});
          L.element_dofs[t][li++] = edge_dof_base[t][e].first + k;
        }
      }
      if (n_int > 0) {
        int c = 0;
        for (int tot = 0; tot <= degree - 3; ++tot)
          for (int i = tot; i >= 0; --i) {
            L.shapes[t].push_back({ContShape::interior, 0, 0, i, tot - i});
            L.element_dofs[t][li++] = interior_base[t] + c++;
          }
      }
      if (li != loc) throw std::logic_error("dof_layout: local function count mismatch");
    }
  }
  L.support.assign(L.n_dofs, {});
  for (int t = 0; t < nt; ++t)
    for (int d : L.element_dofs[t]) L.support[d].push_back(t);
  for (auto& s : L.support) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  L.scale = Eigen::VectorXd::Ones(L.n_dofs);
  return L;
}

inline double support_volume(const MeshCombinatorics& c, const DofLayout& L, int dof) {
  double s = 0.0;
  for (int t : L.support[dof]) s += c.volume[t];
  return s;
}

/// <phi_nu, xi_j> for every vertex nu (rows, vertex index) and trial dof j (cols).
inline SpMat assemble_hat_mass(const SimplicialMesh& m, const DofLayout& L) {
  const SimplexRule rule = simplex_rule(m.dim, L.degree + 1);
  const int loc = L.local_size();
  std::vector<Triplet> trip;
  std::vector<double> vals(loc);
  for (int t = 0; t < m.n_simplices(); ++t) {
    const double vol = m.volume(t);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(m.dim + 1, loc);
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      L.eval(t, rule.bary[q], vals.data());
      for (int a = 0; a <= m.dim; ++a)
        for (int i = 0; i < loc; ++i) local(a, i) += rule.weights[q] * vol * rule.bary[q][a] * vals[i];
    }
    for (int a = 0; a <= m.dim; ++a)
      for (int i = 0; i < loc; ++i) trip.emplace_back(m.simplices[t][a], L.element_dofs[t][i], local(a, i));
  }
  SpMat M(m.n_vertices(), L.n_dofs);
  M.setFromTriplets(trip.begin(), trip.end());
  M.prune(0.0);
  return M;
}

/// Mixed mass <phi_nu, xi_j> with rows restricted to the free vertices N^0 (in free-vertex order).
inline SpMat assemble_mixed_mass(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L) {
  if (static_cast<int>(c.volume.size()) != m.n_simplices() || L.element_dofs.size() != c.volume.size())
    throw std::invalid_argument("assemble_mixed_mass: mesh mismatch");
  const SpMat all = assemble_hat_mass(m, L);
  std::vector<Triplet> trip;
  for (int k = 0; k < all.outerSize(); ++k)
    for (SpMat::InnerIterator it(all, k); it; ++it)
      if (c.is_free(static_cast<int>(it.row()))) trip.emplace_back(c.free_index[it.row()], it.col(), it.value());
  SpMat M(c.n_free(), L.n_dofs);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

/// Local Gram matrix <xi_i, xi_j>_{L2(T)} of the element's local functions.
inline Eigen::MatrixXd local_gram(const SimplicialMesh& m, const DofLayout& L, int t) {
  const SimplexRule rule = simplex_rule(m.dim, 2 * L.degree);
  const int loc = L.local_size();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(loc, loc);
  Eigen::VectorXd v(loc);
  const double vol = m.volume(t);
  for (std::size_t q = 0; q < rule.weights.size(); ++q) {
    L.eval(t, rule.bary[q], v.data());
    G += rule.weights[q] * vol * v * v.transpose();
  }
  return G;
}

/// Trial mass matrix <xi_i, xi_j>.
inline Eigen::MatrixXd assemble_trial_mass(const SimplicialMesh& m, const DofLayout& L) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(L.n_dofs, L.n_dofs);
  for (int t = 0; t < m.n_simplices(); ++t) {
    const Eigen::MatrixXd G = local_gram(m, L, t);
    const auto& d = L.element_dofs[t];
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = 0; j < d.size(); ++j) M(d[i], d[j]) += G(i, j);
  }
  return M;
}

// ---------------------------------------------------------------------------------------------
// Bubbles and dual functions. These realize the theory for the test oracles only; the
// preconditioner factors never reference them.

enum class BubbleKind { element_poly, barycentric_hat };

/// One bubble per trial dof. theta_j lives on element[j]:
///   element_poly:    theta_j = prod(lambda) * sum_k coeffs[j][k] * (local function k of element[j])
///   barycentric_hat: theta_j = (d+1)^2 min(lambda)   (disc degree 0 only)
struct BubbleSet {
  BubbleKind kind = BubbleKind::element_poly;
  int dim = 1;
  std::vector<int> element;
  std::vector<Eigen::VectorXd> coeffs;
  std::vector<double> normalization;  // <theta_j, xi_j>

  double eval(const DofLayout& L, int j, int t, const std::array<double, 3>& bary) const {
    if (element[j] != t) return 0.0;
    if (kind == BubbleKind::barycentric_hat) {
      double mn = bary[0];
      for (int i = 1; i <= dim; ++i) mn = std::min(mn, bary[i]);
      return (dim + 1) * (dim + 1) * mn;
    }
    double b = 1.0;
    for (int i = 0; i <= dim; ++i) b *= bary[i];
    double vals[32];
    L.eval(t, bary, vals);
    return b * coeffs[j].dot(Eigen::Map<const Eigen::VectorXd>(vals, L.local_size()));
  }
};

/// Quadrature rule on the reference simplex that is exact for products involving bubbles:
/// for barycentric-hat bubbles the rule is composite over the (d+1)! sub-simplices on which
/// min(lambda) is affine.
inline SimplexRule bubble_rule(int dim, int degree, BubbleKind kind) {
  const SimplexRule base = simplex_rule(dim, degree);
  if (kind == BubbleKind::element_poly) return base;
  SimplexRule out;
  out.dim = dim;
  std::vector<int> perm(dim + 1);
  for (int i = 0; i <= dim; ++i) perm[i] = i;
  const double nsub = factorial(dim + 1);
  do {
    // vertices: barycenters of the nested faces {p0}, {p0,p1}, ..., {p0..pd}
    std::array<std::array<double, 3>, 3> V{};
    for (int k = 0; k <= dim; ++k) {
      std::array<double, 3> c{0, 0, 0};
      for (int i = 0; i <= k; ++i) c[perm[i]] = 1.0 / (k + 1);
      V[k] = c;
    }
    for (std::size_t q = 0; q < base.weights.size(); ++q) {
      std::array<double, 3> b{0, 0, 0};
      for (int k = 0; k <= dim; ++k)
        for (int i = 0; i <= dim; ++i) b[i] += base.bary[q][k] * V[k][i];
      out.bary.push_back(b);
      out.weights.push_back(base.weights[q] / nsub);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

/// Bubbles biorthogonal to the whole trial basis: <theta_j, xi_k> = delta_jk |supp xi_j|.
/// theta_j sits on the smallest-index element of supp xi_j.
inline BubbleSet realize_bubbles(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                 BubbleKind kind) {
  if (kind == BubbleKind::barycentric_hat && !(L.kind == SpaceKind::disc && L.degree == 0))
    throw std::invalid_argument("realize_bubbles: barycentric hat bubbles need piecewise constants");
  BubbleSet B;
  B.kind = kind;
  B.dim = m.dim;
  B.element.resize(L.n_dofs);
  B.coeffs.resize(L.n_dofs);
  B.normalization.resize(L.n_dofs);
  for (int j = 0; j < L.n_dofs; ++j) {
    B.element[j] = L.support[j].front();
    B.normalization[j] = support_volume(c, L, j);
  }
  if (kind == BubbleKind::barycentric_hat) return B;
  const int loc = L.local_size();
  const SimplexRule rule = simplex_rule(m.dim, 2 * L.degree + 2 * (m.dim + 1));
  std::vector<Eigen::MatrixXd> Minv(m.n_simplices());
  Eigen::VectorXd v(loc);
  for (int j = 0; j < L.n_dofs; ++j) {
    const int t = B.element[j];
    if (Minv[t].size() == 0) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(loc, loc);
      const double vol = c.volume[t];
      for (std::size_t q = 0; q < rule.weights.size(); ++q) {
        L.eval(t, rule.bary[q], v.data());
        double b = 1.0;
        for (int i = 0; i <= m.dim; ++i) b *= rule.bary[q][i];
        M += rule.weights[q] * vol * b * v * v.transpose();
      }
      Minv[t] = M.inverse();
    }
    const auto& d = L.element_dofs[t];
    const int li = static_cast<int>(std::find(d.begin(), d.end(), j) - d.begin());
    B.coeffs[j] = Minv[t].col(li) * B.normalization[j];
  }
  return B;
}

/// psi = sum hats[.] phi_nu + sum bubbles[.] theta_j.
struct DualFunction {
  std::vector<std::pair<int, double>> hats;     // (vertex, coefficient)
  std::vector<std::pair<int, double>> bubbles;  // (bubble/dof index, coefficient)
};

namespace detail {

/// Elements on which each dual function may be nonzero.
inline std::vector<std::vector<int>> dual_elements(const MeshCombinatorics& c, const BubbleSet& B,
                                                   const std::vector<DualFunction>& psi) {
  std::vector<std::vector<int>> by_elem(c.n_elements());
  for (std::size_t j = 0; j < psi.size(); ++j) {
    std::vector<int> el;
    for (auto [v, w] : psi[j].hats)
      for (int t : c.vertex_elements[v]) el.push_back(t);
    for (auto [k, w] : psi[j].bubbles) el.push_back(B.element[k]);
    std::sort(el.begin(), el.end());
    el.erase(std::unique(el.begin(), el.end()), el.end());
    for (int t : el) by_elem[t].push_back(static_cast<int>(j));
  }
  return by_elem;
}

inline double eval_dual(const SimplicialMesh& m, const DofLayout& L, const BubbleSet& B, const DualFunction& f,
                        int t, const std::array<double, 3>& bary) {
  double v = 0.0;
  const auto& s = m.simplices[t];
  for (auto [nu, w] : f.hats)
    for (int i = 0; i <= m.dim; ++i)
      if (s[i] == nu) v += w * bary[i];
  for (auto [k, w] : f.bubbles) v += w * B.eval(L, k, t, bary);
  return v;
}

}  // namespace detail

/// <xi_i, psi_j> for all trial dofs i and dual functions j, by quadrature exact for the integrands.
inline Eigen::MatrixXd dual_gram(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                 const BubbleSet& B, const std::vector<DualFunction>& psi) {
  const SimplexRule rule = bubble_rule(m.dim, 2 * L.degree + 2 * (m.dim + 1), B.kind);
  const auto by_elem = detail::dual_elements(c, B, psi);
  const int loc = L.local_size();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(L.n_dofs, static_cast<Eigen::Index>(psi.size()));
  std::vector<double> v(loc);
  for (int t = 0; t < m.n_simplices(); ++t) {
    const double vol = c.volume[t];
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      L.eval(t, rule.bary[q], v.data());
      for (int j : by_elem[t]) {
        const double pv = detail::eval_dual(m, L, B, psi[j], t, rule.bary[q]);
        if (pv == 0.0) continue;
        for (int i = 0; i < loc; ++i) G(L.element_dofs[t][i], j) += rule.weights[q] * vol * v[i] * pv;
      }
    }
  }
  return G;
}

/// Lowest-order dual functions: psi_T (disc, degree 0 block) or psi_nu (cont, hat block),
/// using bubbles theta_j for the lowest-order dofs j.
inline std::vector<DualFunction> lowest_dual(const SimplicialMesh& m, const MeshCombinatorics& c,
                                             const DofLayout& L) {
  const int d = m.dim;
  std::vector<DualFunction> psi;
  if (L.kind == SpaceKind::disc) {
    const int nt = m.n_simplices();
    psi.resize(nt);
    for (int t = 0; t < nt; ++t) {
      const auto& s = m.simplices[t];
      double own = 1.0;
      for (int i = 0; i <= d; ++i)
        if (c.is_free(s[i])) {
          psi[t].hats.push_back({s[i], 1.0 / c.valence[s[i]]});
          own -= 1.0 / ((d + 1) * c.valence[s[i]]);
        }
      psi[t].bubbles.push_back({t, own});
      for (int t2 : c.element_neighbors[t]) {
        double w = 0.0;
        for (int i = 0; i <= d; ++i) {
          const int v = s[i];
          if (!c.is_free(v)) continue;
          const auto& s2 = m.simplices[t2];
          for (int k = 0; k <= d; ++k)
            if (s2[k] == v) w += 1.0 / c.valence[v];
        }
        if (w != 0.0) psi[t].bubbles.push_back({t2, -w / (d + 1)});
      }
    }
  } else {
    const int nv = m.n_vertices();
    psi.resize(nv);
    const double dd = d;
    for (int v = 0; v < nv; ++v) {
      if (!c.is_free(v)) {
        psi[v].bubbles.push_back({v, 1.0 / (dd + 1)});
        continue;
      }
      psi[v].hats.push_back({v, 1.0});
      psi[v].bubbles.push_back({v, dd / ((dd + 2) * (dd + 1))});
      std::vector<int> nb;
      for (int t : c.vertex_elements[v])
        for (int i = 0; i <= d; ++i)
          if (m.simplices[t][i] != v) nb.push_back(m.simplices[t][i]);
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
      for (int w : nb)
        psi[v].bubbles.push_back(
            {w, -patch_intersection(m, c, v, w) / ((dd + 2) * (dd + 1) * c.patch_volume[w])});
    }
  }
  return psi;
}

/// Expansion of the full dual basis Psi in hats and bubbles. For higher-order layouts the
/// lowest-order functions are corrected by -<psi^0, xi'>/<theta', xi'> theta' (computed by
/// quadrature) and the remaining dual functions are the bubbles themselves.
inline std::vector<DualFunction> dual_basis_coefficients(const SimplicialMesh& m, const MeshCombinatorics& c,
                                                         const DofLayout& L, const BubbleSet& B) {
  std::vector<DualFunction> psi = lowest_dual(m, c, L);
  if (L.n_higher() == 0) return psi;
  if (B.kind != BubbleKind::element_poly)
    throw std::invalid_argument("dual_basis_coefficients: higher order needs polynomial bubbles");
  const Eigen::MatrixXd G0 = dual_gram(m, c, L, B, psi);  // <xi_i, psi^0_j>
  for (int j = 0; j < L.n_lowest; ++j)
    for (int i = L.n_lowest; i < L.n_dofs; ++i) {
      const double g = G0(i, j);
      if (std::abs(g) > 0.0) psi[j].bubbles.push_back({i, -g / B.normalization[i]});
    }
  for (int i = L.n_lowest; i < L.n_dofs; ++i) {
    DualFunction f;
    f.bubbles.push_back({i, 1.0});
    psi.push_back(f);
  }
  return psi;
}

/// Sum of all lowest-order dual functions at every quadrature node of every element not touching
/// gamma. Returns the maximal deviation from 1.
inline double partition_of_unity_error(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                       const BubbleSet& B, const std::vector<DualFunction>& psi) {
  const SimplexRule rule = bubble_rule(m.dim, 2 * L.degree + 2 * (m.dim + 1), B.kind);
  const auto by_elem = detail::dual_elements(c, B, psi);
  double err = 0.0;
  for (int t = 0; t < m.n_simplices(); ++t) {
    bool touches = false;
    for (int i = 0; i <= m.dim; ++i) touches = touches || !c.is_free(m.simplices[t][i]);
    if (touches) continue;
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      double sum = 0.0;
      for (int j : by_elem[t])
        if (j < L.n_lowest) sum += detail::eval_dual(m, L, B, psi[j], t, rule.bary[q]);
      err = std::max(err, std::abs(sum - 1.0));
    }
  }
  return err;
}

/// Gram matrix of the normalized bubbles theta_j / ||theta_j||.
inline Eigen::MatrixXd bubble_gram(const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                   const BubbleSet& B) {
  const SimplexRule rule = bubble_rule(m.dim, 2 * L.degree + 2 * (m.dim + 1), B.kind);
  std::vector<std::vector<int>> by_elem(m.n_simplices());
  for (int j = 0; j < L.n_dofs; ++j) by_elem[B.element[j]].push_back(j);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(L.n_dofs, L.n_dofs);
  for (int t = 0; t < m.n_simplices(); ++t) {
    const auto& js = by_elem[t];
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      std::vector<double> v(js.size());
      for (std::size_t a = 0; a < js.size(); ++a) v[a] = B.eval(L, js[a], t, rule.bary[q]);
      for (std::size_t a = 0; a < js.size(); ++a)
        for (std::size_t b = 0; b < js.size(); ++b) G(js[a], js[b]) += rule.weights[q] * c.volume[t] * v[a] * v[b];
    }
  }
  const Eigen::VectorXd n = G.diagonal().cwiseSqrt().cwiseInverse();
  return n.asDiagonal() * G * n.asDiagonal();
}

}  // namespace opprecond
