#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace opprecond {

using Point = Eigen::Vector3d;

/// Parametrization t -> chi(t) of a curve. Used to place refinement vertices
/// and to define the mesh-dependent inner product.
class Chart {
 public:
  virtual ~Chart() = default;
  virtual Point point(double t) const = 0;
  /// |chi'(t)|
  virtual double speed(double t) const = 0;
  virtual double period() const = 0;
  virtual std::string name() const = 0;
};

/// Closed polygon parametrized by arclength (an isometry on every side).
class PolygonChart final : public Chart {
 public:
  explicit PolygonChart(std::vector<Point> corners) : corners_(std::move(corners)) {
    cum_.push_back(0.0);
    for (std::size_t k = 0; k < corners_.size(); ++k)
      cum_.push_back(cum_.back() + (corners_[(k + 1) % corners_.size()] - corners_[k]).norm());
  }
  Point point(double t) const override {
    const double P = cum_.back();
    t = std::fmod(t, P);
    if (t < 0) t += P;
    auto it = std::upper_bound(cum_.begin(), cum_.end(), t);
    std::size_t k = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cum_.begin() - 1, 0),
                                          corners_.size() - 1);
    const double len = cum_[k + 1] - cum_[k];
    const double u = (t - cum_[k]) / len;
    return (1.0 - u) * corners_[k] + u * corners_[(k + 1) % corners_.size()];
  }
  double speed(double) const override { return 1.0; }
  double period() const override { return cum_.back(); }
  std::string name() const override { return "polygon"; }

 private:
  std::vector<Point> corners_;
  std::vector<double> cum_;
};

/// chi(t) = (a cos t, b sin t), t in [0, 2 pi).
class EllipseChart final : public Chart {
 public:
  EllipseChart(double a, double b) : a_(a), b_(b) {}
  Point point(double t) const override { return {a_ * std::cos(t), b_ * std::sin(t), 0.0}; }
  double speed(double t) const override {
    const double s = std::sin(t), c = std::cos(t);
    return std::sqrt(a_ * a_ * s * s + b_ * b_ * c * c);
  }
  double period() const override { return 2.0 * std::numbers::pi; }
  std::string name() const override { return "ellipse"; }

 private:
  double a_, b_;
};

/// Conforming simplicial mesh, d in {1, 2}.
///
/// For d = 2 the vertex order of each triangle is the newest-vertex tag:
/// the refinement edge is (v0, v1) and v2 is the newest vertex.
/// For d = 1 segments are oriented (v0 -> v1); closed curves are oriented consistently.
/// Refinement appends new vertices, so vertex indices are stable.
struct SimplicialMesh {
  int dim = 1;
  int embed_dim = 1;
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> simplices;  // d = 1 uses the first two entries
  std::vector<std::array<int, 2>> dirichlet;  // d = 1: {v, -1}; d = 2: sorted edge
  std::vector<int> chart_id;                  // optional per-simplex label
  std::shared_ptr<const Chart> chart;         // optional, d = 1 only
  std::vector<std::array<double, 2>> params;  // chart parameters of the segment ends
  std::vector<int> corners;                   // vertices that drive corner-local refinement
  bool closed = false;                        // manifold without boundary

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_simplices() const { return static_cast<int>(simplices.size()); }
  int nv() const { return dim + 1; }

  double volume(int t) const {
    const auto& s = simplices[t];
    if (dim == 1) return (vertices[s[1]] - vertices[s[0]]).norm();
    return 0.5 * (vertices[s[1]] - vertices[s[0]]).cross(vertices[s[2]] - vertices[s[0]]).norm();
  }

  /// Physical point from barycentric coordinates on simplex t.
  Point point(int t, const std::array<double, 3>& bary) const {
    const auto& s = simplices[t];
    Point x = Point::Zero();
    for (int i = 0; i <= dim; ++i) x += bary[i] * vertices[s[i]];
    return x;
  }
};

enum class Geometry { interval, polygon, ellipse, unit_square, cube_surface };

inline Geometry parse_geometry(const std::string& s) {
  if (s == "interval") return Geometry::interval;
  if (s == "polygon") return Geometry::polygon;
  if (s == "ellipse") return Geometry::ellipse;
  if (s == "unit-square" || s == "unit_square") return Geometry::unit_square;
  if (s == "cube-surface" || s == "cube_surface") return Geometry::cube_surface;
  throw std::invalid_argument("unknown geometry '" + s + "'");
}

inline std::string geometry_name(Geometry g) {
  switch (g) {
    case Geometry::interval: return "interval";
    case Geometry::polygon: return "polygon";
    case Geometry::ellipse: return "ellipse";
    case Geometry::unit_square: return "unit-square";
    case Geometry::cube_surface: return "cube-surface";
  }
  return "?";
}

/// Which part of the boundary is Dirichlet (gamma).
enum class DirichletSpec { none, all, left, right };

inline DirichletSpec parse_dirichlet(const std::string& s) {
  if (s == "none") return DirichletSpec::none;
  if (s == "all") return DirichletSpec::all;
  if (s == "left") return DirichletSpec::left;
  if (s == "right") return DirichletSpec::right;
  throw std::invalid_argument("unknown dirichlet spec '" + s + "'");
}

struct GeometrySpec {
  Geometry kind = Geometry::polygon;
  int elements = 1;       // per side (polygon, square, cube), total (interval, ellipse)
  int sides = 4;          // polygon only
  double radius = 0.25;   // polygon circumradius
  double ellipse_a = 0.25;
  double ellipse_b = 0.125;
  double length = 1.0;    // interval length, square and cube side
  DirichletSpec dirichlet = DirichletSpec::none;
};

namespace detail {

inline std::array<int, 2> sorted_edge(int a, int b) { return a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a}; }

inline double edge_len2(const SimplicialMesh& m, int a, int b) {
  return (m.vertices[a] - m.vertices[b]).squaredNorm();
}

/// Reorder a triangle so that its longest edge is (v0, v1).
inline std::array<int, 3> tag_longest_edge(const SimplicialMesh& m, std::array<int, 3> t) {
  const double l01 = edge_len2(m, t[0], t[1]);
  const double l12 = edge_len2(m, t[1], t[2]);
  const double l20 = edge_len2(m, t[2], t[0]);
  const double tol = 1e-12 * std::max({l01, l12, l20});
  if (l01 + tol >= l12 && l01 + tol >= l20) return t;
  if (l12 + tol >= l20) return {t[1], t[2], t[0]};
  return {t[2], t[0], t[1]};
}

inline void retag_all(SimplicialMesh& m) {
  if (m.dim != 2) return;
  for (auto& t : m.simplices) t = tag_longest_edge(m, t);
}

/// Split Dirichlet faces at midpoints recorded during refinement.
inline void split_dirichlet(SimplicialMesh& m, const std::map<std::array<int, 2>, int>& mid) {
  if (m.dim != 2) return;
  std::vector<std::array<int, 2>> out;
  std::vector<std::array<int, 2>> stack(m.dirichlet.begin(), m.dirichlet.end());
  std::reverse(stack.begin(), stack.end());
  while (!stack.empty()) {
    auto e = stack.back();
    stack.pop_back();
    auto it = mid.find(e);
    if (it == mid.end()) {
      out.push_back(e);
    } else {
      stack.push_back(sorted_edge(it->second, e[1]));
      stack.push_back(sorted_edge(e[0], it->second));
    }
  }
  m.dirichlet = std::move(out);
}

inline int midpoint_vertex(SimplicialMesh& m, std::map<std::array<int, 2>, int>& mid, int a, int b) {
  const auto key = sorted_edge(a, b);
  auto it = mid.find(key);
  if (it != mid.end()) return it->second;
  const int idx = m.n_vertices();
  m.vertices.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
  mid.emplace(key, idx);
  return idx;
}

/// Bisect segment t of a d = 1 mesh into the output mesh, honoring the chart.
inline void bisect_segment(const SimplicialMesh& in, int t, SimplicialMesh& out,
                           std::vector<int>* parent) {
  const auto& s = in.simplices[t];
  const int m = out.n_vertices();
  if (in.chart && !in.params.empty()) {
    const auto pr = in.params[t];
    const double tm = 0.5 * (pr[0] + pr[1]);
    out.vertices.push_back(in.chart->point(tm));
    out.params.push_back({pr[0], tm});
    out.params.push_back({tm, pr[1]});
  } else {
    out.vertices.push_back(0.5 * (in.vertices[s[0]] + in.vertices[s[1]]));
  }
  out.simplices.push_back({s[0], m, -1});
  out.simplices.push_back({m, s[1], -1});
  if (!in.chart_id.empty()) {
    out.chart_id.push_back(in.chart_id[t]);
    out.chart_id.push_back(in.chart_id[t]);
  }
  if (parent) {
    parent->push_back(t);
    parent->push_back(t);
  }
}

inline void copy_simplex(const SimplicialMesh& in, int t, SimplicialMesh& out, std::vector<int>* parent) {
  out.simplices.push_back(in.simplices[t]);
  if (!in.params.empty()) out.params.push_back(in.params[t]);
  if (!in.chart_id.empty()) out.chart_id.push_back(in.chart_id[t]);
  if (parent) parent->push_back(t);
}

inline SimplicialMesh empty_like(const SimplicialMesh& in) {
  SimplicialMesh out;
  out.dim = in.dim;
  out.embed_dim = in.embed_dim;
  out.vertices = in.vertices;
  out.dirichlet = in.dirichlet;
  out.chart = in.chart;
  out.corners = in.corners;
  out.closed = in.closed;
  return out;
}

}  // namespace detail

/// Built-in geometries. Closed curves are scaled so that their diameter is at most 1/2 by default.
inline SimplicialMesh make_structured(const GeometrySpec& g) {
  if (g.elements < 1) throw std::invalid_argument("make_structured: element count must be >= 1");
  SimplicialMesh m;
  const int n = g.elements;
  const bool closed_geom = g.kind == Geometry::polygon || g.kind == Geometry::ellipse ||
                           g.kind == Geometry::cube_surface;
  if (closed_geom && g.dirichlet != DirichletSpec::none)
    throw std::invalid_argument("make_structured: dirichlet boundary requested on a closed manifold");
  m.closed = closed_geom;

  switch (g.kind) {
    case Geometry::interval: {
      m.dim = 1;
      m.embed_dim = 1;
      for (int i = 0; i <= n; ++i) m.vertices.push_back({g.length * i / n, 0.0, 0.0});
      for (int i = 0; i < n; ++i) m.simplices.push_back({i, i + 1, -1});
      if (g.dirichlet == DirichletSpec::all || g.dirichlet == DirichletSpec::left) m.dirichlet.push_back({0, -1});
      if (g.dirichlet == DirichletSpec::all || g.dirichlet == DirichletSpec::right) m.dirichlet.push_back({n, -1});
      m.corners = {0, n};
      break;
    }
    case Geometry::polygon: {
      if (g.sides < 3) throw std::invalid_argument("make_structured: polygon needs >= 3 sides");
      m.dim = 1;
      m.embed_dim = 2;
      std::vector<Point> corners;
      for (int k = 0; k < g.sides; ++k) {
        const double a = 2.0 * std::numbers::pi * k / g.sides + std::numbers::pi / g.sides;
        corners.push_back({g.radius * std::cos(a), g.radius * std::sin(a), 0.0});
      }
      auto chart = std::make_shared<PolygonChart>(corners);
      const double side = (corners[1] - corners[0]).norm();
      for (int k = 0; k < g.sides; ++k) {
        m.corners.push_back(k * n);
        for (int i = 0; i < n; ++i) m.vertices.push_back(chart->point(side * (k * n + i) / n));
      }
      const int nv = g.sides * n;
      for (int i = 0; i < nv; ++i) {
        m.simplices.push_back({i, (i + 1) % nv, -1});
        m.params.push_back({side * i / n, side * (i + 1) / n});
        m.chart_id.push_back(0);
      }
      m.chart = chart;
      break;
    }
    case Geometry::ellipse: {
      if (n < 3) throw std::invalid_argument("make_structured: ellipse needs >= 3 elements");
      m.dim = 1;
      m.embed_dim = 2;
      auto chart = std::make_shared<EllipseChart>(g.ellipse_a, g.ellipse_b);
      const double P = chart->period();
      for (int i = 0; i < n; ++i) m.vertices.push_back(chart->point(P * i / n));
      for (int i = 0; i < n; ++i) {
        m.simplices.push_back({i, (i + 1) % n, -1});
        m.params.push_back({P * i / n, P * (i + 1) / n});
        m.chart_id.push_back(0);
      }
      m.corners.push_back(0);
      if (n % 2 == 0) m.corners.push_back(n / 2);
      m.chart = chart;
      break;
    }
    case Geometry::unit_square: {
      m.dim = 2;
      m.embed_dim = 2;
      auto vid = [n](int i, int j) { return j * (n + 1) + i; };
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) m.vertices.push_back({g.length * i / n, g.length * j / n, 0.0});
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          m.simplices.push_back({vid(i, j), vid(i + 1, j + 1), vid(i + 1, j)});
          m.simplices.push_back({vid(i + 1, j + 1), vid(i, j), vid(i, j + 1)});
        }
      if (g.dirichlet != DirichletSpec::none) {
        if (g.dirichlet != DirichletSpec::all)
          throw std::invalid_argument("make_structured: unit-square supports dirichlet none|all");
        for (int i = 0; i < n; ++i) {
          m.dirichlet.push_back(detail::sorted_edge(vid(i, 0), vid(i + 1, 0)));
          m.dirichlet.push_back(detail::sorted_edge(vid(i, n), vid(i + 1, n)));
          m.dirichlet.push_back(detail::sorted_edge(vid(0, i), vid(0, i + 1)));
          m.dirichlet.push_back(detail::sorted_edge(vid(n, i), vid(n, i + 1)));
        }
      }
      m.corners = {vid(0, 0), vid(n, 0), vid(0, n), vid(n, n)};
      break;
    }
    case Geometry::cube_surface: {
      m.dim = 2;
      m.embed_dim = 3;
      std::map<std::array<int, 3>, int> index;
      auto vid = [&](std::array<int, 3> c) {
        auto it = index.find(c);
        if (it != index.end()) return it->second;
        const int k = m.n_vertices();
        m.vertices.push_back({g.length * c[0] / n, g.length * c[1] / n, g.length * c[2] / n});
        index.emplace(c, k);
        return k;
      };
      // faces: fixed axis, fixed value, two running axes
      for (int face = 0; face < 6; ++face) {
        const int axis = face / 2;
        const int val = (face % 2) * n;
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) {
            auto at = [&](int ii, int jj) {
              std::array<int, 3> c{};
              c[axis] = val;
              c[a1] = ii;
              c[a2] = jj;
              return vid(c);
            };
            m.simplices.push_back({at(i, j), at(i + 1, j + 1), at(i + 1, j)});
            m.simplices.push_back({at(i + 1, j + 1), at(i, j), at(i, j + 1)});
            m.chart_id.push_back(face);
            m.chart_id.push_back(face);
          }
      }
      for (int c = 0; c < 8; ++c) m.corners.push_back(vid({(c & 1) * n, ((c >> 1) & 1) * n, ((c >> 2) & 1) * n}));
      break;
    }
  }
  detail::retag_all(m);
  return m;
}

/// Red refinement (d = 2) or bisection (d = 1) of every simplex.
/// `parent`, if given, receives the coarse simplex index of every child.
inline SimplicialMesh uniform_refine(const SimplicialMesh& in, std::vector<int>* parent = nullptr) {
  SimplicialMesh out = detail::empty_like(in);
  if (parent) parent->clear();
  if (in.dim == 1) {
    for (int t = 0; t < in.n_simplices(); ++t) detail::bisect_segment(in, t, out, parent);
    return out;
  }
  std::map<std::array<int, 2>, int> mid;
  for (int t = 0; t < in.n_simplices(); ++t) {
    const auto s = in.simplices[t];
    const int m01 = detail::midpoint_vertex(out, mid, s[0], s[1]);
    const int m12 = detail::midpoint_vertex(out, mid, s[1], s[2]);
    const int m02 = detail::midpoint_vertex(out, mid, s[0], s[2]);
    const std::array<std::array<int, 3>, 4> kids{{{s[0], m01, m02}, {m01, s[1], m12}, {m02, m12, s[2]}, {m01, m12, m02}}};
    for (const auto& k : kids) {
      out.simplices.push_back(detail::tag_longest_edge(out, k));
      if (!in.chart_id.empty()) out.chart_id.push_back(in.chart_id[t]);
      if (parent) parent->push_back(t);
    }
  }
  detail::split_dirichlet(out, mid);
  return out;
}

/// Newest vertex bisection of the marked simplices with conforming closure.
/// For d = 1 marked segments are bisected (no closure needed).
inline SimplicialMesh nvb_refine(const SimplicialMesh& in, const std::vector<int>& marked,
                                 std::vector<int>* parent = nullptr) {
  if (parent) parent->clear();
  for (int t : marked)
    if (t < 0 || t >= in.n_simplices()) throw std::out_of_range("nvb_refine: marked simplex out of range");
  if (marked.empty()) {
    if (parent) {
      parent->resize(in.n_simplices());
      for (int t = 0; t < in.n_simplices(); ++t) (*parent)[t] = t;
    }
    return in;
  }
  SimplicialMesh out = detail::empty_like(in);
  if (in.dim == 1) {
    std::vector<char> mark(in.n_simplices(), 0);
    for (int t : marked) mark[t] = 1;
    for (int t = 0; t < in.n_simplices(); ++t) {
      if (mark[t]) detail::bisect_segment(in, t, out, parent);
      else detail::copy_simplex(in, t, out, parent);
    }
    return out;
  }

  // closure: mark refinement edges until every element with a marked edge has its refinement edge marked
  std::set<std::array<int, 2>> edges;
  for (int t : marked) edges.insert(detail::sorted_edge(in.simplices[t][0], in.simplices[t][1]));
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& s : in.simplices) {
      const auto ref = detail::sorted_edge(s[0], s[1]);
      if (edges.count(ref)) continue;
      if (edges.count(detail::sorted_edge(s[1], s[2])) || edges.count(detail::sorted_edge(s[0], s[2]))) {
        edges.insert(ref);
        changed = true;
      }
    }
  }

  std::map<std::array<int, 2>, int> mid;
  // recursive bisection driven by the marked edge set
  auto refine = [&](auto&& self, std::array<int, 3> s, int t) -> void {
    const auto ref = detail::sorted_edge(s[0], s[1]);
    if (!edges.count(ref)) {
      out.simplices.push_back(s);
      if (!in.chart_id.empty()) out.chart_id.push_back(in.chart_id[t]);
      if (parent) parent->push_back(t);
      return;
    }
    const int m = detail::midpoint_vertex(out, mid, s[0], s[1]);
    self(self, {s[2], s[0], m}, t);
    self(self, {s[1], s[2], m}, t);
  };
  for (int t = 0; t < in.n_simplices(); ++t) refine(refine, in.simplices[t], t);
  detail::split_dirichlet(out, mid);
  return out;
}

/// Mark every simplex that touches one of the mesh's corner vertices and refine by NVB.
inline SimplicialMesh corner_refine(const SimplicialMesh& in, std::vector<int>* parent = nullptr) {
  std::set<int> corners(in.corners.begin(), in.corners.end());
  std::vector<int> marked;
  for (int t = 0; t < in.n_simplices(); ++t)
    for (int i = 0; i <= in.dim; ++i)
      if (corners.count(in.simplices[t][i])) {
        marked.push_back(t);
        break;
      }
  return nvb_refine(in, marked, parent);
}

/// Barycentric refinement: 6 triangles through the barycenter (d = 2), midpoint split (d = 1).
inline SimplicialMesh barycentric_refine(const SimplicialMesh& in, std::vector<int>* parent = nullptr) {
  if (in.dim == 1) return uniform_refine(in, parent);
  if (parent) parent->clear();
  SimplicialMesh out = detail::empty_like(in);
  std::map<std::array<int, 2>, int> mid;
  for (int t = 0; t < in.n_simplices(); ++t) {
    const auto s = in.simplices[t];
    const int b = out.n_vertices();
    out.vertices.push_back((in.vertices[s[0]] + in.vertices[s[1]] + in.vertices[s[2]]) / 3.0);
    for (int i = 0; i < 3; ++i) {
      const int a = s[i], c = s[(i + 1) % 3];
      const int m = detail::midpoint_vertex(out, mid, a, c);
      for (const auto& k : {std::array<int, 3>{a, m, b}, std::array<int, 3>{m, c, b}}) {
        out.simplices.push_back(detail::tag_longest_edge(out, k));
        if (!in.chart_id.empty()) out.chart_id.push_back(in.chart_id[t]);
        if (parent) parent->push_back(t);
      }
    }
  }
  detail::split_dirichlet(out, mid);
  return out;
}

/// Derived quantities consumed by the preconditioner formulas.
struct MeshCombinatorics {
  int dim = 1;
  std::vector<int> free_vertices;   // N^0, ascending
  std::vector<int> free_index;      // vertex -> position in free_vertices, or -1
  std::vector<int> valence;         // d_nu
  std::vector<double> volume;       // |T|
  std::vector<double> h;            // |T|^(1/d)
  std::vector<double> patch_volume; // |omega(nu)|
  std::vector<std::vector<int>> vertex_elements;
  std::vector<std::vector<int>> element_neighbors;  // elements sharing at least one vertex (excluding self)

  int n_vertices() const { return static_cast<int>(valence.size()); }
  int n_free() const { return static_cast<int>(free_vertices.size()); }
  int n_elements() const { return static_cast<int>(volume.size()); }
  bool is_free(int v) const { return free_index[v] >= 0; }
  double h_min() const { return *std::min_element(h.begin(), h.end()); }
  double h_max() const { return *std::max_element(h.begin(), h.end()); }
};

/// Vertices lying on a Dirichlet face.
inline std::vector<char> dirichlet_vertices(const SimplicialMesh& m) {
  std::vector<char> on(m.n_vertices(), 0);
  for (const auto& f : m.dirichlet)
    for (int i = 0; i < m.dim; ++i) on[f[i]] = 1;
  return on;
}

inline MeshCombinatorics combinatorics(const SimplicialMesh& m) {
  MeshCombinatorics c;
  c.dim = m.dim;
  const int nv = m.n_vertices(), nt = m.n_simplices();
  c.valence.assign(nv, 0);
  c.patch_volume.assign(nv, 0.0);
  c.vertex_elements.assign(nv, {});
  c.volume.resize(nt);
  c.h.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const double vol = m.volume(t);
    if (!(vol > 0.0)) throw std::runtime_error("combinatorics: degenerate simplex " + std::to_string(t));
    c.volume[t] = vol;
    c.h[t] = m.dim == 1 ? vol : std::sqrt(vol);
    for (int i = 0; i <= m.dim; ++i) {
      const int v = m.simplices[t][i];
      c.valence[v] += 1;
      c.patch_volume[v] += vol;
      c.vertex_elements[v].push_back(t);
    }
  }
  const auto on_gamma = dirichlet_vertices(m);
  c.free_index.assign(nv, -1);
  for (int v = 0; v < nv; ++v)
    if (!on_gamma[v] && c.valence[v] > 0) {
      c.free_index[v] = static_cast<int>(c.free_vertices.size());
      c.free_vertices.push_back(v);
    }
  c.element_neighbors.assign(nt, {});
  for (int t = 0; t < nt; ++t) {
    std::vector<int> nb;
    for (int i = 0; i <= m.dim; ++i)
      for (int t2 : c.vertex_elements[m.simplices[t][i]])
        if (t2 != t) nb.push_back(t2);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    c.element_neighbors[t] = std::move(nb);
  }
  return c;
}

/// |omega(a) cap omega(b)| = sum of volumes of simplices containing both vertices.
inline double patch_intersection(const SimplicialMesh& m, const MeshCombinatorics& c, int a, int b) {
  double s = 0.0;
  for (int t : c.vertex_elements[a]) {
    const auto& sx = m.simplices[t];
    for (int i = 0; i <= m.dim; ++i)
      if (sx[i] == b) s += c.volume[t];
  }
  return s;
}

/// Largest length ratio of neighbouring segments (d = 1).
inline double kmesh_ratio(const SimplicialMesh& m) {
  if (m.dim != 1) throw std::invalid_argument("kmesh_ratio: d = 1 only");
  const auto c = combinatorics(m);
  double r = 1.0;
  for (int v = 0; v < m.n_vertices(); ++v) {
    const auto& el = c.vertex_elements[v];
    for (std::size_t i = 0; i < el.size(); ++i)
      for (std::size_t j = i + 1; j < el.size(); ++j) {
        const double a = c.volume[el[i]], b = c.volume[el[j]];
        r = std::max(r, std::max(a / b, b / a));
      }
  }
  return r;
}

/// Smallest interior angle (radians) over all triangles.
inline double min_angle(const SimplicialMesh& m) {
  if (m.dim != 2) throw std::invalid_argument("min_angle: d = 2 only");
  double best = std::numbers::pi;
  for (const auto& s : m.simplices)
    for (int i = 0; i < 3; ++i) {
      const Point a = m.vertices[s[(i + 1) % 3]] - m.vertices[s[i]];
      const Point b = m.vertices[s[(i + 2) % 3]] - m.vertices[s[i]];
      best = std::min(best, std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0)));
    }
  return best;
}

/// Face-incidence audit. Returns an empty string when the mesh is conforming, otherwise a reason.
/// Each facet must be shared by at most two simplices (exactly two on closed manifolds), and no
/// vertex may sit at the midpoint of an existing edge (the only place refinement creates vertices).
inline std::string conformity_error(const SimplicialMesh& m) {
  if (m.dim == 1) {
    std::vector<int> count(m.n_vertices(), 0);
    for (const auto& s : m.simplices) {
      if (s[0] == s[1]) return "degenerate segment";
      ++count[s[0]];
      ++count[s[1]];
    }
    for (int v = 0; v < m.n_vertices(); ++v) {
      if (count[v] > 2) return "vertex in more than two segments";
      if (m.closed && count[v] != 2) return "closed curve vertex without two segments";
    }
    return {};
  }
  std::map<std::array<int, 2>, int> count;
  for (const auto& s : m.simplices)
    for (int i = 0; i < 3; ++i) ++count[detail::sorted_edge(s[i], s[(i + 1) % 3])];
  std::map<std::array<long long, 3>, int> where;
  const double scale = 1e9;
  auto key = [&](const Point& p) {
    return std::array<long long, 3>{std::llround(p[0] * scale), std::llround(p[1] * scale), std::llround(p[2] * scale)};
  };
  for (int v = 0; v < m.n_vertices(); ++v) where[key(m.vertices[v])] = v;
  for (const auto& [e, k] : count) {
    if (k > 2) return "edge shared by more than two triangles";
    if (m.closed && k != 2) return "edge of a closed surface not shared by two triangles";
    auto it = where.find(key(0.5 * (m.vertices[e[0]] + m.vertices[e[1]])));
    if (it != where.end()) return "hanging node";
  }
  return {};
}

}  // namespace opprecond
