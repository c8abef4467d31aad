#pragma once

#include "opprecond/discretization.hpp"
#include "opprecond/mesh.hpp"
#include "opprecond/precond.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace opprecond {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Mesh text format:
//   meshdim <d> embeddim <d'>
//   vertices <n>      + n lines of d' coordinates
//   simplices <m>     + m lines of d+1 vertex indices
//   dirichlet <k>     + k lines of d vertex indices   (optional)
//   charts <m>        + m integer labels               (optional)

inline void write_mesh(std::ostream& os, const SimplicialMesh& m) {
  os << "meshdim " << m.dim << " embeddim " << m.embed_dim << "\n";
  os << "vertices " << m.n_vertices() << "\n";
  for (const auto& v : m.vertices) {
    for (int k = 0; k < m.embed_dim; ++k) os << (k ? " " : "") << fmt17(v[k]);
    os << "\n";
  }
  os << "simplices " << m.n_simplices() << "\n";
  for (const auto& s : m.simplices) {
    for (int k = 0; k <= m.dim; ++k) os << (k ? " " : "") << s[k];
    os << "\n";
  }
  if (!m.dirichlet.empty()) {
    os << "dirichlet " << m.dirichlet.size() << "\n";
    for (const auto& f : m.dirichlet) {
      for (int k = 0; k < m.dim; ++k) os << (k ? " " : "") << f[k];
      os << "\n";
    }
  }
  if (!m.chart_id.empty()) {
    os << "charts " << m.chart_id.size() << "\n";
    for (int c : m.chart_id) os << c << "\n";
  }
}

namespace detail {

struct LineReader {
  std::istream& is;
  int line = 0;

  bool next(std::istringstream& out) {
    std::string s;
    while (std::getline(is, s)) {
      ++line;
      if (s.find_first_not_of(" \t\r") == std::string::npos) continue;
      out.clear();
      out.str(s);
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("line " + std::to_string(line) + ": " + what);
  }
  std::istringstream expect() {
    std::istringstream ls;
    if (!next(ls)) fail("unexpected end of input");
    return ls;
  }
};

}  // namespace detail

/// Reads the text format; `closed` is inferred from face counts. Charts are labels only.
inline SimplicialMesh read_mesh(std::istream& is) {
  detail::LineReader rd{is};
  SimplicialMesh m;
  {
    auto ls = rd.expect();
    std::string a, b;
    if (!(ls >> a >> m.dim >> b >> m.embed_dim) || a != "meshdim" || b != "embeddim") rd.fail("expected 'meshdim d embeddim e'");
    if (m.dim < 1 || m.dim > 2 || m.embed_dim < m.dim || m.embed_dim > 3) rd.fail("unsupported dimensions");
  }
  std::istringstream ls;
  std::string key;
  int count = 0;
  bool have_v = false, have_s = false;
  while (rd.next(ls)) {
    if (!(ls >> key >> count) || count < 0) rd.fail("expected '<section> <count>'");
    if (key == "vertices") {
      m.vertices.assign(count, Point::Zero());
      for (int i = 0; i < count; ++i) {
        auto l = rd.expect();
        for (int k = 0; k < m.embed_dim; ++k)
          if (!(l >> m.vertices[i][k])) rd.fail("bad coordinate");
      }
      have_v = true;
    } else if (key == "simplices") {
      m.simplices.assign(count, {-1, -1, -1});
      for (int i = 0; i < count; ++i) {
        auto l = rd.expect();
        for (int k = 0; k <= m.dim; ++k)
          if (!(l >> m.simplices[i][k]) || m.simplices[i][k] < 0 || m.simplices[i][k] >= m.n_vertices())
            rd.fail("bad vertex index");
      }
      have_s = true;
    } else if (key == "dirichlet") {
      m.dirichlet.assign(count, {-1, -1});
      for (int i = 0; i < count; ++i) {
        auto l = rd.expect();
        for (int k = 0; k < m.dim; ++k)
          if (!(l >> m.dirichlet[i][k]) || m.dirichlet[i][k] < 0 || m.dirichlet[i][k] >= m.n_vertices())
            rd.fail("bad vertex index");
        if (m.dim == 2 && m.dirichlet[i][0] > m.dirichlet[i][1]) std::swap(m.dirichlet[i][0], m.dirichlet[i][1]);
      }
    } else if (key == "charts") {
      m.chart_id.assign(count, 0);
      for (int i = 0; i < count; ++i) {
        auto l = rd.expect();
        if (!(l >> m.chart_id[i])) rd.fail("bad chart label");
      }
    } else {
      rd.fail("unknown section '" + key + "'");
    }
  }
  if (!have_v || !have_s) throw std::runtime_error("mesh: vertices and simplices sections are required");
  if (!m.chart_id.empty() && m.chart_id.size() != m.simplices.size())
    throw std::runtime_error("mesh: charts count differs from simplices count");
  std::map<std::array<int, 2>, int> faces;
  for (const auto& s : m.simplices) {
    if (m.dim == 1) {
      faces[{s[0], -1}]++;
      faces[{s[1], -1}]++;
    } else {
      for (int i = 0; i < 3; ++i) faces[detail::sorted_edge(s[i], s[(i + 1) % 3])]++;
    }
  }
  m.closed = !faces.empty();
  for (const auto& [f, n] : faces)
    if (n != 2) m.closed = false;
  return m;
}

/// Coordinate text format, one `row col value` line per stored entry.
inline void write_coo(std::ostream& os, const SpMat& a) {
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) os << it.row() << " " << it.col() << " " << fmt17(it.value()) << "\n";
}

inline SpMat read_coo(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  detail::LineReader rd{is};
  std::istringstream ls;
  std::vector<Triplet> t;
  while (rd.next(ls)) {
    long r = 0, c = 0;
    double v = 0.0;
    if (!(ls >> r >> c >> v) || r < 0 || c < 0 || r >= rows || c >= cols) rd.fail("bad coordinate entry");
    t.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
  }
  SpMat a(rows, cols);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// Dense row-major text: header `dense <rows> <cols>` then one line per row.
inline void write_dense(std::ostream& os, const Eigen::MatrixXd& a) {
  os << "dense " << a.rows() << " " << a.cols() << "\n";
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) os << (j ? " " : "") << fmt17(a(i, j));
    os << "\n";
  }
}

inline Eigen::MatrixXd read_dense(std::istream& is) {
  detail::LineReader rd{is};
  auto hs = rd.expect();
  std::string tag;
  long r = 0, c = 0;
  if (!(hs >> tag >> r >> c) || tag != "dense" || r < 0 || c < 0) rd.fail("expected 'dense rows cols'");
  Eigen::MatrixXd a(r, c);
  for (long i = 0; i < r; ++i) {
    auto l = rd.expect();
    for (long j = 0; j < c; ++j)
      if (!(l >> a(i, j))) rd.fail("bad matrix entry");
  }
  return a;
}

/// Diagonal vectors: one value per line.
inline void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) os << fmt17(v[i]) << "\n";
}

inline Eigen::VectorXd read_vector(std::istream& is) {
  detail::LineReader rd{is};
  std::istringstream ls;
  std::vector<double> vals;
  while (rd.next(ls)) {
    double x = 0.0;
    if (!(ls >> x)) rd.fail("bad value");
    vals.push_back(x);
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

/// Writes D and BB (and C1) as vectors, p, q, R, S in coordinate format: `<prefix>.<name>.txt`.
inline void write_factors(const std::string& prefix, const PrecondFactors& F) {
  auto open = [&](const std::string& name) {
    std::ofstream f(prefix + "." + name + ".txt");
    if (!f) throw std::runtime_error("cannot write " + prefix + "." + name + ".txt");
    return f;
  };
  if (F.variant == Variant::jacobi) {
    auto f = open("Ginv");
    write_vector(f, F.jacobi.cwiseInverse());
    return;
  }
  { auto f = open("D"); write_vector(f, F.D); }
  { auto f = open("BB"); write_vector(f, F.BB); }
  { auto f = open("p"); write_coo(f, F.p); }
  { auto f = open("q"); write_coo(f, F.q); }
  if (F.n1 > 0) {
    { auto f = open("C1"); write_vector(f, F.C1); }
    if (F.variant == Variant::cont_high_ssc) {
      auto f = open("S");
      write_coo(f, F.S);
    } else {
      auto f = open("R");
      write_coo(f, F.R);
    }
  }
}

}  // namespace opprecond
