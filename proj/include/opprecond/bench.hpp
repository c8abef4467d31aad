#pragma once

#include "opprecond/discretization.hpp"
#include "opprecond/io.hpp"
#include "opprecond/mesh.hpp"
#include "opprecond/operators.hpp"
#include "opprecond/precond.hpp"
#include "opprecond/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace opprecond {

/// Configuration problems (exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Refinement { uniform, corner_local };

inline Refinement parse_refinement(const std::string& s) {
  if (s == "uniform") return Refinement::uniform;
  if (s == "corner-local" || s == "corner_local") return Refinement::corner_local;
  throw std::invalid_argument("unknown refinement '" + s + "' (uniform|corner-local)");
}

inline std::string refinement_name(Refinement r) { return r == Refinement::uniform ? "uniform" : "corner-local"; }

struct ExperimentConfig {
  std::optional<GeometrySpec> geometry;
  Refinement refine = Refinement::uniform;
  int levels = 1;
  SpaceKind kind = SpaceKind::disc;
  int degree = 0;
  Backend backend = Backend::sl_curve;
  std::optional<double> s;
  double alpha = 0.05;
  std::vector<double> beta;  // empty: 1.25 (uniform) or 1.2 (corner-local)
  std::vector<std::string> precond{"new"};
  int oracle_depth = 4;
  bool oracle_guard = true;
  int dense_eig_max_n = default_dense_eig_max_n;
  std::uint64_t seed = 1;
  double tol = 1e-8;
  int max_iters = 0;
  std::string out;    // CSV path, empty: none
  std::string table;  // text table path, empty: stdout only
  bool timings = false;

  double sobolev_index() const { return s ? *s : backend_sobolev_index(backend); }
  std::vector<double> betas() const {
    if (!beta.empty()) return beta;
    return {refine == Refinement::uniform ? 1.25 : 1.2};
  }
};

struct ConfigKey {
  const char* section;
  const char* key;
  const char* def;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"mesh", "geometry", "(required)", "interval|polygon|ellipse|unit-square|cube-surface"},
      {"mesh", "elements", "1", "elements per side (polygon, square, cube) or in total (interval, ellipse)"},
      {"mesh", "sides", "4", "polygon sides"},
      {"mesh", "radius", "0.25", "polygon circumradius"},
      {"mesh", "ellipse_a", "0.25", "ellipse semi-axis along x"},
      {"mesh", "ellipse_b", "0.125", "ellipse semi-axis along y"},
      {"mesh", "length", "1", "interval length, square and cube side"},
      {"mesh", "dirichlet", "none", "none|all|left|right"},
      {"mesh", "refine", "uniform", "uniform|corner-local"},
      {"mesh", "levels", "1", "number of meshes, level 1 is the initial mesh"},
      {"discretization", "space", "dg0", "dgK (discontinuous, degree K) or cgK (continuous, degree K)"},
      {"operator", "backend", "sl-curve", "sl-curve|order2|identity"},
      {"operator", "s", "backend", "Sobolev index, must match the backend (1/2, 1, 0)"},
      {"operator", "alpha", "0.05", "rank-one stabilization of the hypersingular operator"},
      {"operator", "oracle_depth", "4", "uniform refinements of the order2 reference mesh"},
      {"operator", "oracle_guard", "true", "fail a level if the order2 matrix moves >= 1% between depths"},
      {"precond", "precond", "new", "list of new|jacobi|opp|ssc"},
      {"precond", "beta", "1.25 uniform, 1.2 corner-local", "scalar or list [b1, b2, ...]"},
      {"spectral", "dense_eig_max_n", "2048", "largest n for the dense eigen-solver"},
      {"spectral", "seed", "1", "Lanczos start vector seed"},
      {"spectral", "tol", "1e-8", "Lanczos relative tolerance"},
      {"spectral", "max_iters", "min(n, 300)", "Lanczos iteration cap"},
      {"output", "out", "", "CSV path"},
      {"output", "table", "", "text table path (always printed to stdout)"},
      {"output", "timings", "false", "fill setup_s and apply_s columns"},
  };
  return keys;
}

inline std::string config_help() {
  std::ostringstream os;
  os << "Config keys ([section] key = default):\n";
  for (const auto& k : config_keys())
    os << "  [" << k.section << "] " << k.key << " = " << k.def << "    " << k.help << "\n";
  return os.str();
}

/// One `key = value` assignment; line 0 marks a command-line override.
struct RawEntry {
  std::string value;
  int line = 0;
};
using RawConfig = std::map<std::string, RawEntry>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline const ConfigKey* find_key(const std::string& key) {
  for (const auto& k : config_keys())
    if (key == k.key) return &k;
  return nullptr;
}

inline std::string where(const RawEntry& e, const std::string& key) {
  return e.line > 0 ? "line " + std::to_string(e.line) : "option --" + key;
}

inline std::vector<std::string> split_list(std::string v) {
  v = trim(v);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw std::invalid_argument("unterminated list");
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty list item");
    out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

inline double to_double(const std::string& v) {
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not a number: '" + v + "'");
  return x;
}

inline long long to_int(const std::string& v) {
  std::size_t pos = 0;
  const long long x = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not an integer: '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

}  // namespace detail

/// Parses `key = value` lines, `[section]` headers and `#` comments.
inline RawConfig parse_config_text(std::istream& is) {
  RawConfig raw;
  std::string section, line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(no) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& k : config_keys()) known = known || section == k.section;
      if (!known) throw ConfigError("line " + std::to_string(no) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const ConfigKey* k = detail::find_key(key);
    if (!k) throw ConfigError("line " + std::to_string(no) + ": unknown key '" + key + "'");
    if (!section.empty() && section != k->section)
      throw ConfigError("line " + std::to_string(no) + ": key '" + key + "' belongs to [" + k->section + "]");
    if (value.empty()) throw ConfigError("line " + std::to_string(no) + ": missing value for '" + key + "'");
    raw[key] = RawEntry{value, no};
  }
  return raw;
}

/// Converts and validates. Entries override defaults.
inline ExperimentConfig config_from_raw(const RawConfig& raw) {
  ExperimentConfig cfg;
  GeometrySpec g;
  bool has_geometry = false;
  for (const auto& [key, e] : raw) {
    if (!detail::find_key(key)) throw ConfigError(detail::where(e, key) + ": unknown key '" + key + "'");
    const std::string& v = e.value;
    try {
      if (key == "geometry") {
        g.kind = parse_geometry(v);
        has_geometry = true;
      } else if (key == "elements") {
        g.elements = static_cast<int>(detail::to_int(v));
      } else if (key == "sides") {
        g.sides = static_cast<int>(detail::to_int(v));
      } else if (key == "radius") {
        g.radius = detail::to_double(v);
      } else if (key == "ellipse_a") {
        g.ellipse_a = detail::to_double(v);
      } else if (key == "ellipse_b") {
        g.ellipse_b = detail::to_double(v);
      } else if (key == "length") {
        g.length = detail::to_double(v);
      } else if (key == "dirichlet") {
        g.dirichlet = parse_dirichlet(v);
      } else if (key == "refine") {
        cfg.refine = parse_refinement(v);
      } else if (key == "levels") {
        cfg.levels = static_cast<int>(detail::to_int(v));
        if (cfg.levels < 1) throw std::invalid_argument("levels must be >= 1");
      } else if (key == "space") {
        if (v.size() < 3 || (v.rfind("dg", 0) != 0 && v.rfind("cg", 0) != 0))
          throw std::invalid_argument("space must be dgK or cgK");
        cfg.kind = v[0] == 'd' ? SpaceKind::disc : SpaceKind::cont;
        cfg.degree = static_cast<int>(detail::to_int(v.substr(2)));
        if (cfg.degree < (cfg.kind == SpaceKind::disc ? 0 : 1)) throw std::invalid_argument("degree out of range");
      } else if (key == "backend") {
        cfg.backend = parse_backend(v);
      } else if (key == "s") {
        cfg.s = detail::to_double(v);
      } else if (key == "alpha") {
        cfg.alpha = detail::to_double(v);
        if (!(cfg.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
      } else if (key == "oracle_depth") {
        cfg.oracle_depth = static_cast<int>(detail::to_int(v));
      } else if (key == "oracle_guard") {
        cfg.oracle_guard = detail::to_bool(v);
      } else if (key == "precond") {
        cfg.precond = detail::split_list(v);
        for (const auto& p : cfg.precond)
          if (p != "new" && p != "jacobi" && p != "opp" && p != "ssc")
            throw std::invalid_argument("unknown preconditioner '" + p + "' (new|jacobi|opp|ssc)");
      } else if (key == "beta") {
        cfg.beta.clear();
        for (const auto& b : detail::split_list(v)) {
          cfg.beta.push_back(detail::to_double(b));
          if (!(cfg.beta.back() > 0.0)) throw std::invalid_argument("beta must be positive");
        }
      } else if (key == "dense_eig_max_n") {
        cfg.dense_eig_max_n = static_cast<int>(detail::to_int(v));
      } else if (key == "seed") {
        const long long sd = detail::to_int(v);
        if (sd < 0) throw std::invalid_argument("seed must be nonnegative");
        cfg.seed = static_cast<std::uint64_t>(sd);
      } else if (key == "tol") {
        cfg.tol = detail::to_double(v);
        if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
      } else if (key == "max_iters") {
        cfg.max_iters = static_cast<int>(detail::to_int(v));
      } else if (key == "out") {
        cfg.out = v;
      } else if (key == "table") {
        cfg.table = v;
      } else if (key == "timings") {
        cfg.timings = detail::to_bool(v);
      }
    } catch (const std::exception& ex) {
      throw ConfigError(detail::where(e, key) + ": " + key + ": " + ex.what());
    }
  }
  if (!has_geometry) throw ConfigError("geometry required");
  try {
    (void)make_structured(g);
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("geometry: ") + ex.what());
  }
  cfg.geometry = g;

  const double sb = backend_sobolev_index(cfg.backend);
  if (cfg.s && *cfg.s != sb)
    throw ConfigError("s = " + fmt17(*cfg.s) + " is inconsistent with backend " + backend_name(cfg.backend) +
                      " (expects " + fmt17(sb) + ")");
  const bool curve = g.kind == Geometry::polygon || g.kind == Geometry::ellipse;
  const bool flat = g.kind == Geometry::interval || g.kind == Geometry::unit_square;
  if (cfg.backend == Backend::sl_curve && !curve) throw ConfigError("backend sl-curve needs a closed curve geometry");
  if (cfg.backend == Backend::order2 && !flat) throw ConfigError("backend order2 needs interval or unit-square");
  if (cfg.backend == Backend::order2 && cfg.oracle_depth < 2) throw ConfigError("oracle_depth must be >= 2");
  const bool lowest = cfg.degree == (cfg.kind == SpaceKind::disc ? 0 : 1);
  for (const auto& p : cfg.precond)
    if (lowest && (p == "opp" || p == "ssc"))
      throw ConfigError("precond " + p + " needs a higher-order space (dgK with K > 0 or cgK with K > 1)");
  if (cfg.dense_eig_max_n < 1) throw ConfigError("dense_eig_max_n must be positive");
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& path, const RawConfig& overrides = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  RawConfig raw = parse_config_text(f);
  for (const auto& [k, e] : overrides) raw[k] = e;
  return config_from_raw(raw);
}

// ---------------------------------------------------------------------------------------------

struct ResultRow {
  int level = 0;
  int dofs = 0;
  double h_min = 0.0;
  std::string variant, method;
  double kappa = 0.0, lambda_min = 0.0, lambda_max = 0.0;
  double setup_s = -1.0, apply_s = -1.0;  // negative: not measured
};

struct RunResult {
  std::vector<ResultRow> rows;
  std::vector<std::string> failures;
  std::vector<std::string> notes;
  int exit_code() const { return failures.empty() ? 0 : 1; }
};

inline const char* csv_header() { return "level,dofs,h_min,variant,method,kappa,lambda_min,lambda_max,setup_s,apply_s"; }

inline std::string csv_line(const ResultRow& r) {
  std::ostringstream os;
  os << r.level << "," << r.dofs << "," << fmt17(r.h_min) << "," << r.variant << "," << r.method << ","
     << fmt17(r.kappa) << "," << fmt17(r.lambda_min) << "," << fmt17(r.lambda_max) << ","
     << (r.setup_s >= 0.0 ? fmt17(r.setup_s) : "") << "," << (r.apply_s >= 0.0 ? fmt17(r.apply_s) : "");
  return os.str();
}

/// Resolves a preconditioner name against the trial space.
inline Variant resolve_variant(const std::string& name, const DofLayout& L) {
  const bool disc = L.kind == SpaceKind::disc;
  if (name == "jacobi") return Variant::jacobi;
  if (L.n_higher() == 0) {
    if (name != "new") throw std::invalid_argument("precond " + name + " needs a higher-order space");
    return disc ? Variant::disc0 : Variant::cont1;
  }
  if (name == "opp") return disc ? Variant::disc_high_opp : Variant::cont_high_opp;
  if (name == "ssc" || name == "new") return disc ? Variant::disc_high_ssc : Variant::cont_high_ssc;
  throw std::invalid_argument("unknown preconditioner '" + name + "'");
}

/// Builds the requested variant for the mesh and operator pair.
inline PrecondFactors build_variant(Variant v, const SimplicialMesh& m, const MeshCombinatorics& c, const DofLayout& L,
                                    const OperatorPair& op, double beta) {
  auto bs = std::make_shared<const OppositeOperator>(op.BS);
  switch (v) {
    case Variant::jacobi: return build_jacobi(op.A);
    case Variant::disc0: return build_disc0(m, c, bs, op.s, beta, &L);
    case Variant::cont1: return build_cont1(m, c, bs, op.s, beta, &L);
    case Variant::disc_high_opp:
    case Variant::cont_high_opp: return build_high_opp(m, c, L, assemble_hat_mass(m, L), bs, op.s, beta);
    case Variant::disc_high_ssc:
    case Variant::cont_high_ssc: return build_high_ssc(m, c, L, assemble_hat_mass(m, L), bs, op.s, beta);
  }
  throw std::invalid_argument("build_variant: unknown variant");
}

/// κ of G A: dense oracle when n <= dense_max, Lanczos otherwise.
inline SpectrumReport measure_kappa(const PrecondFactors& F, const Eigen::MatrixXd& A, int dense_max, double tol,
                                    int max_iters, std::uint64_t seed) {
  const int n = static_cast<int>(A.rows());
  if (n <= dense_max) return dense_kappa(F.dense(), A, dense_max);
  return lanczos_kappa([&](const Eigen::VectorXd& x) { return F.apply(x); },
                       [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); }, n, tol, max_iters, seed);
}

inline SimplicialMesh refine_once(const SimplicialMesh& m, Refinement r) {
  return r == Refinement::uniform ? uniform_refine(m) : corner_refine(m);
}

namespace detail {

inline std::string beta_label(double b) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", b);
  return buf;
}

inline std::string sig3(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

}  // namespace detail

/// Runs the ladder. Level failures are recorded and the level is skipped.
inline RunResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  using clock = std::chrono::steady_clock;
  RunResult res;
  if (!cfg.geometry) throw ConfigError("geometry required");
  SimplicialMesh mesh = make_structured(*cfg.geometry);
  const auto betas = cfg.betas();
  BackendOptions bopt;
  bopt.alpha = cfg.alpha;
  bopt.oracle_depth = cfg.oracle_depth;
  bopt.oracle_guard = cfg.oracle_guard;

  for (int level = 1; level <= cfg.levels; ++level) {
    if (level > 1) mesh = refine_once(mesh, cfg.refine);
    try {
      const MeshCombinatorics c = combinatorics(mesh);
      const DofLayout L = dof_layout(mesh, cfg.kind, cfg.degree);
      const OperatorPair op = assemble_pair(cfg.backend, mesh, c, L, bopt);
      if (cfg.backend == Backend::order2 && cfg.oracle_guard) {
        if (op.guard_change >= 0.01)
          throw std::runtime_error("oracle guard: relative change " + fmt17(op.guard_change) + " >= 1%");
        res.notes.push_back("level " + std::to_string(level) + ": oracle change " + detail::sig3(op.guard_change));
      }
      std::vector<std::pair<Variant, std::string>> todo;
      for (const auto& name : cfg.precond) {
        const Variant v = resolve_variant(name, L);
        bool seen = false;
        for (const auto& t : todo) seen = seen || t.first == v;
        if (!seen) todo.emplace_back(v, name);
      }
      for (const auto& [v, name] : todo) {
        const std::vector<double> bs = v == Variant::jacobi ? std::vector<double>{betas.front()} : betas;
        for (double beta : bs) {
          ResultRow row;
          row.level = level;
          row.dofs = L.n_dofs;
          row.h_min = c.h_min();
          row.variant = variant_name(v);
          if (v != Variant::jacobi && betas.size() > 1) row.variant += "[beta=" + detail::beta_label(beta) + "]";
          const auto t0 = clock::now();
          const PrecondFactors F = build_variant(v, mesh, c, L, op, beta);
          const auto t1 = clock::now();
          const SpectrumReport rep = measure_kappa(F, op.A, cfg.dense_eig_max_n, cfg.tol, cfg.max_iters, cfg.seed);
          if (!rep.converged) res.notes.push_back("level " + std::to_string(level) + " " + row.variant + ": Lanczos not converged");
          row.method = rep.method;
          row.kappa = rep.kappa;
          row.lambda_min = rep.lambda_min;
          row.lambda_max = rep.lambda_max;
          if (cfg.timings) {
            row.setup_s = std::chrono::duration<double>(t1 - t0).count();
            std::mt19937_64 rng(cfg.seed);
            std::normal_distribution<double> nd;
            Eigen::VectorXd r(L.n_dofs);
            for (int i = 0; i < L.n_dofs; ++i) r[i] = nd(rng);
            const int reps = 5;
            const auto a0 = clock::now();
            volatile double sink = 0.0;
            for (int k = 0; k < reps; ++k) sink = sink + F.apply(r)[0];
            const auto a1 = clock::now();
            row.apply_s = std::chrono::duration<double>(a1 - a0).count() / reps;
          }
          res.rows.push_back(row);
        }
      }
      if (log) *log << "level " << level << ": dofs " << L.n_dofs << " done\n";
    } catch (const std::exception& ex) {
      res.failures.push_back("level " + std::to_string(level) + ": " + ex.what());
      if (log) *log << "level " << level << " failed: " << ex.what() << "\n";
    }
  }
  return res;
}

inline void write_csv(std::ostream& os, const RunResult& res) {
  os << csv_header() << "\n";
  for (const auto& r : res.rows) os << csv_line(r) << "\n";
}

/// Per base variant (label without the beta suffix), the beta minimizing the largest κ over levels.
inline std::vector<std::string> beta_minimizers(const RunResult& res) {
  std::map<std::string, std::map<std::string, double>> worst;  // base -> beta -> max kappa
  for (const auto& r : res.rows) {
    const auto p = r.variant.find("[beta=");
    if (p == std::string::npos) continue;
    const std::string base = r.variant.substr(0, p);
    const std::string b = r.variant.substr(p + 6, r.variant.size() - p - 7);
    auto& w = worst[base][b];
    w = std::max(w, r.kappa);
  }
  std::vector<std::string> out;
  for (const auto& [base, m] : worst) {
    auto best = std::min_element(m.begin(), m.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    out.push_back(base + ": beta = " + best->first + " (max kappa " + detail::sig3(best->second) + ")");
  }
  return out;
}

/// Aligned text table: one row per level, one κ column per variant.
inline void write_table(std::ostream& os, const RunResult& res) {
  std::vector<std::string> cols;
  std::map<int, std::pair<int, double>> levels;
  std::map<std::pair<int, std::string>, double> kap;
  for (const auto& r : res.rows) {
    if (std::find(cols.begin(), cols.end(), r.variant) == cols.end()) cols.push_back(r.variant);
    levels[r.level] = {r.dofs, r.h_min};
    kap[{r.level, r.variant}] = r.kappa;
  }
  std::vector<std::size_t> w;
  for (const auto& c : cols) w.push_back(std::max<std::size_t>(c.size(), 8));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%5s %8s %10s", "level", "dofs", "h_min");
  os << buf;
  for (std::size_t i = 0; i < cols.size(); ++i) os << "  " << std::string(w[i] - cols[i].size(), ' ') << cols[i];
  os << "\n";
  for (const auto& [lv, dh] : levels) {
    std::snprintf(buf, sizeof buf, "%5d %8d %10.3e", lv, dh.first, dh.second);
    os << buf;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto it = kap.find({lv, cols[i]});
      const std::string v = it == kap.end() ? "-" : detail::sig3(it->second);
      os << "  " << std::string(w[i] - v.size(), ' ') << v;
    }
    os << "\n";
  }
  for (const auto& m : beta_minimizers(res)) os << "best " << m << "\n";
  for (const auto& f : res.failures) os << "FAILED " << f << "\n";
}

/// Runs and writes outputs; returns the process exit code (0 ok, 1 level failure).
inline int run_and_report(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const RunResult res = run_experiment(cfg, nullptr);
  write_table(out, res);
  if (!cfg.table.empty()) {
    std::ofstream f(cfg.table);
    if (!f) throw std::runtime_error("cannot write '" + cfg.table + "'");
    write_table(f, res);
  }
  if (!cfg.out.empty()) {
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + cfg.out + "'");
    write_csv(f, res);
  }
  for (const auto& n : res.notes) err << "note: " << n << "\n";
  for (const auto& f : res.failures) err << "error: " << f << "\n";
  return res.exit_code();
}

}  // namespace opprecond
