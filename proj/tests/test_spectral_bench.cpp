#include <gtest/gtest.h>

#include "opprecond/bench.hpp"
#include "opprecond/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>
#include <sstream>

using namespace opprecond;

namespace {

Eigen::MatrixXd random_spd(int n, std::uint64_t seed, double shift) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd X(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) X(i, j) = u(rng);
  return X * X.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
}

RawConfig raw_of(const std::string& text) {
  std::istringstream is(text);
  return parse_config_text(is);
}

ExperimentConfig cfg_of(const std::string& text) { return config_from_raw(raw_of(text)); }

std::string config_error(const std::string& text) {
  try {
    cfg_of(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

TEST(DenseKappa, DiagonalAndIdentity) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(5, 5);
  const auto r = dense_kappa(I, I);
  EXPECT_NEAR(r.kappa, 1.0, 1e-15);
  EXPECT_EQ(r.method, "dense");
  const Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(5, 1.0, 9.0);
  const auto r2 = dense_kappa(I, d.asDiagonal());
  EXPECT_NEAR(r2.lambda_min, 1.0, 1e-14);
  EXPECT_NEAR(r2.lambda_max, 9.0, 1e-14);
  EXPECT_NEAR(r2.kappa, 9.0, 1e-14);
  // G = A^-1 is perfect
  const Eigen::MatrixXd A = random_spd(12, 3, 0.1);
  EXPECT_NEAR(dense_kappa(A.inverse(), A).kappa, 1.0, 1e-9);
}

TEST(DenseKappa, MatchesNonsymmetricEigenSolver) {
  const Eigen::MatrixXd A = random_spd(50, 1, 0.5), G = random_spd(50, 2, 0.5);
  const auto r = dense_kappa(G, A);
  const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(G * A).eigenvalues();
  double lo = 1e300, hi = 0.0;
  for (int i = 0; i < ev.size(); ++i) {
    EXPECT_LT(std::abs(ev[i].imag()), 1e-8 * std::abs(ev[i].real()));
    lo = std::min(lo, ev[i].real());
    hi = std::max(hi, ev[i].real());
  }
  EXPECT_NEAR(r.lambda_min / lo, 1.0, 1e-10);
  EXPECT_NEAR(r.lambda_max / hi, 1.0, 1e-10);
  const Eigen::VectorXd all = dense_spectrum(G, A);
  EXPECT_NEAR(all[0], r.lambda_min, 1e-10 * r.lambda_max);
  EXPECT_NEAR(all[49], r.lambda_max, 1e-10 * r.lambda_max);
}

TEST(DenseKappa, Errors) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_THROW(dense_kappa(I, Eigen::MatrixXd::Identity(3, 3)), std::invalid_argument);
  EXPECT_THROW(dense_kappa(I, I, 3), std::invalid_argument);
  Eigen::MatrixXd N = I;
  N(2, 2) = -1.0;
  EXPECT_THROW(dense_kappa(I, N), std::runtime_error);
  EXPECT_THROW(dense_kappa(N, I), std::runtime_error);
}

TEST(Lanczos, ExactPreconditionerConvergesAtOnce) {
  const Eigen::MatrixXd A = random_spd(40, 5, 1.0);
  const Eigen::LLT<Eigen::MatrixXd> llt(A);
  const auto r = lanczos_kappa([&](const Eigen::VectorXd& x) { return Eigen::VectorXd(llt.solve(x)); },
                               [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); }, 40);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_NEAR(r.kappa, 1.0, 1e-10);
}

TEST(Lanczos, AgreesWithDenseAndIsReproducible) {
  const int n = 120;
  const Eigen::MatrixXd A = random_spd(n, 7, 0.05), G = random_spd(n, 8, 0.5);
  auto ga = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(G * x); };
  auto aa = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); };
  const auto d = dense_kappa(G, A);
  const auto r = lanczos_kappa(ga, aa, n, 1e-10, 0, 42);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.kappa / d.kappa, 1.0, 1e-6);
  // Ritz extremes move monotonically outward
  for (std::size_t k = 1; k < r.ritz_min.size(); ++k) {
    EXPECT_LE(r.ritz_min[k], r.ritz_min[k - 1] * (1 + 1e-12));
    EXPECT_GE(r.ritz_max[k], r.ritz_max[k - 1] * (1 - 1e-12));
  }
  const auto again = lanczos_kappa(ga, aa, n, 1e-10, 0, 42);
  EXPECT_EQ(again.csv_row(), r.csv_row());
  const auto other = lanczos_kappa(ga, aa, n, 1e-10, 0, 43);
  EXPECT_NEAR(other.kappa / r.kappa, 1.0, 1e-6);
}

TEST(Lanczos, IterationCapAndErrors) {
  const int n = 80;
  const Eigen::MatrixXd A = random_spd(n, 9, 0.01);
  auto id = [](const Eigen::VectorXd& x) { return x; };
  auto aa = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); };
  const auto r = lanczos_kappa(id, aa, n, 1e-14, 5, 1);
  EXPECT_EQ(r.iterations, 5);
  EXPECT_FALSE(r.converged);
  EXPECT_THROW(lanczos_kappa(id, aa, 0), std::invalid_argument);
  EXPECT_THROW(lanczos_kappa(id, aa, n, 0.0), std::invalid_argument);
}

TEST(SpectrumReport, CsvRow) {
  SpectrumReport r;
  r.method = "lanczos";
  r.n = 10;
  r.iterations = 3;
  r.lambda_min = 0.5;
  r.lambda_max = 2.0;
  r.kappa = 4.0;
  r.seed = 9;
  r.tol = 1e-8;
  EXPECT_EQ(r.csv_row(), "lanczos,10,3,0.5,2,4,9,1e-08");
}

TEST(Config, GeometryRequired) {
  EXPECT_EQ(config_error(""), "geometry required");
  EXPECT_EQ(config_error("# only a comment\n[mesh]\n"), "geometry required");
}

TEST(Config, DefaultsAndLists) {
  auto cfg = cfg_of("[mesh]\ngeometry = polygon\n");
  EXPECT_EQ(cfg.levels, 1);
  EXPECT_EQ(cfg.betas(), std::vector<double>{1.25});
  EXPECT_EQ(cfg.sobolev_index(), 0.5);
  EXPECT_EQ(cfg.precond, std::vector<std::string>{"new"});
  EXPECT_EQ(cfg.dense_eig_max_n, 2048);
  cfg = cfg_of("[mesh]\ngeometry = polygon\nrefine = corner-local\n[precond]\nprecond = [new, jacobi]\n");
  EXPECT_EQ(cfg.betas(), std::vector<double>{1.2});
  EXPECT_EQ(cfg.precond, (std::vector<std::string>{"new", "jacobi"}));
  cfg = cfg_of("[mesh]\ngeometry = polygon\n[precond]\nbeta = [0.5, 1, 2.5]  # sweep\n");
  EXPECT_EQ(cfg.betas(), (std::vector<double>{0.5, 1.0, 2.5}));
  cfg = cfg_of("[mesh]\ngeometry = polygon\n[precond]\nbeta = 3\n[discretization]\nspace = cg3\n");
  EXPECT_EQ(cfg.betas(), std::vector<double>{3.0});
  EXPECT_EQ(cfg.kind, SpaceKind::cont);
  EXPECT_EQ(cfg.degree, 3);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(config_error("[mesh]\ngeometry = polygon\ncolour = red\n"), "line 3: unknown key 'colour'");
  EXPECT_EQ(config_error("[meshes]\n"), "line 1: unknown section [meshes]");
  EXPECT_EQ(config_error("[mesh]\ngeometry = polygon\nlevels = many\n").rfind("line 3: levels:", 0), 0u);
  EXPECT_EQ(config_error("[mesh]\ngeometry = polygon\n[operator]\nlevels = 2\n"),
            "line 4: key 'levels' belongs to [mesh]");
  EXPECT_EQ(config_error("[mesh]\ngeometry\n"), "line 2: expected 'key = value'");
  EXPECT_EQ(config_error("[mesh]\ngeometry = polygon\n[discretization]\nspace = hp2\n").rfind("line 4:", 0), 0u);
}

TEST(Config, SemanticChecks) {
  EXPECT_NE(config_error("[mesh]\ngeometry = polygon\n[operator]\ns = 1\n").find("inconsistent"), std::string::npos);
  EXPECT_NE(config_error("[mesh]\ngeometry = polygon\n[precond]\nprecond = opp\n").find("higher-order"),
            std::string::npos);
  EXPECT_NE(config_error("[mesh]\ngeometry = unit-square\n").find("closed curve"), std::string::npos);
  EXPECT_NE(config_error("[mesh]\ngeometry = polygon\n[operator]\nbackend = order2\n").find("order2"),
            std::string::npos);
  EXPECT_NE(config_error("[mesh]\ngeometry = ellipse\n").find("geometry:"), std::string::npos);
  EXPECT_NE(config_error("[mesh]\ngeometry = polygon\n[precond]\nbeta = [1, -2]\n").find("positive"),
            std::string::npos);
  EXPECT_EQ(config_error("[mesh]\ngeometry = polygon\n[operator]\ns = 0.5\n"), "");
}

TEST(Config, OverridesWin) {
  RawConfig raw = raw_of("[mesh]\ngeometry = polygon\nlevels = 3\n");
  raw["levels"] = RawEntry{"5", 0};
  EXPECT_EQ(config_from_raw(raw).levels, 5);
  raw["seed"] = RawEntry{"x", 0};
  try {
    config_from_raw(raw);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("option --seed", 0), 0u);
  }
  EXPECT_NE(config_help().find("[precond] beta"), std::string::npos);
}

TEST(Experiment, IdentityCubeDofLadder) {
  auto cfg = cfg_of("[mesh]\ngeometry = cube-surface\nlevels = 4\n[operator]\nbackend = identity\n");
  const auto res = run_experiment(cfg);
  ASSERT_TRUE(res.failures.empty());
  ASSERT_EQ(res.rows.size(), 4u);
  const int dofs[] = {12, 48, 192, 768};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(res.rows[i].level, i + 1);
    EXPECT_EQ(res.rows[i].dofs, dofs[i]);
    EXPECT_EQ(res.rows[i].method, "dense");
    EXPECT_GT(res.rows[i].kappa, 1.0);
    EXPECT_LT(res.rows[i].kappa, 3.0);
  }
}

TEST(Experiment, CornerLocalShrinksSmallestElement) {
  auto cfg = cfg_of("[mesh]\ngeometry = polygon\nrefine = corner-local\nlevels = 5\n[precond]\nprecond = [new, jacobi]\n");
  const auto res = run_experiment(cfg);
  ASSERT_TRUE(res.failures.empty());
  std::vector<double> hmin;
  for (const auto& r : res.rows)
    if (r.variant == "disc0") hmin.push_back(r.h_min);
  ASSERT_EQ(hmin.size(), 5u);
  for (std::size_t k = 1; k < hmin.size(); ++k) EXPECT_NEAR(hmin[k], hmin[k - 1] / 2, 1e-15);
}

TEST(Experiment, BetaSweepColumnsAndMinimizer) {
  auto cfg = cfg_of("[mesh]\ngeometry = polygon\nlevels = 3\n[precond]\nprecond = [new, jacobi]\nbeta = [0.1, 1.25, 30]\n");
  const auto res = run_experiment(cfg);
  ASSERT_TRUE(res.failures.empty());
  EXPECT_EQ(res.rows.size(), 3u * 4u);
  std::ostringstream table;
  write_table(table, res);
  const std::string t = table.str();
  for (const char* col : {"disc0[beta=0.1]", "disc0[beta=1.25]", "disc0[beta=30]", "jacobi"})
    EXPECT_NE(t.find(col), std::string::npos) << col;
  // the minimizer line agrees with a direct scan of the rows
  std::map<std::string, double> worst;
  for (const auto& r : res.rows)
    if (r.variant != "jacobi") worst[r.variant] = std::max(worst[r.variant], r.kappa);
  const auto best = std::min_element(worst.begin(), worst.end(), [](auto& a, auto& b) { return a.second < b.second; });
  const std::string b = best->first.substr(best->first.find('=') + 1, best->first.size() - best->first.find('=') - 2);
  EXPECT_NE(t.find("best disc0: beta = " + b + " "), std::string::npos) << t;
}

TEST(Experiment, CsvMatchesTableAndIsDeterministic) {
  auto cfg = cfg_of("[mesh]\ngeometry = polygon\nlevels = 3\n[discretization]\nspace = dg1\n[precond]\nprecond = [new, opp, jacobi]\n");
  const auto a = run_experiment(cfg), b = run_experiment(cfg);
  std::ostringstream ca, cb, table;
  write_csv(ca, a);
  write_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  const auto lines = split(ca.str(), '\n');
  ASSERT_EQ(lines.size(), 1u + 9u);
  EXPECT_EQ(lines[0], csv_header());
  write_table(table, a);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i], ',');
    ASSERT_EQ(f.size(), 9u);  // trailing empty apply_s column is dropped by getline
    EXPECT_EQ(f[8], "");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", std::stod(f[5]));
    EXPECT_NE(table.str().find(buf), std::string::npos) << buf;
  }
}

TEST(Experiment, TimingsFilledOnRequest) {
  auto cfg = cfg_of("[mesh]\ngeometry = polygon\n[output]\ntimings = true\n");
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.rows.size(), 1u);
  EXPECT_GE(res.rows[0].setup_s, 0.0);
  EXPECT_GE(res.rows[0].apply_s, 0.0);
}

TEST(Experiment, LanczosPathAboveDenseLimit) {
  auto cfg = cfg_of("[mesh]\ngeometry = polygon\nlevels = 2\n[spectral]\ndense_eig_max_n = 5\n");
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_EQ(res.rows[0].method, "dense");
  EXPECT_EQ(res.rows[1].method, "lanczos");
  auto dense = cfg;
  dense.dense_eig_max_n = 2048;
  EXPECT_NEAR(res.rows[1].kappa / run_experiment(dense).rows[1].kappa, 1.0, 1e-6);
}

TEST(Experiment, OracleGuardFailureGivesExitOne) {
  auto cfg = cfg_of("[mesh]\ngeometry = unit-square\nelements = 2\n[operator]\nbackend = order2\noracle_depth = 2\n");
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.failures.size(), 1u);
  EXPECT_NE(res.failures[0].find("oracle guard"), std::string::npos);
  EXPECT_EQ(res.exit_code(), 1);
  std::ostringstream out, err;
  EXPECT_EQ(run_and_report(cfg, out, err), 1);
  EXPECT_NE(out.str().find("FAILED level 1"), std::string::npos);
}
