#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace opprecond {

struct SpectrumReport {
  double lambda_min = 0.0, lambda_max = 0.0, kappa = 0.0;
  std::string method;  // "dense" | "lanczos"
  int iterations = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  bool converged = true;
  int n = 0;
  std::vector<double> ritz_min, ritz_max;  // lanczos: extreme Ritz values per iteration

  /// method,n,iterations,lambda_min,lambda_max,kappa,seed,tol
  std::string csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g,%.17g,%.17g,%llu,%.17g", method.c_str(), n, iterations,
                  lambda_min, lambda_max, kappa, static_cast<unsigned long long>(seed), tol);
    return buf;
  }
};

inline constexpr int default_dense_eig_max_n = 2048;

/// Extreme eigenvalues of G A from the symmetric similarity L^T G L, A = L L^T.
/// A is first scaled to unit diagonal, which leaves the spectrum of G A unchanged.
inline SpectrumReport dense_kappa(const Eigen::MatrixXd& G, const Eigen::MatrixXd& A,
                                  int max_n = default_dense_eig_max_n) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || G.rows() != n || G.cols() != n) throw std::invalid_argument("dense_kappa: dimension mismatch");
  if (n == 0) throw std::invalid_argument("dense_kappa: empty system");
  if (n > max_n) throw std::invalid_argument("dense_kappa: n = " + std::to_string(n) + " exceeds dense limit");
  const Eigen::VectorXd dA = A.diagonal();
  if ((dA.array() <= 0.0).any()) throw std::runtime_error("dense_kappa: A is not SPD");
  const Eigen::VectorXd p = dA.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd As = p.asDiagonal() * A * p.asDiagonal();
  const Eigen::VectorXd pi = p.cwiseInverse();
  const Eigen::MatrixXd Gs = pi.asDiagonal() * G * pi.asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (As + As.transpose()));
  if (llt.info() != Eigen::Success) throw std::runtime_error("dense_kappa: A is not SPD");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd M = L.transpose() * Gs * L;
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense_kappa: eigensolver failed");
  SpectrumReport r;
  r.method = "dense";
  r.n = static_cast<int>(n);
  r.lambda_min = es.eigenvalues()(0);
  r.lambda_max = es.eigenvalues()(n - 1);
  if (!(r.lambda_min > 0.0)) throw std::runtime_error("dense_kappa: G A has a nonpositive eigenvalue");
  r.kappa = r.lambda_max / r.lambda_min;
  return r;
}

/// All eigenvalues of G A, ascending (same similarity as dense_kappa).
inline Eigen::VectorXd dense_spectrum(const Eigen::MatrixXd& G, const Eigen::MatrixXd& A) {
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (A + A.transpose()));
  if (llt.info() != Eigen::Success) throw std::runtime_error("dense_spectrum: A is not SPD");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd M = L.transpose() * G * L;
  M = 0.5 * (M + M.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues();
}

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Lanczos on G A, self-adjoint in <A., .>, full reorthogonalization (two passes).
/// max_iters <= 0 selects min(n, 300).
inline SpectrumReport lanczos_kappa(const LinearMap& applyG, const LinearMap& applyA, int n, double tol = 1e-8,
                                    int max_iters = 0, std::uint64_t seed = 1) {
  if (n <= 0) throw std::invalid_argument("lanczos_kappa: n must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("lanczos_kappa: tol must be positive");
  if (max_iters <= 0) max_iters = std::min(n, 300);
  max_iters = std::min(max_iters, n);

  SpectrumReport r;
  r.method = "lanczos";
  r.n = n;
  r.tol = tol;
  r.seed = seed;
  r.converged = false;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);

  std::vector<Eigen::VectorXd> V, AV;
  std::vector<double> alpha, beta;

  Eigen::VectorXd Av = applyA(v);
  double nrm = std::sqrt(v.dot(Av));
  if (!(nrm > 0.0)) throw std::runtime_error("lanczos_kappa: A is not positive on the start vector");
  v /= nrm;
  Av /= nrm;

  double prev_min = 0.0, prev_max = 0.0;
  for (int k = 0; k < max_iters; ++k) {
    V.push_back(v);
    AV.push_back(Av);
    Eigen::VectorXd w = applyG(Av);
    const double a = w.dot(Av);
    alpha.push_back(a);
    w -= a * v;
    if (k > 0) w -= beta.back() * V[k - 1];
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < V.size(); ++i) w -= w.dot(AV[i]) * V[i];

    const int m = k + 1;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) T(i, i) = alpha[i];
    for (int i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = beta[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(m - 1);
    r.ritz_min.push_back(lmin);
    r.ritz_max.push_back(lmax);
    r.iterations = m;
    r.lambda_min = lmin;
    r.lambda_max = lmax;

    Eigen::VectorXd Aw = applyA(w);
    const double b2 = w.dot(Aw);
    const double b = b2 > 0.0 ? std::sqrt(b2) : 0.0;
    if (b <= 1e-12 * std::max(std::abs(lmax), 1e-300)) {
      r.converged = true;  // invariant subspace found
      break;
    }
    if (k > 0 && std::abs(lmin - prev_min) <= tol * std::abs(lmin) && std::abs(lmax - prev_max) <= tol * std::abs(lmax)) {
      r.converged = true;
      break;
    }
    if (m == n) {
      r.converged = true;
      break;
    }
    prev_min = lmin;
    prev_max = lmax;
    beta.push_back(b);
    v = w / b;
    Av = Aw / b;
  }
  if (!(r.lambda_min > 0.0)) throw std::runtime_error("lanczos_kappa: G A has a nonpositive Ritz value");
  r.kappa = r.lambda_max / r.lambda_min;
  return r;
}

}  // namespace opprecond
