#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace opprecond {

/// Gauss-Legendre rule on [0, 1].
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Legendre with `n` points on [0, 1]; exact for polynomials of degree 2n-1.
inline LineRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  LineRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton on P_n starting from the Chebyshev-like guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // map [-1,1] -> [0,1]
    rule.points[i] = 0.5 * (1.0 - x);
    rule.points[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[i] = 0.5 * w;
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

/// Quadrature on the reference d-simplex, points given as barycentric coordinates
/// (lambda_0, ..., lambda_d) and weights summing to 1 (i.e. normalized by |T|).
struct SimplexRule {
  int dim = 0;
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weights;
};

/// Exact for polynomials of total degree <= `degree` on a d-simplex, d in {1, 2}.
/// The triangle rule is a collapsed (conical) Gauss product.
inline SimplexRule simplex_rule(int dim, int degree) {
  if (degree < 0) degree = 0;
  SimplexRule rule;
  rule.dim = dim;
  if (dim == 1) {
    const int n = degree / 2 + 1;
    const LineRule g = gauss_legendre(n);
    for (int i = 0; i < n; ++i) {
      rule.bary.push_back({1.0 - g.points[i], g.points[i], 0.0});
      rule.weights.push_back(g.weights[i]);
    }
  } else if (dim == 2) {
    // x = u, y = v (1 - u): integrand degree p becomes degree p + 1 in u.
    const int nu = (degree + 1) / 2 + 1;
    const int nv = degree / 2 + 1;
    const LineRule gu = gauss_legendre(nu);
    const LineRule gv = gauss_legendre(nv);
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        const double u = gu.points[i];
        const double y = gv.points[j] * (1.0 - u);
        rule.bary.push_back({1.0 - u - y, u, y});
        // reference triangle area is 1/2; normalized weights sum to 1
        rule.weights.push_back(2.0 * gu.weights[i] * gv.weights[j] * (1.0 - u));
      }
    }
  } else {
    throw std::invalid_argument("simplex_rule: only d in {1, 2} supported");
  }
  return rule;
}

}  // namespace opprecond
