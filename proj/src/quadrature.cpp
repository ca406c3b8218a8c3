#include "higgsbal/quadrature.hpp"

#include <cmath>

#include "higgsbal/types.hpp"

namespace higgsbal {

double jacobi_p(int n, double alpha, double beta, double x) {
  if (n == 0) return 1.0;
  double p0 = 1.0;
  double p1 = 0.5 * (alpha - beta + (alpha + beta + 2.0) * x);
  for (int k = 2; k <= n; ++k) {
    const double a = alpha + beta;
    const double c1 = 2.0 * k * (k + a) * (2.0 * k + a - 2.0);
    const double c2 = (2.0 * k + a - 1.0) * (alpha * alpha - beta * beta);
    const double c3 = (2.0 * k + a - 2.0) * (2.0 * k + a - 1.0) * (2.0 * k + a);
    const double c4 = 2.0 * (k + alpha - 1.0) * (k + beta - 1.0) * (2.0 * k + a);
    const double p2 = ((c2 + c3 * x) * p1 - c4 * p0) / c1;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

namespace {

double jacobi_dp(int n, double alpha, double beta, double x) {
  if (n == 0) return 0.0;
  return 0.5 * (n + alpha + beta + 1.0) * jacobi_p(n - 1, alpha + 1.0, beta + 1.0, x);
}

} // namespace

QuadratureRule gauss_jacobi(int n, double alpha, double beta) {
  if (n < 1) throw DomainError("gauss_jacobi: n must be positive");
  if (alpha <= -1.0 || beta <= -1.0) throw DomainError("gauss_jacobi: alpha, beta must exceed -1");

  QuadratureRule rule;
  rule.points.resize(n);
  rule.weights.resize(n);

  // log of Gamma(n+a+1) Gamma(n+b+1) / (Gamma(n+a+b+1) n!) * 2^(a+b+1)
  const double log_scale = std::lgamma(n + alpha + 1.0) + std::lgamma(n + beta + 1.0) -
                           std::lgamma(n + alpha + beta + 1.0) - std::lgamma(n + 1.0) +
                           (alpha + beta + 1.0) * std::log(2.0);

  for (int i = 0; i < n; ++i) {
    // Roots come out in descending order from this guess; stored ascending.
    double x = std::cos(kPi * (i + 0.75 + 0.5 * alpha) / (n + 0.5 * (alpha + beta + 1.0)));
    // Deflation against already-found roots keeps Newton from re-converging.
    for (int it = 0; it < 100; ++it) {
      const double p = jacobi_p(n, alpha, beta, x);
      const double dp = jacobi_dp(n, alpha, beta, x);
      double deflate = 0.0;
      for (int j = 0; j < i; ++j) deflate += 1.0 / (x - rule.points[n - 1 - j]);
      const double step = p / (dp - p * deflate);
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double dp = jacobi_dp(n, alpha, beta, x);
    rule.points[n - 1 - i] = x;
    rule.weights[n - 1 - i] = std::exp(log_scale) / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

} // namespace higgsbal
