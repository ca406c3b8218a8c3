#pragma once

#include <vector>

namespace higgsbal {

struct QuadratureRule {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Jacobi rule on [-1, 1] for the weight (1-x)^alpha (1+x)^beta,
/// points in ascending order. Exact for polynomials of degree <= 2n-1.
QuadratureRule gauss_jacobi(int n, double alpha, double beta);

/// Jacobi polynomial P_n^{(alpha,beta)}(x) by the three-term recurrence.
double jacobi_p(int n, double alpha, double beta, double x);

} // namespace higgsbal
