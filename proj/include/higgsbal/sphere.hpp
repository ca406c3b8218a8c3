#pragma once

// Base geometry: the Riemann sphere in the affine chart z, with
//   t = |z|^2 / (1 + |z|^2),   omega = i rho dz ^ dz-bar,   rho = (1 + |z|^2)^-2.
// In (t, theta) the volume form is dt dtheta, so the total volume is 2 pi and
// every integrand z^p conj(z)^q (1+|z|^2)^-d is polynomial in t.

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "higgsbal/types.hpp"

namespace higgsbal {

struct GridNode {
  double t = 0.0;
  double theta = 0.0;
  double weight = 0.0;  // measure units: sum over the grid is 2 pi
  double radius = 0.0;  // |z|
  cplx z{0.0, 0.0};

  double one_minus_t() const { return 1.0 - t; }
  double rho() const { return (1.0 - t) * (1.0 - t); }
};

/// Tensor-product quadrature: Gauss-Jacobi(0,0) in t times uniform in theta.
/// Node index = i_t * n_theta + i_theta.
struct QuadGrid {
  int n_t = 0;
  int n_theta = 0;
  int exactness_degree = 0;  // max t-degree integrated exactly
  std::vector<double> t_nodes;
  std::vector<double> t_weights;  // on [0,1], summing to 1
  std::vector<GridNode> nodes;

  // Spectral machinery on the t nodes.
  Eigen::MatrixXd t_diff;        // barycentric differentiation matrix
  Eigen::MatrixXd t_to_legendre; // nodal values -> shifted Legendre coefficients
  std::vector<cplx> roots_of_unity; // exp(2 pi i k / n_theta)

  cplx twiddle(long long k) const {
    const long long m = ((k % n_theta) + n_theta) % n_theta;
    return roots_of_unity[static_cast<std::size_t>(m)];
  }

  std::size_t size() const { return nodes.size(); }
  std::size_t index(int i_t, int i_theta) const {
    return static_cast<std::size_t>(i_t) * n_theta + i_theta;
  }
  double volume() const { return kTwoPi; }
};

QuadGrid build_grid(int n_t, int n_theta);

struct ScalarField {
  std::vector<cplx> values;

  ScalarField() = default;
  explicit ScalarField(std::size_t n, cplx fill = 0.0) : values(n, fill) {}
  std::size_t size() const { return values.size(); }
  cplx& operator[](std::size_t i) { return values[i]; }
  const cplx& operator[](std::size_t i) const { return values[i]; }
};

/// Samples f(node) on every grid node.
template <typename F>
ScalarField sample(const QuadGrid& grid, F&& f) {
  ScalarField out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = f(grid.nodes[j]);
  return out;
}

/// Sum_j weight_j f_j, accumulated in node order.
cplx integrate(const ScalarField& f, const QuadGrid& grid);

/// Coefficient of dz ^ dz-bar divided by rho: Lambda of (i F dz ^ dz-bar).
ScalarField lambda_contract(const ScalarField& coeff, const QuadGrid& grid);

enum class Direction { Z, ZBar };

/// Growth class of a chart-frame field near infinity: f = z^holo conj(z)^anti g
/// with g smooth in 1/z. A smooth function on the sphere is {0, 0}; a smooth
/// section of O(w) written in the chart frame is {w, 0}; the dz-coefficient of a
/// smooth (1,0)-form with values in O(w) is {w - 2, 0}. A field of the form
/// c log(1+|z|^2) + smooth is declared with log_weight = c; the logarithmic
/// part is differentiated in closed form.
struct FieldClass {
  int holo = 0;
  int anti = 0;
  double log_weight = 0.0;
};

struct DerivativeResult {
  ScalarField field;
  bool under_resolved = false;
};

/// Fourier differentiation in theta combined with barycentric polynomial
/// differentiation in t, converted to d/dz or d/dz-bar. Each angular mode is
/// divided by its parity/decay envelope before the polynomial fit, so fields
/// that are smooth on the sphere are differentiated to spectral accuracy.
DerivativeResult spectral_derivative(const ScalarField& f, const QuadGrid& grid, Direction dir,
                                     FieldClass cls = {});

/// Resolution threshold for spectral tails, relative to the largest coefficient.
inline constexpr double kResolutionTolerance = 1e-8;
/// Tails below this absolute size are rounding noise and never flagged.
inline constexpr double kNoiseFloor = 1e-13;

} // namespace higgsbal
