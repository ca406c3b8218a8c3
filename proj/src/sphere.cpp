#include "higgsbal/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "higgsbal/quadrature.hpp"

namespace higgsbal {

QuadGrid build_grid(int n_t, int n_theta) {
  if (n_t < 2) throw DomainError("build_grid: n_t must be >= 2, got " + std::to_string(n_t));
  if (n_theta < 4)
    throw DomainError("build_grid: n_theta must be >= 4, got " + std::to_string(n_theta));

  QuadGrid grid;
  grid.n_t = n_t;
  grid.n_theta = n_theta;
  grid.exactness_degree = 2 * n_t - 1;

  const QuadratureRule rule = gauss_jacobi(n_t, 0.0, 0.0);
  grid.t_nodes.resize(n_t);
  grid.t_weights.resize(n_t);
  for (int i = 0; i < n_t; ++i) {
    grid.t_nodes[i] = 0.5 * (1.0 + rule.points[i]);
    grid.t_weights[i] = 0.5 * rule.weights[i];
  }

  grid.nodes.resize(static_cast<std::size_t>(n_t) * n_theta);
  for (int i = 0; i < n_t; ++i) {
    const double t = grid.t_nodes[i];
    const double radius = std::sqrt(t / (1.0 - t));
    for (int l = 0; l < n_theta; ++l) {
      GridNode& node = grid.nodes[grid.index(i, l)];
      node.t = t;
      node.theta = kTwoPi * l / n_theta;
      node.weight = grid.t_weights[i] * kTwoPi / n_theta;
      node.radius = radius;
      node.z = std::polar(radius, node.theta);
    }
  }

  // Barycentric weights, scaled by the capacity of [0,1] against underflow.
  std::vector<double> bary(n_t, 1.0);
  for (int j = 0; j < n_t; ++j)
    for (int k = 0; k < n_t; ++k)
      if (k != j) bary[j] /= 4.0 * (grid.t_nodes[j] - grid.t_nodes[k]);

  grid.t_diff = Eigen::MatrixXd::Zero(n_t, n_t);
  for (int i = 0; i < n_t; ++i) {
    double diag = 0.0;
    for (int j = 0; j < n_t; ++j) {
      if (i == j) continue;
      const double d = (bary[j] / bary[i]) / (grid.t_nodes[i] - grid.t_nodes[j]);
      grid.t_diff(i, j) = d;
      diag -= d;
    }
    grid.t_diff(i, i) = diag;
  }

  grid.roots_of_unity.resize(n_theta);
  for (int l = 0; l < n_theta; ++l) grid.roots_of_unity[l] = std::polar(1.0, kTwoPi * l / n_theta);

  grid.t_to_legendre = Eigen::MatrixXd::Zero(n_t, n_t);
  for (int l = 0; l < n_t; ++l)
    for (int i = 0; i < n_t; ++i)
      grid.t_to_legendre(l, i) =
          (2.0 * l + 1.0) * grid.t_weights[i] * jacobi_p(l, 0.0, 0.0, 2.0 * grid.t_nodes[i] - 1.0);

  return grid;
}

cplx integrate(const ScalarField& f, const QuadGrid& grid) {
  if (f.size() != grid.size())
    throw DomainError("integrate: field has " + std::to_string(f.size()) + " values, grid has " +
                      std::to_string(grid.size()) + " nodes");
  cplx acc = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) acc += grid.nodes[j].weight * f[j];
  return acc;
}

ScalarField lambda_contract(const ScalarField& coeff, const QuadGrid& grid) {
  if (coeff.size() != grid.size()) throw DomainError("lambda_contract: node-count mismatch");
  ScalarField out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = coeff[j] / grid.nodes[j].rho();
  return out;
}

DerivativeResult spectral_derivative(const ScalarField& f_in, const QuadGrid& grid, Direction dir,
                                     FieldClass cls) {
  if (f_in.size() != grid.size()) throw DomainError("spectral_derivative: node-count mismatch");
  if (cls.log_weight != 0.0) {
    ScalarField smooth = f_in;
    for (std::size_t j = 0; j < grid.size(); ++j)
      smooth[j] += cls.log_weight * std::log(grid.nodes[j].one_minus_t());
    DerivativeResult res = spectral_derivative(smooth, grid, dir, {cls.holo, cls.anti, 0.0});
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const GridNode& n = grid.nodes[j];
      const cplx w = (dir == Direction::Z) ? std::conj(n.z) : n.z;
      res.field[j] += cls.log_weight * w * n.one_minus_t();
    }
    return res;
  }
  const ScalarField& f = f_in;
  const int nt = grid.n_t;
  const int nth = grid.n_theta;
  const int nyquist = (nth % 2 == 0) ? -nth / 2 : nth; // nth never matches a mode
  auto mode_of = [nth](int m) { return (2 * m < nth) ? m : m - nth; };

  // coeffs(m, i): angular mode m at t-node i
  Eigen::MatrixXcd coeffs(nth, nt);
  for (int i = 0; i < nt; ++i) {
    for (int m = 0; m < nth; ++m) {
      const int n = mode_of(m);
      cplx acc = 0.0;
      for (int l = 0; l < nth; ++l)
        acc += f[grid.index(i, l)] * grid.twiddle(-static_cast<long long>(n) * l);
      coeffs(m, i) = acc / double(nth);
    }
  }

  DerivativeResult result;
  const double coeff_max = coeffs.cwiseAbs().maxCoeff();
  if (coeff_max == 0.0) {
    result.field = ScalarField(grid.size());
    return result;
  }

  // Angular tail.
  double theta_tail = 0.0;
  for (int m = 0; m < nth; ++m) {
    const int n = mode_of(m);
    const bool top = (n == nyquist) || (nth >= 8 && std::abs(n) >= nth / 2 - 1);
    if (top) theta_tail = std::max(theta_tail, coeffs.row(m).cwiseAbs().maxCoeff());
  }
  if (theta_tail > kResolutionTolerance * coeff_max && theta_tail > kNoiseFloor) result.under_resolved = true;

  const int shift = (dir == Direction::Z) ? -1 : 1;
  Eigen::MatrixXcd deriv = Eigen::MatrixXcd::Zero(nth, nt); // indexed by target mode slot
  std::vector<int> target_mode(nth);
  double legendre_max = 0.0;
  double legendre_tail = 0.0;

  for (int m = 0; m < nth; ++m) {
    const int n = mode_of(m);
    target_mode[m] = n + shift;
    if (n == nyquist) continue;
    const int parity = std::abs(n) % 2;
    const double decay = 0.5 * (std::abs(n - (cls.holo - cls.anti)) - (cls.holo + cls.anti));
    const double q = std::min(decay, 0.5 * parity);

    Eigen::VectorXcd g(nt);
    std::vector<double> env(nt);
    for (int i = 0; i < nt; ++i) {
      const double t = grid.t_nodes[i];
      env[i] = std::pow(t, 0.5 * parity) * std::pow(1.0 - t, q);
      g(i) = coeffs(m, i) / env[i];
    }
    const Eigen::VectorXcd leg = grid.t_to_legendre.cast<cplx>() * g;
    legendre_max = std::max(legendre_max, leg.cwiseAbs().maxCoeff());
    const int top_count = nt >= 8 ? 2 : 1;
    for (int l = nt - top_count; l < nt; ++l) legendre_tail = std::max(legendre_tail, std::abs(leg(l)));

    const Eigen::VectorXcd dg = grid.t_diff.cast<cplx>() * g;
    for (int i = 0; i < nt; ++i) {
      const double t = grid.t_nodes[i];
      const double radius = std::sqrt(t / (1.0 - t));
      const cplx value = coeffs(m, i);
      const cplx d_t = env[i] * (dg(i) + g(i) * (0.5 * parity / t - q / (1.0 - t)));
      const cplx d_r = 2.0 * radius * (1.0 - t) * (1.0 - t) * d_t;
      const cplx angular = double(n) * value / radius;
      deriv(m, i) = 0.5 * (dir == Direction::Z ? d_r + angular : d_r - angular);
    }
  }
  if (legendre_tail > kResolutionTolerance * legendre_max && legendre_tail > kNoiseFloor)
    result.under_resolved = true;

  result.field = ScalarField(grid.size());
  for (int i = 0; i < nt; ++i) {
    for (int l = 0; l < nth; ++l) {
      cplx acc = 0.0;
      for (int m = 0; m < nth; ++m)
        acc += deriv(m, i) * grid.twiddle(static_cast<long long>(target_mode[m]) * l);
      result.field[grid.index(i, l)] = acc;
    }
  }
  return result;
}

} // namespace higgsbal
