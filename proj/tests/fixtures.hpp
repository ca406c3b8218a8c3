#pragma once

// Shared builders for randomized property tests.

#include <cmath>
#include <random>

#include "higgsbal/bundle.hpp"
#include "higgsbal/higgs.hpp"
#include "higgsbal/metric.hpp"
#include "higgsbal/sphere.hpp"

namespace fixtures {

using namespace higgsbal;

inline Polynomial random_poly(int degree, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Polynomial p(static_cast<std::size_t>(std::max(degree + 1, 0)));
  for (auto& c : p) c = {nd(rng), nd(rng)};
  return p;
}

/// Smooth metric g^H h_ref diag(e^u_i) g with g a holomorphic automorphism
/// (unit diagonal, entries of admissible degree above it) and u_i = c_i (t - 1/2)
/// plus a first angular harmonic.
inline MetricField random_metric(const BundleSpec& spec, const QuadGrid& grid, std::mt19937& rng,
                                 double amp = 0.3) {
  const int r = spec.rank();
  std::normal_distribution<double> nd(0.0, amp);
  std::vector<std::vector<Polynomial>> g(r, std::vector<Polynomial>(r));
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j) g[i][j] = random_poly(spec.degrees[i] - spec.degrees[j], rng, amp);
  std::vector<double> c(r), s(r);
  for (int i = 0; i < r; ++i) {
    c[i] = nd(rng);
    s[i] = nd(rng);
  }
  MetricField h = reference_metric(spec, grid);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const GridNode& n = grid.nodes[q];
    // unitary frame: G^ = D g D^-1, P = G^H diag(e^u) G^
    CMatrix gm = CMatrix::Identity(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j)
        gm(i, j) = weighted_eval(g[i][j], spec.degrees[i] - spec.degrees[j], n.t, n.theta);
    Eigen::VectorXd e(r);
    for (int i = 0; i < r; ++i)
      e(i) = std::exp(c[i] * (n.t - 0.5) + s[i] * 2.0 * std::sqrt(n.t * (1.0 - n.t)) * std::cos(n.theta));
    const CMatrix p = gm.adjoint() * e.cast<cplx>().asDiagonal() * gm;
    h.rel[q] = from_unitary(p, spec.degrees, n.t);
  }
  return h;
}

inline HiggsSpec random_higgs(const BundleSpec& spec, std::mt19937& rng, double scale = 1.0) {
  HiggsSpec phi = zero_higgs(spec);
  for (int i = 0; i < spec.rank(); ++i)
    for (int j = 0; j < spec.rank(); ++j) phi.entries[i][j] = random_poly(phi.entry_bound(i, j), rng, scale);
  return phi;
}

inline ScalarField smooth_function(const QuadGrid& grid, double a, double b) {
  return sample(grid, [&](const GridNode& n) {
    return cplx(a * (n.t - 0.5) + b * std::sqrt(n.t * (1.0 - n.t)) * std::sin(n.theta));
  });
}

} // namespace fixtures
