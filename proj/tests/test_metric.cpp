#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "higgsbal/higgs.hpp"
#include "higgsbal/metric.hpp"

using namespace higgsbal;

namespace {

double max_offset(const EndoField& f, const CMatrix& target) {
  double e = 0.0;
  for (const auto& m : f.values) e = std::max(e, (m - target).cwiseAbs().maxCoeff());
  return e;
}

} // namespace

TEST_CASE("curvature of reference metrics") {
  const QuadGrid g = build_grid(10, 12);
  const auto f = curvature_contraction(reference_metric({{1, -1}}, g), g);
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 1.0;
  d(1, 1) = -1.0;
  CHECK(max_offset(f, d) < 1e-12);
  CHECK_FALSE(f.under_resolved);
  const auto f0 = curvature_contraction(reference_metric({{0, 0}}, g), g);
  CHECK(max_offset(f0, CMatrix::Zero(2, 2)) < 1e-12);
}

TEST_CASE("conformal shift adds the Laplacian") {
  const QuadGrid g = build_grid(16, 32);
  std::mt19937 rng(3);
  const BundleSpec spec{{2, -1}};
  const MetricField h = fixtures::random_metric(spec, g, rng);
  const ScalarField u = fixtures::smooth_function(g, 0.7, -0.4);
  const auto f0 = curvature_contraction(h, g);
  const auto f1 = curvature_contraction(conformal_shift(h, u), g);
  const ScalarField lap = laplacian(u, g);
  double err = 0.0, err_direct = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) {
    const GridNode& n = g.nodes[q];
    err = std::max(err, (f1.values[q] - f0.values[q] - lap[q] * CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff());
    // Closed form: u = 0.7 (t - 1/2) - 0.4 Im(z)/(1+|z|^2); Delta(t) = 2t - 1 and
    // Im(z)/(1+|z|^2) is a first spherical harmonic with eigenvalue 2.
    const double exact = 0.7 * (2.0 * n.t - 1.0) - 0.4 * 2.0 * std::sqrt(n.t * (1.0 - n.t)) * std::sin(n.theta);
    err_direct = std::max(err_direct, std::abs(lap[q] - exact));
  }
  CHECK(err < 1e-8);
  CHECK(err_direct < 1e-10);
}

TEST_CASE("finite-difference check of the Laplacian on a radial function") {
  const QuadGrid g = build_grid(20, 8);
  auto u = [](double t) { return std::sin(2.0 * t); };
  const auto lap = laplacian(sample(g, [&](const GridNode& n) { return cplx(u(n.t)); }), g);
  // radial formula Delta u = -d/dt (t (1-t) u_t), evaluated by central differences
  const double step = 1e-4;
  auto flux = [&](double t) { return t * (1.0 - t) * (u(t + step) - u(t - step)) / (2.0 * step); };
  for (std::size_t q = 0; q < g.size(); q += g.n_theta) {
    const double t = g.nodes[q].t;
    const double fd = -(flux(t + step) - flux(t - step)) / (2.0 * step);
    CHECK(std::abs(lap[q].real() - fd) < 1e-6);
  }
}

TEST_CASE("total curvature is topological") {
  const QuadGrid g = build_grid(16, 32);
  std::mt19937 rng(11);
  for (const auto& deg : {std::vector<int>{1, -1}, {2, 0}, {1, 0, -2}}) {
    const BundleSpec spec{deg};
    const MetricField h = fixtures::random_metric(spec, g, rng);
    const auto f = curvature_contraction(h, g);
    ScalarField tr(g.size());
    for (std::size_t q = 0; q < g.size(); ++q) tr[q] = f.values[q].trace();
    const double expected = kTwoPi * spec.degree();
    const double got = integrate(tr, g).real();
    CHECK(std::abs(got - expected) <= 1e-8 * std::max(1.0, std::abs(expected)));
  }
}

TEST_CASE("curvature is h-self-adjoint") {
  const QuadGrid g = build_grid(16, 32);
  std::mt19937 rng(5);
  const BundleSpec spec{{2, -1}};
  const MetricField h = fixtures::random_metric(spec, g, rng);
  const auto f = curvature_contraction(h, g);
  CHECK_FALSE(f.under_resolved);
  double err = 0.0;
  for (std::size_t q = 0; q < g.size(); ++q) {
    const CMatrix p = unitary_metric(h, g, q);
    const CMatrix m = p * to_unitary(f.values[q], h.degrees, g.nodes[q].t);
    err = std::max(err, (m - m.adjoint()).cwiseAbs().maxCoeff());
  }
  CHECK(err < 1e-8);
}

TEST_CASE("hitchin residual examples") {
  const QuadGrid g = build_grid(10, 12);
  const auto r0 = hitchin_residual(reference_metric({{0, 0}}, g), zero_higgs({{0, 0}}), g);
  CHECK(r0.sup_norm < 1e-10);
  const auto r1 = hitchin_residual(reference_metric({{1, -1}}, g), zero_higgs({{1, -1}}), g);
  CHECK(std::abs(r1.sup_norm - 1.0) < 1e-10);
}

TEST_CASE("hitchin residual integrates to a traceless total") {
  const QuadGrid g = build_grid(16, 32);
  std::mt19937 rng(8);
  const BundleSpec spec{{2, 0, -1}, 1};
  const MetricField h = fixtures::random_metric(spec, g, rng);
  const HiggsSpec phi = fixtures::random_higgs(spec, rng, 0.5);
  const auto res = hitchin_residual(h, phi, g, 1.3);
  ScalarField tr(g.size());
  for (std::size_t q = 0; q < g.size(); ++q) tr[q] = res.residual.values[q].trace();
  CHECK(std::abs(integrate(tr, g)) < 1e-8);
}

TEST_CASE("metric distance") {
  const QuadGrid g = build_grid(8, 8);
  std::mt19937 rng(1);
  const BundleSpec spec{{1, -1}};
  const MetricField h = fixtures::random_metric(spec, g, rng);
  CHECK(metric_distance(h, h, g) < 1e-12);
  const double c = 0.4;
  CHECK(std::abs(metric_distance(h, scale_metric(h, std::exp(c)), g) - (std::exp(c) - 1.0)) < 1e-12);
}

TEST_CASE("metric distance matches a brute-force eigenvalue computation") {
  const QuadGrid g = build_grid(6, 8);
  std::mt19937 rng(21);
  const BundleSpec spec{{3, 1, 0}};
  for (int trial = 0; trial < 5; ++trial) {
    const MetricField h1 = fixtures::random_metric(spec, g, rng, 0.5);
    const MetricField h2 = fixtures::random_metric(spec, g, rng, 0.5);
    double brute = 0.0, cond = 1.0;
    for (std::size_t q = 0; q < g.size(); ++q) {
      const CMatrix x = h1.rel[q].inverse() * h2.rel[q];
      Eigen::ComplexEigenSolver<CMatrix> es(x);
      for (int i = 0; i < 3; ++i) brute = std::max(brute, std::abs(es.eigenvalues()(i).real() - 1.0));
      Eigen::SelfAdjointEigenSolver<CMatrix> e1(unitary_metric(h1, g, q)), e2(unitary_metric(h2, g, q));
      cond = std::max({cond, e1.eigenvalues().maxCoeff() / e1.eigenvalues().minCoeff(),
                       e2.eigenvalues().maxCoeff() / e2.eigenvalues().minCoeff()});
    }
    const double d12 = metric_distance(h1, h2, g);
    const double d21 = metric_distance(h2, h1, g);
    CHECK(std::abs(d12 - brute) < 1e-9 * (1.0 + brute));
    // d(h2,h1) = max |1/lambda - 1| is controlled by d(h1,h2) and the spectra.
    CHECK(d21 <= d12 * cond * cond + 1e-12);
  }
}

TEST_CASE("check_metric flags indefinite fields") {
  const QuadGrid g = build_grid(4, 8);
  MetricField h = reference_metric({{0, 0}}, g);
  CHECK_NOTHROW(check_metric(h, g));
  h.rel[3](1, 1) = -1.0;
  CHECK_THROWS_AS(check_metric(h, g), NumericalError);
}

TEST_CASE("log-det normalization") {
  const QuadGrid g = build_grid(8, 8);
  std::mt19937 rng(2);
  const MetricField h = fixtures::random_metric({{1, 0}}, g, rng);
  CHECK(std::abs(mean_log_det(normalize_log_det(h, g), g)) < 1e-13);
}

TEST_CASE("csv snapshot layout") {
  const QuadGrid g = build_grid(3, 4);
  std::ostringstream os;
  write_metric_csv(reference_metric({{1, -1}}, g), g, os);
  const std::string s = os.str();
  CHECK(s.rfind("node,t,theta,re_z,im_z,p11_re,p11_im,p21_re,p21_im,p22_re,p22_im\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 13);
}
