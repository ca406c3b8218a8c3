#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "higgsbal/higgs.hpp"

using namespace higgsbal;

namespace {

// degrees (0,0), twist 0, phi = [[0,1],[0,0]]: the unitary frame sees the
// nilpotent matrix at every node of the reference metric.
HiggsSpec nilpotent() {
  HiggsSpec phi = zero_higgs({{0, 0}, 0});
  phi.entries[0][1] = {1.0};
  return phi;
}

} // namespace

TEST_CASE("degree bounds are enforced") {
  HiggsSpec phi = zero_higgs({{1, -1}, 2});
  CHECK(phi.entry_bound(1, 0) == 0);
  CHECK(phi.entry_bound(0, 1) == 4);
  phi.entries[1][0] = {1.0, 1.0};
  CHECK_THROWS_AS(phi.validate(), DomainError);
  phi.entries[1][0] = {1.0};
  CHECK_NOTHROW(phi.validate());
  HiggsSpec canon = zero_higgs({{1, -1}});
  canon.entries[1][0] = {1.0};
  CHECK_THROWS_AS(canon.validate(), DomainError);
}

TEST_CASE("parameter defaults and validation") {
  const auto q = QuantizationParams::defaults(2, 8);
  CHECK(q.alpha == doctest::Approx(0.25));
  CHECK(q.beta == doctest::Approx(0.5));
  CHECK(q.alpha * q.beta == doctest::Approx(1.0 / 8));
  CHECK_NOTHROW(q.validate(2));
  QuantizationParams bad = q;
  bad.beta = 0.6;
  CHECK_THROWS_AS(bad.validate(2), DomainError);
  bad = q;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(2), DomainError);
  const auto q3 = QuantizationParams::defaults(3, 4, 2.0);
  CHECK(q3.alpha * q3.beta == doctest::Approx(0.5));
}

TEST_CASE("zero Higgs field") {
  const QuadGrid g = build_grid(4, 8);
  const BundleSpec spec{{1, -1}};
  const auto h = reference_metric(spec, g);
  const auto phi = zero_higgs(spec);
  for (const auto& m : bracket_contracted(phi, h, g).values) CHECK(m.norm() == 0.0);
  for (const auto& v : higgs_norm_sq(phi, h, g).values) CHECK(v == cplx(0.0));
  for (const auto& m : frak_c(phi, h, QuantizationParams::defaults(2, 3), g).values) CHECK(m.norm() == 0.0);
}

TEST_CASE("nilpotent node example") {
  const QuadGrid g = build_grid(4, 8);
  const auto h = reference_metric({{0, 0}, 0}, g);
  const auto phi = nilpotent();
  const auto b = bracket_contracted(phi, h, g);
  const auto n = higgs_norm_sq(phi, h, g);
  const auto c = frak_c(phi, h, QuantizationParams::defaults(2, 8), g);
  for (std::size_t q = 0; q < g.size(); ++q) {
    CHECK(std::abs(b.values[q](0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(b.values[q](1, 1) + 1.0) < 1e-14);
    CHECK(std::abs(b.values[q](0, 1)) < 1e-14);
    CHECK(std::abs(n[q] - 1.0) < 1e-14);
    CHECK(std::abs(c.values[q](0, 0) - 0.1) < 1e-14);
    CHECK(std::abs(c.values[q](1, 1) + 0.1) < 1e-14);
  }
}

TEST_CASE("norm scales quadratically") {
  const QuadGrid g = build_grid(6, 8);
  std::mt19937 rng(4);
  const BundleSpec spec{{1, -1}, 2};
  const auto h = fixtures::random_metric(spec, g, rng);
  const auto phi = fixtures::random_higgs(spec, rng);
  const cplx c(0.6, -1.1);
  const auto n1 = higgs_norm_sq(phi, h, g);
  const auto n2 = higgs_norm_sq(phi.scaled(c), h, g);
  for (std::size_t q = 0; q < g.size(); ++q) {
    CHECK(n1[q].real() >= 0.0);
    CHECK(std::abs(n2[q] - std::norm(c) * n1[q]) < 1e-12 * (1.0 + std::abs(n2[q])));
  }
}

TEST_CASE("bracket and frak_c: trace, self-adjointness, eigenvalue bound") {
  const QuadGrid g = build_grid(8, 12);
  std::mt19937 rng(9);
  for (const auto& deg : {std::vector<int>{1, -1}, {2, 1, 0}, {0, 0}}) {
    for (int trial = 0; trial < 3; ++trial) {
      const BundleSpec spec{deg, 2};
      const auto h = fixtures::random_metric(spec, g, rng);
      const auto phi = fixtures::random_higgs(spec, rng, 2.0);
      const auto params = QuantizationParams::defaults(spec.rank(), 1 + trial);
      const auto b = bracket_contracted(phi, h, g);
      const auto c = frak_c(phi, h, params, g);
      for (std::size_t q = 0; q < g.size(); ++q) {
        const double t = g.nodes[q].t;
        const CMatrix p = unitary_metric(h, g, q);
        CHECK(std::abs(b.values[q].trace()) < 1e-12 * (1.0 + b.values[q].norm()));
        CHECK(std::abs(c.values[q].trace()) < 1e-12);
        const CMatrix pc = p * to_unitary(c.values[q], spec.degrees, t);
        CHECK((pc - pc.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(h_operator_norm(to_unitary(c.values[q], spec.degrees, t), p) < 2.0 * params.beta);
      }
    }
  }
}

TEST_CASE("conformal invariance of bracket and frak_c") {
  const QuadGrid g = build_grid(8, 12);
  std::mt19937 rng(12);
  const BundleSpec spec{{1, -1}, 2};
  const auto h = fixtures::random_metric(spec, g, rng);
  const auto phi = fixtures::random_higgs(spec, rng);
  const auto hu = conformal_shift(h, fixtures::smooth_function(g, 1.3, 0.8));
  const auto params = QuantizationParams::defaults(2, 5);
  const auto b0 = bracket_contracted(phi, h, g), b1 = bracket_contracted(phi, hu, g);
  const auto c0 = frak_c(phi, h, params, g), c1 = frak_c(phi, hu, params, g);
  for (std::size_t q = 0; q < g.size(); ++q) {
    CHECK((b0.values[q] - b1.values[q]).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + b0.values[q].norm()));
    CHECK((c0.values[q] - c1.values[q]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("frak_c decays like 1/k") {
  const QuadGrid g = build_grid(6, 8);
  std::mt19937 rng(13);
  const BundleSpec spec{{1, -1}, 2};
  const auto h = fixtures::random_metric(spec, g, rng);
  const auto phi = fixtures::random_higgs(spec, rng);
  const double sup_b = sup_operator_norm(bracket_contracted(phi, h, g), h, g);
  for (int k : {10, 100, 1000}) {
    const double sup_c = sup_operator_norm(frak_c(phi, h, QuantizationParams::defaults(2, k), g), h, g);
    CHECK(sup_c <= sup_b / k * (1.0 + 1e-12));
  }
  const double ratio = sup_operator_norm(frak_c(phi, h, QuantizationParams::defaults(2, 10000), g), h, g) * 10000 / sup_b;
  CHECK(ratio == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("projection onto an invariant subbundle has nonnegative frak_c trace") {
  const QuadGrid g = build_grid(10, 12);
  std::mt19937 rng(17);
  // phi maps e1 to e2 only, so span(e2) is invariant.
  const BundleSpec spec{{1, -1}, 2};
  HiggsSpec phi = zero_higgs(spec);
  phi.entries[1][0] = {cplx(0.7, 0.2)};
  phi.entries[1][1] = fixtures::random_poly(2, rng);
  phi.entries[0][0] = phi.entries[1][1];
  const auto h = fixtures::random_metric(spec, g, rng);
  const auto c = frak_c(phi, h, QuantizationParams::defaults(2, 3), g);
  ScalarField f(g.size());
  for (std::size_t q = 0; q < g.size(); ++q) {
    const double t = g.nodes[q].t;
    const CMatrix p = unitary_metric(h, g, q);
    // h-orthogonal projection onto span(e2) in the unitary frame: v v^H P / (v^H P v)
    CVector v = CVector::Zero(2);
    v(1) = 1.0;
    const CMatrix pi = v * (v.adjoint() * p) / (v.adjoint() * p * v)(0, 0);
    f[q] = (pi * to_unitary(c.values[q], spec.degrees, t)).trace();
  }
  CHECK(integrate(f, g).real() >= 0.0);
}

TEST_CASE("hatted metric") {
  const QuadGrid g = build_grid(4, 8);
  const BundleSpec spec{{0, 0}};
  const auto h = reference_metric(spec, g);
  EndoField zero;
  zero.values.assign(g.size(), CMatrix::Zero(2, 2));
  CHECK(metric_distance(hatted_metric(h, zero, g), h, g) == 0.0);
  EndoField c;
  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 0.25;
  d(1, 1) = -0.25;
  c.values.assign(g.size(), d);
  const auto hh = hatted_metric(h, c, g);
  for (const auto& s : hh.rel) {
    CHECK(std::abs(s(0, 0) - 0.75) < 1e-15);
    CHECK(std::abs(s(1, 1) - 1.25) < 1e-15);
  }
  d(0, 0) = 1.5;
  d(1, 1) = -1.5;
  c.values.assign(g.size(), d);
  CHECK_THROWS_AS(hatted_metric(h, c, g), DomainError);
  CMatrix skew = CMatrix::Zero(2, 2);
  skew(0, 1) = 0.3;
  c.values.assign(g.size(), skew);
  CHECK_THROWS_AS(hatted_metric(h, c, g), DomainError);
}

TEST_CASE("hatted metric is hermitian for random valid inputs") {
  const QuadGrid g = build_grid(6, 8);
  std::mt19937 rng(23);
  const BundleSpec spec{{2, 0}, 2};
  const auto h = fixtures::random_metric(spec, g, rng);
  const auto phi = fixtures::random_higgs(spec, rng, 3.0);
  const auto c = frak_c(phi, h, QuantizationParams::defaults(2, 1), g);
  const auto hh = hatted_metric(h, c, g);
  CHECK_NOTHROW(check_metric(hh, g, 1e-12));
}
