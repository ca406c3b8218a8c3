#include "doctest.h"

#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "fixtures.hpp"
#include "higgsbal/balanced.hpp"

using namespace higgsbal;

namespace {

HiggsSpec co_higgs() {
  HiggsSpec phi = zero_higgs({{1, -1}, 2});
  phi.entries[1][0] = {1.0};
  return phi;
}

GramMatrix random_gram(const TOperator& op, std::mt19937& rng, double amp = 0.2) {
  const int n = op.dimension();
  std::normal_distribution<double> nd(0.0, amp);
  CMatrix a = CMatrix::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) += cplx(nd(rng), nd(rng));
  const GramMatrix g0 = op.reference_gram();
  const Eigen::LLT<CMatrix> llt(g0);
  const CMatrix l = llt.matrixL();
  const CMatrix g = l * a * a.adjoint() * l.adjoint();
  return 0.5 * (g + g.adjoint());
}

CMatrix random_unitary(int n, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  CMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(nd(rng), nd(rng));
  Eigen::HouseholderQR<CMatrix> qr(a);
  return qr.householderQ() * CMatrix::Identity(n, n);
}

SectionBasis transform(const SectionBasis& b, const CMatrix& a) {
  SectionBasis out = b;
  for (int c = 0; c < b.size(); ++c) {
    PolySection s;
    s.components.assign(b.spec.rank(), Polynomial{});
    for (int i = 0; i < b.size(); ++i)
      for (int comp = 0; comp < b.spec.rank(); ++comp)
        s.components[comp] = poly_add(s.components[comp], poly_scale(b.sections[i].components[comp], a(i, c)));
    out.sections[c] = canonicalize(s, b.spec, b.level_k);
  }
  return out;
}

} // namespace

TEST_CASE("reference gram is a fixed point on the trivial bundle") {
  const QuadGrid g = build_grid(12, 16);
  const BundleSpec spec{{0, 0}};
  for (int k : {1, 3, 6}) {
    const TOperator op(monomial_basis(spec, k), zero_higgs(spec), QuantizationParams::defaults(2, k), g);
    const GramMatrix gs = op.t_step(op.reference_gram());
    CHECK((gs - CMatrix::Identity(gs.rows(), gs.cols())).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("t_step without Higgs field is the classical T-operator") {
  const QuadGrid g = build_grid(14, 20);
  std::mt19937 rng(2);
  const BundleSpec spec{{1, -1}};
  const auto basis = monomial_basis(spec, 3);
  const TOperator op(basis, zero_higgs(spec), QuantizationParams::defaults(2, 3), g);
  const GramMatrix gm = random_gram(op, rng);
  const GramMatrix classical = gram(fubini_study_from_basis(basis, gm, g), basis, g);
  CHECK((op.apply(gm) - classical).cwiseAbs().maxCoeff() < 1e-12 * classical.cwiseAbs().maxCoeff());
}

TEST_CASE("moment map residual equals t_step minus identity") {
  const QuadGrid g = build_grid(14, 20);
  std::mt19937 rng(3);
  const HiggsSpec phi = fixtures::random_higgs({{1, -1}, 2}, rng);
  for (int k : {2, 5}) {
    const TOperator op(monomial_basis(phi.bundle, k), phi, QuantizationParams::defaults(2, k), g);
    for (int trial = 0; trial < 3; ++trial) {
      const GramMatrix gm = random_gram(op, rng);
      const GramMatrix ts = op.t_step(gm);
      const auto mm = op.moment_map_residual(gm);
      const int n = op.dimension();
      CHECK((mm.matrix - (ts - CMatrix::Identity(n, n))).cwiseAbs().maxCoeff() < 1e-13);
      CHECK(std::abs((mm.matrix + CMatrix::Identity(n, n)).trace().real() - n) < 1e-11);
      CHECK(std::abs(ts.trace().real() - n) < 1e-11);
      CHECK_NOTHROW(check_gram(ts));
    }
  }
}

TEST_CASE("free functions agree with the cached operator") {
  const QuadGrid g = build_grid(10, 12);
  std::mt19937 rng(5);
  const HiggsSpec phi = co_higgs();
  const auto basis = monomial_basis(phi.bundle, 2);
  const auto params = QuantizationParams::defaults(2, 2);
  const TOperator op(basis, phi, params, g);
  const GramMatrix gm = random_gram(op, rng);
  CHECK((t_step(gm, basis, phi, params, g) - op.t_step(gm)).norm() == 0.0);
  CHECK(moment_map_residual(gm, basis, phi, params, g).norm == doctest::Approx(op.moment_map_residual(gm).norm));
}

TEST_CASE("t_step residual is invariant under unitary change of basis") {
  const QuadGrid g = build_grid(14, 20);
  std::mt19937 rng(7);
  const HiggsSpec phi = co_higgs();
  const auto basis = monomial_basis(phi.bundle, 3);
  const auto params = QuantizationParams::defaults(2, 3);
  const TOperator op(basis, phi, params, g);
  const GramMatrix gm = random_gram(op, rng);
  const CMatrix u = random_unitary(basis.size(), rng);
  const TOperator moved(transform(basis, u), phi, params, g);
  const GramMatrix gu = u.adjoint() * gm * u;
  const int n = basis.size();
  const double r1 = (op.t_step(gm) - CMatrix::Identity(n, n)).norm();
  const double r2 = (moved.t_step(gu) - CMatrix::Identity(n, n)).norm();
  CHECK(std::abs(r1 - r2) < 1e-11);
}

TEST_CASE("trivial bundle converges immediately") {
  const QuadGrid g = build_grid(12, 16);
  const auto rep = solve_balanced(zero_higgs({{0, 0}}), QuantizationParams::defaults(2, 4), g);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2);
  CHECK(metric_distance(rep.final_metric, reference_metric({{0, 0}}, g), g) < 1e-10);
}

TEST_CASE("trivial bundle converges from random starts") {
  const QuadGrid g = build_grid(12, 16);
  BalanceOptions opts;
  opts.random_start = true;
  opts.seed = 99;
  const auto rep = solve_balanced(zero_higgs({{0, 0}}), QuantizationParams::defaults(2, 3), g, opts);
  REQUIRE(rep.converged);
  // balanced metrics on O + O are the constant hermitian forms
  MetricField flat = rep.final_metric;
  for (auto& s : flat.rel) s = rep.final_metric.rel[0];
  CHECK(metric_distance(flat, rep.final_metric, g) < 1e-8);
  CHECK(hitchin_residual(rep.final_metric, zero_higgs({{0, 0}}), g).sup_norm < 1e-8);
}

TEST_CASE("stable co-Higgs example is balanced") {
  const QuadGrid g = build_grid(20, 24);
  const HiggsSpec phi = co_higgs();
  const auto params = QuantizationParams::defaults(2, 6);
  const auto rep = solve_balanced(phi, params, g);
  REQUIRE(rep.converged);
  CHECK(rep.residual_history.back() < 1e-10);
  CHECK_NOTHROW(check_gram(rep.final_gram));
  CHECK_NOTHROW(check_metric(rep.final_metric, g));
  const TOperator op(rep.basis, phi, params, g);
  CHECK(op.moment_map_residual(rep.final_gram).norm < 1e-10);
  CHECK(op.bergman_defect(rep.final_gram) < 1e-8);
  // monotone after a short transient
  for (std::size_t i = 5; i < rep.residual_history.size(); ++i)
    CHECK(rep.residual_history[i] <= rep.residual_history[i - 1] * (1.0 + 1e-9));
}

TEST_CASE("unstable pair degenerates") {
  const QuadGrid g = build_grid(12, 16);
  for (int k : {2, 3, 5}) {
    const auto rep = solve_balanced(zero_higgs({{1, -1}}), QuantizationParams::defaults(2, k), g);
    CHECK_FALSE(rep.converged);
    REQUIRE(rep.divergence_reason.has_value());
    CHECK(*rep.divergence_reason == "gram_degeneration");
  }
}

TEST_CASE("max_iter is reported") {
  const QuadGrid g = build_grid(12, 16);
  BalanceOptions opts;
  opts.max_iter = 3;
  const auto rep = solve_balanced(co_higgs(), QuantizationParams::defaults(2, 4), g, opts);
  CHECK_FALSE(rep.converged);
  CHECK(rep.hit_max_iter);
  CHECK_FALSE(rep.divergence_reason.has_value());
}

TEST_CASE("damping reaches the same fixed point") {
  const QuadGrid g = build_grid(16, 20);
  BalanceOptions opts;
  opts.damping = 0.6;
  const auto params = QuantizationParams::defaults(2, 4);
  const auto a = solve_balanced(co_higgs(), params, g);
  const auto b = solve_balanced(co_higgs(), params, g, opts);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(metric_distance(a.final_metric, b.final_metric, g) < 1e-8);
}

TEST_CASE("tau scaling") {
  const QuadGrid g = build_grid(16, 20);
  const HiggsSpec phi = co_higgs();
  const auto a = solve_balanced(phi, QuantizationParams::defaults(2, 5, 4.0), g);
  const auto b = solve_balanced(phi.scaled(2.0), QuantizationParams::defaults(2, 5, 1.0), g);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(metric_distance(a.final_metric, b.final_metric, g) < 1e-8);
}

TEST_CASE("option validation") {
  BalanceOptions o;
  o.damping = 0.0;
  CHECK_THROWS_AS(o.validate(), DomainError);
  o = {};
  o.tol = -1;
  CHECK_THROWS_AS(o.validate(), DomainError);
  const QuadGrid g = build_grid(4, 8);
  CHECK_THROWS_AS(TOperator(monomial_basis({{0, 0}}, 2), zero_higgs({{0, 0}}), QuantizationParams::defaults(2, 3), g),
                  DomainError);
}
