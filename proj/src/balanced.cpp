#include "higgsbal/balanced.hpp"

#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "higgsbal/parallel.hpp"

namespace higgsbal {

TOperator::TOperator(SectionBasis basis, HiggsSpec phi, QuantizationParams params, const QuadGrid& grid)
    : basis_(std::move(basis)), phi_(std::move(phi)), params_(params), grid_(&grid) {
  phi_.validate();
  if (phi_.bundle.degrees != basis_.spec.degrees) throw DomainError("TOperator: Higgs field and basis bundles differ");
  if (params_.k != basis_.level_k) throw DomainError("TOperator: params.k does not match the basis level");
  params_.validate(phi_.rank());
  ev_ = evaluate_basis(basis_, grid);
  phi_hat_.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) phi_hat_[j] = higgs_unitary(phi_, grid.nodes[j]);
}

std::vector<CMatrix> TOperator::fs_metric(const GramMatrix& g) const { return fubini_study_unitary(ev_, g, *grid_); }

std::vector<CMatrix> TOperator::frak_c(const std::vector<CMatrix>& p) const {
  const int r = ev_.rank;
  std::vector<CMatrix> c(p.size(), CMatrix::Zero(r, r));
  if (phi_.is_zero()) return c;
  parallel_for(p.size(), [&](std::size_t j) { c[j] = frak_c_node(phi_hat_[j], p[j], params_); });
  return c;
}

std::vector<CMatrix> TOperator::hatted(const std::vector<CMatrix>& p, const std::vector<CMatrix>& c) const {
  const int r = ev_.rank;
  std::vector<CMatrix> out(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    const CMatrix m = p[j] * (CMatrix::Identity(r, r) - c[j]);
    out[j] = 0.5 * (m + m.adjoint());
  }
  return out;
}

GramMatrix TOperator::apply(const GramMatrix& g) const {
  const auto p = fs_metric(g);
  return gram_unitary(hatted(p, frak_c(p)), ev_, *grid_);
}

namespace {

Eigen::LLT<CMatrix> factor(const GramMatrix& g) {
  Eigen::LLT<CMatrix> llt(g);
  if (llt.info() != Eigen::Success) throw NumericalError("Gram matrix is not positive definite");
  return llt;
}

// L^-1 X L^-H
CMatrix congruence(const Eigen::LLT<CMatrix>& llt, const CMatrix& x) {
  const CMatrix y = llt.matrixL().solve(x);
  CMatrix z = llt.matrixL().solve(y.adjoint()).adjoint();
  return 0.5 * (z + z.adjoint());
}

} // namespace

GramMatrix TOperator::t_step(const GramMatrix& g) const { return congruence(factor(g), apply(g)); }

TOperator::MomentMap TOperator::moment_map_residual(const GramMatrix& g) const {
  const auto llt = factor(g);
  const auto p = fs_metric(g);
  const auto c = frak_c(p);
  const int n = ev_.count;
  const int r = ev_.rank;
  // Orthonormal basis t = s L^-H, evaluated per node.
  std::vector<CMatrix> integrand(grid_->size());
  parallel_for(grid_->size(), [&](std::size_t j) {
    const CMatrix tj = llt.matrixL().solve(ev_.weighted[j].adjoint()).adjoint();  // r x N
    integrand[j] = grid_->nodes[j].weight * (tj.adjoint() * (p[j] * (CMatrix::Identity(r, r) - c[j])) * tj);
  });
  MomentMap out;
  out.matrix = CMatrix::Zero(n, n);
  for (const auto& m : integrand) out.matrix += m;
  out.matrix = 0.5 * (out.matrix + out.matrix.adjoint());
  out.matrix -= CMatrix::Identity(n, n);
  out.norm = out.matrix.norm();
  return out;
}

double TOperator::bergman_defect(const GramMatrix& g) const {
  const auto p = fs_metric(g);
  const auto c = frak_c(p);
  const auto ph = hatted(p, c);
  const auto b = bergman_unitary(ph, ev_, *grid_);
  const int r = ev_.rank;
  const double scale = double(ev_.count) / (r * grid_->volume());
  double worst = 0.0;
  for (std::size_t j = 0; j < grid_->size(); ++j)
    worst = std::max(worst, (b[j] - scale * (CMatrix::Identity(r, r) - c[j])).cwiseAbs().maxCoeff());
  return worst;
}

GramMatrix TOperator::reference_gram() const {
  const int r = ev_.rank;
  return gram_unitary(std::vector<CMatrix>(grid_->size(), CMatrix::Identity(r, r)), ev_, *grid_);
}

GramMatrix t_step(const GramMatrix& g, const SectionBasis& basis, const HiggsSpec& phi,
                  const QuantizationParams& params, const QuadGrid& grid) {
  return TOperator(basis, phi, params, grid).t_step(g);
}

TOperator::MomentMap moment_map_residual(const GramMatrix& g, const SectionBasis& basis, const HiggsSpec& phi,
                                         const QuantizationParams& params, const QuadGrid& grid) {
  return TOperator(basis, phi, params, grid).moment_map_residual(g);
}

void BalanceOptions::validate() const {
  if (max_iter < 1) throw DomainError("max_iter must be positive");
  if (!(tol > 0.0)) throw DomainError("tol must be positive");
  if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");
  if (!(degeneration_floor > 0.0)) throw DomainError("degeneration_floor must be positive");
}

BalanceReport solve_balanced(const HiggsSpec& phi, const QuantizationParams& params, const QuadGrid& grid,
                             const BalanceOptions& opts) {
  opts.validate();
  const TOperator op(monomial_basis(phi.bundle, params.k), phi, params, grid);
  const int n = op.dimension();

  BalanceReport rep;
  rep.phi = phi;
  rep.params = params;
  rep.basis = op.basis();

  const GramMatrix g0 = op.reference_gram();
  const auto ref = factor(g0);
  GramMatrix g = g0;
  if (opts.random_start) {
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> nd(0.0, 0.2);
    CMatrix a = CMatrix::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) += cplx(nd(rng), nd(rng));
    const CMatrix l = ref.matrixL();
    g = l * (a * a.adjoint()) * l.adjoint();
    g = 0.5 * (g + g.adjoint());
  }

  auto relative_min_eig = [&](const GramMatrix& x) {
    const CMatrix rel = congruence(ref, x);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rel, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() / (rel.trace().real() / n);
  };

  for (int it = 0; it < opts.max_iter; ++it) {
    GramMatrix tg;
    try {
      tg = op.apply(g);
    } catch (const NumericalError&) {
      rep.divergence_reason = "gram_degeneration";
      break;
    }
    const auto llt = factor(g);
    const double residual = (congruence(llt, tg) - CMatrix::Identity(n, n)).norm();
    rep.residual_history.push_back(residual);
    rep.min_gram_eigenvalue_history.push_back(relative_min_eig(g));
    rep.iterations = it;
    if (residual < opts.tol) {
      rep.converged = true;
      break;
    }
    g = (1.0 - opts.damping) * g + opts.damping * tg;
    g = 0.5 * (g + g.adjoint());
    // Fix the overall scale: the iteration is invariant under G -> cG.
    g *= double(n) / congruence(ref, g).trace().real();
    rep.iterations = it + 1;
    const double floor = relative_min_eig(g);
    if (!(floor > opts.degeneration_floor)) {
      rep.min_gram_eigenvalue_history.push_back(floor);
      rep.divergence_reason = "gram_degeneration";
      break;
    }
  }
  rep.hit_max_iter = !rep.converged && !rep.divergence_reason;
  rep.final_gram = g;
  try {
    rep.final_metric = metric_from_unitary(op.fs_metric(g), phi.bundle.degrees, grid);
  } catch (const NumericalError&) {
    rep.final_metric = MetricField{phi.bundle.degrees, {}};
  }
  return rep;
}

} // namespace higgsbal
