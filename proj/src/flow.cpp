#include "higgsbal/flow.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "higgsbal/bergman.hpp"
#include "higgsbal/parallel.hpp"

namespace higgsbal {

void FlowOptions::validate() const {
  if (!(dt > 0.0)) throw DomainError("flow: dt must be positive");
  if (max_steps < 1) throw DomainError("flow: max_steps must be positive");
  if (!(tol > 0.0)) throw DomainError("flow: tol must be positive");
  if (!(tau > 0.0)) throw DomainError("flow: tau must be positive");
  if (!(min_dt > 0.0) || min_dt > dt) throw DomainError("flow: min_dt must be positive and at most dt");
  if (!(max_condition > 1.0)) throw DomainError("flow: max_condition must exceed 1");
}

namespace {

// P^1/2 exp(-dt P^1/2 K P^-1/2) P^1/2 for a P-self-adjoint K.
CMatrix flow_update(const CMatrix& p, const CMatrix& k, double dt) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(p);
  const Eigen::VectorXd ev = es.eigenvalues();
  const CMatrix& v = es.eigenvectors();
  const CMatrix half = v * ev.cwiseSqrt().cast<cplx>().asDiagonal() * v.adjoint();
  const CMatrix inv_half = v * ev.cwiseSqrt().cwiseInverse().cast<cplx>().asDiagonal() * v.adjoint();
  CMatrix x = half * k * inv_half;
  x = 0.5 * (x + x.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> ex(x);
  const CMatrix e = ex.eigenvectors() * (-dt * ex.eigenvalues().array()).exp().matrix().cast<cplx>().asDiagonal() *
                    ex.eigenvectors().adjoint();
  const CMatrix out = half * e * half;
  return 0.5 * (out + out.adjoint());
}

// Integral of |K|_h^2 (Frobenius h-norm); decreases along the continuous flow.
double energy(const ResidualReport& res, const MetricField& h, const QuadGrid& grid) {
  double acc = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const CMatrix p = unitary_metric(h, grid, j);
    const CMatrix k = to_unitary(res.residual.values[j], h.degrees, grid.nodes[j].t);
    Eigen::LLT<CMatrix> llt(p);
    const CMatrix adj = llt.solve(k.adjoint() * p);
    acc += grid.nodes[j].weight * (k * adj).trace().real();
  }
  return acc;
}

// Largest eigenvalue magnitude of the linearized residual operator at h,
// by power iteration on P-hermitian perturbations of the unitary metrics.
double stiffness(const MetricField& h, const HiggsSpec& phi, const QuadGrid& grid, double tau,
                 const ResidualReport& base) {
  const int r = h.rank();
  const std::size_t n = grid.size();
  std::vector<CMatrix> p(n), w(n);
  for (std::size_t j = 0; j < n; ++j) {
    p[j] = unitary_metric(h, grid, j);
    // deterministic start with every angular and radial frequency present
    w[j] = CMatrix::Zero(r, r);
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b)
        w[j](a, b) = std::cos(1.0 + 3.7 * j + 1.3 * a + 2.9 * b) + std::cos(0.5 + 2.3 * j * (a + 1) * (b + 1));
    w[j] = 0.5 * (w[j] + w[j].adjoint());
  }
  auto norm = [&](const std::vector<CMatrix>& x) {
    double acc = 0.0;
    for (const auto& m : x) acc += m.squaredNorm();
    return std::sqrt(acc);
  };
  double lambda = 0.0;
  double prev = 0.0;
  const double eps = 1e-6;
  for (int it = 0; it < 60; ++it) {
    const double nw = norm(w);
    if (!(nw > 0.0)) break;
    std::vector<CMatrix> pp(n);
    for (std::size_t j = 0; j < n; ++j) {
      w[j] /= nw;
      pp[j] = p[j] + eps * w[j];
    }
    const MetricField hp = metric_from_unitary(pp, h.degrees, grid);
    const ResidualReport rp = hitchin_residual(hp, phi, grid, tau);
    for (std::size_t j = 0; j < n; ++j) {
      const double t = grid.nodes[j].t;
      const CMatrix dk = to_unitary(rp.residual.values[j] - base.residual.values[j], h.degrees, t) / eps;
      CMatrix m = p[j] * dk;
      w[j] = 0.5 * (m + m.adjoint());
    }
    const double next = norm(w);
    // The linearization is not symmetric in this inner product and the
    // estimates can alternate; keep the larger of the last two.
    const double est = std::max(next, prev);
    if (it > 5 && std::abs(est - lambda) < 1e-2 * est) {
      lambda = est;
      break;
    }
    lambda = est;
    prev = next;
  }
  return lambda;
}

double condition(const CMatrix& p) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(p, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

} // namespace

FlowReport heat_flow(const HiggsSpec& phi, const QuadGrid& grid, const FlowOptions& opts,
                     const std::optional<MetricField>& initial) {
  opts.validate();
  phi.validate();
  FlowReport rep;
  MetricField h = initial ? *initial : reference_metric(phi.bundle, grid);
  if (h.degrees != phi.bundle.degrees) throw DomainError("flow: initial metric does not match the bundle");
  h = normalize_log_det(h, grid);

  ResidualReport res = hitchin_residual(h, phi, grid, opts.tau);
  double dt = opts.dt;
  if (res.sup_norm >= opts.tol) {
    const double lambda = stiffness(h, phi, grid, opts.tau, res);
    if (lambda > 0.0) dt = std::min(dt, 1.6 / lambda);
  }
  double e = energy(res, h, grid);
  rep.residual_history.push_back(res.sup_norm);
  rep.energy_history.push_back(e);
  while (rep.steps < opts.max_steps && res.sup_norm >= opts.tol) {
    std::vector<CMatrix> p(grid.size());
    bool blown = false;
    parallel_for(grid.size(), [&](std::size_t j) {
      const double t = grid.nodes[j].t;
      p[j] = flow_update(unitary_metric(h, grid, j), to_unitary(res.residual.values[j], h.degrees, t), dt);
    });
    double worst_cond = 0.0;
    for (const auto& m : p) worst_cond = std::max(worst_cond, condition(m));
    if (!(worst_cond <= opts.max_condition)) blown = true;
    if (blown) {
      rep.aborted = true;
      std::ostringstream os;
      os << "metric condition number " << worst_cond << " exceeds " << opts.max_condition << " after "
         << rep.steps << " steps";
      rep.diagnostic = os.str();
      break;
    }
    MetricField next = normalize_log_det(metric_from_unitary(p, h.degrees, grid), grid);
    ResidualReport next_res = hitchin_residual(next, phi, grid, opts.tau);
    const double next_e = energy(next_res, next, grid);
    // The node-wise sup need not decrease (nodes sample a moving maximum), so
    // steps are judged by the L^2 energy. Slack absorbs rounding.
    if (next_e > e * (1.0 + 1e-10) + 1e-24) {
      dt *= 0.5;
      if (dt < opts.min_dt) {
        rep.aborted = true;
        rep.diagnostic = "time step fell below the minimum while the residual energy kept increasing";
        break;
      }
      continue;
    }
    h = std::move(next);
    res = std::move(next_res);
    e = next_e;
    ++rep.steps;
    rep.residual_history.push_back(res.sup_norm);
    rep.energy_history.push_back(e);
  }
  rep.converged = res.sup_norm < opts.tol;
  rep.plateau_value = res.sup_norm;
  rep.final_dt = dt;
  rep.final_metric = std::move(h);
  return rep;
}

double compare_balanced_to_flow(const BalanceReport& balance, const FlowReport& flow, const QuadGrid& flow_grid) {
  if (!balance.converged) throw DomainError("compare_balanced_to_flow: balanced run did not converge");
  if (!flow.converged) throw DomainError("compare_balanced_to_flow: flow did not converge");
  if (balance.basis.spec.degrees != flow.final_metric.degrees)
    throw DomainError("compare_balanced_to_flow: bundles differ");
  const MetricField hb = normalize_log_det(fubini_study_from_basis(balance.basis, balance.final_gram, flow_grid), flow_grid);
  const MetricField hf = normalize_log_det(flow.final_metric, flow_grid);
  return metric_distance(hb, hf, flow_grid);
}

} // namespace higgsbal
