#include "higgsbal/metric.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "higgsbal/higgs.hpp"
#include "higgsbal/parallel.hpp"

namespace higgsbal {

namespace {

void require_same_grid(const MetricField& h, const QuadGrid& grid, const char* what) {
  if (h.size() != grid.size())
    throw DomainError(std::string(what) + ": metric has " + std::to_string(h.size()) +
                      " nodes, grid has " + std::to_string(grid.size()));
}

Eigen::LLT<CMatrix> factor(const CMatrix& p) {
  Eigen::LLT<CMatrix> llt(p);
  if (llt.info() != Eigen::Success) throw NumericalError("metric is not positive definite");
  return llt;
}

} // namespace

MetricField reference_metric(const BundleSpec& spec, const QuadGrid& grid) {
  MetricField h;
  h.degrees = spec.degrees;
  h.rel.assign(grid.size(), CMatrix::Identity(spec.rank(), spec.rank()));
  return h;
}

CMatrix to_unitary(const CMatrix& m, const std::vector<int>& degrees, double t) {
  CMatrix out = m;
  const int r = static_cast<int>(degrees.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (degrees[i] != degrees[j]) out(i, j) *= std::pow(1.0 - t, 0.5 * (degrees[i] - degrees[j]));
  return out;
}

CMatrix from_unitary(const CMatrix& m, const std::vector<int>& degrees, double t) {
  CMatrix out = m;
  const int r = static_cast<int>(degrees.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (degrees[i] != degrees[j]) out(i, j) *= std::pow(1.0 - t, 0.5 * (degrees[j] - degrees[i]));
  return out;
}

CMatrix unitary_metric(const MetricField& h, const QuadGrid& grid, std::size_t node) {
  CMatrix p = to_unitary(h.rel[node], h.degrees, grid.nodes[node].t);
  return 0.5 * (p + p.adjoint());
}

MetricField metric_from_unitary(const std::vector<CMatrix>& p, const std::vector<int>& degrees,
                                const QuadGrid& grid) {
  if (p.size() != grid.size()) throw DomainError("metric_from_unitary: node-count mismatch");
  MetricField h;
  h.degrees = degrees;
  h.rel.resize(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) h.rel[j] = from_unitary(p[j], degrees, grid.nodes[j].t);
  return h;
}

void check_metric(const MetricField& h, const QuadGrid& grid, double tol) {
  require_same_grid(h, grid, "check_metric");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const CMatrix p = to_unitary(h.rel[j], h.degrees, grid.nodes[j].t);
    if (!p.allFinite()) throw NumericalError("metric has non-finite entries at node " + std::to_string(j));
    const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
    if ((p - p.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
      throw NumericalError("metric is not hermitian at node " + std::to_string(j));
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (p + p.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw NumericalError("metric is not positive at node " + std::to_string(j));
  }
}

Eigen::VectorXd self_adjoint_spectrum(const CMatrix& endo_unitary, const CMatrix& p) {
  const auto llt = factor(p);
  // L^-1 (P X) L^-H is hermitian when X is P-self-adjoint.
  CMatrix y = llt.matrixL().solve(p * endo_unitary);
  y = llt.matrixL().solve(y.adjoint()).adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (y + y.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double h_operator_norm(const CMatrix& endo_unitary, const CMatrix& p) {
  const auto llt = factor(p);
  // |v|_P = |L^H v|, so the norm is the spectral norm of L^H X L^-H.
  const CMatrix y0 = llt.matrixU() * endo_unitary;
  const CMatrix y = llt.matrixL().solve(y0.adjoint()).adjoint();
  Eigen::JacobiSVD<CMatrix> svd(y);
  return svd.singularValues()(0);
}

double sup_operator_norm(const EndoField& f, const MetricField& h, const QuadGrid& grid) {
  require_same_grid(h, grid, "sup_operator_norm");
  std::vector<double> norms(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    const double t = grid.nodes[j].t;
    norms[j] = h_operator_norm(to_unitary(f.values[j], h.degrees, t), unitary_metric(h, grid, j));
  });
  return *std::max_element(norms.begin(), norms.end());
}

EndoField curvature_contraction(const MetricField& h, const QuadGrid& grid) {
  require_same_grid(h, grid, "curvature_contraction");
  const int r = h.rank();
  const std::size_t n = grid.size();
  EndoField out;

  // d/dz of every entry of S.
  std::vector<CMatrix> ds(n, CMatrix::Zero(r, r));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      ScalarField s(n);
      for (std::size_t q = 0; q < n; ++q) s[q] = h.rel[q](i, j);
      const auto d = spectral_derivative(s, grid, Direction::Z, {h.degrees[i] - h.degrees[j], 0});
      out.under_resolved = out.under_resolved || d.under_resolved;
      for (std::size_t q = 0; q < n; ++q) ds[q](i, j) = d.field[q];
    }
  }

  // Q = S^-1 (dS + [A, S]) with A = -diag(a) zbar / (1+|z|^2), assembled in the unitary frame.
  std::vector<CMatrix> qf(n);
  parallel_for(n, [&](std::size_t q) {
    const GridNode& node = grid.nodes[q];
    const CMatrix p = unitary_metric(h, grid, q);
    CMatrix m = to_unitary(ds[q], h.degrees, node.t);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        m(i, j) -= double(h.degrees[i] - h.degrees[j]) * std::conj(node.z) * node.one_minus_t() * p(i, j);
    const CMatrix qhat = factor(p).solve(m);
    qf[q] = from_unitary(qhat, h.degrees, node.t);
  });

  out.values.assign(n, CMatrix::Zero(r, r));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      ScalarField s(n);
      for (std::size_t q = 0; q < n; ++q) s[q] = qf[q](i, j);
      const auto d = spectral_derivative(s, grid, Direction::ZBar, {h.degrees[i] - h.degrees[j] - 2, 0});
      out.under_resolved = out.under_resolved || d.under_resolved;
      for (std::size_t q = 0; q < n; ++q) out.values[q](i, j) = -d.field[q] / grid.nodes[q].rho();
    }
  }
  for (std::size_t q = 0; q < n; ++q)
    for (int i = 0; i < r; ++i) out.values[q](i, i) += double(h.degrees[i]);
  return out;
}

ResidualReport hitchin_residual(const MetricField& h, const HiggsSpec& phi, const QuadGrid& grid,
                                double tau) {
  if (phi.bundle.degrees != h.degrees) throw DomainError("hitchin_residual: bundle mismatch");
  ResidualReport rep;
  rep.residual = curvature_contraction(h, grid);
  const double c = double(phi.bundle.degree()) / phi.rank();
  const bool has_phi = !phi.is_zero();
  EndoField b;
  if (has_phi) b = bracket_contracted(phi, h, grid);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    CMatrix& m = rep.residual.values[q];
    if (has_phi) m += tau * b.values[q];
    m.diagonal().array() -= c;
  }
  rep.sup_norm = sup_operator_norm(rep.residual, h, grid);
  return rep;
}

double metric_distance(const MetricField& h1, const MetricField& h2, const QuadGrid& grid) {
  require_same_grid(h1, grid, "metric_distance");
  require_same_grid(h2, grid, "metric_distance");
  if (h1.degrees != h2.degrees) throw DomainError("metric_distance: bundle mismatch");
  std::vector<double> dist(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    const auto llt = factor(unitary_metric(h1, grid, j));
    CMatrix y = llt.matrixL().solve(unitary_metric(h2, grid, j));
    y = llt.matrixL().solve(y.adjoint()).adjoint();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (y + y.adjoint()), Eigen::EigenvaluesOnly);
    dist[j] = (es.eigenvalues().array() - 1.0).abs().maxCoeff();
  });
  return *std::max_element(dist.begin(), dist.end());
}

MetricField conformal_shift(const MetricField& h, const ScalarField& u) {
  if (u.size() != h.size()) throw DomainError("conformal_shift: node-count mismatch");
  MetricField out = h;
  for (std::size_t j = 0; j < h.size(); ++j) out.rel[j] *= std::exp(u[j].real());
  return out;
}

MetricField scale_metric(const MetricField& h, double factor_value) {
  if (!(factor_value > 0.0)) throw DomainError("scale_metric: factor must be positive");
  MetricField out = h;
  for (auto& s : out.rel) s *= factor_value;
  return out;
}

double mean_log_det(const MetricField& h, const QuadGrid& grid) {
  require_same_grid(h, grid, "mean_log_det");
  ScalarField f(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto llt = factor(unitary_metric(h, grid, j));
    f[j] = 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
  }
  return integrate(f, grid).real() / grid.volume();
}

MetricField normalize_log_det(const MetricField& h, const QuadGrid& grid) {
  return scale_metric(h, std::exp(-mean_log_det(h, grid) / h.rank()));
}

ScalarField laplacian(const ScalarField& u, const QuadGrid& grid) {
  const auto du = spectral_derivative(u, grid, Direction::Z, {0, 0});
  const auto ddu = spectral_derivative(du.field, grid, Direction::ZBar, {-2, 0});
  ScalarField out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = -ddu.field[j] / grid.nodes[j].rho();
  return out;
}

void write_metric_csv(const MetricField& h, const QuadGrid& grid, std::ostream& out) {
  require_same_grid(h, grid, "write_metric_csv");
  const int r = h.rank();
  out << "node,t,theta,re_z,im_z";
  for (int i = 0; i < r; ++i)
    for (int j = 0; j <= i; ++j) out << ",p" << i + 1 << j + 1 << "_re,p" << i + 1 << j + 1 << "_im";
  out << '\n';
  out.precision(17);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const GridNode& node = grid.nodes[q];
    const CMatrix p = unitary_metric(h, grid, q);
    out << q << ',' << node.t << ',' << node.theta << ',' << node.z.real() << ',' << node.z.imag();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j <= i; ++j) out << ',' << p(i, j).real() << ',' << p(i, j).imag();
    out << '\n';
  }
}

MetricField perturbed_metric(const BundleSpec& spec, const QuadGrid& grid, std::uint64_t seed, double amp) {
  spec.validate();
  if (!(amp >= 0.0)) throw DomainError("perturbed_metric: amplitude must be nonnegative");
  const int r = spec.rank();
  std::mt19937_64 rng(seed);
  auto uniform = [&]() { return amp * (2.0 * double(rng() >> 11) * 0x1.0p-53 - 1.0); };
  std::vector<std::vector<Polynomial>> g(r, std::vector<Polynomial>(r));
  for (int i = 0; i < r; ++i)
    for (int j = i + 1; j < r; ++j) {
      const int d = spec.degrees[i] - spec.degrees[j];
      g[i][j].resize(d + 1);
      for (auto& c : g[i][j]) {
        const double re = uniform();
        c = cplx(re, uniform());
      }
    }
  std::vector<double> c(r), s(r);
  for (int i = 0; i < r; ++i) {
    c[i] = uniform();
    s[i] = uniform();
  }
  MetricField h = reference_metric(spec, grid);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const GridNode& n = grid.nodes[q];
    CMatrix gm = CMatrix::Identity(r, r);
    for (int i = 0; i < r; ++i)
      for (int j = i + 1; j < r; ++j) gm(i, j) = weighted_eval(g[i][j], spec.degrees[i] - spec.degrees[j], n.t, n.theta);
    Eigen::VectorXd e(r);
    for (int i = 0; i < r; ++i)
      e(i) = std::exp(c[i] * (n.t - 0.5) + s[i] * 2.0 * std::sqrt(n.t * (1.0 - n.t)) * std::cos(n.theta));
    const CMatrix p = gm.adjoint() * e.cast<cplx>().asDiagonal() * gm;
    h.rel[q] = from_unitary(p, spec.degrees, n.t);
  }
  return h;
}

} // namespace higgsbal
