#include "higgsbal/bergman.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "higgsbal/parallel.hpp"

namespace higgsbal {

void check_gram(const GramMatrix& g, double tol) {
  if (g.rows() != g.cols()) throw NumericalError("Gram matrix is not square");
  if (!g.allFinite()) throw NumericalError("Gram matrix has non-finite entries");
  const double scale = std::max(1e-300, g.cwiseAbs().maxCoeff());
  if ((g - g.adjoint()).cwiseAbs().maxCoeff() > tol * scale)
    throw NumericalError("Gram matrix is not hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (g + g.adjoint()), Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw NumericalError("Gram matrix is not positive definite");
}

GramMatrix gram_unitary(const std::vector<CMatrix>& p, const BasisEvaluation& ev, const QuadGrid& grid) {
  if (p.size() != grid.size() || ev.weighted.size() != grid.size())
    throw DomainError("gram: node-count mismatch");
  const int r = ev.rank;
  const int n = ev.count;
  // Stack sqrt(w) U^H S per node with P = U^H U, so that G = A^H A.
  CMatrix a(static_cast<Eigen::Index>(r * grid.size()), n);
  parallel_for(grid.size(), [&](std::size_t j) {
    Eigen::LLT<CMatrix> llt(p[j]);
    if (llt.info() != Eigen::Success)
      throw NumericalError("gram: metric is not positive at node " + std::to_string(j));
    const CMatrix u = llt.matrixU();
    a.middleRows(static_cast<Eigen::Index>(r * j), r) =
        (u * ev.weighted[j]) * std::sqrt(grid.nodes[j].weight);
  });
  GramMatrix g = a.adjoint() * a;
  g = 0.5 * (g + g.adjoint());
  Eigen::LLT<CMatrix> check(g);
  if (check.info() != Eigen::Success) throw NumericalError("gram: result is not positive definite");
  return g;
}

GramMatrix gram(const MetricField& h, const BasisEvaluation& ev, const QuadGrid& grid) {
  if (h.size() != grid.size()) throw DomainError("gram: metric and grid node counts differ");
  if (h.rank() != ev.rank) throw DomainError("gram: metric rank does not match the basis");
  std::vector<CMatrix> p(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) p[j] = unitary_metric(h, grid, j);
  return gram_unitary(p, ev, grid);
}

GramMatrix gram(const MetricField& h, const SectionBasis& basis, const QuadGrid& grid) {
  if (h.degrees != basis.spec.degrees) throw DomainError("gram: metric and basis bundles differ");
  return gram(h, evaluate_basis(basis, grid), grid);
}

namespace {

// Returns L^-1 S^H for G = L L^H; then S G^-1 S^H = X^H X.
Eigen::LLT<CMatrix> factor_gram(const GramMatrix& g) {
  Eigen::LLT<CMatrix> llt(g);
  if (llt.info() != Eigen::Success) throw NumericalError("Gram matrix is not positive definite");
  return llt;
}

} // namespace

std::vector<CMatrix> fubini_study_unitary(const BasisEvaluation& ev, const GramMatrix& g,
                                          const QuadGrid& grid) {
  if (g.rows() != ev.count) throw DomainError("fubini_study: Gram size does not match the basis");
  const auto llt = factor_gram(g);
  const double scale = double(ev.count) / (ev.rank * grid.volume());
  std::vector<CMatrix> p(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    const CMatrix x = llt.matrixL().solve(ev.weighted[j].adjoint());
    const CMatrix m = x.adjoint() * x;
    Eigen::LLT<CMatrix> mf(m);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
    if (mf.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 1e-14 * es.eigenvalues().maxCoeff())
      throw NumericalError("fubini_study: sections span a degenerate fibre at node " + std::to_string(j) +
                           " (t=" + std::to_string(grid.nodes[j].t) + ")");
    const CMatrix inv = mf.solve(CMatrix::Identity(ev.rank, ev.rank));
    p[j] = scale * 0.5 * (inv + inv.adjoint());
  });
  return p;
}

MetricField fubini_study_from_basis(const SectionBasis& basis, const BasisEvaluation& ev,
                                    const GramMatrix& g, const QuadGrid& grid) {
  return metric_from_unitary(fubini_study_unitary(ev, g, grid), basis.spec.degrees, grid);
}

MetricField fubini_study_from_basis(const SectionBasis& basis, const GramMatrix& g, const QuadGrid& grid) {
  return fubini_study_from_basis(basis, evaluate_basis(basis, grid), g, grid);
}

double fubini_study_defect(const BasisEvaluation& ev, const GramMatrix& g, const MetricField& h,
                           const QuadGrid& grid) {
  const auto llt = factor_gram(g);
  const double scale = double(ev.count) / (ev.rank * grid.volume());
  double worst = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const CMatrix x = llt.matrixL().solve(ev.weighted[j].adjoint());
    const CMatrix d = x.adjoint() * x * unitary_metric(h, grid, j) - scale * CMatrix::Identity(ev.rank, ev.rank);
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return worst;
}

std::vector<CMatrix> bergman_unitary(const std::vector<CMatrix>& p, const BasisEvaluation& ev,
                                     const QuadGrid& grid) {
  const auto llt = factor_gram(gram_unitary(p, ev, grid));
  std::vector<CMatrix> b(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    const CMatrix x = llt.matrixL().solve(ev.weighted[j].adjoint());
    b[j] = x.adjoint() * x * p[j];
  });
  return b;
}

BergmanField bergman_function(const MetricField& h, const SectionBasis& basis, const QuadGrid& grid) {
  if (h.degrees != basis.spec.degrees) throw DomainError("bergman_function: metric and basis bundles differ");
  const BasisEvaluation ev = evaluate_basis(basis, grid);
  std::vector<CMatrix> p(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) p[j] = unitary_metric(h, grid, j);
  const auto b = bergman_unitary(p, ev, grid);
  BergmanField out;
  out.k = basis.level_k;
  out.field.values.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    out.field.values[j] = from_unitary(b[j], h.degrees, grid.nodes[j].t);
  return out;
}

std::optional<double> fit_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(y[i])) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= lx.size();
  my /= ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

ExpansionReport expansion_check(const MetricField& h, const std::vector<int>& k_list, const QuadGrid& grid) {
  for (std::size_t i = 1; i < k_list.size(); ++i)
    if (k_list[i] <= k_list[i - 1]) throw DomainError("expansion_check: k_list must be increasing");
  BundleSpec spec;
  spec.degrees = h.degrees;
  ExpansionReport rep;
  const EndoField curv = curvature_contraction(h, grid);
  rep.under_resolved = curv.under_resolved;
  const int r = h.rank();
  std::vector<CMatrix> p(grid.size()), curv_u(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    p[j] = unitary_metric(h, grid, j);
    curv_u[j] = to_unitary(curv.values[j], h.degrees, grid.nodes[j].t);
  }
  std::vector<double> ks, ds;
  for (int k : k_list) {
    const SectionBasis basis = monomial_basis(spec, k);
    const BasisEvaluation ev = evaluate_basis(basis, grid);
    const auto b = bergman_unitary(p, ev, grid);
    std::vector<double> norms(grid.size());
    parallel_for(grid.size(), [&](std::size_t j) {
      const CMatrix d = kTwoPi * b[j] - (k + 1.0) * CMatrix::Identity(r, r) - curv_u[j];
      norms[j] = h_operator_norm(d, p[j]);
    });
    double sup = 0.0;
    for (double v : norms) sup = std::max(sup, v);
    rep.entries.push_back({k, sup});
    ks.push_back(k);
    ds.push_back(sup);
  }
  rep.fit_exponent = fit_log_slope(ks, ds);
  return rep;
}

} // namespace higgsbal
