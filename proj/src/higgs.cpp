#include "higgsbal/higgs.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "higgsbal/parallel.hpp"

namespace higgsbal {

int HiggsSpec::entry_bound(int i, int j) const {
  return bundle.degrees[i] + bundle.twist_m - bundle.degrees[j];
}

void HiggsSpec::validate() const {
  bundle.validate();
  const int r = rank();
  if (static_cast<int>(entries.size()) != r)
    throw DomainError("HiggsSpec: expected " + std::to_string(r) + " rows");
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(entries[i].size()) != r)
      throw DomainError("HiggsSpec: row " + std::to_string(i + 1) + " has wrong length");
    for (int j = 0; j < r; ++j) {
      const int deg = poly_degree(entries[i][j]);
      if (deg >= 0 && deg > entry_bound(i, j))
        throw DomainError("HiggsSpec: entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                          ") has degree " + std::to_string(deg) + " above the bound " +
                          std::to_string(entry_bound(i, j)));
    }
  }
}

bool HiggsSpec::is_zero(double tol) const {
  for (const auto& row : entries)
    for (const auto& p : row)
      if (!poly_is_zero(p, tol)) return false;
  return true;
}

HiggsSpec HiggsSpec::scaled(cplx c) const {
  HiggsSpec out = *this;
  for (auto& row : out.entries)
    for (auto& p : row) p = poly_scale(p, c);
  return out;
}

CMatrix HiggsSpec::evaluate(cplx z) const {
  const int r = rank();
  CMatrix m = CMatrix::Zero(r, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) m(i, j) = poly_eval(entries[i][j], z);
  return m;
}

HiggsSpec zero_higgs(const BundleSpec& spec) {
  HiggsSpec phi;
  phi.bundle = spec;
  phi.entries.assign(spec.rank(), std::vector<Polynomial>(spec.rank()));
  return phi;
}

CMatrix higgs_unitary(const HiggsSpec& phi, const GridNode& node) {
  const int r = phi.rank();
  CMatrix m = CMatrix::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      const Polynomial& p = phi.entries[i][j];
      if (poly_is_zero(p, 0.0)) continue;
      m(i, j) = weighted_eval(poly_trim(p), phi.entry_bound(i, j), node.t, node.theta);
    }
  }
  return m;
}

QuantizationParams QuantizationParams::defaults(int rank, int k, double tau) {
  if (rank < 2) throw DomainError("QuantizationParams: rank must be at least 2");
  if (k < 1) throw DomainError("QuantizationParams: k must be positive");
  QuantizationParams q;
  q.k = k;
  q.tau = tau;
  q.alpha = 2.0 * (rank - 1) * tau / k;
  q.beta = 1.0 / (2.0 * (rank - 1));
  return q;
}

void QuantizationParams::validate(int rank) const {
  if (k < 1) throw DomainError("QuantizationParams: k must be positive");
  if (!(alpha > 0.0)) throw DomainError("QuantizationParams: alpha must be positive");
  if (!(tau > 0.0)) throw DomainError("QuantizationParams: tau must be positive");
  if (!(beta > 0.0)) throw DomainError("QuantizationParams: beta must be positive");
  // |eig frak_c| < 2 beta, so beta <= 1/2 keeps Id - frak_c invertible.
  if (beta > 0.5) throw DomainError("QuantizationParams: beta must not exceed 1/2");
  if (rank > 1 && !(beta < 2.0 / (rank - 1)))
    throw DomainError("QuantizationParams: beta must be below 2/(rank-1)");
}

CMatrix higgs_adjoint_node(const CMatrix& phi_hat, const CMatrix& p) {
  Eigen::LLT<CMatrix> llt(p);
  if (llt.info() != Eigen::Success) throw NumericalError("Higgs adjoint: metric is not positive");
  return llt.solve(phi_hat.adjoint() * p);
}

CMatrix bracket_node(const CMatrix& phi_hat, const CMatrix& p) {
  const CMatrix adj = higgs_adjoint_node(phi_hat, p);
  return phi_hat * adj - adj * phi_hat;
}

double norm_sq_node(const CMatrix& phi_hat, const CMatrix& p) {
  return (phi_hat * higgs_adjoint_node(phi_hat, p)).trace().real();
}

CMatrix frak_c_node(const CMatrix& phi_hat, const CMatrix& p, const QuantizationParams& params) {
  const CMatrix adj = higgs_adjoint_node(phi_hat, p);
  const double norm = (phi_hat * adj).trace().real();
  return (params.alpha * params.beta / (1.0 + params.alpha * norm)) * (phi_hat * adj - adj * phi_hat);
}

namespace {

void check_shapes(const HiggsSpec& phi, const MetricField& h, const QuadGrid& grid) {
  if (phi.bundle.degrees != h.degrees) throw DomainError("Higgs field and metric disagree on the bundle");
  if (h.size() != grid.size()) throw DomainError("metric and grid node counts differ");
}

} // namespace

EndoField bracket_contracted(const HiggsSpec& phi, const MetricField& h, const QuadGrid& grid) {
  check_shapes(phi, h, grid);
  EndoField out;
  out.values.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    const GridNode& node = grid.nodes[j];
    const CMatrix b = bracket_node(higgs_unitary(phi, node), unitary_metric(h, grid, j));
    out.values[j] = from_unitary(b, h.degrees, node.t);
  });
  return out;
}

ScalarField higgs_norm_sq(const HiggsSpec& phi, const MetricField& h, const QuadGrid& grid) {
  check_shapes(phi, h, grid);
  ScalarField out(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    out[j] = norm_sq_node(higgs_unitary(phi, grid.nodes[j]), unitary_metric(h, grid, j));
  });
  return out;
}

EndoField frak_c(const HiggsSpec& phi, const MetricField& h, const QuantizationParams& params,
                 const QuadGrid& grid) {
  check_shapes(phi, h, grid);
  params.validate(phi.rank());
  EndoField out;
  out.values.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t j) {
    const GridNode& node = grid.nodes[j];
    const CMatrix c = frak_c_node(higgs_unitary(phi, node), unitary_metric(h, grid, j), params);
    out.values[j] = from_unitary(c, h.degrees, node.t);
  });
  return out;
}

MetricField hatted_metric(const MetricField& h, const EndoField& c, const QuadGrid& grid) {
  if (c.size() != h.size() || h.size() != grid.size())
    throw DomainError("hatted_metric: node-count mismatch");
  const int r = h.rank();
  MetricField out = h;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double t = grid.nodes[j].t;
    const CMatrix p = unitary_metric(h, grid, j);
    const CMatrix chat = to_unitary(c.values[j], h.degrees, t);
    const CMatrix pc = p * chat;
    const double scale = std::max(1.0, pc.cwiseAbs().maxCoeff());
    if ((pc - pc.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * scale)
      throw DomainError("hatted_metric: endomorphism is not self-adjoint at node " + std::to_string(j));
    const Eigen::VectorXd ev = self_adjoint_spectrum(chat, p);
    if (ev.cwiseAbs().maxCoeff() >= 1.0)
      throw DomainError("hatted_metric: eigenvalue outside (-1, 1) at node " + std::to_string(j));
    out.rel[j] = h.rel[j] * (CMatrix::Identity(r, r) - c.values[j]);
  }
  return out;
}

} // namespace higgsbal
