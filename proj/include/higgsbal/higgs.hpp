#pragma once

// Higgs fields phi: E -> E (x) O(m) with polynomial entries, the contracted
// bracket [phi, phi*], the norm |phi|^2_h, the endomorphism frak_c and the
// hatted metric h(Id - frak_c).
//
// The twist O(m) carries the metric (1+|z|^2)^-m. In the reference-unitary
// frames of E and O(m) the Higgs field becomes
//   phi^_ij = phi_ij(z) (1+|z|^2)^-(a_i + m - a_j)/2,
// which is bounded on the sphere.

#include <vector>

#include "higgsbal/bundle.hpp"
#include "higgsbal/metric.hpp"
#include "higgsbal/polynomial.hpp"
#include "higgsbal/sphere.hpp"
#include "higgsbal/types.hpp"

namespace higgsbal {

struct HiggsSpec {
  BundleSpec bundle;
  std::vector<std::vector<Polynomial>> entries;  // r x r, entry (i, j) maps e_j to e_i

  int rank() const { return bundle.rank(); }
  /// Degree bound a_i + m - a_j of entry (i, j); negative means the entry must vanish.
  int entry_bound(int i, int j) const;
  void validate() const;
  bool is_zero(double tol = 0.0) const;
  HiggsSpec scaled(cplx c) const;
  /// Entry (i, j) evaluated at z in the chart frames.
  CMatrix evaluate(cplx z) const;
};

HiggsSpec zero_higgs(const BundleSpec& spec);

/// phi in the reference-unitary frames at a node.
CMatrix higgs_unitary(const HiggsSpec& phi, const GridNode& node);

struct QuantizationParams {
  int k = 1;
  double alpha = 1.0;
  double beta = 0.5;
  double tau = 1.0;

  /// alpha = 2(r-1) tau / k, beta = 1/(2(r-1)), so alpha beta = tau / k.
  static QuantizationParams defaults(int rank, int k, double tau = 1.0);
  void validate(int rank) const;
};

// Pointwise kernels on unitary-frame data (phi^, P).
CMatrix higgs_adjoint_node(const CMatrix& phi_hat, const CMatrix& p);
CMatrix bracket_node(const CMatrix& phi_hat, const CMatrix& p);
double norm_sq_node(const CMatrix& phi_hat, const CMatrix& p);
CMatrix frak_c_node(const CMatrix& phi_hat, const CMatrix& p, const QuantizationParams& params);

/// (1+|z|^2)^-m (phi phi* - phi* phi), chart frame.
EndoField bracket_contracted(const HiggsSpec& phi, const MetricField& h, const QuadGrid& grid);

/// (1+|z|^2)^-m tr(phi H^-1 phi^H H).
ScalarField higgs_norm_sq(const HiggsSpec& phi, const MetricField& h, const QuadGrid& grid);

/// alpha beta / (1 + alpha |phi|^2) [phi, phi*], chart frame.
EndoField frak_c(const HiggsSpec& phi, const MetricField& h, const QuantizationParams& params,
                 const QuadGrid& grid);

/// h (Id - c). Throws DomainError unless c is h-self-adjoint with spectrum in (-1, 1).
MetricField hatted_metric(const MetricField& h, const EndoField& c, const QuadGrid& grid);

} // namespace higgsbal
