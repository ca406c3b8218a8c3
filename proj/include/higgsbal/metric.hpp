#pragma once

// Hermitian metrics on E = sum O(a_i), stored relative to the reference metric
// h_ref = diag((1+|z|^2)^-a_i): the chart-frame matrix is H = h_ref S.
//
// Most computations run in the reference-unitary frame e_i (1+|z|^2)^(a_i/2),
// where the metric matrix is P = D S D^-1 with D = diag((1-t)^(a_i/2)). P is
// hermitian, positive and bounded on the sphere; endomorphisms transform by
// the same conjugation.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "higgsbal/bundle.hpp"
#include "higgsbal/sphere.hpp"
#include "higgsbal/types.hpp"

namespace higgsbal {

struct HiggsSpec;

struct MetricField {
  std::vector<int> degrees;
  std::vector<CMatrix> rel;  // S at each node

  int rank() const { return static_cast<int>(degrees.size()); }
  std::size_t size() const { return rel.size(); }
};

/// Endomorphism-valued field in the chart frame.
struct EndoField {
  std::vector<CMatrix> values;
  bool under_resolved = false;

  std::size_t size() const { return values.size(); }
};

MetricField reference_metric(const BundleSpec& spec, const QuadGrid& grid);

/// Chart frame -> reference-unitary frame (metrics and endomorphisms alike).
CMatrix to_unitary(const CMatrix& m, const std::vector<int>& degrees, double t);
CMatrix from_unitary(const CMatrix& m, const std::vector<int>& degrees, double t);

CMatrix unitary_metric(const MetricField& h, const QuadGrid& grid, std::size_t node);
MetricField metric_from_unitary(const std::vector<CMatrix>& p, const std::vector<int>& degrees,
                                const QuadGrid& grid);

/// Throws NumericalError unless every P is hermitian positive definite.
void check_metric(const MetricField& h, const QuadGrid& grid, double tol = 1e-10);

/// Operator norm of an endomorphism (unitary frame) for the metric P.
double h_operator_norm(const CMatrix& endo_unitary, const CMatrix& p);

/// Real spectrum of an endomorphism (unitary frame) that is self-adjoint for P.
Eigen::VectorXd self_adjoint_spectrum(const CMatrix& endo_unitary, const CMatrix& p);

/// sup over nodes of the h-operator norm.
double sup_operator_norm(const EndoField& f, const MetricField& h, const QuadGrid& grid);

/// i Lambda F_h. The reference part diag(a_i) is added analytically; the
/// relative part -rho^-1 d/dzbar (S^-1 D'_z S) is differentiated spectrally.
EndoField curvature_contraction(const MetricField& h, const QuadGrid& grid);

struct ResidualReport {
  EndoField residual;
  double sup_norm = 0.0;
};

/// Lambda(iF_h + tau [phi, phi*h]) - (deg E / rk E) Id.
ResidualReport hitchin_residual(const MetricField& h, const HiggsSpec& phi, const QuadGrid& grid,
                                double tau = 1.0);

/// sup over nodes of the operator norm of h1^-1 h2 - Id.
double metric_distance(const MetricField& h1, const MetricField& h2, const QuadGrid& grid);

/// h -> e^u h for a real function u.
MetricField conformal_shift(const MetricField& h, const ScalarField& u);

MetricField scale_metric(const MetricField& h, double factor);

/// (1/V) integral of log det h_ref^-1 h.
double mean_log_det(const MetricField& h, const QuadGrid& grid);

/// Rescales h so that mean_log_det vanishes.
MetricField normalize_log_det(const MetricField& h, const QuadGrid& grid);

/// Smooth non-reference metric g^H diag(e^u) g in the unitary frame, with a
/// holomorphic unipotent gauge g and smooth radial-angular weights u, drawn
/// uniformly in [-amp, amp] from a seeded mt19937_64.
MetricField perturbed_metric(const BundleSpec& spec, const QuadGrid& grid, std::uint64_t seed, double amp);

/// Weighted positive Laplacian -rho^-1 d^2/dz dzbar of a smooth real function.
ScalarField laplacian(const ScalarField& u, const QuadGrid& grid);

/// CSV snapshot: node,t,theta,re_z,im_z, then the lower triangle of the
/// reference-unitary matrix P as (re, im) pairs.
void write_metric_csv(const MetricField& h, const QuadGrid& grid, std::ostream& out);

} // namespace higgsbal
