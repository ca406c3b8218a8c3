#pragma once

// L^2 Gram matrices, Fubini-Study metrics from bases, the Bergman function and
// the two-term expansion check.
//
// Gram convention: G_ij = integral of (s_j, s_i)_h h_L^k omega, i.e. the matrix
// S^H P S assembled from the reference-unitary evaluation S (r x N) of the basis.
// This is hermitian positive definite; its transpose pairs s_i against s_j.

#include <optional>
#include <vector>

#include "higgsbal/bundle.hpp"
#include "higgsbal/metric.hpp"
#include "higgsbal/sphere.hpp"
#include "higgsbal/types.hpp"

namespace higgsbal {

using GramMatrix = CMatrix;

/// Throws NumericalError unless g is hermitian (to tol) and positive definite.
void check_gram(const GramMatrix& g, double tol = 1e-10);

/// Gram matrix from unitary-frame metric matrices (one per node).
GramMatrix gram_unitary(const std::vector<CMatrix>& p, const BasisEvaluation& ev, const QuadGrid& grid);

GramMatrix gram(const MetricField& h, const SectionBasis& basis, const QuadGrid& grid);
GramMatrix gram(const MetricField& h, const BasisEvaluation& ev, const QuadGrid& grid);

/// Unitary-frame matrices P = (N/(rV)) (S G^-1 S^H)^-1; throws NumericalError
/// naming the first node where S G^-1 S^H is singular.
std::vector<CMatrix> fubini_study_unitary(const BasisEvaluation& ev, const GramMatrix& g,
                                          const QuadGrid& grid);

MetricField fubini_study_from_basis(const SectionBasis& basis, const GramMatrix& g, const QuadGrid& grid);
MetricField fubini_study_from_basis(const SectionBasis& basis, const BasisEvaluation& ev,
                                    const GramMatrix& g, const QuadGrid& grid);

/// Largest entry of (S G^-1 S^H) P - (N/(rV)) Id over the nodes.
double fubini_study_defect(const BasisEvaluation& ev, const GramMatrix& g, const MetricField& h,
                           const QuadGrid& grid);

struct BergmanField {
  EndoField field;  // chart frame
  int k = 0;
};

/// Unitary-frame Bergman endomorphisms S G_h^-1 S^H P for a given metric.
std::vector<CMatrix> bergman_unitary(const std::vector<CMatrix>& p, const BasisEvaluation& ev,
                                     const QuadGrid& grid);

BergmanField bergman_function(const MetricField& h, const SectionBasis& basis, const QuadGrid& grid);

struct ExpansionEntry {
  int k = 0;
  double sup_d = 0.0;
};

struct ExpansionReport {
  std::vector<ExpansionEntry> entries;
  std::optional<double> fit_exponent;  // least-squares slope of log sup_d against log k
  bool under_resolved = false;
};

/// D_k = 2 pi B_k(h) - k Id - i Lambda F_h - Id for each k.
ExpansionReport expansion_check(const MetricField& h, const std::vector<int>& k_list, const QuadGrid& grid);

/// Least-squares slope of log y against log x over the positive entries.
std::optional<double> fit_log_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace higgsbal
