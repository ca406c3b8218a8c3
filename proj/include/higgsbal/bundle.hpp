#pragma once

// E = O(a_1) + ... + O(a_r) over the sphere, L = O(1), and explicit bases of
// H^0(E (x) L^k). A section is an r-tuple of polynomials with deg p_i <= a_i + k.

#include <vector>

#include "higgsbal/polynomial.hpp"
#include "higgsbal/sphere.hpp"
#include "higgsbal/types.hpp"

namespace higgsbal {

struct BundleSpec {
  std::vector<int> degrees;  // a_1 >= a_2 >= ... >= a_r
  int twist_m = -2;          // twist O(m) replacing the canonical bundle (m = -2)

  int rank() const { return static_cast<int>(degrees.size()); }
  int degree() const;
  double slope() const { return double(degree()) / rank(); }
  /// Smallest k with every a_i + k >= 0.
  int min_level() const;
  void validate() const;
};

struct PolySection {
  std::vector<Polynomial> components;
};

/// Pads every component to exactly a_i + k + 1 coefficients; throws when a
/// component exceeds its degree bound.
PolySection canonicalize(PolySection s, const BundleSpec& spec, int k);

struct SectionBasis {
  BundleSpec spec;
  int level_k = 0;
  std::vector<PolySection> sections;

  int size() const { return static_cast<int>(sections.size()); }
};

int basis_dimension(const BundleSpec& spec, int k);

/// e_i z^p, 0 <= p <= a_i + k, summand-major then degree-ascending.
SectionBasis monomial_basis(const BundleSpec& spec, int k);

/// Offset of summand i's block inside the monomial basis.
int summand_offset(const BundleSpec& spec, int k, int summand);

/// Evaluation table on a grid. raw[j] holds the chart values s(z_j) (r x N);
/// weighted[j] holds the same columns with component i multiplied by
/// (1+|z|^2)^-(a_i+k)/2, i.e. the sections in the reference-unitary frame
/// including the h_L^k weight. Weighted values are bounded on the sphere.
struct BasisEvaluation {
  int rank = 0;
  int count = 0;
  std::vector<CMatrix> raw;
  std::vector<CMatrix> weighted;
};

BasisEvaluation evaluate_basis(const SectionBasis& basis, const QuadGrid& grid);

} // namespace higgsbal
