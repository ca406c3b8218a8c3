#pragma once

// Line subbundles F = O(l) -> E, phi-invariance, the weights of the
// one-parameter subgroup that scales the sections of F (x) L^k, and a
// Gieseker-stability search for rank 2.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "higgsbal/balanced.hpp"
#include "higgsbal/higgs.hpp"
#include "higgsbal/metric.hpp"
#include "higgsbal/sphere.hpp"

namespace higgsbal {

/// F = O(degree) embedded by (p_1, ..., p_r), deg p_i <= a_i - degree.
struct SubbundleSpec {
  int degree = 0;
  std::vector<Polynomial> embedding;

  /// Degree bounds, rank guard, not all zero, and no common zero on the
  /// sphere (including z = infinity), up to relative tolerance 1e-10.
  void validate(const BundleSpec& spec) const;
  /// dim H^0(F (x) L^k) = degree + k + 1 (0 when negative).
  int sections(int k) const;
  /// Embedding of the sections z^j of F (x) L^k as coefficient columns in the
  /// monomial basis of H^0(E (x) L^k).
  CMatrix section_matrix(const BundleSpec& spec, int k) const;
};

/// phi(F) inside F (x) O(m), tested as the vanishing of every 2x2 minor of
/// [phi p | p] as a polynomial identity.
bool invariance_check(const SubbundleSpec& f, const HiggsSpec& phi, double tol = 1e-10);

struct WeightOptions {
  bool alpha_beta_inside = true;  // (alpha beta)^2 / (1 + alpha|phi|^2) versus alpha beta / (1 + alpha|phi|^2)
  std::vector<double> t_list;     // empty: 0, 0.25, ..., 8
  double singular_ratio = 1e-13;  // fibrewise eigenvalue ratio at which the curve is truncated
  double agreement = 0.05;        // relative tolerance for the closed-form comparison
};

struct CurvePoint {
  double t = 0.0;
  double value = 0.0;
};

struct WeightCurve {
  std::vector<CurvePoint> points;
  bool truncated = false;
  bool converged = false;  // last three samples agree to 1e-6 relative
  double limit = 0.0;      // mean of the last three samples
};

struct WeightReport {
  int nu_num = 0;
  int nu_den = 1;
  double nu = 0.0;
  double w_fs = 0.0;
  double w_phi = 0.0;
  double total = 0.0;
  bool invariant = false;
  std::pair<double, double> block_norms{0.0, 0.0};  // |pi phi (1 - pi)|^2, |(1 - pi) phi pi|^2 in L^2
  WeightCurve numeric_curve;
  bool agrees = false;  // numeric limit within the agreement tolerance of total
};

/// Closed-form weights at a metric h (normally the balanced metric). Throws
/// DomainError unless 0 < h0(F (x) L^k) < N.
WeightReport closed_form_weight(const SubbundleSpec& f, const HiggsSpec& phi, const QuantizationParams& params,
                                const MetricField& h, const QuadGrid& grid, const WeightOptions& opts = {});
/// Same, at a converged balanced run.
WeightReport closed_form_weight(const SubbundleSpec& f, const BalanceReport& balance, const QuadGrid& grid,
                                const WeightOptions& opts = {});

/// Moment-map pairing (rV/N) tr(M xi) along the one-parameter subgroup
/// (e^t on F-sections, e^(-nu t) on their G-orthogonal complement), starting
/// from the G-orthonormal adapted basis.
WeightCurve numeric_weight_curve(const SubbundleSpec& f, const HiggsSpec& phi, const QuantizationParams& params,
                                 const GramMatrix& g, const QuadGrid& grid, const WeightOptions& opts = {});
WeightCurve numeric_weight_curve(const SubbundleSpec& f, const BalanceReport& balance, const QuadGrid& grid,
                                 const WeightOptions& opts = {});

/// Closed form plus numeric curve in one report.
WeightReport weight_report(const SubbundleSpec& f, const HiggsSpec& phi, const QuantizationParams& params,
                           const GramMatrix& g, const MetricField& h, const QuadGrid& grid,
                           const WeightOptions& opts = {});

enum class Verdict { Stable, Semistable, Unstable };
std::string to_string(Verdict v);

struct SubbundleCheck {
  SubbundleSpec subbundle;
  std::vector<int> k_values;
  std::vector<double> sub_ratio;   // chi(F (x) L^k) / rk F
  std::vector<double> bundle_ratio; // chi(E (x) L^k) / rk E
  Verdict verdict = Verdict::Stable;
};

struct GiesekerReport {
  std::vector<SubbundleCheck> invariant_subbundles;
  Verdict verdict = Verdict::Stable;
};

/// Rank 2 only: enumerates saturated phi-invariant line subbundles of degree
/// l in [floor(mu(E)), max a_i] and compares Hilbert polynomials over k_range.
GiesekerReport gieseker_report(const HiggsSpec& phi, const std::vector<int>& k_range);

} // namespace higgsbal
