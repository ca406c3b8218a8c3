#pragma once

// The T-operator on Gram matrices and the balanced-metric fixed-point iteration.
//
// For a Gram matrix G on the monomial coordinates, T(G) is the Gram matrix of
// the hatted metric h^_G = h_G (Id - frak_c(h_G)), where h_G is the
// Fubini-Study metric of G. Balanced metrics are the fixed points T(G) = G.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "higgsbal/bergman.hpp"
#include "higgsbal/higgs.hpp"
#include "higgsbal/metric.hpp"
#include "higgsbal/sphere.hpp"

namespace higgsbal {

/// Cached evaluation data for one (basis, phi, params, grid).
class TOperator {
public:
  TOperator(SectionBasis basis, HiggsSpec phi, QuantizationParams params, const QuadGrid& grid);

  const SectionBasis& basis() const { return basis_; }
  const BasisEvaluation& evaluation() const { return ev_; }
  const HiggsSpec& higgs() const { return phi_; }
  const QuantizationParams& params() const { return params_; }
  const QuadGrid& grid() const { return *grid_; }
  int dimension() const { return basis_.size(); }

  /// Unitary-frame Fubini-Study metric of G.
  std::vector<CMatrix> fs_metric(const GramMatrix& g) const;
  /// Unitary-frame frak_c for a unitary-frame metric.
  std::vector<CMatrix> frak_c(const std::vector<CMatrix>& p) const;
  /// Unitary-frame hatted metric P (Id - c).
  std::vector<CMatrix> hatted(const std::vector<CMatrix>& p, const std::vector<CMatrix>& c) const;

  /// T(G) in monomial coordinates.
  GramMatrix apply(const GramMatrix& g) const;
  /// T(G) expressed in the G-orthonormal frame: L^-1 T(G) L^-H with G = L L^H.
  GramMatrix t_step(const GramMatrix& g) const;

  struct MomentMap {
    CMatrix matrix;  // integral of (t_j, (Id - c) t_i)_{h_G} minus Id, t = G-orthonormal basis
    double norm = 0.0;
  };
  /// Same quantity as t_step - Id, integrated node by node.
  MomentMap moment_map_residual(const GramMatrix& g) const;

  /// Largest entry of B_k(h^) - (N/(rV))(Id - c) over the nodes, unitary frame.
  double bergman_defect(const GramMatrix& g) const;

  /// Gram matrix of the reference metric.
  GramMatrix reference_gram() const;

private:
  SectionBasis basis_;
  HiggsSpec phi_;
  QuantizationParams params_;
  const QuadGrid* grid_;
  BasisEvaluation ev_;
  std::vector<CMatrix> phi_hat_;
};

GramMatrix t_step(const GramMatrix& g, const SectionBasis& basis, const HiggsSpec& phi,
                  const QuantizationParams& params, const QuadGrid& grid);

TOperator::MomentMap moment_map_residual(const GramMatrix& g, const SectionBasis& basis, const HiggsSpec& phi,
                                         const QuantizationParams& params, const QuadGrid& grid);

struct BalanceOptions {
  int max_iter = 500;
  double tol = 1e-10;
  double damping = 1.0;  // G <- (1 - damping) G + damping T(G)
  bool random_start = false;
  std::uint64_t seed = 0;
  double degeneration_floor = 1e-10;

  void validate() const;
};

struct BalanceReport {
  bool converged = false;
  bool hit_max_iter = false;
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> min_gram_eigenvalue_history;  // of the reference-relative Gram, trace-normalized
  GramMatrix final_gram;
  MetricField final_metric;
  std::optional<std::string> divergence_reason;

  HiggsSpec phi;
  QuantizationParams params;
  SectionBasis basis;
};

/// Iterates G <- (1 - theta) G + theta T(G) from the reference Gram (or a seeded
/// random perturbation) until ||t_step(G) - Id||_F < tol, max_iter, or degeneration.
BalanceReport solve_balanced(const HiggsSpec& phi, const QuantizationParams& params, const QuadGrid& grid,
                             const BalanceOptions& opts = {});

} // namespace higgsbal
