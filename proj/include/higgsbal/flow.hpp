#pragma once

// Donaldson heat flow dS/dt = -S (i Lambda F_h + tau [phi, phi*] - c Id), an
// independent solver for the Hitchin equation. Explicit steps in the
// positive-definite form S <- S exp(-dt K); a step is rejected and dt halved
// when the L^2 energy of K increases.

#include <optional>
#include <string>
#include <vector>

#include "higgsbal/balanced.hpp"
#include "higgsbal/higgs.hpp"
#include "higgsbal/metric.hpp"
#include "higgsbal/sphere.hpp"

namespace higgsbal {

struct FlowOptions {
  double dt = 2e-3;
  int max_steps = 20000;
  double tol = 1e-8;
  double tau = 1.0;
  double min_dt = 1e-9;
  double max_condition = 1e12;

  void validate() const;
};

struct FlowReport {
  bool converged = false;
  bool aborted = false;
  std::string diagnostic;
  int steps = 0;
  double final_dt = 0.0;
  double plateau_value = 0.0;  // last residual sup norm
  std::vector<double> residual_history;  // sup norm per accepted step
  std::vector<double> energy_history;    // integral of |K|_h^2 per accepted step
  MetricField final_metric;
};

FlowReport heat_flow(const HiggsSpec& phi, const QuadGrid& grid, const FlowOptions& opts = {},
                     const std::optional<MetricField>& initial = std::nullopt);

/// Distance between the balanced metric (re-evaluated on the flow grid from its
/// basis and Gram matrix) and the flow limit, both normalized to zero mean log det.
double compare_balanced_to_flow(const BalanceReport& balance, const FlowReport& flow, const QuadGrid& flow_grid);

} // namespace higgsbal
