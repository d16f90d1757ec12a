#pragma once

#include <vector>

namespace pmafl {

// Smoothness / gradient-diversity constants feeding the bound evaluators.
struct BoundConstants {
  double l_u = 0.0;
  double l_v = 0.0;
  double chi = 0.0;    // max{L_uv, L_vu} / sqrt(L_u L_v)
  double delta = 0.0;  // partial gradient diversity offset
  double rho = 0.0;    // partial gradient diversity slope
  double eta_u = 0.0;

  // Non-negativity plus the learning-rate hypothesis
  // eta_u <= 1 / ((chi + 1) L_u); enforced by the bound evaluators.
  void validate() const;
};

// Per-round scheduled data sums s_t = sum_k alpha_{k,t} D_k.
struct ScheduleTrace {
  std::vector<double> scheduled_data;
  double total_data = 0.0;
};

// Per-round contraction factor
// A_t = 1 + eta_u L_u ((4/D^2) (D - s_t)^2 rho^2 - 1).
double contraction_factor(double scheduled_data, double total_data,
                          const BoundConstants& c);

// One-round expected loss decrease bound
// (eta_u/2)((4/D^2)(D - s)^2 rho^2 - 1) g + 2 eta_u (D - s)^2 delta^2 / D^2
// where g is the expected squared gradient norm.
double one_round_bound(double scheduled_data, double total_data,
                       const BoundConstants& c, double grad_norm_sq);

// Optimality-gap bound after each round:
// gap * prod A_t + sum_t (2 eta_u delta^2 / D^2)(D - s_t)^2 prod_{j>t} A_j.
// Returns one value per round of the trace.
std::vector<double> t_round_bound(double initial_gap,
                                  const ScheduleTrace& trace,
                                  const BoundConstants& c);

// One probe point for constant estimation: parameters plus gradients of the
// global objective and the per-device extractor gradient norms.
struct GradientSnapshot {
  std::vector<double> u;
  std::vector<double> v;       // concatenated per-device predictors
  std::vector<double> grad_u;  // global extractor gradient
  std::vector<double> grad_v;  // concatenated per-device predictor gradients
  std::vector<double> per_device_grad_u_sq;
};

// Best-effort estimates: secant-ratio lower bounds for the smoothness
// constants and a least-squares fit of the diversity pair. chi is not
// observable from these probes and is reported as zero.
BoundConstants estimate_constants(const std::vector<GradientSnapshot>& snaps,
                                  double eta_u);

}  // namespace pmafl
