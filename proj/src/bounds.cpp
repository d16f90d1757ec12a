#include "pmafl/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pmafl {

void BoundConstants::validate() const {
  if (l_u < 0.0 || l_v < 0.0 || chi < 0.0 || delta < 0.0 || rho < 0.0 ||
      eta_u < 0.0) {
    throw std::invalid_argument("BoundConstants: all fields must be >= 0");
  }
  if (eta_u * (chi + 1.0) * l_u > 1.0 + 1e-12) {
    throw std::invalid_argument(
        "BoundConstants: eta_u exceeds 1 / ((chi + 1) L_u)");
  }
}

double contraction_factor(double scheduled_data, double total_data,
                          const BoundConstants& c) {
  c.validate();
  if (!(total_data > 0.0) || scheduled_data < 0.0 ||
      scheduled_data > total_data) {
    throw std::invalid_argument("contraction_factor: bad data sizes");
  }
  const double miss = (total_data - scheduled_data) / total_data;
  return 1.0 + c.eta_u * c.l_u * (4.0 * miss * miss * c.rho * c.rho - 1.0);
}

double one_round_bound(double scheduled_data, double total_data,
                       const BoundConstants& c, double grad_norm_sq) {
  c.validate();
  if (grad_norm_sq < 0.0) {
    throw std::invalid_argument("one_round_bound: grad_norm_sq must be >= 0");
  }
  const double miss = (total_data - scheduled_data) / total_data;
  return 0.5 * c.eta_u * (4.0 * miss * miss * c.rho * c.rho - 1.0) *
             grad_norm_sq +
         2.0 * c.eta_u * miss * miss * c.delta * c.delta;
}

std::vector<double> t_round_bound(double initial_gap,
                                  const ScheduleTrace& trace,
                                  const BoundConstants& c) {
  c.validate();
  if (initial_gap < 0.0) {
    throw std::invalid_argument("t_round_bound: initial_gap must be >= 0");
  }
  std::vector<double> bounds;
  bounds.reserve(trace.scheduled_data.size());
  double gap = initial_gap;
  for (double s : trace.scheduled_data) {
    const double a = contraction_factor(s, trace.total_data, c);
    const double miss = (trace.total_data - s) / trace.total_data;
    gap = a * gap + 2.0 * c.eta_u * c.delta * c.delta * miss * miss;
    bounds.push_back(gap);
  }
  return bounds;
}

BoundConstants estimate_constants(const std::vector<GradientSnapshot>& snaps,
                                  double eta_u) {
  if (snaps.size() < 2) {
    throw std::invalid_argument("estimate_constants: need >= 2 snapshots");
  }
  const std::size_t n = snaps.size();

  auto param_dist = [](const GradientSnapshot& a, const GradientSnapshot& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.u.size(); ++i) {
      const double d = a.u[i] - b.u[i];
      s += d * d;
    }
    for (std::size_t i = 0; i < a.v.size(); ++i) {
      const double d = a.v[i] - b.v[i];
      s += d * d;
    }
    return std::sqrt(s);
  };
  auto grad_dist = [](const std::vector<double>& a,
                      const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  };

  BoundConstants c;
  c.eta_u = eta_u;
  bool any_pair = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = param_dist(snaps[i], snaps[j]);
      if (dist <= 0.0) continue;
      any_pair = true;
      c.l_u = std::max(c.l_u, grad_dist(snaps[i].grad_u, snaps[j].grad_u) / dist);
      c.l_v = std::max(c.l_v, grad_dist(snaps[i].grad_v, snaps[j].grad_v) / dist);
    }
  }
  if (!any_pair) {
    throw std::invalid_argument("estimate_constants: identical snapshots");
  }

  // Least-squares fit of max_k ||grad_u F_k||^2 = delta^2 + rho^2 ||grad_u F||^2.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (const GradientSnapshot& s : snaps) {
    double x = 0.0;
    for (double g : s.grad_u) x += g * g;
    double y = 0.0;
    for (double q : s.per_device_grad_u_sq) y = std::max(y, q);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  double slope = 0.0;
  double intercept = 0.0;
  if (std::abs(denom) > 1e-30 * std::max(1.0, sxx)) {
    slope = (n * sxy - sx * sy) / denom;
    intercept = (sy - slope * sx) / n;
  } else {
    intercept = sy / n;  // no spread in x: attribute everything to delta
  }
  c.rho = std::sqrt(std::max(0.0, slope));
  c.delta = std::sqrt(std::max(0.0, intercept));
  return c;
}

}  // namespace pmafl
