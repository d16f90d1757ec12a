#include "pmafl/resopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pmafl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxExponent = 700.0;

}  // namespace

void AllocationInput::validate() const {
  cfg.validate();
  const int n = static_cast<int>(profiles.size());
  if (static_cast<int>(queues.size()) != n ||
      static_cast<int>(gains.gains.size()) != n) {
    throw std::invalid_argument(
        "AllocationInput: queues and gains must be indexed like profiles");
  }
  for (int i = 0; i < n; ++i) {
    if (profiles[i].id != i) {
      throw std::invalid_argument("AllocationInput: profiles must be indexed by id");
    }
    if (queues[i] < 0.0) {
      throw std::invalid_argument("AllocationInput: queue weights must be >= 0");
    }
    if (!(gains.gains[i] > 0.0)) {
      throw std::invalid_argument("AllocationInput: channel gains must be > 0");
    }
  }
  for (std::size_t i = 0; i < scheduled.size(); ++i) {
    if (scheduled[i] < 0 || scheduled[i] >= n) {
      throw std::invalid_argument("AllocationInput: scheduled id out of range");
    }
    if (i > 0 && scheduled[i] <= scheduled[i - 1]) {
      throw std::invalid_argument("AllocationInput: scheduled ids must be ascending");
    }
  }
}

double lambert_w0(double x) {
  const double branch = -std::exp(-1.0);
  if (std::isnan(x)) throw std::domain_error("lambert_w0: NaN argument");
  if (x < branch) {
    // Tolerate rounding noise right at the branch point.
    if (x > branch * (1.0 + 4e-16)) return -1.0;
    throw std::domain_error("lambert_w0: argument below -1/e");
  }
  if (x == 0.0) return 0.0;

  const double p2 = 2.0 * (M_E * x + 1.0);
  if (p2 <= 0.0) return -1.0;

  double w;
  if (p2 < 2e-10) {
    // Branch-point series; Halley's correction is ill-conditioned here.
    const double p = std::sqrt(p2);
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
  }
  if (x < -0.25) {
    const double p = std::sqrt(p2);
    w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
  } else if (x < 3.0) {
    w = x / (1.0 + x);
  } else {
    const double l1 = std::log(x);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }

  for (int it = 0; it < 64; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    double step = f / denom;
    double next = w - step;
    if (next < -1.0) next = 0.5 * (w - 1.0);  // stay on the principal branch
    if (std::abs(next - w) <= 2e-16 * (1.0 + std::abs(next))) {
      w = next;
      break;
    }
    w = next;
  }
  return w;
}

double uplink_energy_dt(double theta, double t_comm, double gain,
                        const SystemConfig& cfg) {
  const double band = theta * cfg.bandwidth;
  const double ex = cfg.model_bits / (band * t_comm);
  if (ex > kMaxExponent) return -kInf;
  const double pow2 = std::exp2(ex);
  return band * cfg.noise_psd / gain * (pow2 * (1.0 - ex * M_LN2) - 1.0);
}

std::optional<double> min_bandwidth_fraction(const DeviceProfile& profile,
                                             double gain, double t_comm_budget,
                                             const SystemConfig& cfg,
                                             const SolverOptions& opts) {
  if (!(t_comm_budget > 0.0)) return std::nullopt;
  const double target = cfg.model_bits / t_comm_budget;
  if (max_uplink_rate(1.0, gain, profile, cfg) < target) return std::nullopt;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < opts.theta_bisect_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (max_uplink_rate(mid, gain, profile, cfg) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;  // feasible side of the bracket
}

double optimal_comp_time(const DeviceProfile& profile, double theta,
                         double gain, const SystemConfig& cfg,
                         const SolverOptions& opts) {
  if (!(theta > 0.0) || theta > 1.0) {
    throw std::domain_error("optimal_comp_time: theta must be in (0, 1]");
  }
  const double t_lo = min_comp_time(profile, cfg.local_iters);
  const double t_hi = cfg.t_max - min_comm_time(theta, gain, profile, cfg);
  if (t_lo > t_hi) {
    throw InfeasibleDeviceError("optimal_comp_time: empty feasibility window");
  }
  if (t_lo == t_hi) return t_lo;

  const double work =
      cfg.local_iters * profile.data_size * profile.cycles_per_sample;
  const double comp_cubed = profile.kappa * work * work * work;
  // Total-energy derivative in the computation time; strictly increasing on
  // the window by convexity of both energy terms.
  auto deriv = [&](double t) {
    const double d_comp = -2.0 * comp_cubed / (t * t * t);
    const double d_up = uplink_energy_dt(theta, cfg.t_max - t, gain, cfg);
    return d_comp - d_up;
  };

  if (deriv(t_lo) >= 0.0) return t_lo;
  if (deriv(t_hi) <= 0.0) return t_hi;

  double lo = t_lo;
  double hi = t_hi;
  for (int it = 0; it < opts.comp_time_bisect_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (deriv(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double bandwidth_objective(const AllocationInput& in,
                           const std::vector<double>& t_comp,
                           const std::vector<double>& theta) {
  double total = 0.0;
  for (std::size_t i = 0; i < in.scheduled.size(); ++i) {
    const int id = in.scheduled[i];
    const double t_up = in.cfg.t_max - t_comp[i];
    total += in.queues[id] *
             uplink_energy(theta[i], t_up, in.gains.gains[id], in.cfg);
  }
  return total;
}

namespace {

// theta_k(lambda) from the KKT stationarity condition in Lambert-W form,
// capped so the multiplier search stays finite near lambda -> 0.
double theta_of_lambda(double lambda, double a_k, double scale_k, double cap) {
  const double z = lambda * scale_k - std::exp(-1.0);
  double w;
  if (z <= -std::exp(-1.0)) {
    w = -1.0;
  } else {
    w = lambert_w0(z);
  }
  const double denom = w + 1.0;
  if (denom <= a_k / cap) return cap;
  return a_k / denom;
}

struct BandwidthDevice {
  int idx;        // position within in.scheduled
  int id;         // device id
  double a;       // Q ln2 / (B * t_up)
  double scale;   // h / (q N0 B t_up e)
  double t_up;
  double theta_min;
};

}  // namespace

double bandwidth_fraction_of_multiplier(double lambda, double queue,
                                        double gain, double t_up,
                                        const SystemConfig& cfg) {
  if (!(queue > 0.0)) {
    throw std::domain_error(
        "bandwidth_fraction_of_multiplier: queue must be > 0");
  }
  const double a = cfg.model_bits * M_LN2 / (cfg.bandwidth * t_up);
  const double scale = gain / (queue * cfg.noise_psd * cfg.bandwidth * t_up * M_E);
  return theta_of_lambda(lambda, a, scale, kInf);
}

std::vector<double> bandwidth_allocation(const AllocationInput& in,
                                         const std::vector<double>& t_comp,
                                         const SolverOptions& opts) {
  const std::size_t n = in.scheduled.size();
  if (t_comp.size() != n) {
    throw std::invalid_argument("bandwidth_allocation: t_comp size mismatch");
  }
  std::vector<double> theta(n, 0.0);
  if (n == 0) return theta;

  const double bw = in.cfg.bandwidth;
  const double n0 = in.cfg.noise_psd;

  std::vector<BandwidthDevice> devs(n);
  std::vector<bool> pinned(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const int id = in.scheduled[i];
    const double t_up = in.cfg.t_max - t_comp[i];
    if (!(t_up > 0.0)) {
      throw InfeasibleSetError("bandwidth_allocation: no communication window");
    }
    auto tmin = min_bandwidth_fraction(in.profiles[id], in.gains.gains[id],
                                       t_up, in.cfg, opts);
    if (!tmin) {
      throw InfeasibleSetError(
          "bandwidth_allocation: device cannot meet the deadline at theta=1");
    }
    devs[i].idx = static_cast<int>(i);
    devs[i].id = id;
    devs[i].t_up = t_up;
    devs[i].a = in.cfg.model_bits * M_LN2 / (bw * t_up);
    devs[i].theta_min = *tmin;
    const double q = in.queues[id];
    devs[i].scale =
        q > 0.0 ? in.gains.gains[id] / (q * n0 * bw * t_up * M_E) : 0.0;
    if (q <= 0.0) pinned[i] = true;  // zero-queue devices get their minimum
  }

  // Constraint pinning loop: solve the closed form over the free devices,
  // pin any whose optimum falls below the minimum feasible fraction, repeat.
  while (true) {
    double budget = 1.0;
    std::vector<int> free;
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) {
        theta[i] = devs[i].theta_min;
        budget -= theta[i];
      } else {
        free.push_back(static_cast<int>(i));
      }
    }
    if (budget < -1e-12) {
      throw InfeasibleSetError(
          "bandwidth_allocation: pinned fractions exceed total bandwidth");
    }

    if (free.empty()) {
      // Hand any leftover to the pinned devices; extra bandwidth only lowers
      // their energy.
      if (budget > 0.0 && n > 0) {
        for (std::size_t i = 0; i < n; ++i) theta[i] += budget / n;
      }
      return theta;
    }

    bool repinned = false;
    if (free.size() == 1) {
      const int i = free.front();
      if (budget < devs[i].theta_min - 1e-12) {
        throw InfeasibleSetError(
            "bandwidth_allocation: remaining budget below minimum fraction");
      }
      theta[i] = std::min(budget, 1.0);
    } else {
      // Multiplier bracket; the upper bound comes from max_k theta_k >= budget/|free|.
      double lambda_hi = 0.0;
      for (int i : free) {
        const double phi = devs[i].a * free.size() / budget;
        if (phi > kMaxExponent) {
          throw InfeasibleSetError(
              "bandwidth_allocation: bandwidth demand beyond overflow guard");
        }
        const double bound = ((phi - 1.0) * std::exp(phi) + 1.0) /
                             (devs[i].scale * M_E);
        lambda_hi = std::max(lambda_hi, bound);
      }
      const double cap = 2.0;  // only the sign of sum(theta)-budget matters
      auto sum_theta = [&](double lambda) {
        double s = 0.0;
        for (int i : free) {
          s += theta_of_lambda(lambda, devs[i].a, devs[i].scale, cap);
        }
        return s;
      };
      // Geometric pre-shrink keeps the bisection budget small when the
      // analytic upper bound is very loose.
      while (lambda_hi > 1e-300 && sum_theta(0.5 * lambda_hi) < budget) {
        lambda_hi *= 0.5;
      }
      double lambda_lo = 0.0;
      double lambda = lambda_hi;
      bool converged = false;
      for (int it = 0; it < opts.lambda_max_iters; ++it) {
        lambda = 0.5 * (lambda_lo + lambda_hi);
        const double s = sum_theta(lambda);
        if (std::abs(s - budget) <= opts.lambda_sum_tol) {
          converged = true;
          break;
        }
        if (s > budget) {
          lambda_lo = lambda;
        } else {
          lambda_hi = lambda;
        }
      }
      if (!converged) {
        throw SolverFailure(
            "bandwidth_allocation: multiplier bisection did not converge");
      }
      for (int i : free) {
        theta[i] = theta_of_lambda(lambda, devs[i].a, devs[i].scale, cap);
      }
    }

    for (int i : free) {
      if (theta[i] < devs[i].theta_min) {
        pinned[i] = true;
        repinned = true;
      }
    }
    if (!repinned) return theta;
  }
}

Allocation alternating_allocate(const AllocationInput& in,
                                const SolverOptions& opts,
                                std::vector<double>* objective_trace) {
  in.validate();
  Allocation out;
  out.scheduled = in.scheduled;
  const std::size_t n = in.scheduled.size();
  out.theta.assign(n, 0.0);
  out.t_comp.assign(n, 0.0);
  out.t_comm.assign(n, 0.0);
  out.energy.assign(n, 0.0);
  if (n == 0) return out;

  // Individual feasibility at theta = 1 plus joint bandwidth feasibility at
  // the most generous communication window.
  double min_sum = 0.0;
  std::vector<double> theta_floor(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int id = in.scheduled[i];
    const double slack =
        in.cfg.t_max - min_comp_time(in.profiles[id], in.cfg.local_iters);
    auto tmin = min_bandwidth_fraction(in.profiles[id], in.gains.gains[id],
                                       slack, in.cfg, opts);
    if (!tmin) {
      throw InfeasibleDeviceError(
          "alternating_allocate: device infeasible even at theta = 1");
    }
    theta_floor[i] = *tmin;
    min_sum += *tmin;
  }
  if (min_sum > 1.0 + 1e-12) {
    throw InfeasibleSetError(
        "alternating_allocate: minimum bandwidth demands exceed total");
  }

  std::vector<double> theta(n);
  const double slack_share = std::max(0.0, 1.0 - min_sum) / n;
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = std::min(1.0, theta_floor[i] + slack_share);
  }

  std::vector<double> t_comp(n);
  auto solve_times = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      const int id = in.scheduled[i];
      t_comp[i] = optimal_comp_time(in.profiles[id], theta[i],
                                    in.gains.gains[id], in.cfg, opts);
    }
  };
  auto weighted_energy = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int id = in.scheduled[i];
      const double e =
          local_energy(in.profiles[id], in.cfg.local_iters, t_comp[i]) +
          uplink_energy(theta[i], in.cfg.t_max - t_comp[i],
                        in.gains.gains[id], in.cfg);
      s += in.queues[id] * e;
    }
    return s;
  };

  solve_times();
  double prev = weighted_energy();
  if (objective_trace) objective_trace->push_back(prev);
  bool converged = false;
  for (int it = 0; it < opts.alternating_max_iters; ++it) {
    theta = bandwidth_allocation(in, t_comp, opts);
    solve_times();
    const double cur = weighted_energy();
    if (objective_trace) objective_trace->push_back(cur);
    const double delta = prev - cur;
    prev = cur;
    if (delta <= opts.alternating_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw SolverFailure("alternating_allocate: outer loop did not converge");
  }

  double data_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int id = in.scheduled[i];
    out.theta[i] = theta[i];
    out.t_comp[i] = t_comp[i];
    out.t_comm[i] = in.cfg.t_max - t_comp[i];
    out.energy[i] =
        local_energy(in.profiles[id], in.cfg.local_iters, t_comp[i]) +
        uplink_energy(theta[i], out.t_comm[i], in.gains.gains[id], in.cfg);
    out.energy_objective += in.queues[id] * out.energy[i];
    data_sum += in.profiles[id].data_size;
  }
  out.objective = -in.v_weight * data_sum + out.energy_objective;
  return out;
}

}  // namespace pmafl
