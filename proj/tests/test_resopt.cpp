#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "pmafl/resopt.hpp"

using namespace pmafl;
using namespace pmafl::testing;

namespace {

// Total device energy at an explicit time split, for grid oracles.
double device_energy(const DeviceProfile& p, double theta, double gain,
                     double t_comp, const SystemConfig& cfg) {
  return local_energy(p, cfg.local_iters, t_comp) +
         uplink_energy(theta, cfg.t_max - t_comp, gain, cfg);
}

// Brute-force minimizer of the time split over an n-point grid.
double grid_comp_time(const DeviceProfile& p, double theta, double gain,
                      const SystemConfig& cfg, int n, double* best_energy) {
  const double lo = min_comp_time(p, cfg.local_iters);
  const double hi = cfg.t_max - min_comm_time(theta, gain, p, cfg);
  double best_t = lo;
  double best_e = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double t = lo + (hi - lo) * i / n;
    const double e = device_energy(p, theta, gain, t, cfg);
    if (e < best_e) {
      best_e = e;
      best_t = t;
    }
  }
  if (best_energy) *best_energy = best_e;
  return best_t;
}

}  // namespace

TEST_CASE("lambert w0 basics") {
  CHECK(lambert_w0(0.0) == 0.0);
  CHECK(lambert_w0(M_E) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lambert_w0(-std::exp(-1.0)) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK_THROWS_AS(lambert_w0(-0.5), std::domain_error);
  CHECK(lambert_w0(1.0) == doctest::Approx(0.5671432904097838).epsilon(1e-14));
}

TEST_CASE("lambert w0 round trip on a log grid") {
  const double branch = -std::exp(-1.0);
  // Negative side approaching the branch point.
  for (int i = 0; i <= 300; ++i) {
    const double offset = std::pow(10.0, -9.0 + 9.0 * i / 300.0);
    const double x = branch + offset;
    if (x >= 0.0) break;
    const double w = lambert_w0(x);
    CHECK(w >= -1.0);
    CHECK(std::abs(w * std::exp(w) - x) <= 1e-9 * std::max(1.0, std::abs(x)));
  }
  // Positive side up to 1e6.
  for (int i = 0; i <= 300; ++i) {
    const double x = std::pow(10.0, -12.0 + 18.0 * i / 300.0);
    const double w = lambert_w0(x);
    const double resid = std::abs(w * std::exp(w) - x);
    CHECK(resid <= 1e-9 * std::max(1.0, std::abs(x)));
    if (std::abs(x) <= 1e3) CHECK(resid <= 1e-12);
  }
}

TEST_CASE("optimal comp time clamps to a collapsed window") {
  SystemConfig cfg = default_cfg();
  DeviceProfile p = default_device(0, 100.0);
  const double gain = channel_gain(p, cfg, 1.0);
  const double lo = min_comp_time(p, cfg.local_iters);
  // Shrink the deadline until the window is a single point.
  cfg.t_max = lo + min_comm_time(1.0, gain, p, cfg);
  const double t = optimal_comp_time(p, 1.0, gain, cfg);
  CHECK(t == doctest::Approx(lo).epsilon(1e-12));

  cfg.t_max *= 0.99;
  CHECK_THROWS_AS(optimal_comp_time(p, 1.0, gain, cfg), InfeasibleDeviceError);
}

TEST_CASE("optimal comp time hits the lower clamp when compute is cheap") {
  SystemConfig cfg = default_cfg();
  cfg.t_max = 1.5;
  DeviceProfile p = default_device(0, 400.0);
  p.data_size = 100.0;
  p.cycles_per_sample = 1e5;
  p.kappa = 1e-40;  // negligible compute energy: all time goes to the uplink
  const double gain = channel_gain(p, cfg, 1.0);
  const double t = optimal_comp_time(p, 0.5, gain, cfg);
  CHECK(t == doctest::Approx(min_comp_time(p, cfg.local_iters)).epsilon(1e-12));
}

TEST_CASE("optimal comp time matches a grid oracle") {
  int interior = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Instance inst = random_instance(1, 1000 + seed);
    const DeviceProfile& p = inst.profiles[0];
    const double gain = inst.gains.gains[0];
    Rng rng(seed);
    const double theta = rng.uniform(0.2, 1.0);

    const double t_star = optimal_comp_time(p, theta, gain, inst.cfg);
    const int n = 10000;
    double grid_e = 0.0;
    const double t_grid = grid_comp_time(p, theta, gain, inst.cfg, n, &grid_e);
    const double lo = min_comp_time(p, inst.cfg.local_iters);
    const double hi = inst.cfg.t_max - min_comm_time(theta, gain, p, inst.cfg);
    const double step = (hi - lo) / n;

    CHECK(std::abs(t_star - t_grid) <= step + 1e-12);
    CHECK(device_energy(p, theta, gain, t_star, inst.cfg) <= grid_e * (1.0 + 1e-12));
    if (t_star > lo + step && t_star < hi - step) ++interior;
  }
  // The generator is tuned to give plenty of interior optima.
  CHECK(interior >= 10);
}

TEST_CASE("power balance at interior optima") {
  int interior = 0;
  for (std::uint64_t seed = 0; seed < 50 && interior < 20; ++seed) {
    Instance inst = random_instance(1, 5000 + seed);
    const DeviceProfile& p = inst.profiles[0];
    const double gain = inst.gains.gains[0];
    const double theta = 0.5;
    const double lo = min_comp_time(p, inst.cfg.local_iters);
    const double hi =
        inst.cfg.t_max - min_comm_time(theta, gain, p, inst.cfg);
    if (lo >= hi) continue;

    const double t_star = optimal_comp_time(p, theta, gain, inst.cfg);
    const double margin = 1e-4 * (hi - lo);
    if (t_star <= lo + margin || t_star >= hi - margin) continue;
    ++interior;

    const double step = 1e-6 * inst.cfg.t_max;
    const double d_comp =
        (local_energy(p, inst.cfg.local_iters, t_star + step) -
         local_energy(p, inst.cfg.local_iters, t_star - step)) /
        (2.0 * step);
    const double d_up =
        (uplink_energy(theta, inst.cfg.t_max - (t_star + step), gain, inst.cfg) -
         uplink_energy(theta, inst.cfg.t_max - (t_star - step), gain, inst.cfg)) /
        (2.0 * step);
    CHECK(std::abs(d_comp + d_up) <= 1e-6 * std::max(std::abs(d_comp), 1.0));
  }
  CHECK(interior >= 10);
}

TEST_CASE("closed-form bandwidth fraction decreases in the multiplier") {
  SystemConfig cfg = default_cfg();
  const double q = 0.3;
  const double gain = 1e-8;
  const double t_up = 0.8;
  double prev = std::numeric_limits<double>::infinity();
  for (int i = -12; i <= 6; ++i) {
    const double lambda = std::pow(10.0, i);
    const double theta = bandwidth_fraction_of_multiplier(lambda, q, gain, t_up, cfg);
    CHECK(theta < prev);
    CHECK(theta > 0.0);
    prev = theta;
  }
}

TEST_CASE("bandwidth allocation splits evenly for identical devices") {
  Instance inst = random_instance(2, 77);
  inst.profiles[1] = inst.profiles[0];
  inst.profiles[1].id = 1;
  inst.gains.gains[1] = inst.gains.gains[0];
  inst.queues = {0.4, 0.4};

  AllocationInput in = make_alloc_input(inst, {0, 1});
  const double t0 = optimal_comp_time(inst.profiles[0], 0.5,
                                      inst.gains.gains[0], inst.cfg);
  std::vector<double> theta = bandwidth_allocation(in, {t0, t0});
  CHECK(theta[0] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(theta[1] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(theta[0] + theta[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bandwidth allocation single device takes the whole band") {
  Instance inst = random_instance(1, 99);
  AllocationInput in = make_alloc_input(inst, {0});
  const double t0 = optimal_comp_time(inst.profiles[0], 1.0,
                                      inst.gains.gains[0], inst.cfg);
  std::vector<double> theta = bandwidth_allocation(in, {t0});
  CHECK(theta[0] == doctest::Approx(1.0));
}

TEST_CASE("bandwidth allocation matches a simplex grid oracle") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Instance inst = random_instance(3, 2000 + seed);
    AllocationInput in = make_alloc_input(inst, {0, 1, 2});

    std::vector<double> t_comp(3);
    std::vector<double> t_min(3);
    for (int k = 0; k < 3; ++k) {
      t_comp[k] = optimal_comp_time(inst.profiles[k], 1.0 / 3.0,
                                    inst.gains.gains[k], inst.cfg);
      auto f = min_bandwidth_fraction(inst.profiles[k], inst.gains.gains[k],
                                      inst.cfg.t_max - t_comp[k], inst.cfg);
      REQUIRE(f.has_value());
      t_min[k] = *f;
    }

    std::vector<double> theta = bandwidth_allocation(in, t_comp);
    const double solver_obj = bandwidth_objective(in, t_comp, theta);

    // Exhaustive 1e-3-step search over the feasible 2-simplex slice.
    const int steps = 1000;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i < steps; ++i) {
      const double a = i / static_cast<double>(steps);
      if (a < t_min[0]) continue;
      for (int j = 1; i + j < steps; ++j) {
        const double b = j / static_cast<double>(steps);
        const double c = 1.0 - a - b;
        if (b < t_min[1] || c < t_min[2]) continue;
        const double obj = bandwidth_objective(in, t_comp, {a, b, c});
        if (obj < best) best = obj;
      }
    }
    CHECK(solver_obj <= best * (1.0 + 1e-9) + 1e-15);
  }
}

TEST_CASE("weaker channel gets more bandwidth, larger queue gets more") {
  Instance inst = random_instance(2, 314);
  inst.profiles[1] = inst.profiles[0];
  inst.profiles[1].id = 1;
  inst.gains.gains[1] = inst.gains.gains[0];
  inst.queues = {0.5, 0.5};

  AllocationInput in = make_alloc_input(inst, {0, 1});
  const double t0 = optimal_comp_time(inst.profiles[0], 0.5,
                                      inst.gains.gains[0], inst.cfg);
  std::vector<double> t_comp{t0, t0};

  // Weaken device 1's channel: it must receive at least as much bandwidth.
  AllocationInput weaker = in;
  weaker.gains.gains[1] *= 0.5;
  std::vector<double> theta = bandwidth_allocation(weaker, t_comp);
  CHECK(theta[1] > theta[0]);

  // Raise device 1's queue instead: same direction.
  AllocationInput hungrier = in;
  hungrier.queues[1] *= 3.0;
  theta = bandwidth_allocation(hungrier, t_comp);
  CHECK(theta[1] > theta[0]);
}

TEST_CASE("bandwidth allocation equalizes marginal costs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Instance inst = random_instance(4, 3000 + seed);
    AllocationInput in = make_alloc_input(inst, {0, 1, 2, 3});
    std::vector<double> t_comp(4);
    for (int k = 0; k < 4; ++k) {
      t_comp[k] = optimal_comp_time(inst.profiles[k], 0.25,
                                    inst.gains.gains[k], inst.cfg);
    }
    std::vector<double> theta = bandwidth_allocation(in, t_comp);

    std::vector<double> marginals;
    for (int k = 0; k < 4; ++k) {
      const double step = 1e-6 * theta[k];
      std::vector<double> up = theta;
      std::vector<double> dn = theta;
      up[k] += step;
      dn[k] -= step;
      marginals.push_back((bandwidth_objective(in, t_comp, up) -
                           bandwidth_objective(in, t_comp, dn)) /
                          (2.0 * step));
    }
    double mean = 0.0;
    for (double m : marginals) mean += m;
    mean /= marginals.size();
    for (double m : marginals) {
      CHECK(std::abs(m - mean) <= 1e-6 * std::abs(mean));
    }
  }
}

TEST_CASE("zero-queue devices are pinned to their minimum fraction") {
  Instance inst = random_instance(3, 555);
  inst.queues = {0.0, 0.7, 0.9};
  AllocationInput in = make_alloc_input(inst, {0, 1, 2});
  std::vector<double> t_comp(3);
  for (int k = 0; k < 3; ++k) {
    t_comp[k] = optimal_comp_time(inst.profiles[k], 1.0 / 3.0,
                                  inst.gains.gains[k], inst.cfg);
  }
  std::vector<double> theta = bandwidth_allocation(in, t_comp);
  auto f = min_bandwidth_fraction(inst.profiles[0], inst.gains.gains[0],
                                  inst.cfg.t_max - t_comp[0], inst.cfg);
  REQUIRE(f.has_value());
  CHECK(theta[0] == doctest::Approx(*f).epsilon(1e-9));
  CHECK(theta[0] + theta[1] + theta[2] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("alternating allocation: single device converges immediately") {
  Instance inst = random_instance(1, 808);
  AllocationInput in = make_alloc_input(inst, {0});
  std::vector<double> trace;
  Allocation a = alternating_allocate(in, {}, &trace);
  CHECK(a.theta[0] == doctest::Approx(1.0));
  CHECK(a.t_comp[0] + a.t_comm[0] <= inst.cfg.t_max + 1e-9);
  CHECK(trace.size() <= 3);
}

TEST_CASE("alternating allocation objective is non-increasing") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Instance inst = random_instance(4, 4000 + seed);
    AllocationInput in = make_alloc_input(inst, {0, 1, 2, 3});
    std::vector<double> trace;
    Allocation a = alternating_allocate(in, {}, &trace);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) {
      CHECK(trace[i] <= trace[i - 1] + 1e-12 * std::max(1.0, std::abs(trace[i - 1])));
    }
    // Feasibility of the returned allocation.
    double sum = 0.0;
    for (std::size_t i = 0; i < a.theta.size(); ++i) {
      sum += a.theta[i];
      const int id = a.scheduled[i];
      CHECK(a.theta[i] > 0.0);
      CHECK(a.theta[i] <= 1.0 + 1e-9);
      CHECK(a.t_comp[i] >=
            min_comp_time(inst.profiles[id], inst.cfg.local_iters) - 1e-12);
      CHECK(a.t_comp[i] + a.t_comm[i] <= inst.cfg.t_max + 1e-9);
      CHECK(a.t_comm[i] >= min_comm_time(a.theta[i], inst.gains.gains[id],
                                         inst.profiles[id], inst.cfg) -
                               1e-9);
    }
    CHECK(sum <= 1.0 + 1e-9);
  }
}

TEST_CASE("alternating allocation matches a joint grid oracle for two devices") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Instance inst = random_instance(2, 6000 + seed);
    AllocationInput in = make_alloc_input(inst, {0, 1});
    Allocation a = alternating_allocate(in);

    // Joint search: theta grid x per-device inner time grids.
    const int theta_steps = 400;
    const int time_steps = 2000;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i < theta_steps; ++i) {
      const double th0 = i / static_cast<double>(theta_steps);
      const double th1 = 1.0 - th0;
      double total = 0.0;
      bool ok = true;
      for (int k = 0; k < 2 && ok; ++k) {
        const double th = k == 0 ? th0 : th1;
        const DeviceProfile& p = inst.profiles[k];
        const double gain = inst.gains.gains[k];
        const double lo = min_comp_time(p, inst.cfg.local_iters);
        const double hi = inst.cfg.t_max - min_comm_time(th, gain, p, inst.cfg);
        if (lo > hi) {
          ok = false;
          break;
        }
        double dev_best = std::numeric_limits<double>::infinity();
        for (int j = 0; j <= time_steps; ++j) {
          const double t = lo + (hi - lo) * j / time_steps;
          dev_best = std::min(dev_best, device_energy(p, th, gain, t, inst.cfg));
        }
        total += inst.queues[k] * dev_best;
      }
      if (ok) best = std::min(best, total);
    }
    CHECK(a.energy_objective <= best * (1.0 + 1e-4));
  }
}

TEST_CASE("alternating allocation rejects infeasible inputs") {
  Instance inst = random_instance(1, 7777);
  AllocationInput in = make_alloc_input(inst, {0});
  in.cfg.t_max = 0.9 * min_comp_time(inst.profiles[0], inst.cfg.local_iters);
  CHECK_THROWS_AS(alternating_allocate(in), InfeasibleDeviceError);
}

TEST_CASE("allocation input validation") {
  Instance inst = random_instance(2, 4242);
  AllocationInput in = make_alloc_input(inst, {1, 0});
  CHECK_THROWS_AS(in.validate(), std::invalid_argument);
  in = make_alloc_input(inst, {0, 5});
  CHECK_THROWS_AS(in.validate(), std::invalid_argument);
  in = make_alloc_input(inst, {0, 1});
  in.queues[0] = -1.0;
  CHECK_THROWS_AS(in.validate(), std::invalid_argument);
}
