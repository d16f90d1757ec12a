#pragma once

#include <vector>

#include "pmafl/rng.hpp"

namespace pmafl {

// Static per-device parameters. All fields strictly positive.
struct DeviceProfile {
  int id = 0;
  double data_size = 0.0;          // samples D_k
  double cycles_per_sample = 0.0;  // CPU cycles per sample C_k
  double f_max = 0.0;              // Hz
  double p_max = 0.0;              // W
  double energy_budget = 0.0;      // J, total over the whole run
  double distance = 0.0;           // m
  double kappa = 0.0;              // J*s^2/cycle^3

  void validate() const;
};

// System-wide constants. dB-scale inputs are converted to linear scale at
// config load; everything here is linear.
struct SystemConfig {
  double bandwidth = 0.0;        // Hz, total uplink bandwidth B
  double noise_psd = 0.0;        // W/Hz, N0
  double t_max = 0.0;            // s, per-round deadline
  int local_iters = 1;           // tau
  double model_bits = 0.0;       // bits uploaded per round (extractor payload Q)
  int rounds = 1;                // total rounds T
  double path_loss_const = 1.0;  // h0, linear
  double path_loss_exp = 2.0;    // v
  double ref_distance = 1.0;     // m, d0

  void validate() const;
};

// Channel power gains for one round, indexed by device id.
struct ChannelRealization {
  std::vector<double> gains;
  int round = 0;
};

double db_to_linear(double db);
double dbm_per_hz_to_w_per_hz(double dbm);

// Path-loss channel gain h0 * rho * (d0/d)^v for a given small-scale fade rho.
double channel_gain(const DeviceProfile& profile, const SystemConfig& cfg,
                    double rho);

// Draws rho ~ Exp(1) from the supplied stream.
double sample_channel(const DeviceProfile& profile, const SystemConfig& cfg,
                      Rng& rng);

ChannelRealization sample_round_channels(const std::vector<DeviceProfile>& profiles,
                                         const SystemConfig& cfg,
                                         std::uint64_t master_seed, int round);

// Computation energy at the most energy-efficient CPU frequency for the given
// compute-time budget: kappa * (tau*D*C)^3 / t_comp^2.
double local_energy(const DeviceProfile& profile, int tau, double t_comp);

// Smallest feasible compute time tau*D*C / f_max.
double min_comp_time(const DeviceProfile& profile, int tau);

// Shannon uplink rate theta*B*log2(1 + p*h / (theta*B*N0)) in bits/s.
double uplink_rate(double theta, double power, double gain,
                   const SystemConfig& cfg);

// Rate at maximum transmit power.
double max_uplink_rate(double theta, double gain, const DeviceProfile& profile,
                       const SystemConfig& cfg);

// Transmit power that delivers exactly model_bits in t_comm seconds.
// Returns +inf when the required exponent exceeds the overflow guard.
double uplink_power(double theta, double t_comm, double gain,
                    const SystemConfig& cfg);

// Deadline-exact transmission energy uplink_power(...) * t_comm.
double uplink_energy(double theta, double t_comm, double gain,
                     const SystemConfig& cfg);

// Least communication time feasible at maximum power: Q / max_uplink_rate.
double min_comm_time(double theta, double gain, const DeviceProfile& profile,
                     const SystemConfig& cfg);

}  // namespace pmafl
