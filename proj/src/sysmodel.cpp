#include "pmafl/sysmodel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pmafl {

namespace {

constexpr double kMaxExponentBits = 700.0;  // guard on Q/(theta*B*T) before 2^x

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be strictly positive");
  }
}

}  // namespace

void DeviceProfile::validate() const {
  if (id < 0) throw std::invalid_argument("device id must be non-negative");
  require_positive(data_size, "data_size");
  require_positive(cycles_per_sample, "cycles_per_sample");
  require_positive(f_max, "f_max");
  require_positive(p_max, "p_max");
  require_positive(energy_budget, "energy_budget");
  require_positive(distance, "distance");
  require_positive(kappa, "kappa");
}

void SystemConfig::validate() const {
  require_positive(bandwidth, "bandwidth");
  require_positive(noise_psd, "noise_psd");
  require_positive(t_max, "t_max");
  if (local_iters < 1) throw std::invalid_argument("local_iters must be >= 1");
  require_positive(model_bits, "model_bits");
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  require_positive(path_loss_const, "path_loss_const");
  require_positive(ref_distance, "ref_distance");
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double dbm_per_hz_to_w_per_hz(double dbm) {
  return std::pow(10.0, dbm / 10.0) * 1e-3;
}

double channel_gain(const DeviceProfile& profile, const SystemConfig& cfg,
                    double rho) {
  return cfg.path_loss_const * rho *
         std::pow(cfg.ref_distance / profile.distance, cfg.path_loss_exp);
}

double sample_channel(const DeviceProfile& profile, const SystemConfig& cfg,
                      Rng& rng) {
  return channel_gain(profile, cfg, rng.exponential());
}

ChannelRealization sample_round_channels(const std::vector<DeviceProfile>& profiles,
                                         const SystemConfig& cfg,
                                         std::uint64_t master_seed, int round) {
  ChannelRealization ch;
  ch.round = round;
  ch.gains.reserve(profiles.size());
  for (const DeviceProfile& p : profiles) {
    Rng stream = Rng::stream(master_seed, StreamPurpose::kChannel,
                             static_cast<std::uint64_t>(p.id),
                             static_cast<std::uint64_t>(round));
    ch.gains.push_back(sample_channel(p, cfg, stream));
  }
  return ch;
}

double local_energy(const DeviceProfile& profile, int tau, double t_comp) {
  if (!(t_comp > 0.0)) {
    throw std::domain_error("local_energy: t_comp must be strictly positive");
  }
  const double work = tau * profile.data_size * profile.cycles_per_sample;
  return profile.kappa * work * work * work / (t_comp * t_comp);
}

double min_comp_time(const DeviceProfile& profile, int tau) {
  return tau * profile.data_size * profile.cycles_per_sample / profile.f_max;
}

double uplink_rate(double theta, double power, double gain,
                   const SystemConfig& cfg) {
  if (!(theta > 0.0) || theta > 1.0) {
    throw std::domain_error("uplink_rate: theta must be in (0, 1]");
  }
  if (power < 0.0) throw std::domain_error("uplink_rate: power must be >= 0");
  const double band = theta * cfg.bandwidth;
  return band * std::log2(1.0 + power * gain / (band * cfg.noise_psd));
}

double max_uplink_rate(double theta, double gain, const DeviceProfile& profile,
                       const SystemConfig& cfg) {
  return uplink_rate(theta, profile.p_max, gain, cfg);
}

double uplink_power(double theta, double t_comm, double gain,
                    const SystemConfig& cfg) {
  if (!(theta > 0.0) || theta > 1.0) {
    throw std::domain_error("uplink_power: theta must be in (0, 1]");
  }
  if (!(t_comm > 0.0)) {
    throw std::domain_error("uplink_power: t_comm must be strictly positive");
  }
  const double band = theta * cfg.bandwidth;
  const double exponent = cfg.model_bits / (band * t_comm);
  if (exponent > kMaxExponentBits) {
    return std::numeric_limits<double>::infinity();
  }
  return band * cfg.noise_psd / gain * std::expm1(exponent * M_LN2);
}

double uplink_energy(double theta, double t_comm, double gain,
                     const SystemConfig& cfg) {
  return uplink_power(theta, t_comm, gain, cfg) * t_comm;
}

double min_comm_time(double theta, double gain, const DeviceProfile& profile,
                     const SystemConfig& cfg) {
  return cfg.model_bits / max_uplink_rate(theta, gain, profile, cfg);
}

}  // namespace pmafl
