#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qngc/polarization.hpp"
#include "qngc/timetag.hpp"

namespace qngc {

/// hbar in micro-electronvolt picoseconds; FSS phase = fss_ueV * t_ps / hbar.
inline constexpr double kHbarUeVps = 658.211956;

/// Default pi-pulse power of the two-photon excitation (nW).
inline constexpr double kPiPulsePowerNw = 32.0;

/// sin^2(area/2) exp(-damping * area).
double rabi_preparation_probability(double pulse_area_rad, double damping);

/// area = pi sqrt(power / power_pi).
double pulse_area_from_power(double power_ratio);

struct QdSourceConfig {
  double rep_rate_hz = 75.84e6;
  double pulse_area_rad = 3.141592653589793;
  double rabi_damping = 0.0;
  // Overrides the Rabi model when set.
  std::optional<double> prep_probability;
  double tau_xx_ps = 120.0;
  double tau_x_ps = 230.0;
  // Stationary "on" fraction and per-pulse switching rate of the telegraph.
  double blink_on_prob = 1.0;
  double blink_switch_prob = 0.0;
  DensityMatrix rho = DensityMatrix::pure(phi_plus());
  double fss_ueV = 0.0;
  double eps_x = 0.0;
  double eps_xx = 0.0;

  double preparation() const;
  void validate() const;
};

struct SpdcSourceConfig {
  double mu = 0.1;
  std::uint64_t modes = 1;
  double rep_rate_hz = 75.84e6;
  // Emission-time spread of a pair (exponential).
  double lifetime_ps = 10.0;

  void validate() const;
};

struct DetectorConfig {
  double efficiency = 1.0;
  double dark_rate_hz = 0.0;
  double jitter_sigma_ps = 0.0;
  std::uint64_t dead_time_ps = 0;
};

struct ArmConfig {
  // Transmission toward detector 1.
  double bs_ratio = 0.5;
  // If set, the arm splits by polarization: detector 1 records the +1
  // outcome of this analyzer and unpolarized photons split 50/50.
  std::optional<BlochAxis> analyzer;
};

struct ChannelConfig {
  // Indexed in kPhotonRoles order: x1, x2, xx1, xx2.
  std::array<DetectorConfig, 4> detectors{};
  ArmConfig x_arm{};
  ArmConfig xx_arm{};
  std::array<std::uint8_t, 5> channel_ids{0, 1, 2, 3, 4};  // sync, x1, x2, xx1, xx2
  bool implicit_sync = false;
  std::uint32_t sync_divider = 1;
  std::uint64_t t0_ps = 1'000'000;

  void validate() const;
  StreamHeader make_header(double rep_rate_hz, std::uint64_t n_pulses) const;
};

struct SimulationOptions {
  // 0 selects QNGC_THREADS or hardware concurrency.
  unsigned threads = 0;
  // Pulses per RNG chunk. Output depends on it, never on the thread count.
  std::uint64_t chunk_pulses = 1 << 16;
};

/// Thread count from QNGC_THREADS, falling back to hardware concurrency.
unsigned default_thread_count();

TimeTagStream simulate_qd(const QdSourceConfig& src, const ChannelConfig& chain, std::uint64_t n_pulses,
                          std::uint64_t seed, const SimulationOptions& options = {});

TimeTagStream simulate_spdc(const SpdcSourceConfig& src, const ChannelConfig& chain, std::uint64_t n_pulses,
                            std::uint64_t seed, const SimulationOptions& options = {});

/// Keeps each non-sync tag on the selected channels with probability T.
TimeTagStream attenuate_stream(const TimeTagStream& stream, double transmissivity,
                               std::span<const std::uint8_t> channels, std::uint64_t seed);

/// Removes tags closer than the channel dead time to the previous kept tag.
void apply_dead_time(std::vector<TimeTag>& sorted_tags, const std::array<std::uint64_t, 256>& dead_time_ps);

}  // namespace qngc
