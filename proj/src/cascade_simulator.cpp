#include "qngc/cascade_simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>
#include <thread>

#include "qngc/error.hpp"

namespace qngc {

namespace {

enum class StreamPurpose : std::uint32_t { photons = 1, blinking = 2 };

std::mt19937_64 chunk_rng(std::uint64_t seed, std::uint64_t chunk, StreamPurpose purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

void check_unit(double v, const char* name) {
  if (!in_unit(v)) throw InvalidArgument(std::string(name) + " must lie in [0, 1]");
}

// One photon on its way to an arm: emission delay after the pulse, and the
// analyzer outcome (0 for unpolarized light).
struct Photon {
  double delay_ps;
  int outcome;
};

class ChunkEmitter {
 public:
  ChunkEmitter(const ChannelConfig& chain, const StreamHeader& header, std::mt19937_64& rng,
               std::vector<TimeTag>& out)
      : chain_(chain), header_(header), rng_(rng), out_(out) {
    const double period_s = header.period_ps() * 1e-12;
    for (std::size_t d = 0; d < 4; ++d) {
      dark_mean_[d] = chain.detectors[d].dark_rate_hz * period_s;
      if (dark_mean_[d] > 0.0) dark_[d] = std::poisson_distribution<int>(dark_mean_[d]);
    }
  }

  void emit(Arm arm, std::uint64_t pulse_time, const Photon& photon) {
    const ArmConfig& cfg = arm == Arm::x ? chain_.x_arm : chain_.xx_arm;
    bool first;
    if (cfg.analyzer) {
      first = photon.outcome != 0 ? photon.outcome > 0 : uniform_(rng_) < 0.5;
    } else {
      first = uniform_(rng_) < cfg.bs_ratio;
    }
    const std::size_t det = (arm == Arm::x ? 0 : 2) + (first ? 0 : 1);
    const DetectorConfig& dc = chain_.detectors[det];
    if (!(uniform_(rng_) < dc.efficiency)) return;
    double t = static_cast<double>(pulse_time) + photon.delay_ps;
    if (dc.jitter_sigma_ps > 0.0) t += dc.jitter_sigma_ps * normal_(rng_);
    out_.push_back({static_cast<std::uint64_t>(std::max(0.0, std::round(t))), chain_.channel_ids[det + 1]});
  }

  void darks_and_sync(std::uint64_t k, std::uint64_t pulse_time) {
    const double period = header_.period_ps();
    for (std::size_t d = 0; d < 4; ++d) {
      if (dark_mean_[d] <= 0.0) continue;
      const auto n = dark_[d](rng_);
      for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(pulse_time) + period * uniform_(rng_);
        out_.push_back({static_cast<std::uint64_t>(std::floor(t)), chain_.channel_ids[d + 1]});
      }
    }
    if (!chain_.implicit_sync && k % chain_.sync_divider == 0) out_.push_back({pulse_time, chain_.channel_ids[0]});
  }

  double uniform() { return uniform_(rng_); }
  double exponential(double mean) { return mean > 0.0 ? mean * exp_(rng_) : 0.0; }

 private:
  const ChannelConfig& chain_;
  const StreamHeader& header_;
  std::mt19937_64& rng_;
  std::vector<TimeTag>& out_;
  std::array<double, 4> dark_mean_{};
  std::array<std::poisson_distribution<int>, 4> dark_{};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::exponential_distribution<double> exp_{1.0};
};

// Two-state telegraph with stationary on-fraction p_on; per pulse the state
// leaves "on" with s (1 - p_on) and leaves "off" with s p_on.
class Blinker {
 public:
  Blinker(double p_on, double s) : p_on_(p_on), s_(s) {}
  bool enabled() const { return p_on_ < 1.0; }
  bool initial(std::mt19937_64& rng) const { return u_(rng) < p_on_; }
  bool step(bool on, std::mt19937_64& rng) const {
    const double u = u_(rng);
    return on ? !(u < s_ * (1.0 - p_on_)) : u < s_ * p_on_;
  }

 private:
  double p_on_;
  double s_;
  mutable std::uniform_real_distribution<double> u_{0.0, 1.0};
};

template <typename ChunkFn>
std::vector<TimeTag> run_chunks(std::uint64_t n_pulses, const SimulationOptions& options, ChunkFn&& fn) {
  if (options.chunk_pulses == 0) throw InvalidArgument("chunk size must be positive");
  const std::uint64_t n_chunks = (n_pulses + options.chunk_pulses - 1) / options.chunk_pulses;
  std::vector<std::vector<TimeTag>> parts(n_chunks);
  unsigned threads = options.threads == 0 ? default_thread_count() : options.threads;
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(n_chunks, 1)));

  auto work = [&](unsigned w) {
    for (std::uint64_t c = w; c < n_chunks; c += threads) {
      const std::uint64_t begin = c * options.chunk_pulses;
      const std::uint64_t end = std::min(n_pulses, begin + options.chunk_pulses);
      fn(c, begin, end, parts[c]);
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  std::vector<TimeTag> tags;
  tags.reserve(total);
  for (auto& p : parts) {
    tags.insert(tags.end(), p.begin(), p.end());
    std::vector<TimeTag>().swap(p);
  }
  std::sort(tags.begin(), tags.end(), tag_order);
  return tags;
}

std::array<std::uint64_t, 256> dead_times(const ChannelConfig& chain) {
  std::array<std::uint64_t, 256> dead{};
  for (std::size_t d = 0; d < 4; ++d) dead[chain.channel_ids[d + 1]] = chain.detectors[d].dead_time_ps;
  return dead;
}

}  // namespace

double rabi_preparation_probability(double pulse_area_rad, double damping) {
  if (pulse_area_rad < 0.0 || damping < 0.0) throw InvalidArgument("pulse area and damping must be >= 0");
  const double s = std::sin(pulse_area_rad / 2.0);
  return s * s * std::exp(-damping * pulse_area_rad);
}

double pulse_area_from_power(double power_ratio) {
  if (power_ratio < 0.0) throw InvalidArgument("power ratio must be >= 0");
  return std::numbers::pi * std::sqrt(power_ratio);
}

double QdSourceConfig::preparation() const {
  return prep_probability ? *prep_probability : rabi_preparation_probability(pulse_area_rad, rabi_damping);
}

void QdSourceConfig::validate() const {
  if (!(rep_rate_hz > 0.0)) throw InvalidArgument("repetition rate must be positive");
  if (!(tau_xx_ps >= 0.0) || !(tau_x_ps >= 0.0)) throw InvalidArgument("lifetimes must be >= 0");
  if (pulse_area_rad < 0.0 || rabi_damping < 0.0) throw InvalidArgument("pulse area and damping must be >= 0");
  if (prep_probability) check_unit(*prep_probability, "prep_probability");
  check_unit(blink_on_prob, "blink_on_prob");
  check_unit(blink_switch_prob, "blink_switch_prob");
  check_unit(eps_x, "eps_x");
  check_unit(eps_xx, "eps_xx");
  if (!std::isfinite(fss_ueV)) throw InvalidArgument("fss must be finite");
}

void SpdcSourceConfig::validate() const {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidArgument("mu must be >= 0");
  if (modes < 1) throw InvalidArgument("mode count must be >= 1");
  if (!(rep_rate_hz > 0.0)) throw InvalidArgument("repetition rate must be positive");
  if (!(lifetime_ps >= 0.0)) throw InvalidArgument("lifetime must be >= 0");
}

void ChannelConfig::validate() const {
  for (const auto& d : detectors) {
    check_unit(d.efficiency, "detector efficiency");
    if (!(d.dark_rate_hz >= 0.0) || !(d.jitter_sigma_ps >= 0.0))
      throw InvalidArgument("dark rate and jitter must be >= 0");
  }
  check_unit(x_arm.bs_ratio, "bs_ratio_x");
  check_unit(xx_arm.bs_ratio, "bs_ratio_xx");
  if (sync_divider == 0) throw InvalidArgument("sync divider must be >= 1");
  for (std::size_t i = 0; i < channel_ids.size(); ++i)
    for (std::size_t j = i + 1; j < channel_ids.size(); ++j)
      if (channel_ids[i] == channel_ids[j]) throw InvalidArgument("channel ids must be unique");
}

StreamHeader ChannelConfig::make_header(double rep_rate_hz, std::uint64_t n_pulses) const {
  StreamHeader h = StreamHeader::with_default_roles(rep_rate_hz);
  h.roles = {{Role::sync, channel_ids[0]}, {Role::x1, channel_ids[1]}, {Role::x2, channel_ids[2]},
             {Role::xx1, channel_ids[3]}, {Role::xx2, channel_ids[4]}};
  h.implicit_sync = implicit_sync;
  h.sync_divider = sync_divider;
  h.t0_ps = t0_ps;
  h.pulse_count = n_pulses;
  return h;
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("QNGC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void apply_dead_time(std::vector<TimeTag>& tags, const std::array<std::uint64_t, 256>& dead_time_ps) {
  std::array<std::uint64_t, 256> last{};
  std::array<bool, 256> seen{};
  std::size_t out = 0;
  for (const auto& t : tags) {
    const auto dead = dead_time_ps[t.channel];
    if (dead > 0 && seen[t.channel] && t.time_ps - last[t.channel] < dead) continue;
    seen[t.channel] = true;
    last[t.channel] = t.time_ps;
    tags[out++] = t;
  }
  tags.resize(out);
}

TimeTagStream simulate_qd(const QdSourceConfig& src, const ChannelConfig& chain, std::uint64_t n_pulses,
                          std::uint64_t seed, const SimulationOptions& options) {
  src.validate();
  chain.validate();
  if (n_pulses < 1) throw InvalidArgument("need at least one pulse");

  TimeTagStream stream;
  stream.header = chain.make_header(src.rep_rate_hz, n_pulses);
  const StreamHeader& header = stream.header;
  const double prep = src.preparation();
  const Blinker blinker(src.blink_on_prob, src.blink_switch_prob);
  const bool polarized = chain.x_arm.analyzer || chain.xx_arm.analyzer;
  const MeasurementSetting setting{chain.x_arm.analyzer.value_or(BlochAxis::sigma_z()),
                                   chain.xx_arm.analyzer.value_or(BlochAxis::sigma_z())};
  const std::uint64_t n_chunks = (n_pulses + options.chunk_pulses - 1) / std::max<std::uint64_t>(options.chunk_pulses, 1);

  // Telegraph state at each chunk start, from one sequential Markov chain.
  std::vector<char> chunk_start_on(n_chunks, 1);
  if (blinker.enabled()) {
    bool on = true;
    for (std::uint64_t c = 0; c < n_chunks; ++c) {
      auto rng = chunk_rng(seed, c, StreamPurpose::blinking);
      if (c == 0) on = blinker.initial(rng);
      chunk_start_on[c] = on;
      const std::uint64_t len = std::min(n_pulses - c * options.chunk_pulses, options.chunk_pulses);
      for (std::uint64_t i = 0; i < len; ++i) on = blinker.step(on, rng);
    }
  }

  auto chunk = [&](std::uint64_t c, std::uint64_t begin, std::uint64_t end, std::vector<TimeTag>& out) {
    auto rng = chunk_rng(seed, c, StreamPurpose::photons);
    auto blink_rng = chunk_rng(seed, c, StreamPurpose::blinking);
    if (blinker.enabled() && c == 0) blinker.initial(blink_rng);
    ChunkEmitter em(chain, header, rng, out);
    bool on = chunk_start_on[c];
    for (std::uint64_t k = begin; k < end; ++k) {
      const std::uint64_t t_pulse = header.pulse_time(k);
      const bool emitting = blinker.enabled() ? on : true;
      if (blinker.enabled()) on = blinker.step(on, blink_rng);

      if (emitting && em.uniform() < prep) {
        const double t_xx = em.exponential(src.tau_xx_ps);
        const double dt_x = em.exponential(src.tau_x_ps);
        PolarizationOutcome o{0, 0};
        if (polarized) {
          if (src.fss_ueV != 0.0) {
            const Matrix4c precessed = precess_coherence(src.rho.matrix(), src.fss_ueV * dt_x / kHbarUeVps);
            o = sample_polarization_pair(DensityMatrix(precessed), setting, rng);
          } else {
            o = sample_polarization_pair(src.rho, setting, rng);
          }
        }
        em.emit(Arm::xx, t_pulse, {t_xx, o.xx});
        em.emit(Arm::x, t_pulse, {t_xx + dt_x, o.x});
      }
      if (src.eps_x > 0.0 && em.uniform() < src.eps_x) em.emit(Arm::x, t_pulse, {em.exponential(src.tau_x_ps), 0});
      if (src.eps_xx > 0.0 && em.uniform() < src.eps_xx)
        em.emit(Arm::xx, t_pulse, {em.exponential(src.tau_xx_ps), 0});
      em.darks_and_sync(k, t_pulse);
    }
  };

  stream.tags = run_chunks(n_pulses, options, chunk);
  apply_dead_time(stream.tags, dead_times(chain));
  stream.header.tag_count = stream.tags.size();
  return stream;
}

TimeTagStream simulate_spdc(const SpdcSourceConfig& src, const ChannelConfig& chain, std::uint64_t n_pulses,
                            std::uint64_t seed, const SimulationOptions& options) {
  src.validate();
  chain.validate();
  if (n_pulses < 1) throw InvalidArgument("need at least one pulse");

  TimeTagStream stream;
  stream.header = chain.make_header(src.rep_rate_hz, n_pulses);
  const StreamHeader& header = stream.header;

  auto chunk = [&](std::uint64_t c, std::uint64_t begin, std::uint64_t end, std::vector<TimeTag>& out) {
    auto rng = chunk_rng(seed, c, StreamPurpose::photons);
    ChunkEmitter em(chain, header, rng, out);
    std::geometric_distribution<long long> thermal(1.0 / (1.0 + src.mu));
    std::negative_binomial_distribution<long long> multimode(
        static_cast<long long>(src.modes), static_cast<double>(src.modes) / (static_cast<double>(src.modes) + src.mu));
    for (std::uint64_t k = begin; k < end; ++k) {
      const std::uint64_t t_pulse = header.pulse_time(k);
      long long pairs = 0;
      if (src.mu > 0.0) pairs = src.modes == 1 ? thermal(rng) : multimode(rng);
      for (long long p = 0; p < pairs; ++p) {
        const double t = em.exponential(src.lifetime_ps);
        em.emit(Arm::x, t_pulse, {t, 0});
        em.emit(Arm::xx, t_pulse, {t, 0});
      }
      em.darks_and_sync(k, t_pulse);
    }
  };

  stream.tags = run_chunks(n_pulses, options, chunk);
  apply_dead_time(stream.tags, dead_times(chain));
  stream.header.tag_count = stream.tags.size();
  return stream;
}

TimeTagStream attenuate_stream(const TimeTagStream& stream, double transmissivity,
                               std::span<const std::uint8_t> channels, std::uint64_t seed) {
  if (!in_unit(transmissivity)) throw InvalidArgument("transmissivity must lie in [0, 1]");
  std::array<bool, 256> selected{};
  for (auto c : channels) selected[c] = true;
  if (auto sync = stream.header.channel_of(Role::sync)) selected[*sync] = false;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TimeTagStream out{stream.header, {}};
  out.tags.reserve(stream.tags.size());
  for (const auto& t : stream.tags) {
    if (selected[t.channel] && !(u(rng) < transmissivity)) continue;
    out.tags.push_back(t);
  }
  out.header.tag_count = out.tags.size();
  return out;
}

}  // namespace qngc
