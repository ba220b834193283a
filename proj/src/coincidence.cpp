#include "qngc/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "qngc/error.hpp"

namespace qngc {

std::uint64_t PatternCounts::count_all(std::uint8_t required) const {
  std::uint64_t n = 0;
  for (unsigned mask = 0; mask < 16; ++mask)
    if ((mask & required) == required) n += patterns[mask];
  return n;
}

PatternCounts PulseClickTable::pattern_counts() const {
  PatternCounts out;
  out.n_pulses = n_pulses;
  for (const auto& c : clicks) ++out.patterns[c.mask & 0xF];
  out.patterns[0] = n_pulses - clicks.size();
  return out;
}

namespace {

// Pulse clock over either physical sync tags or the implicit t0 + k * period.
class PulseClock {
 public:
  explicit PulseClock(const TimeTagStream& stream) : header_(stream.header) {
    if (!header_.implicit_sync) {
      times_ = stream.pulse_times();
      n_ = times_.size();
    } else {
      n_ = header_.pulse_count;
    }
  }

  std::uint64_t size() const { return n_; }
  std::int64_t operator[](std::uint64_t k) const {
    return static_cast<std::int64_t>(header_.implicit_sync ? header_.pulse_time(k) : times_[k]);
  }

 private:
  const StreamHeader& header_;
  std::vector<std::uint64_t> times_;
  std::uint64_t n_ = 0;
};

std::vector<std::int64_t> channel_times(const TimeTagStream& stream, std::uint8_t channel) {
  std::vector<std::int64_t> out;
  for (const auto& t : stream.tags)
    if (t.channel == channel) out.push_back(static_cast<std::int64_t>(t.time_ps));
  return out;
}

PulseClickTable fold_with_clock(const TimeTagStream& stream, const PulseClock& clock, std::uint64_t window_ps,
                                const RoleOffsets& offsets) {
  if (static_cast<double>(window_ps) > stream.header.period_ps())
    throw InvalidArgument("coincidence window exceeds the repetition period");

  const auto w = static_cast<std::int64_t>(window_ps);
  std::array<std::int8_t, 256> role_index;
  role_index.fill(-1);
  for (std::size_t r = 0; r < kPhotonRoles.size(); ++r)
    if (auto ch = stream.header.channel_of(kPhotonRoles[r])) role_index[*ch] = static_cast<std::int8_t>(r);

  std::array<std::uint64_t, 4> cursor{};
  std::array<std::uint64_t, 4> last_click;
  last_click.fill(UINT64_MAX);
  std::vector<PulseClicks> hits;
  const std::uint64_t n = clock.size();

  for (const auto& tag : stream.tags) {
    const int r = role_index[tag.channel];
    if (r < 0) continue;
    const std::int64_t s = static_cast<std::int64_t>(tag.time_ps) - offsets[r];
    std::uint64_t& k = cursor[r];
    while (k < n && 2 * (s - clock[k]) > w) ++k;
    if (k >= n) continue;
    if (2 * (clock[k] - s) > w) continue;
    if (last_click[r] == k) continue;
    last_click[r] = k;
    hits.push_back({k, role_bit(kPhotonRoles[r])});
  }

  std::sort(hits.begin(), hits.end(), [](const PulseClicks& a, const PulseClicks& b) { return a.pulse < b.pulse; });
  PulseClickTable table;
  table.n_pulses = n;
  table.window_ps = window_ps;
  for (const auto& h : hits) {
    if (!table.clicks.empty() && table.clicks.back().pulse == h.pulse) {
      table.clicks.back().mask |= h.mask;
    } else {
      table.clicks.push_back(h);
    }
  }
  return table;
}

}  // namespace

PulseClickTable fold_pulses(const TimeTagStream& stream, std::uint64_t window_ps, const RoleOffsets& offsets) {
  const PulseClock clock(stream);
  return fold_with_clock(stream, clock, window_ps, offsets);
}

RoleOffsets auto_offsets(const TimeTagStream& stream, std::uint64_t bin_ps) {
  if (bin_ps == 0) throw InvalidArgument("offset histogram bin must be positive");
  const PulseClock clock(stream);
  const auto period = static_cast<std::uint64_t>(std::ceil(stream.header.period_ps()));
  const std::size_t n_bins = static_cast<std::size_t>((period + bin_ps - 1) / bin_ps) + 1;

  RoleOffsets offsets{};
  for (std::size_t r = 0; r < kPhotonRoles.size(); ++r) {
    const auto ch = stream.header.channel_of(kPhotonRoles[r]);
    if (!ch) continue;
    std::vector<std::uint64_t> hist(n_bins, 0);
    std::uint64_t k = 0;
    bool any = false;
    for (const auto& tag : stream.tags) {
      if (tag.channel != *ch) continue;
      const auto t = static_cast<std::int64_t>(tag.time_ps);
      while (k + 1 < clock.size() && clock[k + 1] <= t) ++k;
      if (clock.size() == 0 || clock[k] > t) continue;
      const auto delay = static_cast<std::uint64_t>(t - clock[k]);
      const std::size_t b = delay / bin_ps;
      if (b < n_bins) {
        ++hist[b];
        any = true;
      }
    }
    if (!any) continue;
    const auto mode = std::max_element(hist.begin(), hist.end()) - hist.begin();
    offsets[r] = static_cast<std::int64_t>(mode * bin_ps + bin_ps / 2);
  }
  return offsets;
}

double CorrelationHistogram::bin_center(std::size_t i) const {
  return -static_cast<double>(range_ps) + (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_ps);
}

std::uint64_t CorrelationHistogram::total() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

CorrelationHistogram correlation_histogram(const TimeTagStream& stream, std::uint8_t channel_a,
                                           std::uint8_t channel_b, std::uint64_t bin_width_ps,
                                           std::uint64_t range_ps) {
  if (bin_width_ps == 0 || range_ps == 0 || range_ps % bin_width_ps != 0)
    throw InvalidArgument("histogram bin width must be positive and divide the range");
  if (!stream.header.knows_channel(channel_a) || !stream.header.knows_channel(channel_b))
    throw InvalidArgument("histogram channel not present in stream header");

  CorrelationHistogram hist;
  hist.bin_width_ps = bin_width_ps;
  hist.range_ps = range_ps;
  hist.counts.assign(2 * range_ps / bin_width_ps, 0);

  const auto a = channel_times(stream, channel_a);
  const auto b = channel_a == channel_b ? a : channel_times(stream, channel_b);
  const auto range = static_cast<std::int64_t>(range_ps);
  const auto bw = static_cast<std::int64_t>(bin_width_ps);
  const bool same = channel_a == channel_b;

  std::size_t lo = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (lo < b.size() && b[lo] < a[i] - range) ++lo;
    for (std::size_t j = lo; j < b.size() && b[j] < a[i] + range; ++j) {
      if (same && j == i) continue;
      ++hist.counts[static_cast<std::size_t>((b[j] - a[i] + range) / bw)];
    }
  }
  return hist;
}

double PeakAreas::side_mean() const {
  if (side_peaks.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : side_peaks) s += static_cast<double>(p.counts);
  return s / static_cast<double>(side_peaks.size());
}

std::uint64_t PeakAreas::side_total(int min_index, int max_index) const {
  std::uint64_t s = 0;
  for (const auto& p : side_peaks) {
    const int k = std::abs(p.index);
    if (k >= min_index && k <= max_index) s += p.counts;
  }
  return s;
}

double PeakAreas::side_mean(int min_index, int max_index) const {
  std::size_t n = 0;
  for (const auto& p : side_peaks) {
    const int k = std::abs(p.index);
    if (k >= min_index && k <= max_index) ++n;
  }
  return n == 0 ? 0.0 : static_cast<double>(side_total(min_index, max_index)) / static_cast<double>(n);
}

PeakAreas integrate_peaks(const CorrelationHistogram& hist, double rep_period_ps, double window_ps,
                          int n_side_peaks, double center_ps) {
  if (!(rep_period_ps > 0.0) || !(window_ps > 0.0) || n_side_peaks < 0)
    throw InvalidArgument("peak integration needs positive period and window");
  if (window_ps >= rep_period_ps) throw InvalidArgument("peak windows overlap (window >= period)");

  const double range = static_cast<double>(hist.range_ps);
  auto sum_peak = [&](int k) {
    const double c = k * rep_period_ps + center_ps;
    if (c - window_ps / 2 < -range || c + window_ps / 2 > range)
      throw InvalidArgument("peak " + std::to_string(k) + " lies outside the histogram range");
    const double bw = static_cast<double>(hist.bin_width_ps);
    // Bins whose centre is within the window.
    const auto first = static_cast<std::int64_t>(std::ceil((c - window_ps / 2 + range) / bw - 0.5));
    const auto last = static_cast<std::int64_t>(std::floor((c + window_ps / 2 + range) / bw - 0.5));
    std::uint64_t s = 0;
    for (std::int64_t i = std::max<std::int64_t>(first, 0);
         i <= last && i < static_cast<std::int64_t>(hist.counts.size()); ++i)
      s += hist.counts[static_cast<std::size_t>(i)];
    return s;
  };

  PeakAreas areas;
  areas.window_ps = window_ps;
  areas.zero_peak_counts = sum_peak(0);
  for (int k = 1; k <= n_side_peaks; ++k) {
    areas.side_peaks.push_back({-k, sum_peak(-k)});
    areas.side_peaks.push_back({k, sum_peak(k)});
  }
  return areas;
}

std::vector<SweepRow> window_sweep(const TimeTagStream& stream, std::span<const std::uint64_t> windows_ps,
                                   const RoleOffsets& offsets) {
  if (!std::is_sorted(windows_ps.begin(), windows_ps.end()))
    throw InvalidArgument("sweep windows must be sorted ascending");
  const PulseClock clock(stream);
  std::vector<SweepRow> rows;
  rows.reserve(windows_ps.size());
  for (auto w : windows_ps) rows.push_back({w, fold_with_clock(stream, clock, w, offsets).pattern_counts()});
  return rows;
}

}  // namespace qngc
