#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qngc/timetag.hpp"

namespace qngc {

/// Click pattern of one pulse; bits follow role_bit().
struct PulseClicks {
  std::uint64_t pulse;
  std::uint8_t mask;

  friend bool operator==(const PulseClicks&, const PulseClicks&) = default;
};

/// Number of pulses showing each of the 16 click patterns. patterns[0] holds
/// the pulses with no click.
struct PatternCounts {
  std::array<std::uint64_t, 16> patterns{};
  std::uint64_t n_pulses = 0;

  /// Pulses whose mask contains every bit of `required`.
  std::uint64_t count_all(std::uint8_t required) const;
};

/// Sparse per-pulse click table: only pulses with at least one click are
/// stored, in ascending pulse order.
struct PulseClickTable {
  std::uint64_t n_pulses = 0;
  std::uint64_t window_ps = 0;
  std::vector<PulseClicks> clicks;

  PatternCounts pattern_counts() const;
};

/// Per-role arrival offsets relative to the pulse time, indexed by
/// kPhotonRoles order (x1, x2, xx1, xx2).
using RoleOffsets = std::array<std::int64_t, 4>;

/// A role clicks in pulse k if >= 1 of its tags lies in
/// [t_k + offset - window/2, t_k + offset + window/2]. Throws InvalidArgument
/// if the window exceeds the repetition period.
PulseClickTable fold_pulses(const TimeTagStream& stream, std::uint64_t window_ps, const RoleOffsets& offsets);

/// Mode of the (tag - preceding pulse) delay histogram per role, at bin
/// centre; ties go to the earliest bin. Roles without tags get offset 0.
RoleOffsets auto_offsets(const TimeTagStream& stream, std::uint64_t bin_ps = 8);

struct CorrelationHistogram {
  std::uint64_t bin_width_ps = 0;
  std::uint64_t range_ps = 0;
  // Bin i covers [-range + i*bin, -range + (i+1)*bin) of t_B - t_A.
  std::vector<std::uint64_t> counts;

  double bin_center(std::size_t i) const;
  std::uint64_t total() const;
};

/// Histogram of every t_B - t_A within [-range, range), by a two-cursor sweep.
/// For chA == chB the zero-lag self pair of each tag is skipped.
CorrelationHistogram correlation_histogram(const TimeTagStream& stream, std::uint8_t channel_a,
                                           std::uint8_t channel_b, std::uint64_t bin_width_ps,
                                           std::uint64_t range_ps);

struct SidePeak {
  int index;
  std::uint64_t counts;
};

struct PeakAreas {
  std::uint64_t zero_peak_counts = 0;
  std::vector<SidePeak> side_peaks;
  double window_ps = 0.0;

  double side_mean() const;
  /// Mean over side peaks with min_index <= |k| <= max_index.
  double side_mean(int min_index, int max_index) const;
  std::uint64_t side_total(int min_index, int max_index) const;
};

/// Sums the bins whose centres lie within +-window/2 of k * period + center,
/// for k = 0 and |k| = 1..n_side.
PeakAreas integrate_peaks(const CorrelationHistogram& hist, double rep_period_ps, double window_ps,
                          int n_side_peaks, double center_ps = 0.0);

struct SweepRow {
  std::uint64_t window_ps;
  PatternCounts counts;
};

/// Re-folds the stream for every window (ascending) and returns the pattern
/// counts behind each.
std::vector<SweepRow> window_sweep(const TimeTagStream& stream, std::span<const std::uint64_t> windows_ps,
                                   const RoleOffsets& offsets);

}  // namespace qngc
