#include "qngc/estimators.hpp"

#include <cmath>
#include <string>

#include "qngc/error.hpp"

namespace qngc {

namespace {

constexpr std::uint8_t kX1 = role_bit(Role::x1);
constexpr std::uint8_t kX2 = role_bit(Role::x2);
constexpr std::uint8_t kXX1 = role_bit(Role::xx1);
constexpr std::uint8_t kXX2 = role_bit(Role::xx2);

// Gehrels one-sided 1-sigma upper limit for zero observed counts.
constexpr double kZeroCountUpper = 1.841;

double as_d(std::uint64_t v) { return static_cast<double>(v); }

std::uint8_t arm_mask(Arm arm) { return arm == Arm::x ? (kX1 | kX2) : (kXX1 | kXX2); }

}  // namespace

void ClickCounts::validate() const {
  if (r2 > r1a || r2 > r1b) throw InvalidArgument("double clicks exceed single clicks");
  if (r1a > n || r1b > n) throw InvalidArgument("single clicks exceed trials");
}

ClickCounts hbt_counts(const PatternCounts& table, Arm arm, std::optional<Arm> herald) {
  const std::uint8_t a = arm == Arm::x ? kX1 : kXX1;
  const std::uint8_t b = arm == Arm::x ? kX2 : kXX2;
  ClickCounts out;
  if (!herald) {
    out.n = table.n_pulses;
    out.r1a = table.count_all(a);
    out.r1b = table.count_all(b);
    out.r2 = table.count_all(a | b);
    return out;
  }
  if (*herald == arm) throw InvalidArgument("herald arm must differ from the measured arm");
  const std::uint8_t h = arm_mask(*herald);
  out.heralded = true;
  for (unsigned mask = 1; mask < 16; ++mask) {
    if ((mask & h) == 0) continue;
    const auto c = table.patterns[mask];
    out.n += c;
    if (mask & a) out.r1a += c;
    if (mask & b) out.r1b += c;
    if ((mask & a) && (mask & b)) out.r2 += c;
  }
  if (out.n == 0) throw DataError("no heralds: the herald arm never clicked");
  return out;
}

PhotonStatsEstimate photon_stats(const ClickCounts& counts, double bs_ratio, SinglesMode mode) {
  if (!(bs_ratio > 0.0 && bs_ratio < 1.0)) throw InvalidArgument("beam-splitter ratio must lie in (0, 1)");
  counts.validate();
  if (counts.n == 0) throw DataError("no trials");

  const double n = as_d(counts.n);
  const double split = 2.0 * bs_ratio * (1.0 - bs_ratio);
  const double singles = mode == SinglesMode::inclusive ? as_d(counts.r1a + counts.r1b)
                                                        : as_d(counts.r1a + counts.r1b - 2 * counts.r2);

  PhotonStatsEstimate est;
  auto& s = est.stats;
  s.heralded = counts.heralded;
  s.p1 = singles / n;
  s.p2plus = as_d(counts.r2) / (n * split);
  s.p0 = 1.0 - s.p1 - s.p2plus;
  s.sigma_p1 = std::sqrt(singles) / n;
  s.sigma_p2plus = std::sqrt(as_d(counts.r2)) / (n * split);
  est.sigma_p0 = std::hypot(s.sigma_p1, s.sigma_p2plus);
  est.unbalanced_splitter = std::abs(split - 0.5) / 0.5 > 0.10;
  est.third_order_warning = s.p2plus > 0.01;
  return est;
}

RatioEstimate g2_from_peaks(const PeakAreas& peaks) {
  if (peaks.side_peaks.size() < 2) throw InvalidArgument("g2 needs at least two side peaks");
  const double side_total = as_d(peaks.side_total(0, INT32_MAX));
  if (side_total == 0.0) throw DataError("side peaks are empty");
  const double side_mean = peaks.side_mean();
  const double zero = as_d(peaks.zero_peak_counts);

  RatioEstimate r;
  r.value = zero / side_mean;
  if (zero == 0.0) {
    r.upper_bound = kZeroCountUpper / side_mean;
  } else {
    r.sigma = r.value * std::sqrt(1.0 / zero + 1.0 / side_total);
  }
  return r;
}

RatioEstimate prep_efficiency(const PeakAreas& peaks, int min_index, int max_index) {
  if (peaks.zero_peak_counts == 0) throw DataError("zero-time peak is empty");
  const double side_total = as_d(peaks.side_total(min_index, max_index));
  if (side_total == 0.0) throw DataError("no side-peak counts in the requested index range");
  const double zero = as_d(peaks.zero_peak_counts);
  RatioEstimate r;
  r.value = peaks.side_mean(min_index, max_index) / zero;
  r.sigma = r.value * std::sqrt(1.0 / zero + 1.0 / side_total);
  return r;
}

PairClickStats pair_click_stats(const PatternCounts& table, SuccessConvention success, ErrorAggregation error) {
  if (table.n_pulses == 0) throw DataError("no pulses");
  const double n = as_d(table.n_pulses);
  PairClickStats out;
  out.n_pulses = table.n_pulses;

  if (success == SuccessConvention::detector_pair) {
    const double c = as_d(table.count_all(kX1 | kXX1) + table.count_all(kX1 | kXX2) +
                          table.count_all(kX2 | kXX1) + table.count_all(kX2 | kXX2));
    out.ps = c / (4.0 * n);
    out.sigma_ps = std::sqrt(c) / (4.0 * n);
  } else {
    std::uint64_t c = 0;
    for (unsigned mask = 0; mask < 16; ++mask)
      if ((mask & (kX1 | kX2)) && (mask & (kXX1 | kXX2))) c += table.patterns[mask];
    out.ps = as_d(c) / n;
    out.sigma_ps = std::sqrt(as_d(c)) / n;
  }

  const double ex = as_d(table.count_all(kX1 | kX2));
  const double exx = as_d(table.count_all(kXX1 | kXX2));
  out.pe_x = ex / n;
  out.pe_xx = exx / n;
  out.pe = aggregate_error(out.pe_x, out.pe_xx, error);
  switch (error) {
    case ErrorAggregation::mean: out.sigma_pe = std::sqrt(ex + exx) / (2.0 * n); break;
    case ErrorAggregation::sum: out.sigma_pe = std::sqrt(ex + exx) / n; break;
    case ErrorAggregation::max: out.sigma_pe = std::sqrt(std::max(ex, exx)) / n; break;
  }
  return out;
}

OutcomeCounts analyzer_coincidences(const PatternCounts& table) {
  return {table.count_all(kX1 | kXX1), table.count_all(kX1 | kXX2), table.count_all(kX2 | kXX1),
          table.count_all(kX2 | kXX2)};
}

}  // namespace qngc
