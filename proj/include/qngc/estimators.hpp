#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "qngc/coincidence.hpp"
#include "qngc/photon_number_models.hpp"
#include "qngc/polarization.hpp"
#include "qngc/qng_criteria.hpp"

namespace qngc {

/// HBT singles and doubles of one arm: detector A/B are the arm's 1/2 roles.
struct ClickCounts {
  std::uint64_t r1a = 0;
  std::uint64_t r1b = 0;
  std::uint64_t r2 = 0;
  std::uint64_t n = 0;  // pulses, or heralds when heralded
  bool heralded = false;

  void validate() const;
};

/// Unheralded: trials are all pulses. Heralded: trials are the pulses with a
/// click in the herald arm. Throws DataError when there are no heralds.
ClickCounts hbt_counts(const PatternCounts& table, Arm arm = Arm::x, std::optional<Arm> herald = std::nullopt);

enum class SinglesMode {
  inclusive,  // (r1a + r1b) / n
  exclusive,  // (r1a + r1b - 2 r2) / n, pulses where exactly one detector clicked
};

struct PhotonStatsEstimate {
  PhotonNumberStats stats;
  double sigma_p0 = 0.0;
  // 2R(1-R) deviates from 1/2 by more than 10 %.
  bool unbalanced_splitter = false;
  // P2+ > 0.01, where neglected third-order terms start to matter.
  bool third_order_warning = false;
};

/// P1 = singles / n, P2+ = r2 / (n 2R(1-R)), P0 = 1 - P1 - P2+ with
/// Poisson errors. bs_ratio is the transmission toward detector A.
PhotonStatsEstimate photon_stats(const ClickCounts& counts, double bs_ratio,
                                 SinglesMode mode = SinglesMode::inclusive);

struct RatioEstimate {
  double value = 0.0;
  double sigma = 0.0;
  // Present for a zero numerator: one-sided ~84 % upper bound using one count.
  std::optional<double> upper_bound;
};

/// zero peak / mean side peak. Needs at least two side peaks.
RatioEstimate g2_from_peaks(const PeakAreas& peaks);

/// mean side peak / zero peak of the X-XX cross-correlation, over side peaks
/// with min_index <= |k| <= max_index.
RatioEstimate prep_efficiency(const PeakAreas& peaks, int min_index = 1, int max_index = 5);

/// P_s and P_e with Poisson errors from the click patterns.
PairClickStats pair_click_stats(const PatternCounts& table,
                                SuccessConvention success = SuccessConvention::detector_pair,
                                ErrorAggregation error = ErrorAggregation::mean);

/// Coincidences (X1&XX1, X1&XX2, X2&XX1, X2&XX2) for polarization-resolving
/// arms, where detector 1 records the +1 analyzer outcome.
OutcomeCounts analyzer_coincidences(const PatternCounts& table);

}  // namespace qngc
