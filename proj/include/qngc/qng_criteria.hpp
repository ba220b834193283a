#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace qngc {

/// Photon-number probabilities of one optical mode.
struct PhotonNumberStats {
  double p0 = 1.0;
  double p1 = 0.0;
  double p2plus = 0.0;
  double sigma_p1 = 0.0;
  double sigma_p2plus = 0.0;
  bool heralded = false;

  void validate() const;
};

/// Per-pulse success (cross-mode coincidence) and error (same-mode double
/// click) probabilities of the four-detector pair setup.
struct PairClickStats {
  double ps = 0.0;
  double pe = 0.0;
  double sigma_ps = 0.0;
  double sigma_pe = 0.0;
  std::uint64_t n_pulses = 0;
  // Per-arm same-mode double-click probabilities; pe aggregates them.
  double pe_x = 0.0;
  double pe_xx = 0.0;

  void validate() const;
};

struct DepthDb {
  double value_db = 0.0;
  double sigma_db = 0.0;
};

/// No multiphoton contribution: the criterion survives any attenuation.
struct UnboundedDepth {};

using SpsDepth = std::variant<DepthDb, UnboundedDepth>;

inline bool is_unbounded(const SpsDepth& d) {
  return std::holds_alternative<UnboundedDepth>(d);
}

/// Single-photon non-Gaussianity depth -10 log10(3 P2+ / (2 P1^3)) with
/// first-order uncertainty. Throws InvalidArgument if p1 == 0.
SpsDepth sps_depth(const PhotonNumberStats& stats);

/// Success-probability threshold a Gaussian pair source cannot exceed:
/// sqrt(pe)/2 + 3 pe/8 + pe^{3/2}/16.
double pair_threshold(double pe);

/// d pair_threshold / d pe. Diverges at pe = 0.
double pair_threshold_slope(double pe);

struct QngPairReport {
  double threshold = 0.0;
  double difference = 0.0;
  double significance = 0.0;
  // Set when pe == 0 but sigma_pe > 0: significance then uses the
  // threshold at pe = sigma_pe as a one-sided bound.
  bool one_sided = false;
  bool certified = false;

  // Depth fields; empty when the criterion is not violated.
  std::optional<double> t_coin_db;
  std::optional<double> t_coin_exact_db;
  std::optional<double> t_coin_sigma_db;
  // Transmissivity at which the trajectory meets the criterion boundary.
  std::optional<double> critical_transmissivity;
};

/// Threshold, difference and significance only.
QngPairReport pair_violation(const PairClickStats& stats);

/// -10 log10(sqrt(pe) / (2 ps)); the small-pe approximation of the depth.
double pair_depth_approx_db(double ps, double pe);

/// Smallest transmissivity T in (0, 1] with ps T^2 = threshold(pe T^2).
/// Throws CriterionNotViolated if ps <= threshold(pe).
double pair_critical_transmissivity(double ps, double pe);

/// Full report including the depth fields. Throws CriterionNotViolated when
/// the criterion is not violated at T = 1.
QngPairReport pair_depth(const PairClickStats& stats);

struct CurvePoint {
  double transmissivity;
  double pe;
  double ps;
  bool critical = false;
};

/// Loss trajectory (pe T^2, ps T^2). If the criterion is violated, the point
/// at the critical transmissivity is inserted and flagged.
std::vector<CurvePoint> depth_curve(const PairClickStats& stats,
                                    std::span<const double> transmissivities);

}  // namespace qngc
