#include "qngc/qng_criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qngc/error.hpp"

namespace qngc {

namespace {

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

bool in_unit(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void PhotonNumberStats::validate() const {
  if (!in_unit(p0) || !in_unit(p1) || !in_unit(p2plus))
    throw InvalidArgument("photon-number probabilities must lie in [0, 1]");
  if (std::abs(p0 + p1 + p2plus - 1.0) > 1e-9)
    throw InvalidArgument("photon-number probabilities must sum to 1");
  if (sigma_p1 < 0.0 || sigma_p2plus < 0.0)
    throw InvalidArgument("standard deviations must be non-negative");
}

void PairClickStats::validate() const {
  if (!in_unit(ps) || !in_unit(pe))
    throw InvalidArgument("pair click probabilities must lie in [0, 1]");
  if (sigma_ps < 0.0 || sigma_pe < 0.0)
    throw InvalidArgument("standard deviations must be non-negative");
}

SpsDepth sps_depth(const PhotonNumberStats& stats) {
  if (stats.p1 < 0.0 || stats.p2plus < 0.0 || stats.p0 < 0.0)
    throw InvalidArgument("negative photon-number probability");
  if (stats.p1 == 0.0)
    throw InvalidArgument("no single-photon signal (p1 = 0)");
  if (stats.p2plus == 0.0) return UnboundedDepth{};

  const double ratio = 3.0 * stats.p2plus / (2.0 * std::pow(stats.p1, 3));
  const double rel2 = stats.sigma_p2plus / stats.p2plus;
  const double rel1 = 3.0 * stats.sigma_p1 / stats.p1;
  return DepthDb{-10.0 * std::log10(ratio),
                 kDbPerNeper * std::sqrt(rel2 * rel2 + rel1 * rel1)};
}

double pair_threshold(double pe) {
  if (!in_unit(pe)) throw InvalidArgument("pe must lie in [0, 1]");
  const double r = std::sqrt(pe);
  return 0.5 * r + 0.375 * pe + 0.0625 * pe * r;
}

double pair_threshold_slope(double pe) {
  if (!in_unit(pe)) throw InvalidArgument("pe must lie in [0, 1]");
  if (pe == 0.0) return std::numeric_limits<double>::infinity();
  const double r = std::sqrt(pe);
  return 0.25 / r + 0.375 + 0.09375 * r;
}

QngPairReport pair_violation(const PairClickStats& stats) {
  stats.validate();
  QngPairReport report;
  report.threshold = pair_threshold(stats.pe);
  report.difference = stats.ps - report.threshold;
  report.certified = report.difference > 0.0;

  double sigma = 0.0;
  double difference = report.difference;
  if (stats.pe == 0.0 && stats.sigma_pe > 0.0) {
    // Conservative: assume the true pe sits one sigma above zero.
    report.one_sided = true;
    difference = stats.ps - pair_threshold(std::min(stats.sigma_pe, 1.0));
    sigma = stats.sigma_ps;
  } else {
    const double slope = stats.pe > 0.0 ? pair_threshold_slope(stats.pe) : 0.0;
    const double spe = slope * stats.sigma_pe;
    sigma = std::sqrt(stats.sigma_ps * stats.sigma_ps + spe * spe);
  }
  if (sigma > 0.0) {
    report.significance = difference / sigma;
  } else if (difference != 0.0) {
    report.significance = std::copysign(std::numeric_limits<double>::infinity(), difference);
  }
  return report;
}

double pair_depth_approx_db(double ps, double pe) {
  if (ps <= 0.0 || pe < 0.0) throw InvalidArgument("pair depth needs ps > 0 and pe >= 0");
  if (pe == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(std::sqrt(pe) / (2.0 * ps));
}

double pair_critical_transmissivity(double ps, double pe) {
  if (!in_unit(ps) || !in_unit(pe)) throw InvalidArgument("probabilities must lie in [0, 1]");
  // g(T) = (ps T^2 - threshold(pe T^2)) / T; its sign matches the margin and
  // it stays finite at the lower bracket.
  auto g = [&](double t) {
    const double r = std::sqrt(pe);
    return (ps - 0.375 * pe) * t - 0.5 * r - 0.0625 * pe * r * t * t;
  };
  if (ps <= pair_threshold(pe))
    throw CriterionNotViolated("criterion not violated at T = 1; depth undefined");
  if (pe == 0.0) return 0.0;

  double lo = 1e-12;
  double hi = 1.0;
  if (g(lo) > 0.0) return lo;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

QngPairReport pair_depth(const PairClickStats& stats) {
  QngPairReport report = pair_violation(stats);
  if (!report.certified)
    throw CriterionNotViolated("criterion not violated at T = 1; depth undefined");

  const double t_crit = pair_critical_transmissivity(stats.ps, stats.pe);
  report.critical_transmissivity = t_crit;
  report.t_coin_db = pair_depth_approx_db(stats.ps, stats.pe);
  report.t_coin_exact_db = t_crit > 0.0 ? -10.0 * std::log10(t_crit)
                                        : std::numeric_limits<double>::infinity();
  double rel = 0.0;
  if (stats.pe > 0.0) {
    const double a = stats.sigma_pe / (2.0 * stats.pe);
    const double b = stats.sigma_ps / stats.ps;
    rel = std::sqrt(a * a + b * b);
  }
  report.t_coin_sigma_db = kDbPerNeper * rel;
  return report;
}

std::vector<CurvePoint> depth_curve(const PairClickStats& stats,
                                    std::span<const double> transmissivities) {
  stats.validate();
  std::vector<CurvePoint> points;
  points.reserve(transmissivities.size() + 1);
  for (double t : transmissivities) {
    if (!(t > 0.0 && t <= 1.0)) throw InvalidArgument("transmissivity must lie in (0, 1]");
    points.push_back({t, stats.pe * t * t, stats.ps * t * t, false});
  }
  if (stats.ps > 0.0 && stats.ps > pair_threshold(stats.pe) && stats.pe > 0.0) {
    const double tc = pair_critical_transmissivity(stats.ps, stats.pe);
    points.push_back({tc, stats.pe * tc * tc, stats.ps * tc * tc, true});
  }
  std::stable_sort(points.begin(), points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.transmissivity > b.transmissivity;
  });
  return points;
}

}  // namespace qngc
