#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qngc/qng_criteria.hpp"

namespace qngc {

/// Truncated joint photon-number law over (n_signal, n_idler), both in
/// [0, n_max]. Entries sum to 1 - tail_mass.
class PhotonPairDistribution {
 public:
  static constexpr double kNormTolerance = 1e-9;

  explicit PhotonPairDistribution(std::size_t n_max);
  /// Takes ownership of a row-major (n_max + 1)^2 table.
  PhotonPairDistribution(std::size_t n_max, std::vector<double> probs, double tail_mass = 0.0);

  std::size_t n_max() const { return n_max_; }
  double operator()(std::size_t n, std::size_t m) const { return probs_[n * (n_max_ + 1) + m]; }
  double& at(std::size_t n, std::size_t m) { return probs_[n * (n_max_ + 1) + m]; }
  double tail_mass() const { return tail_mass_; }
  double total() const;
  bool is_diagonal() const;

  /// Signal-arm marginal P(n).
  std::vector<double> signal_marginal() const;

  /// Throws InvalidArgument on negative entries or total outside 1 +- 1e-9.
  void validate() const;

 private:
  std::size_t n_max_;
  std::vector<double> probs_;
  double tail_mass_ = 0.0;
};

/// Smallest n_max such that the K-mode law with total mean mu_total has tail
/// mass <= tolerance.
std::size_t required_n_max(double mu_total, std::uint64_t modes, double tolerance = 1e-9);

/// Single-mode two-mode-squeezed vacuum: thermal P(n) = mu^n / (1 + mu)^{n+1}
/// on the diagonal.
PhotonPairDistribution tmsv_distribution(double mu, std::size_t n_max = 20);

/// K identical independent pair modes with total mean mu_total: the per-arm
/// marginal is negative binomial, the joint law diagonal.
PhotonPairDistribution multimode_distribution(double mu_total, std::uint64_t modes,
                                              std::size_t n_max = 20);

struct DetectionChainParams {
  double eta_x = 1.0;
  double eta_xx = 1.0;
  double bs_ratio_x = 0.5;
  double bs_ratio_xx = 0.5;
  double dark_prob = 0.0;

  void validate() const;
};

/// How cross-mode coincidences enter P_s.
enum class SuccessConvention {
  // Mean over the four (X detector, XX detector) pairs of P(both click).
  detector_pair,
  // P(>= 1 click in the X arm and >= 1 click in the XX arm).
  any_cross,
};

/// How the two arms' same-mode double-click probabilities combine into P_e.
enum class ErrorAggregation { mean, sum, max };

double aggregate_error(double pe_x, double pe_xx, ErrorAggregation how);

/// Exact per-pulse (P_s, P_e) of a pair law through binomial loss, Bernoulli
/// beam-splitter routing and independent dark clicks. Sigma fields are 0.
PairClickStats detected_pair_click_probs(const PhotonPairDistribution& dist,
                                         const DetectionChainParams& chain,
                                         SuccessConvention success = SuccessConvention::detector_pair,
                                         ErrorAggregation error = ErrorAggregation::mean);

}  // namespace qngc
