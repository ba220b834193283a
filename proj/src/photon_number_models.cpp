#include "qngc/photon_number_models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qngc/error.hpp"

namespace qngc {

PhotonPairDistribution::PhotonPairDistribution(std::size_t n_max)
    : n_max_(n_max), probs_((n_max + 1) * (n_max + 1), 0.0) {}

PhotonPairDistribution::PhotonPairDistribution(std::size_t n_max, std::vector<double> probs,
                                               double tail_mass)
    : n_max_(n_max), probs_(std::move(probs)), tail_mass_(tail_mass) {
  if (probs_.size() != (n_max_ + 1) * (n_max_ + 1))
    throw InvalidArgument("probability table must have (n_max + 1)^2 entries");
}

double PhotonPairDistribution::total() const {
  double s = 0.0;
  for (double p : probs_) s += p;
  return s;
}

bool PhotonPairDistribution::is_diagonal() const {
  for (std::size_t n = 0; n <= n_max_; ++n)
    for (std::size_t m = 0; m <= n_max_; ++m)
      if (n != m && (*this)(n, m) != 0.0) return false;
  return true;
}

std::vector<double> PhotonPairDistribution::signal_marginal() const {
  std::vector<double> out(n_max_ + 1, 0.0);
  for (std::size_t n = 0; n <= n_max_; ++n)
    for (std::size_t m = 0; m <= n_max_; ++m) out[n] += (*this)(n, m);
  return out;
}

void PhotonPairDistribution::validate() const {
  for (double p : probs_)
    if (!(p >= 0.0)) throw InvalidArgument("negative or NaN probability in pair distribution");
  if (std::abs(total() - 1.0) > kNormTolerance)
    throw InvalidArgument("pair distribution is not normalized (sum = " + std::to_string(total()) + ")");
}

namespace {

// Negative-binomial pmf by forward recurrence; stable for very large K where
// lgamma differences lose precision.
std::vector<double> negative_binomial_pmf(double mu_total, std::uint64_t modes, std::size_t n_max) {
  std::vector<double> p(n_max + 1, 0.0);
  const double k = static_cast<double>(modes);
  const double m = mu_total / k;
  p[0] = std::exp(-k * std::log1p(m));
  const double q = m / (1.0 + m);
  for (std::size_t n = 0; n < n_max; ++n)
    p[n + 1] = p[n] * (static_cast<double>(n) + k) / static_cast<double>(n + 1) * q;
  return p;
}

double tail_of(const std::vector<double>& pmf) {
  double s = 0.0;
  // Summing smallest terms first keeps 1 - s accurate.
  for (auto it = pmf.rbegin(); it != pmf.rend(); ++it) s += *it;
  return std::max(0.0, 1.0 - s);
}

void check_mean_and_order(double mu, std::size_t n_max) {
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidArgument("mean photon number must be >= 0");
  if (n_max < 1) throw InvalidArgument("n_max must be >= 1");
}

PhotonPairDistribution diagonal_from(const std::vector<double>& pmf, std::size_t n_max) {
  const double tail = tail_of(pmf);
  if (tail > PhotonPairDistribution::kNormTolerance)
    throw InvalidArgument("n_max = " + std::to_string(n_max) + " leaves tail mass " +
                          std::to_string(tail) + " > 1e-9");
  std::vector<double> table((n_max + 1) * (n_max + 1), 0.0);
  for (std::size_t n = 0; n <= n_max; ++n) table[n * (n_max + 1) + n] = pmf[n];
  return PhotonPairDistribution(n_max, std::move(table), tail);
}

}  // namespace

std::size_t required_n_max(double mu_total, std::uint64_t modes, double tolerance) {
  check_mean_and_order(mu_total, 1);
  if (modes < 1) throw InvalidArgument("mode count must be >= 1");
  std::size_t n_max = 1;
  while (n_max < 100000) {
    if (tail_of(negative_binomial_pmf(mu_total, modes, n_max)) <= tolerance) return n_max;
    n_max = n_max < 16 ? n_max + 1 : n_max + n_max / 4;
  }
  throw InvalidArgument("mean photon number too large for truncated enumeration");
}

PhotonPairDistribution tmsv_distribution(double mu, std::size_t n_max) {
  check_mean_and_order(mu, n_max);
  std::vector<double> pmf(n_max + 1, 0.0);
  const double ratio = mu / (1.0 + mu);
  pmf[0] = 1.0 / (1.0 + mu);
  for (std::size_t n = 1; n <= n_max; ++n) pmf[n] = pmf[n - 1] * ratio;
  return diagonal_from(pmf, n_max);
}

PhotonPairDistribution multimode_distribution(double mu_total, std::uint64_t modes, std::size_t n_max) {
  check_mean_and_order(mu_total, n_max);
  if (modes < 1) throw InvalidArgument("mode count must be >= 1");
  if (modes == 1) return tmsv_distribution(mu_total, n_max);
  return diagonal_from(negative_binomial_pmf(mu_total, modes, n_max), n_max);
}

void DetectionChainParams::validate() const {
  for (double v : {eta_x, eta_xx, bs_ratio_x, bs_ratio_xx, dark_prob})
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("detection chain parameters must lie in [0, 1]");
}

double aggregate_error(double pe_x, double pe_xx, ErrorAggregation how) {
  switch (how) {
    case ErrorAggregation::mean: return 0.5 * (pe_x + pe_xx);
    case ErrorAggregation::sum: return pe_x + pe_xx;
    case ErrorAggregation::max: return std::max(pe_x, pe_xx);
  }
  return 0.5 * (pe_x + pe_xx);
}

namespace {

// Click probabilities of one arm given n photons entering it. Each photon
// independently survives with eta and goes to detector A with ratio R.
struct ArmResponse {
  std::vector<double> no_a;     // P(A silent | n)
  std::vector<double> no_b;     // P(B silent | n)
  std::vector<double> silent;   // P(A and B silent | n)
};

ArmResponse arm_response(std::size_t n_max, double eta, double ratio, double dark) {
  ArmResponse r{std::vector<double>(n_max + 1), std::vector<double>(n_max + 1),
                std::vector<double>(n_max + 1)};
  const double qa = 1.0 - eta * ratio;
  const double qb = 1.0 - eta * (1.0 - ratio);
  const double q0 = 1.0 - eta;
  double pa = 1.0 - dark, pb = 1.0 - dark, p0 = (1.0 - dark) * (1.0 - dark);
  for (std::size_t n = 0; n <= n_max; ++n) {
    r.no_a[n] = pa;
    r.no_b[n] = pb;
    r.silent[n] = p0;
    pa *= qa;
    pb *= qb;
    p0 *= q0;
  }
  return r;
}

}  // namespace

PairClickStats detected_pair_click_probs(const PhotonPairDistribution& dist,
                                         const DetectionChainParams& chain,
                                         SuccessConvention success, ErrorAggregation error) {
  dist.validate();
  chain.validate();
  const std::size_t n_max = dist.n_max();
  const ArmResponse x = arm_response(n_max, chain.eta_x, chain.bs_ratio_x, chain.dark_prob);
  const ArmResponse xx = arm_response(n_max, chain.eta_xx, chain.bs_ratio_xx, chain.dark_prob);

  double ps = 0.0, pe_x = 0.0, pe_xx = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    for (std::size_t m = 0; m <= n_max; ++m) {
      const double p = dist(n, m);
      if (p == 0.0) continue;
      const double click_x1 = 1.0 - x.no_a[n], click_x2 = 1.0 - x.no_b[n];
      const double click_xx1 = 1.0 - xx.no_a[m], click_xx2 = 1.0 - xx.no_b[m];
      if (success == SuccessConvention::any_cross) {
        ps += p * (1.0 - x.silent[n]) * (1.0 - xx.silent[m]);
      } else {
        ps += p * 0.25 * (click_x1 + click_x2) * (click_xx1 + click_xx2);
      }
      pe_x += p * (1.0 - x.no_a[n] - x.no_b[n] + x.silent[n]);
      pe_xx += p * (1.0 - xx.no_a[m] - xx.no_b[m] + xx.silent[m]);
    }
  }
  PairClickStats out;
  out.ps = std::clamp(ps, 0.0, 1.0);
  out.pe_x = std::clamp(pe_x, 0.0, 1.0);
  out.pe_xx = std::clamp(pe_xx, 0.0, 1.0);
  out.pe = aggregate_error(out.pe_x, out.pe_xx, error);
  return out;
}

}  // namespace qngc
