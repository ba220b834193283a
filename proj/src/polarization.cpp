#include "qngc/polarization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qngc/error.hpp"

namespace qngc {

namespace {

constexpr Complex kI{0.0, 1.0};

Matrix2c pauli(int k) {
  Matrix2c m;
  switch (k) {
    case 0: m << 1, 0, 0, 1; break;
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, -kI, kI, 0; break;
    default: m << 1, 0, 0, -1; break;
  }
  return m;
}

Matrix4c kron(const Matrix2c& a, const Matrix2c& b) {
  Matrix4c out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

}  // namespace

DensityMatrix::DensityMatrix(const Matrix4c& rho) : rho_(rho) {
  if (!rho_.allFinite()) throw InvalidArgument("density matrix has non-finite entries");
  if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > kTolerance)
    throw InvalidArgument("density matrix is not Hermitian");
  if (std::abs(rho_.trace() - Complex(1.0)) > kTolerance)
    throw InvalidArgument("density matrix trace differs from 1");
  if (eigenvalues().minCoeff() < -kTolerance)
    throw InvalidArgument("density matrix has a negative eigenvalue");
}

DensityMatrix DensityMatrix::pure(const Vector4c& psi) {
  if (std::abs(psi.norm() - 1.0) > kTolerance) throw InvalidArgument("state vector is not normalized");
  return DensityMatrix(psi * psi.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed() { return DensityMatrix(Matrix4c::Identity() / 4.0); }

DensityMatrix DensityMatrix::werner(double p) {
  if (!(p >= -1.0 / 3.0 && p <= 1.0)) throw InvalidArgument("Werner weight must lie in [-1/3, 1]");
  const Vector4c bell = phi_plus();
  return DensityMatrix(p * bell * bell.adjoint() + (1.0 - p) * Matrix4c::Identity() / 4.0);
}

Eigen::Vector4d DensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(rho_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Vector4c phi_plus(double phase) {
  Vector4c v = Vector4c::Zero();
  v(0) = 1.0 / std::numbers::sqrt2;
  v(3) = std::polar(1.0 / std::numbers::sqrt2, phase);
  return v;
}

BlochAxis::BlochAxis(double x, double y, double z) : n_(x, y, z) {
  if (std::abs(n_.norm() - 1.0) > 1e-9) throw InvalidArgument("analyzer axis must be a unit vector");
}

Matrix2c BlochAxis::observable() const {
  return n_(0) * pauli(1) + n_(1) * pauli(2) + n_(2) * pauli(3);
}

Matrix2c BlochAxis::projector(int outcome) const {
  return 0.5 * (pauli(0) + static_cast<double>(outcome >= 0 ? 1 : -1) * observable());
}

std::array<MeasurementSetting, 4> chsh_settings() {
  const double h = 1.0 / std::numbers::sqrt2;
  const BlochAxis x0 = BlochAxis::sigma_z();
  const BlochAxis x1 = BlochAxis::sigma_y();
  const BlochAxis xx0(0.0, -h, h);
  const BlochAxis xx1(0.0, h, h);
  return {MeasurementSetting{x0, xx0}, MeasurementSetting{x0, xx1}, MeasurementSetting{x1, xx0},
          MeasurementSetting{x1, xx1}};
}

double correlator(const DensityMatrix& rho, const MeasurementSetting& setting) {
  return (rho.matrix() * kron(setting.x.observable(), setting.xx.observable())).trace().real();
}

namespace {

double combine_s(const std::array<Correlator, 4>& e) {
  return e[0].value + e[1].value + e[2].value - e[3].value;
}

}  // namespace

ChshResult chsh_expectation(const DensityMatrix& rho) {
  ChshResult r;
  const auto settings = chsh_settings();
  for (std::size_t i = 0; i < 4; ++i) r.correlators[i] = {correlator(rho, settings[i]), 0.0};
  r.s_value = combine_s(r.correlators);
  return r;
}

ChshResult chsh_from_counts(const std::array<OutcomeCounts, 4>& counts) {
  ChshResult r;
  double var = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& c = counts[i];
    const double total = static_cast<double>(c[0] + c[1] + c[2] + c[3]);
    if (total <= 0.0) throw DataError("CHSH setting " + std::to_string(i) + " has zero total count");
    const double e = (static_cast<double>(c[0]) + static_cast<double>(c[3]) - static_cast<double>(c[1]) -
                      static_cast<double>(c[2])) /
                     total;
    const double v = std::max(0.0, 1.0 - e * e) / total;
    r.correlators[i] = {e, std::sqrt(v)};
    var += v;
  }
  r.s_value = combine_s(r.correlators);
  r.sigma_s = std::sqrt(var);
  return r;
}

Eigen::Vector2cd polarization_ket(PolarizationState s) {
  const double h = 1.0 / std::numbers::sqrt2;
  switch (s) {
    case PolarizationState::H: return {1.0, 0.0};
    case PolarizationState::V: return {0.0, 1.0};
    case PolarizationState::D: return {h, h};
    case PolarizationState::R: return {Complex(h), kI * h};
  }
  return {1.0, 0.0};
}

char polarization_label(PolarizationState s) {
  switch (s) {
    case PolarizationState::H: return 'H';
    case PolarizationState::V: return 'V';
    case PolarizationState::D: return 'D';
    case PolarizationState::R: return 'R';
  }
  return '?';
}

PolarizationState parse_polarization(char label) {
  switch (label) {
    case 'H': case 'h': return PolarizationState::H;
    case 'V': case 'v': return PolarizationState::V;
    case 'D': case 'd': return PolarizationState::D;
    case 'R': case 'r': return PolarizationState::R;
    default: throw InvalidArgument(std::string("unknown polarization label '") + label + "'");
  }
}

TomographyCounts tomography_settings() {
  constexpr std::array states{PolarizationState::H, PolarizationState::V, PolarizationState::D,
                              PolarizationState::R};
  TomographyCounts out;
  for (auto a : states)
    for (auto b : states) out.records.push_back({a, b, 0.0, 1.0});
  return out;
}

namespace {

Matrix4c setting_projector(const TomographyRecord& r) {
  Vector4c psi;
  const auto a = polarization_ket(r.x);
  const auto b = polarization_ket(r.xx);
  psi << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return psi * psi.adjoint();
}

double probability(const Matrix4c& rho, const Matrix4c& projector) {
  return std::max(0.0, (rho * projector).trace().real());
}

}  // namespace

TomographyCounts expected_tomography_counts(const DensityMatrix& rho, double total) {
  TomographyCounts out = tomography_settings();
  for (auto& r : out.records) r.count = total * r.weight * probability(rho.matrix(), setting_projector(r));
  return out;
}

double tomography_log_likelihood(const TomographyCounts& counts, const Matrix4c& rho) {
  double ll = 0.0, n_tot = 0.0, rate = 0.0;
  for (const auto& r : counts.records) {
    const double p = probability(rho, setting_projector(r));
    n_tot += r.count;
    rate += r.weight * p;
    if (r.count > 0.0) {
      if (p <= 0.0) return -std::numeric_limits<double>::infinity();
      ll += r.count * std::log(r.weight * p);
    }
  }
  if (rate <= 0.0) return -std::numeric_limits<double>::infinity();
  return ll - n_tot * std::log(rate);
}

Matrix4c project_to_physical(const Matrix4c& hermitian) {
  const Matrix4c h = 0.5 * (hermitian + hermitian.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(h);
  Eigen::Vector4d lambda = es.eigenvalues();

  // Euclidean projection of the spectrum onto the probability simplex.
  std::array<double, 4> sorted{lambda(0), lambda(1), lambda(2), lambda(3)};
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, shift = 0.0;
  for (int k = 0; k < 4; ++k) {
    cumulative += sorted[k];
    const double t = (cumulative - 1.0) / (k + 1);
    if (sorted[k] - t > 0.0) shift = t;
  }
  for (int k = 0; k < 4; ++k) lambda(k) = std::max(lambda(k) - shift, 0.0);

  Matrix4c out = es.eigenvectors() * lambda.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  out = 0.5 * (out + out.adjoint());
  return out / out.trace().real();
}

namespace {

Matrix4c linear_inversion(const TomographyCounts& counts) {
  const auto n = static_cast<Eigen::Index>(counts.records.size());
  if (n < 16) throw InvalidArgument("tomography needs at least 16 settings");

  std::array<Matrix4c, 16> basis;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) basis[a * 4 + b] = kron(pauli(a), pauli(b));

  Eigen::MatrixXd design(n, 16);
  Eigen::VectorXd rhs(n);
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& r = counts.records[k];
    if (r.count < 0.0) throw InvalidArgument("tomography counts must be non-negative");
    if (!(r.weight > 0.0)) throw InvalidArgument("tomography weights must be positive");
    const Matrix4c proj = setting_projector(r);
    for (int j = 0; j < 16; ++j) design(k, j) = (proj * basis[j]).trace().real();
    rhs(k) = r.count / r.weight;
    total += r.count;
  }
  if (total <= 0.0) throw DataError("all tomography counts are zero");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) < 1e-10 * sv(0))
    throw InvalidArgument("tomography settings are not informationally complete");
  const Eigen::VectorXd coeff = svd.solve(rhs);

  Matrix4c unnormalized = Matrix4c::Zero();
  for (int j = 0; j < 16; ++j) unnormalized += coeff(j) * basis[j];
  const double trace = unnormalized.trace().real();
  if (!(trace > 0.0)) throw DataError("linear inversion produced a non-positive trace");
  return unnormalized / trace;
}

// Hermitian gradient of the profiled log-likelihood, scaled by 1 / n_total.
Matrix4c likelihood_gradient(const TomographyCounts& counts, const std::vector<Matrix4c>& projectors,
                             const Matrix4c& rho) {
  double n_tot = 0.0, rate = 0.0;
  Matrix4c g = Matrix4c::Zero();
  Matrix4c weighted = Matrix4c::Zero();
  for (std::size_t k = 0; k < projectors.size(); ++k) {
    const auto& r = counts.records[k];
    const double p = probability(rho, projectors[k]);
    n_tot += r.count;
    rate += r.weight * p;
    weighted += r.weight * projectors[k];
    if (r.count > 0.0 && p > 0.0) g += (r.count / p) * projectors[k];
  }
  g -= (n_tot / rate) * weighted;
  return g / n_tot;
}

struct Ascent {
  Matrix4c rho;
  double ll;
  int iterations;
};

// Multiplicative update rho -> M rho M^dag / tr with M = I + eps (G - tr(G rho)),
// backtracking eps until the likelihood rises.
Ascent maximize_likelihood(const TomographyCounts& counts, Matrix4c rho, const TomographyOptions& opt) {
  std::vector<Matrix4c> projectors;
  projectors.reserve(counts.records.size());
  for (const auto& r : counts.records) projectors.push_back(setting_projector(r));

  double ll = tomography_log_likelihood(counts, rho);
  double eps = 1.0;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    Matrix4c g = likelihood_gradient(counts, projectors, rho);
    g -= (g * rho).trace().real() * Matrix4c::Identity();
    bool improved = false;
    double gain = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      const Matrix4c m = Matrix4c::Identity() + eps * g;
      Matrix4c next = m * rho * m.adjoint();
      next = 0.5 * (next + next.adjoint());
      next /= next.trace().real();
      const double ll_next = tomography_log_likelihood(counts, next);
      if (ll_next > ll) {
        gain = ll_next - ll;
        rho = next;
        ll = ll_next;
        improved = true;
        eps = std::min(eps * 2.0, 1e6);
        break;
      }
      eps *= 0.5;
    }
    if (!improved || gain < opt.tolerance) break;
  }
  return {rho, ll, it};
}

}  // namespace

TomographyResult tomography_reconstruct(const TomographyCounts& counts, const TomographyOptions& options) {
  const Matrix4c linear = linear_inversion(counts);
  const Matrix4c projected = project_to_physical(linear);
  const double ll_projected = tomography_log_likelihood(counts, projected);

  // Second ascent from a full-rank start; the better endpoint wins.
  Ascent best = maximize_likelihood(counts, projected, options);
  const Matrix4c mixed = 0.999 * projected + 0.001 * Matrix4c::Identity() / 4.0;
  Ascent alt = maximize_likelihood(counts, mixed, options);
  if (alt.ll > best.ll) best = alt;

  // Clamp round-off negatives in the spectrum.
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(0.5 * (best.rho + best.rho.adjoint()));
  const Eigen::Vector4d lambda = es.eigenvalues().cwiseMax(0.0);
  Matrix4c rho = es.eigenvectors() * lambda.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace().real();
  double ll = tomography_log_likelihood(counts, rho);
  if (!(ll >= ll_projected)) {
    rho = projected;
    ll = ll_projected;
  }
  return {DensityMatrix(rho), ll, ll_projected, best.iterations};
}

double fidelity(const DensityMatrix& rho, const Vector4c& target) {
  if (std::abs(target.norm() - 1.0) > 1e-9) throw InvalidArgument("fidelity target is not normalized");
  return std::clamp((target.adjoint() * rho.matrix() * target)(0, 0).real(), 0.0, 1.0);
}

double fidelity_phase_optimized(const DensityMatrix& rho) {
  const auto& m = rho.matrix();
  return std::clamp(0.5 * (m(0, 0).real() + m(3, 3).real()) + std::abs(m(0, 3)), 0.0, 1.0);
}

std::array<double, 4> outcome_probabilities(const DensityMatrix& rho, const MeasurementSetting& setting) {
  std::array<double, 4> p{};
  int idx = 0;
  for (int a : {1, -1})
    for (int b : {1, -1})
      p[idx++] = probability(rho.matrix(), kron(setting.x.projector(a), setting.xx.projector(b)));
  const double total = p[0] + p[1] + p[2] + p[3];
  for (double& v : p) v /= total;
  return p;
}

PolarizationOutcome sample_polarization_pair(const DensityMatrix& rho, const MeasurementSetting& setting,
                                             std::mt19937_64& rng) {
  const auto p = outcome_probabilities(rho, setting);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  static constexpr std::array<PolarizationOutcome, 4> outcomes{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  double acc = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    acc += p[i];
    if (u < acc) return outcomes[i];
  }
  return outcomes[3];
}

Matrix4c precess_coherence(const Matrix4c& rho, double phase) {
  Matrix4c out = rho;
  const Complex rot = std::polar(1.0, -phase);
  out(0, 3) = rho(0, 3) * rot;
  out(3, 0) = std::conj(out(0, 3));
  return out;
}

}  // namespace qngc
