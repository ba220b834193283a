#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "qngc/error.hpp"
#include "qngc/polarization.hpp"

using namespace qngc;

namespace {

const double kSqrt2 = std::sqrt(2.0);

DensityMatrix hh() {
  Vector4c v = Vector4c::Zero();
  v(0) = 1.0;
  return DensityMatrix::pure(v);
}

Matrix4c psd_sqrt(const Matrix4c& m) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(m);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// (Tr sqrt(sqrt(a) b sqrt(a)))^2
double uhlmann(const Matrix4c& a, const Matrix4c& b) {
  Matrix4c s = psd_sqrt(a);
  Matrix4c inner = s * b * s;
  inner = 0.5 * (inner + inner.adjoint());
  return std::pow(psd_sqrt(inner).trace().real(), 2);
}

DensityMatrix random_state(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix4c a;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) a(r, c) = Complex(g(rng), g(rng));
  Matrix4c rho = a * a.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(0.5 * (rho + rho.adjoint()));
}

TomographyCounts poisson_counts(const DensityMatrix& rho, double per_setting, std::mt19937_64& rng) {
  auto c = expected_tomography_counts(rho, per_setting);
  for (auto& r : c.records) {
    std::poisson_distribution<long long> p(r.count);
    r.count = r.count > 0 ? static_cast<double>(p(rng)) : 0.0;
  }
  return c;
}

std::array<OutcomeCounts, 4> sample_chsh(const DensityMatrix& rho, int per_setting, std::mt19937_64& rng) {
  std::array<OutcomeCounts, 4> counts{};
  auto settings = chsh_settings();
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < per_setting; ++i) {
      auto o = sample_polarization_pair(rho, settings[s], rng);
      counts[s][(o.x > 0 ? 0 : 2) + (o.xx > 0 ? 0 : 1)]++;
    }
  return counts;
}

}  // namespace

TEST_CASE("density matrix validation") {
  Matrix4c m = Matrix4c::Identity() / 4.0;
  CHECK_NOTHROW(DensityMatrix{m});
  Matrix4c bad_trace = Matrix4c::Identity() / 2.0;
  CHECK_THROWS_AS(DensityMatrix{bad_trace}, InvalidArgument);
  Matrix4c nonherm = m;
  nonherm(0, 1) = 0.1;
  CHECK_THROWS_AS(DensityMatrix{nonherm}, InvalidArgument);
  Matrix4c neg = Matrix4c::Zero();
  neg(0, 0) = 1.5;
  neg(1, 1) = -0.5;
  CHECK_THROWS_AS(DensityMatrix{neg}, InvalidArgument);
  CHECK_THROWS_AS(DensityMatrix::werner(1.2), InvalidArgument);
}

TEST_CASE("CHSH of exact states") {
  CHECK(std::abs(chsh_expectation(DensityMatrix::pure(phi_plus())).s_value - 2 * kSqrt2) < 1e-12);
  CHECK(std::abs(chsh_expectation(DensityMatrix::werner(0.8)).s_value - 2 * kSqrt2 * 0.8) < 1e-12);
  CHECK(chsh_expectation(DensityMatrix::werner(0.8)).s_value == doctest::Approx(2.2627).epsilon(1e-4));
  auto h = chsh_expectation(hh());
  CHECK(std::abs(h.s_value - kSqrt2) < 1e-12);
  CHECK(h.correlators[0].value == doctest::Approx(1 / kSqrt2));
  CHECK(h.correlators[1].value == doctest::Approx(1 / kSqrt2));
  CHECK(std::abs(h.correlators[2].value) < 1e-12);
  CHECK(std::abs(h.correlators[3].value) < 1e-12);
  CHECK(chsh_expectation(hh()).sigma_s == 0.0);
}

TEST_CASE("CHSH settings are unit axes with the stated directions") {
  auto s = chsh_settings();
  CHECK(s[0].x.direction().isApprox(Eigen::Vector3d(0, 0, 1)));
  CHECK(s[2].x.direction().isApprox(Eigen::Vector3d(0, 1, 0)));
  CHECK(s[0].xx.direction().isApprox(Eigen::Vector3d(0, -1, 1) / kSqrt2));
  CHECK(s[1].xx.direction().isApprox(Eigen::Vector3d(0, 1, 1) / kSqrt2));
  CHECK_THROWS_AS(BlochAxis(1, 1, 0), InvalidArgument);
}

TEST_CASE("CHSH from counts") {
  auto bell = DensityMatrix::pure(phi_plus());
  auto settings = chsh_settings();
  std::array<OutcomeCounts, 4> ideal{};
  for (int s = 0; s < 4; ++s) {
    auto p = outcome_probabilities(bell, settings[s]);
    for (int o = 0; o < 4; ++o) ideal[s][o] = static_cast<std::uint64_t>(std::llround(p[o] * 1e12));
  }
  CHECK(chsh_from_counts(ideal).s_value == doctest::Approx(2 * kSqrt2).epsilon(1e-9));

  std::array<OutcomeCounts, 4> flat{};
  for (auto& c : flat) c = {100, 100, 100, 100};
  auto f = chsh_from_counts(flat);
  CHECK(f.s_value == 0.0);
  CHECK(f.sigma_s == doctest::Approx(std::sqrt(4 * (1.0 / 400))));

  std::array<OutcomeCounts, 4> empty{};
  empty[0] = {0, 0, 0, 0};
  CHECK_THROWS_AS(chsh_from_counts(empty), DataError);
}

TEST_CASE("CHSH sampled from Werner state") {
  std::mt19937_64 rng(3);
  auto w = DensityMatrix::werner(0.8);
  auto r = chsh_from_counts(sample_chsh(w, 1'000'000, rng));
  CHECK(std::abs(r.s_value - 2.2627) < 3 * r.sigma_s);
  CHECK(std::abs(r.s_value) <= 2 * kSqrt2 + 3 * r.sigma_s);
}

TEST_CASE("property: sampled CHSH converges to the exact value") {
  std::mt19937_64 rng(4);
  auto rho = DensityMatrix(0.7 * DensityMatrix::pure(phi_plus(0.4)).matrix() + 0.3 * hh().matrix());
  const double exact = chsh_expectation(rho).s_value;
  double prev_sigma = 1e9;
  for (int n : {100'000, 1'000'000}) {
    auto r = chsh_from_counts(sample_chsh(rho, n, rng));
    CHECK(std::abs(r.s_value - exact) < 3 * r.sigma_s);
    CHECK(r.sigma_s < prev_sigma);
    prev_sigma = r.sigma_s;
  }
}

TEST_CASE("property: swapping one analyzer's labels flips that correlator") {
  std::array<OutcomeCounts, 4> c{{{500, 120, 80, 300}, {410, 90, 100, 400}, {200, 300, 280, 220}, {100, 400, 350, 150}}};
  auto base = chsh_from_counts(c);
  for (int s = 0; s < 4; ++s) {
    auto swapped = c;
    // relabel the XX analyzer outcomes of setting s
    std::swap(swapped[s][0], swapped[s][1]);
    std::swap(swapped[s][2], swapped[s][3]);
    auto r = chsh_from_counts(swapped);
    for (int t = 0; t < 4; ++t) {
      const double expected = t == s ? -base.correlators[t].value : base.correlators[t].value;
      CHECK(r.correlators[t].value == doctest::Approx(expected));
    }
  }
}

TEST_CASE("fidelity") {
  auto bell = phi_plus();
  CHECK(fidelity(DensityMatrix::pure(bell), bell) == doctest::Approx(1.0));
  CHECK(fidelity(DensityMatrix::maximally_mixed(), bell) == doctest::Approx(0.25));
  Vector4c psi_minus(0, 1 / kSqrt2, -1 / kSqrt2, 0);
  CHECK(fidelity(DensityMatrix::maximally_mixed(), psi_minus) == doctest::Approx(0.25));
  CHECK(fidelity(DensityMatrix::werner(0.8787), bell) == doctest::Approx(0.909).epsilon(1e-4));
  for (double p : {0.0, 0.3, 0.9}) CHECK(fidelity(DensityMatrix::werner(p), bell) == doctest::Approx((1 + 3 * p) / 4));
  Vector4c unnorm = 2.0 * bell;
  CHECK_THROWS_AS(fidelity(DensityMatrix::pure(bell), unnorm), InvalidArgument);
}

TEST_CASE("property: fidelity ignores a global phase of the target") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 2 * M_PI);
  for (int i = 0; i < 50; ++i) {
    auto rho = random_state(rng);
    Vector4c t = phi_plus(u(rng));
    Vector4c rotated = std::polar(1.0, u(rng)) * t;
    CHECK(fidelity(rho, rotated) == doctest::Approx(fidelity(rho, t)).epsilon(1e-12));
  }
}

TEST_CASE("phase-optimized fidelity") {
  auto rho = DensityMatrix::pure(phi_plus(1.1));
  CHECK(fidelity(rho, phi_plus()) < 0.8);
  CHECK(fidelity_phase_optimized(rho) == doctest::Approx(1.0));
  CHECK(fidelity_phase_optimized(DensityMatrix::werner(0.5)) == doctest::Approx(0.625));
}

TEST_CASE("Born-rule sampling") {
  std::mt19937_64 rng(7);
  MeasurementSetting zz{BlochAxis::sigma_z(), BlochAxis::sigma_z()};
  for (int i = 0; i < 1000; ++i) {
    auto o = sample_polarization_pair(hh(), zz, rng);
    CHECK(o.x == 1);
    CHECK(o.xx == 1);
  }
  auto bell = DensityMatrix::pure(phi_plus());
  for (int i = 0; i < 1000; ++i) {
    auto o = sample_polarization_pair(bell, zz, rng);
    CHECK(o.x == o.xx);
  }
  MeasurementSetting zy{BlochAxis::sigma_z(), BlochAxis::sigma_y()};
  const int n = 1'000'000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    auto o = sample_polarization_pair(bell, zy, rng);
    sum += o.x * o.xx;
  }
  CHECK(std::abs(sum / n) < 3.0 / std::sqrt(n));
}

TEST_CASE("tomography settings and labels") {
  auto s = tomography_settings();
  CHECK(s.records.size() == 16);
  for (char c : {'H', 'V', 'D', 'R'}) CHECK(polarization_label(parse_polarization(c)) == c);
  CHECK_THROWS_AS(parse_polarization('Q'), InvalidArgument);
  auto r = polarization_ket(PolarizationState::R);
  CHECK(std::abs(r(1) - Complex(0, 1 / kSqrt2)) < 1e-15);
}

TEST_CASE("tomography: noiseless Bell round trip") {
  auto c = expected_tomography_counts(DensityMatrix::pure(phi_plus()), 1e6);
  auto r = tomography_reconstruct(c);
  CHECK(fidelity(r.rho, phi_plus()) >= 0.9999);
  CHECK(r.log_likelihood >= r.log_likelihood_projected - 1e-9);
}

TEST_CASE("tomography: Poisson-sampled random states") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 10; ++i) {
    auto truth = random_state(rng);
    auto r = tomography_reconstruct(poisson_counts(truth, 1e6, rng));
    CHECK(uhlmann(r.rho.matrix(), truth.matrix()) >= 0.995);
    CHECK(r.log_likelihood >= r.log_likelihood_projected - 1e-9);
  }
}

TEST_CASE("tomography: maximally mixed state") {
  auto exact = expected_tomography_counts(DensityMatrix::maximally_mixed(), 1e6);
  for (const auto& rec : exact.records) CHECK(rec.count == doctest::Approx(exact.records[0].count));
  std::mt19937_64 rng(10);
  auto r = tomography_reconstruct(poisson_counts(DensityMatrix::maximally_mixed(), 1e6, rng));
  auto ev = r.rho.eigenvalues();
  for (int i = 0; i < 4; ++i) CHECK(std::abs(ev(i) - 0.25) <= 0.01);
}

TEST_CASE("tomography: errors") {
  auto c = tomography_settings();
  CHECK_THROWS_AS(tomography_reconstruct(c), DataError);
  auto partial = expected_tomography_counts(DensityMatrix::maximally_mixed(), 100);
  partial.records.resize(15);
  CHECK_THROWS_AS(tomography_reconstruct(partial), InvalidArgument);
  auto dup = expected_tomography_counts(DensityMatrix::maximally_mixed(), 100);
  for (auto& r : dup.records) r.x = PolarizationState::H;
  CHECK_THROWS_AS(tomography_reconstruct(dup), InvalidArgument);
  auto neg = expected_tomography_counts(DensityMatrix::maximally_mixed(), 100);
  neg.records[3].count = -1;
  CHECK_THROWS_AS(tomography_reconstruct(neg), InvalidArgument);
}

TEST_CASE("property: reconstructions stay physical on adversarial counts") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    auto c = tomography_settings();
    for (auto& r : c.records) {
      const double roll = u(rng);
      r.count = roll < 0.3 ? 0.0 : (roll < 0.6 ? std::floor(5 * u(rng)) : std::floor(1e6 * u(rng)));
    }
    c.records[0].count += 1;
    auto r = tomography_reconstruct(c);
    const auto& m = r.rho.matrix();
    CHECK((m - m.adjoint()).norm() < 1e-9);
    CHECK(std::abs(m.trace().real() - 1.0) < 1e-9);
    CHECK(r.rho.eigenvalues().minCoeff() >= -1e-9);
    CHECK(r.log_likelihood >= r.log_likelihood_projected - 1e-9);
  }
}

TEST_CASE("projection onto physical states") {
  Matrix4c h = Matrix4c::Zero();
  h(0, 0) = 1.2;
  h(1, 1) = -0.2;
  Matrix4c p = project_to_physical(h);
  CHECK(p(0, 0).real() == doctest::Approx(1.0));
  CHECK(std::abs(p(1, 1)) < 1e-12);
  CHECK_NOTHROW(DensityMatrix{p});
}

TEST_CASE("fine-structure precession rotates the Bell phase") {
  auto rho = DensityMatrix::pure(phi_plus()).matrix();
  Matrix4c out = precess_coherence(rho, 0.7);
  CHECK(std::abs(out(0, 3) - 0.5 * std::polar(1.0, -0.7)) < 1e-12);
  CHECK(std::abs(out(3, 0) - std::conj(out(0, 3))) < 1e-12);
  CHECK(std::abs(out(0, 0) - rho(0, 0)) < 1e-15);
}
