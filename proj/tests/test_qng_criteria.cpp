#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "qngc/error.hpp"
#include "qngc/qng_criteria.hpp"

using namespace qngc;

namespace {

PhotonNumberStats sps(double p1, double p2) {
  PhotonNumberStats s;
  s.p1 = p1;
  s.p2plus = p2;
  s.p0 = 1.0 - p1 - p2;
  return s;
}

PairClickStats pairs(double ps, double pe, double sps_ = 0.0, double spe = 0.0) {
  PairClickStats s;
  s.ps = ps;
  s.pe = pe;
  s.sigma_ps = sps_;
  s.sigma_pe = spe;
  s.pe_x = pe;
  s.pe_xx = pe;
  return s;
}

double depth_db(const SpsDepth& d) { return std::get<DepthDb>(d).value_db; }

}  // namespace

TEST_CASE("sps depth: closed-form values") {
  CHECK(is_unbounded(sps_depth(sps(1.0, 0.0))));
  // -10 log10(3e-4 / 0.25) and -10 log10(3e-5 / 2e-3)
  CHECK(depth_db(sps_depth(sps(0.5, 1e-4))) == doctest::Approx(-10 * std::log10(1.2e-3)).epsilon(1e-12));
  CHECK(depth_db(sps_depth(sps(0.5, 1e-4))) == doctest::Approx(29.21).epsilon(1e-4));
  CHECK(depth_db(sps_depth(sps(0.1, 1e-5))) == doctest::Approx(18.24).epsilon(1e-4));
}

TEST_CASE("sps depth: uncertainty propagation") {
  auto s = sps(0.2, 1e-4);
  s.sigma_p1 = 0.002;
  s.sigma_p2plus = 1e-5;
  auto d = std::get<DepthDb>(sps_depth(s));
  const double expected = 10.0 / std::log(10.0) * std::hypot(1e-5 / 1e-4, 3 * 0.002 / 0.2);
  CHECK(d.sigma_db == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sps depth: errors") {
  CHECK_THROWS_AS(sps_depth(sps(0.0, 0.1)), InvalidArgument);
  CHECK_THROWS_AS(sps_depth(sps(-0.1, 0.1)), InvalidArgument);
  CHECK_THROWS_AS(sps_depth(sps(0.5, -1e-3)), InvalidArgument);
}

TEST_CASE("pair threshold values") {
  CHECK(pair_threshold(0.0) == 0.0);
  CHECK(pair_threshold(8.55e-7) == doctest::Approx(4.6265e-4).epsilon(1e-4));
  CHECK(std::abs(pair_threshold(8.55e-7) - 4.6265e-4) < 1e-7);
  CHECK(pair_threshold(1e-2) == doctest::Approx(5.38125e-2).epsilon(1e-12));
  CHECK_THROWS_AS(pair_threshold(-1e-3), InvalidArgument);
  CHECK_THROWS_AS(pair_threshold(1.5), InvalidArgument);
}

TEST_CASE("pair violation: difference and significance") {
  auto r = pair_violation(pairs(5.74e-4, 8.55e-7));
  CHECK(r.difference == doctest::Approx(1.1135e-4).epsilon(1e-3));
  CHECK(r.difference > 0);
  CHECK(r.certified);

  auto below = pair_violation(pairs(1e-4, 8.55e-7));
  CHECK(below.difference < 0);
  CHECK_FALSE(below.certified);

  const double n = 1e9;
  const double ps = 5.74e-4, pe = 8.55e-7;
  auto sig = pair_violation(pairs(ps, pe, std::sqrt(ps / n), std::sqrt(pe / n)));
  const double slope = 0.25 / std::sqrt(pe) + 0.375 + 3.0 / 32.0 * std::sqrt(pe);
  const double denom = std::sqrt(ps / n + slope * slope * pe / n);
  CHECK(sig.significance == doctest::Approx(sig.difference / denom).epsilon(1e-12));
  CHECK(sig.significance == doctest::Approx(14.0).epsilon(0.01));
}

TEST_CASE("pair violation: pe = 0 with uncertainty is one-sided") {
  auto r = pair_violation(pairs(1e-3, 0.0, 1e-5, 1e-7));
  CHECK(r.one_sided);
  CHECK(std::isfinite(r.significance));
  CHECK(r.difference == doctest::Approx(1e-3));
}

TEST_CASE("pair depth: reported point and boundaries") {
  auto r = pair_depth(pairs(5.74e-4, 8.55e-7));
  REQUIRE(r.t_coin_db);
  CHECK(std::abs(*r.t_coin_db - 0.9394) < 0.01);
  CHECK(std::abs(*r.t_coin_db - 0.94) < 0.01);
  REQUIRE(r.t_coin_exact_db);
  CHECK(*r.t_coin_exact_db <= *r.t_coin_db + 1e-6);

  CHECK(pair_depth_approx_db(0.5 * std::sqrt(1e-6), 1e-6) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(pair_depth_approx_db(1e-3, 1e-8) == doctest::Approx(13.0103).epsilon(1e-5));

  CHECK_THROWS_AS(pair_depth(pairs(1e-4, 8.55e-7)), CriterionNotViolated);
  CHECK_THROWS_AS(pair_critical_transmissivity(1e-4, 8.55e-7), CriterionNotViolated);
}

TEST_CASE("pair depth: critical point lies on the boundary") {
  const double ps = 5.74e-4, pe = 8.55e-7;
  const double t = pair_critical_transmissivity(ps, pe);
  CHECK(t > 0.0);
  CHECK(t < 1.0);
  CHECK(std::abs(ps * t * t - pair_threshold(pe * t * t)) < 1e-9 * ps);
  auto r = pair_depth(pairs(ps, pe));
  CHECK(*r.t_coin_exact_db == doctest::Approx(-10 * std::log10(t)).epsilon(1e-12));
}

TEST_CASE("pair depth: uncertainty follows the approximate form") {
  const double ps = 5.74e-4, pe = 8.55e-7, sps_ = 2e-6, spe = 3e-8;
  auto r = pair_depth(pairs(ps, pe, sps_, spe));
  const double k = 10.0 / std::log(10.0);
  const double expected = k * std::hypot(sps_ / ps, 0.5 * spe / pe);
  CHECK(*r.t_coin_sigma_db == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("depth curve") {
  auto st = pairs(5.74e-4, 8.55e-7);
  std::vector<double> grid{1.0, 0.9, 0.5, 0.1, 0.01};
  auto pts = depth_curve(st, grid);
  REQUIRE(pts.size() == grid.size() + 1);
  CHECK(pts.front().transmissivity == 1.0);
  CHECK(pts.front().pe == st.pe);
  CHECK(pts.front().ps == st.ps);
  int critical = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i].ps / pts[i].pe == doctest::Approx(st.ps / st.pe).epsilon(1e-12));
    if (i > 0) CHECK(pts[i].transmissivity <= pts[i - 1].transmissivity);
    if (pts[i].critical) {
      ++critical;
      CHECK(std::abs(pts[i].ps - pair_threshold(pts[i].pe)) < 1e-9);
    }
  }
  CHECK(critical == 1);
  std::vector<double> bad{0.0};
  CHECK_THROWS_AS(depth_curve(st, bad), InvalidArgument);
  std::vector<double> bad2{1.5};
  CHECK_THROWS_AS(depth_curve(st, bad2), InvalidArgument);
}

TEST_CASE("property: attenuation law of the single-photon depth") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double p1 = 0.01 + 0.9 * u(rng);
    const double p2 = std::pow(10.0, -7 + 5 * u(rng)) * (1 - p1);
    const double t = std::pow(10.0, -3 * u(rng));
    const double base = depth_db(sps_depth(sps(p1, p2)));
    const double att = depth_db(sps_depth(sps(p1 * t, p2 * t * t)));
    CHECK(att == doctest::Approx(base + 10 * std::log10(t)).epsilon(1e-10));
  }
}

TEST_CASE("property: attenuation law of the approximate pair depth") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double pe = std::pow(10.0, -9 + 6 * u(rng));
    const double ps = std::sqrt(pe) * (0.6 + 20 * u(rng));
    if (ps > 1.0) continue;
    const double t = std::pow(10.0, -2 * u(rng));
    CHECK(pair_depth_approx_db(ps * t * t, pe * t * t) ==
          doctest::Approx(pair_depth_approx_db(ps, pe) + 10 * std::log10(t)).epsilon(1e-10));
  }
}

TEST_CASE("property: exact depth never exceeds the approximate depth") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const double pe = std::pow(10.0, -10 + 8 * u(rng));
    const double ps = pair_threshold(pe) * (1.0 + 50 * u(rng)) + 1e-12;
    if (ps > 1.0) continue;
    auto r = pair_depth(pairs(ps, pe));
    CHECK(*r.t_coin_exact_db <= *r.t_coin_db + 1e-6);
    ++checked;
  }
  CHECK(checked > 1000);
}

TEST_CASE("property: exact and approximate depths agree at small pe") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double pe = std::pow(10.0, -12 + (std::log10(2e-6) + 12) * u(rng));
    const double ps = pair_threshold(pe) * (1.0 + 1e4 * u(rng) * u(rng));
    if (ps > 1.0) continue;
    auto r = pair_depth(pairs(ps, pe));
    worst = std::max(worst, *r.t_coin_db - *r.t_coin_exact_db);
  }
  CHECK(worst < 0.005);
}

TEST_CASE("property: threshold is increasing and dominated by its first term") {
  double prev = -1.0;
  for (int i = 0; i <= 400; ++i) {
    const double pe = i == 0 ? 0.0 : std::pow(10.0, -12 + 12.0 * i / 400);
    const double t = pair_threshold(pe);
    CHECK(t > prev);
    prev = t;
    if (pe > 0 && pe < 1e-4) CHECK(0.5 * std::sqrt(pe) >= 0.99 * t);
  }
}

TEST_CASE("property: significance scales as sqrt(N)") {
  const double ps = 5.74e-4, pe = 8.55e-7;
  auto at = [&](double n) {
    return pair_violation(pairs(ps, pe, std::sqrt(ps / n), std::sqrt(pe / n))).significance;
  };
  for (double n : {1e6, 1e7, 1e8})
    CHECK(at(n * 100) / at(n) == doctest::Approx(10.0).epsilon(1e-9));
}
