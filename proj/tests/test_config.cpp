#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <string>

#include "qngc/config.hpp"
#include "qngc/error.hpp"

using namespace qngc;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

std::string config_path(const std::string& name) { return std::string(QNGC_SOURCE_DIR) + "/configs/" + name; }

}  // namespace

TEST_CASE("empty document gives the defaults") {
  auto c = parse("");
  CHECK(c.is_qd());
  CHECK(c.seed == 1);
  CHECK(c.pulses == 10000);
  CHECK_FALSE(c.out);
  CHECK(c.rep_rate_hz() == doctest::Approx(75.84e6));
  CHECK(c.analysis.windows_ns.size() == 4);
  CHECK(c.analysis.success == SuccessConvention::detector_pair);
  CHECK(c.analysis.error == ErrorAggregation::mean);
  CHECK(std::get<QdSourceConfig>(c.source).preparation() == doctest::Approx(1.0));
}

TEST_CASE("run and qd source keys") {
  auto c = parse(R"(
[run]
seed = 99
pulses = 1e7
out = /tmp/x.qtt

[source]
type = qd
prep_probability = 0.847
tau_xx_ps = 100
tau_x_ps = 200
eps_x = 1e-4
blink_on_prob = 0.9
blink_switch_prob = 0.001
fss_ueV = 1.5
)");
  CHECK(c.seed == 99);
  CHECK(c.pulses == 10'000'000);
  CHECK(*c.out == "/tmp/x.qtt");
  const auto& q = std::get<QdSourceConfig>(c.source);
  CHECK(q.preparation() == doctest::Approx(0.847));
  CHECK(q.tau_xx_ps == 100);
  CHECK(q.tau_x_ps == 200);
  CHECK(q.eps_x == 1e-4);
  CHECK(q.eps_xx == 0.0);
  CHECK(q.blink_on_prob == 0.9);
  CHECK(q.fss_ueV == 1.5);
}

TEST_CASE("power ratio maps to a pulse area") {
  auto c = parse("[source]\npower_ratio = 0.25\nrabi_damping = 0\n");
  CHECK(std::get<QdSourceConfig>(c.source).pulse_area_rad == doctest::Approx(M_PI / 2));
  CHECK(std::get<QdSourceConfig>(c.source).preparation() == doctest::Approx(0.5));
  CHECK_THROWS_AS(parse("[source]\npower_ratio = 1\npulse_area_rad = 3\n"), ConfigError);
}

TEST_CASE("spdc source") {
  auto c = parse("[source]\ntype = spdc\nmu = 0.2\nmodes = 10\nlifetime_ps = 5\n");
  REQUIRE_FALSE(c.is_qd());
  const auto& s = std::get<SpdcSourceConfig>(c.source);
  CHECK(s.mu == 0.2);
  CHECK(s.modes == 10);
  CHECK(s.lifetime_ps == 5);
  CHECK_THROWS_AS(parse("[source]\ntype = spdc\neps_x = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[source]\ntype = qd\nmu = 0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[source]\ntype = spdc\nstate = werner\n"), ConfigError);
  CHECK_THROWS_AS(parse("[source]\ntype = laser\n"), ConfigError);
}

TEST_CASE("per-role keys override the blanket key in any order") {
  auto c = parse("[chain]\nefficiency_xx2 = 0.2\nefficiency = 0.5\ndark_rate_hz_x1 = 30\ndead_time_ps = 100\n");
  const auto& d = c.chain.detectors;
  CHECK(d[0].efficiency == 0.5);
  CHECK(d[1].efficiency == 0.5);
  CHECK(d[2].efficiency == 0.5);
  CHECK(d[3].efficiency == 0.2);
  CHECK(d[0].dark_rate_hz == 30);
  CHECK(d[1].dark_rate_hz == 0);
  for (const auto& det : d) CHECK(det.dead_time_ps == 100);
}

TEST_CASE("chain keys") {
  auto c = parse(R"(
[chain]
bs_ratio_x = 0.4
bs_ratio_xx = 0.6
analyzer_x = y
analyzer_xx = 0, -1, 1
channel_sync = 9
channel_x1 = 10
implicit_sync = yes
sync_divider = 8
t0_ps = 0
jitter_ps = 40
)");
  CHECK(c.chain.x_arm.bs_ratio == 0.4);
  CHECK(c.chain.xx_arm.bs_ratio == 0.6);
  REQUIRE(c.chain.x_arm.analyzer);
  CHECK(c.chain.x_arm.analyzer->direction()(1) == 1.0);
  REQUIRE(c.chain.xx_arm.analyzer);
  CHECK(c.chain.xx_arm.analyzer->direction()(2) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(c.chain.channel_ids[0] == 9);
  CHECK(c.chain.channel_ids[1] == 10);
  CHECK(c.chain.implicit_sync);
  CHECK(c.chain.sync_divider == 8);
  CHECK(c.chain.t0_ps == 0);
  CHECK(c.chain.detectors[2].jitter_sigma_ps == 40);

  CHECK_FALSE(parse("[chain]\nanalyzer_x = none\n").chain.x_arm.analyzer);
  CHECK_THROWS_AS(parse("[chain]\nanalyzer_x = w\n"), ConfigError);
  CHECK_THROWS_AS(parse("[chain]\nanalyzer_x = 0, 0, 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[chain]\nanalyzer_x = 1, 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[chain]\nchannel_x1 = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[chain]\nchannel_x1 = 300\n"), ConfigError);
  CHECK_THROWS_AS(parse("[chain]\nsync_divider = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[chain]\nefficiency = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[chain]\nimplicit_sync = maybe\n"), ConfigError);
}

TEST_CASE("polarization states") {
  auto get = [](const std::string& body) { return std::get<QdSourceConfig>(parse("[source]\n" + body).source).rho; };
  CHECK(get("state = phi_plus\n")(0, 3).real() == doctest::Approx(0.5));
  CHECK(get("state = hh\n")(0, 0).real() == doctest::Approx(1.0));
  CHECK(get("state = mixed\n")(1, 1).real() == doctest::Approx(0.25));
  auto w = get("state = werner\nstate_visibility = 0.6\n");
  CHECK(w(0, 3).real() == doctest::Approx(0.3));
  CHECK(w(1, 1).real() == doctest::Approx(0.1));
  auto ph = get("state = phi_plus\nstate_phase = 1.5707963267948966\n");
  CHECK(std::abs(ph(3, 0) - Complex(0.0, 0.5)) < 1e-12);
  auto custom = get(
      "state = custom\nstate_real = 0.5 0 0 0  0 0 0 0  0 0 0 0  0 0 0 0.5\n");
  CHECK(custom(3, 3).real() == doctest::Approx(0.5));
  CHECK_THROWS_AS(get("state = werner\n"), ConfigError);
  CHECK_THROWS_AS(get("state = custom\nstate_real = 1 0 0\n"), ConfigError);
  CHECK_THROWS_AS(get("state = custom\nstate_real = 1 0 0 0  0 0 0 0  0 0 0 0  0 0 0 1\n"), ConfigError);
  CHECK_THROWS_AS(get("state = ghz\n"), ConfigError);
}

TEST_CASE("analysis keys") {
  auto c = parse(R"(
[analysis]
windows_ns = 0.1, 0.2 0.4
bin_ps = 8
range_ns = 50
side_peaks = 3
peak_window_ns = 2
success = any_cross
error = max
bs_ratio = 0.45
)");
  CHECK(c.analysis.windows_ns == std::vector<double>{0.1, 0.2, 0.4});
  CHECK(c.analysis.bin_ps == 8);
  CHECK(c.analysis.range_ns == 50);
  CHECK(c.analysis.side_peaks == 3);
  CHECK(c.analysis.peak_window_ns == 2);
  CHECK(c.analysis.success == SuccessConvention::any_cross);
  CHECK(c.analysis.error == ErrorAggregation::max);
  CHECK(*c.analysis.bs_ratio == 0.45);

  CHECK_THROWS_AS(parse("[analysis]\nwindows_ns = 0.4, 0.2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[analysis]\nwindows_ns = 0, 0.2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[analysis]\nwindows_ns =\n"), ConfigError);
  CHECK_THROWS_AS(parse("[analysis]\nsuccess = both\n"), ConfigError);
  CHECK_THROWS_AS(parse("[analysis]\nerror = median\n"), ConfigError);
  CHECK_THROWS_AS(parse("[analysis]\nbs_ratio = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[analysis]\nbin_ps = 0\n"), ConfigError);
}

TEST_CASE("malformed documents are rejected") {
  CHECK_THROWS_AS(parse("[runs]\nseed = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nsead = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nseed = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nseed = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\npulses = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\npulses = lots\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse("[run\nseed = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed = 1\n"), ConfigError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.ini"), ConfigError);
}

TEST_CASE("number lists") {
  CHECK(parse_number_list("1, 2,3  4") == std::vector<double>{1, 2, 3, 4});
  CHECK(parse_number_list("").empty());
  CHECK_THROWS_AS(parse_number_list("1, x"), ConfigError);
}

TEST_CASE("schema lists every section") {
  const auto s = run_config_schema();
  for (const char* key : {"run.seed", "source.type", "source.eps_xx", "chain.efficiency_xx2", "chain.analyzer_x",
                          "analysis.windows_ns", "analysis.success"})
    CHECK(s.find(key) != std::string::npos);
}

TEST_CASE("shipped configs load") {
  auto qd = load_run_config(config_path("qd_cascade.ini"));
  CHECK(qd.is_qd());
  CHECK(qd.pulses == 10'000'000);
  CHECK(std::get<QdSourceConfig>(qd.source).preparation() == doctest::Approx(0.847));
  auto pol = load_run_config(config_path("qd_polarization.ini"));
  CHECK(pol.chain.xx_arm.analyzer);
  auto sp = load_run_config(config_path("spdc_thermal.ini"));
  CHECK_FALSE(sp.is_qd());
  CHECK(sp.chain.detectors[3].efficiency == 0.25);
  CHECK(sp.chain.detectors[0].efficiency == 0.3);
}
