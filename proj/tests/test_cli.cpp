#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "qngc/cli.hpp"
#include "qngc/error.hpp"
#include "qngc/polarization.hpp"
#include "qngc/timetag.hpp"

using namespace qngc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qngc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("qngc_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const TempDir& tmp() {
  static TempDir d;
  return d;
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

const char* kQdConfig = R"([run]
seed = 5
pulses = 200000

[source]
type = qd
prep_probability = 0.85
eps_x = 0.002
eps_xx = 0.004

[chain]
efficiency = 0.2
dark_rate_hz = 100
jitter_ps = 20
implicit_sync = true

[analysis]
windows_ns = 0.2, 0.4, 0.8, 1.6
range_ns = 60
)";

std::string qd_config() {
  static const std::string path = [] {
    auto p = tmp() / "qd.ini";
    write_file(p, kQdConfig);
    return p;
  }();
  return path;
}

std::string qd_stream() {
  static const std::string path = [] {
    auto p = tmp() / "qd.qtt";
    auto r = run_cli({"simulate", "--config", qd_config(), "--out", p});
    REQUIRE(r.code == 0);
    return p;
  }();
  return path;
}

std::string tomography_csv(const DensityMatrix& rho, double total) {
  std::ostringstream s;
  s << "x,xx,count\n";
  for (const auto& rec : expected_tomography_counts(rho, total).records)
    s << polarization_label(rec.x) << ',' << polarization_label(rec.xx) << ',' << std::llround(rec.count) << '\n';
  return s.str();
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli({}).code == cli::exit_config);
  CHECK(run_cli({"frobnicate"}).code == cli::exit_config);
  CHECK(run_cli({"simulate"}).code == cli::exit_config);
  CHECK(run_cli({"analyze", "fold"}).code == cli::exit_config);
  CHECK(run_cli({"simulate", "--config", qd_config(), "--format", "hdf5", "--out", tmp() / "x"}).code ==
        cli::exit_config);
  auto help = run_cli({"--help"});
  CHECK(help.code == cli::exit_ok);
  CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("schema subcommand") {
  auto r = run_cli({"schema"});
  CHECK(r.code == 0);
  CHECK(r.out.find("source.prep_probability") != std::string::npos);
}

TEST_CASE("simulate prints the seed and is deterministic") {
  auto a = run_cli({"simulate", "--config", qd_config(), "--pulses", "50000", "--out", tmp() / "a.qtt"});
  REQUIRE(a.code == 0);
  CHECK(a.out.rfind("seed=5\n", 0) == 0);
  CHECK(a.out.find("pulses=50000") != std::string::npos);
  auto b = run_cli(
      {"simulate", "--config", qd_config(), "--pulses", "50000", "--threads", "1", "--out", tmp() / "b.qtt"});
  REQUIRE(b.code == 0);
  CHECK(slurp(tmp() / "a.qtt") == slurp(tmp() / "b.qtt"));
  auto c = run_cli({"simulate", "--config", qd_config(), "--pulses", "50000", "--seed", "6", "--out", tmp() / "c.qtt"});
  REQUIRE(c.code == 0);
  CHECK(c.out.rfind("seed=6\n", 0) == 0);
  CHECK(slurp(tmp() / "a.qtt") != slurp(tmp() / "c.qtt"));

  auto csv = run_cli(
      {"simulate", "--config", qd_config(), "--pulses", "1000", "--format", "csv", "--out", tmp() / "a.csv"});
  REQUIRE(csv.code == 0);
  CHECK(slurp(tmp() / "a.csv").rfind("channel,time_ps\n", 0) == 0);
}

TEST_CASE("simulate config errors") {
  write_file(tmp() / "bad.ini", "[source]\nprep = 0.5\n");
  auto r = run_cli({"simulate", "--config", tmp() / "bad.ini", "--out", tmp() / "x.qtt"});
  CHECK(r.code == cli::exit_config);
  CHECK(r.err.find("prep") != std::string::npos);
  CHECK(run_cli({"simulate", "--config", tmp() / "missing.ini", "--out", tmp() / "x.qtt"}).code == cli::exit_config);
  CHECK(run_cli({"simulate", "--config", qd_config()}).code == cli::exit_config);
}

TEST_CASE("analyze fold and sweep") {
  auto r = run_cli({"analyze", "fold", qd_stream(), "--window-ns", "1.0"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# n_pulses=200000", 0) == 0);
  std::getline(in, line);
  CHECK(line == "mask,x1,x2,xx1,xx2,pulses");
  std::uint64_t total = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    total += std::stoull(line.substr(line.rfind(',') + 1));
    ++rows;
  }
  CHECK(rows == 16);
  CHECK(total == 200000);

  auto s = run_cli({"analyze", "sweep", qd_stream(), "--config", qd_config(), "--out", tmp() / "sweep.csv"});
  REQUIRE(s.code == 0);
  auto text = slurp(tmp() / "sweep.csv");
  CHECK(text.rfind("window_ns,trials,r1a", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("analyze hbt, pairs, g2 and prep emit JSON") {
  auto h = run_cli({"analyze", "hbt", qd_stream(), "--herald", "xx", "--window-ns", "1.6"});
  REQUIRE(h.code == 0);
  auto hj = json::parse(h.out);
  CHECK(hj["kind"] == "photon_stats");
  CHECK(hj["heralded"] == true);
  CHECK(hj["p1"].get<double>() > 0.1);

  auto p = run_cli({"analyze", "pairs", qd_stream(), "--window-ns", "1.6", "--success", "any_cross"});
  REQUIRE(p.code == 0);
  auto pj = json::parse(p.out);
  CHECK(pj["success"] == "any_cross");
  CHECK(pj["ps"].get<double>() == doctest::Approx(0.85 * 0.2 * 0.2).epsilon(0.1));

  auto g = run_cli({"analyze", "g2", qd_stream(), "--arm", "x"});
  REQUIRE(g.code == 0);
  auto gj = json::parse(g.out);
  CHECK(gj["kind"] == "g2");
  CHECK(gj["value"].get<double>() < 0.05);

  auto pr = run_cli({"analyze", "prep", qd_stream()});
  REQUIRE(pr.code == 0);
  auto prj = json::parse(pr.out);
  const double v = prj["value"].get<double>(), sigma = prj["sigma"].get<double>();
  CHECK(std::abs(v - (0.85 + 0.002) / 1.002) < 4 * sigma);

  auto bad_role = run_cli({"analyze", "correlate", qd_stream(), "--a", "x3"});
  CHECK(bad_role.code == cli::exit_config);
}

TEST_CASE("corrupt and empty streams are data errors") {
  write_file(tmp() / "junk.qtt", "not a stream at all");
  auto r = run_cli({"analyze", "pairs", tmp() / "junk.qtt"});
  CHECK(r.code == cli::exit_data);
  CHECK(r.err.find("magic") != std::string::npos);

  auto h = StreamHeader::with_default_roles(80e6);
  h.implicit_sync = true;
  h.pulse_count = 100;
  write_stream(h, {}, tmp() / "empty.qtt");
  auto e = run_cli({"report", "--stream", tmp() / "empty.qtt", "--out-dir", tmp() / "empty_report"});
  CHECK(e.code == cli::exit_data);
  CHECK(e.err.find("no data") != std::string::npos);

  auto none = run_cli({"report", "--out-dir", tmp() / "none_report"});
  CHECK(none.code == cli::exit_data);
  CHECK(none.err.find("no data") != std::string::npos);
}

TEST_CASE("certify pairs from stats JSON") {
  write_file(tmp() / "pairs.json", R"({"ps": 5.74e-4, "pe": 8.55e-7, "window_ns": 0.16})");
  auto r = run_cli({"certify", "pairs", "--stats", tmp() / "pairs.json", "--json"});
  REQUIRE(r.code == cli::exit_ok);
  auto j = json::parse(r.out);
  CHECK(j["violated"] == true);
  CHECK(std::abs(j["rows"][0]["t_coin_db"].get<double>() - 0.94) < 0.01);
  CHECK(j["best_window_ns"].get<double>() == 0.16);

  auto table = run_cli({"certify", "pairs", "--stats", tmp() / "pairs.json", "--json-out", tmp() / "cert.json"});
  CHECK(table.code == 0);
  CHECK(table.out.find("* ") != std::string::npos);
  CHECK(json::parse(slurp(tmp() / "cert.json"))["mode"] == "pairs");

  write_file(tmp() / "weak.json", R"({"ps": 1e-4, "pe": 8.55e-7})");
  auto weak = run_cli({"certify", "pairs", "--stats", tmp() / "weak.json"});
  CHECK(weak.code == cli::exit_not_violated);
  CHECK(weak.out.find("not violated") != std::string::npos);

  write_file(tmp() / "broken.json", R"({"pe": 1e-6})");
  CHECK(run_cli({"certify", "pairs", "--stats", tmp() / "broken.json"}).code == cli::exit_data);
  CHECK(run_cli({"certify", "pairs"}).code == cli::exit_config);
}

TEST_CASE("certify sps from stats JSON and from a stream") {
  write_file(tmp() / "sps.json", R"({"p1": 0.5, "p2plus": 1e-4})");
  auto r = run_cli({"certify", "sps", "--stats", tmp() / "sps.json", "--json"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["rows"][0]["depth_db"].get<double>() == doctest::Approx(29.21).epsilon(1e-4));

  write_file(tmp() / "classical.json", R"({"p1": 0.01, "p2plus": 0.01})");
  CHECK(run_cli({"certify", "sps", "--stats", tmp() / "classical.json"}).code == cli::exit_not_violated);

  auto s = run_cli({"certify", "sps", qd_stream(), "--config", qd_config(), "--json"});
  REQUIRE((s.code == 0 || s.code == cli::exit_not_violated));
  auto j = json::parse(s.out);
  CHECK(j["rows"].size() == 4);
  CHECK(j["best_index"].get<int>() >= 0);

  auto pairs = run_cli({"certify", "pairs", qd_stream(), "--config", qd_config(), "--json"});
  REQUIRE(pairs.code == 0);
  auto pj = json::parse(pairs.out);
  double best_sig = -1;
  for (const auto& row : pj["rows"]) best_sig = std::max(best_sig, row["significance"].get<double>());
  CHECK(pj["rows"][pj["best_index"].get<int>()]["significance"].get<double>() == best_sig);
}

TEST_CASE("oracle grid") {
  auto r = run_cli({"oracle", "--mu", "0.01,0.1", "--modes", "1,1000000", "--eta", "0.1,0.5,1", "--dark", "0,1e-5"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("mu,modes,eta,dark_prob,ps,pe,threshold,margin\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1 + 2 * 2 * 3 * 2);
  CHECK(r.err.find("points=24") != std::string::npos);
  CHECK(run_cli({"oracle", "--modes", "0.5"}).code == cli::exit_config);
}

TEST_CASE("tomography and CHSH tables") {
  write_file(tmp() / "tomo.csv", tomography_csv(DensityMatrix::werner(0.9), 1e6));
  auto t = run_cli({"analyze", "tomography", tmp() / "tomo.csv", "--rho-out", tmp() / "rho"});
  REQUIRE(t.code == 0);
  auto tj = json::parse(t.out);
  CHECK(tj["fidelity"].get<double>() == doctest::Approx(0.925).epsilon(0.002));
  CHECK(slurp(tmp() / "rho_real.csv").rfind("row,HH,HV,VH,VV\n", 0) == 0);
  CHECK(fs::exists(tmp() / "rho_imag.csv"));

  std::ostringstream chsh;
  chsh << "setting,outcome,count\n";
  const auto settings = chsh_settings();
  const char* names[4] = {"00", "01", "10", "11"};
  const char* outcomes[4] = {"++", "+-", "-+", "--"};
  for (int i = 0; i < 4; ++i) {
    auto p = outcome_probabilities(DensityMatrix::pure(phi_plus()), settings[i]);
    for (int o = 0; o < 4; ++o) chsh << names[i] << ',' << outcomes[o] << ',' << std::llround(1e5 * p[o]) << '\n';
  }
  write_file(tmp() / "chsh.csv", chsh.str());
  auto c = run_cli({"analyze", "chsh", tmp() / "chsh.csv"});
  REQUIRE(c.code == 0);
  CHECK(std::abs(json::parse(c.out)["s_value"].get<double>()) == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-3));

  std::istringstream bad("setting,outcome,count\n22,++,5\n");
  CHECK_THROWS_AS(cli::read_chsh_csv(bad), DataError);
  std::istringstream dup("setting,outcome,count\n00,++,5\n00,++,5\n");
  CHECK_THROWS_AS(cli::read_chsh_csv(dup), DataError);
  std::istringstream tbad("x,xx,count\nH,Q,5\n");
  CHECK_THROWS_AS(cli::read_tomography_csv(tbad), DataError);
  std::istringstream tempty("x,xx,count\n");
  CHECK_THROWS_AS(cli::read_tomography_csv(tempty), DataError);
}

TEST_CASE("report bundles carry versioned headers") {
  write_file(tmp() / "pairs_stats.json", R"({"ps": 5.74e-4, "pe": 8.55e-7})");
  auto r = run_cli({"report", "--stream", qd_stream(), "--config", qd_config(), "--tomography", tmp() / "tomo.csv",
                    "--chsh", tmp() / "chsh.csv", "--out-dir", tmp() / "bundle"});
  REQUIRE(r.code == 0);
  for (const auto& schema : cli::bundle_schemas()) {
    const auto path = tmp() / ("bundle/" + schema.file);
    REQUIRE_MESSAGE(fs::exists(path), schema.file);
    const auto text = slurp(path);
    const auto header = cli::bundle_header(schema);
    CHECK(text.compare(0, header.size(), header) == 0);
    CHECK(text.size() > header.size());
  }
  CHECK(cli::bundle_header(cli::bundle_schemas()[0]) ==
        "# qngc-bundle v1 fig1b\npower_ratio,pulse_area_rad,prep_probability\n");
  auto manifest = json::parse(slurp(tmp() / "bundle/manifest.json"));
  CHECK(manifest["bundle_version"] == 1);
  CHECK(manifest["files"].size() == cli::bundle_schemas().size());

  auto only_stats = run_cli({"report", "--pair-stats", tmp() / "pairs_stats.json", "--out-dir", tmp() / "bundle2"});
  REQUIRE(only_stats.code == 0);
  auto traj = slurp(tmp() / "bundle2/fig3g_trajectory.csv");
  CHECK(traj.find("measured,1,") != std::string::npos);
  CHECK(traj.find("boundary,") != std::string::npos);
}

TEST_CASE("offset helpers") {
  CHECK(cli::ns_to_ps(0.16) == 160);
  CHECK_THROWS_AS(cli::ns_to_ps(-1.0), InvalidArgument);
  auto s = read_stream(qd_stream());
  auto given = cli::resolve_offsets(s, std::vector<double>{1, 2, 3, 4});
  CHECK(given == RoleOffsets{1, 2, 3, 4});
  CHECK_THROWS_AS(cli::resolve_offsets(s, std::vector<double>{1, 2}), InvalidArgument);
  auto autos = cli::resolve_offsets(s, std::nullopt);
  CHECK(autos[0] > autos[2]);
}
