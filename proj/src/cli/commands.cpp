#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "common.hpp"
#include "qngc/cascade_simulator.hpp"
#include "qngc/error.hpp"
#include "qngc/photon_number_models.hpp"

namespace qngc::cli {

namespace {

using detail::json;
using detail::num;

// Writes to --out when given, to the console otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw DataError("cannot write " + path);
      out_ = file_.get();
    }
  }
  std::ostream& operator*() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
};

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i)
    v.push_back(n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1)));
  return v;
}

struct StreamArgs {
  std::string stream;
  std::string config;
  std::vector<double> offsets_ps;
  std::string out;

  void add_to(CLI::App* cmd, bool stream_required = true) {
    auto* opt = cmd->add_option("stream", stream, "time-tag stream (QTT1 binary)");
    if (stream_required) opt->required();
    cmd->add_option("--config", config, "run config supplying [analysis] defaults");
    cmd->add_option("--offsets-ps", offsets_ps, "arrival offsets x1 x2 xx1 xx2 (default: histogram mode)")
        ->expected(4)
        ->delimiter(',');
    cmd->add_option("--out", out, "output file (default: standard output)");
  }

  AnalysisConfig analysis() const {
    return config.empty() ? AnalysisConfig{} : load_run_config(config).analysis;
  }

  std::optional<std::vector<double>> offsets() const {
    if (offsets_ps.empty()) return std::nullopt;
    return offsets_ps;
  }
};

std::string offsets_text(const RoleOffsets& o) {
  return std::to_string(o[0]) + "," + std::to_string(o[1]) + "," + std::to_string(o[2]) + "," + std::to_string(o[3]);
}

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return num(v);
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

// Prints the per-window table; `best` marks one row.
void print_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, std::optional<std::size_t> best) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells, const std::string& mark) {
    out << mark;
    for (std::size_t c = 0; c < cells.size(); ++c) out << std::setw(static_cast<int>(width[c]) + 2) << cells[c];
    out << '\n';
  };
  line(header, "  ");
  for (std::size_t i = 0; i < rows.size(); ++i) line(rows[i], best && *best == i ? "* " : "  ");
}

json depth_json(const QngPairReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"t_coin_db", opt(r.t_coin_db)},
          {"t_coin_exact_db", opt(r.t_coin_exact_db)},
          {"t_coin_sigma_db", opt(r.t_coin_sigma_db)},
          {"critical_transmissivity", opt(r.critical_transmissivity)}};
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> pulses;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 0;
  std::string format = "qtt";
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  RunConfig cfg = load_run_config(a.config);
  if (a.pulses) cfg.pulses = *a.pulses;
  if (a.seed) cfg.seed = *a.seed;
  std::string path = !a.out.empty() ? a.out : cfg.out.value_or("");
  if (path.empty()) throw ConfigError("no output path: pass --out or set [run] out");
  if (cfg.pulses == 0) throw ConfigError("--pulses must be >= 1");

  out << "seed=" << cfg.seed << '\n';
  SimulationOptions opts;
  opts.threads = a.threads;
  TimeTagStream stream =
      cfg.is_qd() ? simulate_qd(std::get<QdSourceConfig>(cfg.source), cfg.chain, cfg.pulses, cfg.seed, opts)
                  : simulate_spdc(std::get<SpdcSourceConfig>(cfg.source), cfg.chain, cfg.pulses, cfg.seed, opts);
  if (a.format == "csv") {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    write_stream_csv(stream, f);
  } else {
    write_stream(stream.header, stream.tags, path);
  }
  out << "pulses=" << cfg.pulses << " tags=" << stream.tags.size() << " out=" << path << '\n';
  return exit_ok;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
  StreamArgs io;
  std::optional<double> window_ns;
  std::vector<double> windows_ns;
  std::optional<double> bin_ps;
  std::optional<double> range_ns;
  std::optional<double> peak_window_ns;
  std::optional<int> side_peaks;
  std::string herald = "none";
  std::string arm = "x";
  std::string role_a = "x1";
  std::string role_b = "x2";
  std::optional<double> bs_ratio;
  bool exclusive = false;
  std::string success;
  std::string error;
  int min_peak = 1;
  int max_peak = 5;
  std::string rho_out;
};

struct Prepared {
  AnalysisConfig analysis;
  TimeTagStream stream;
  RoleOffsets offsets{};
};

Prepared prepare(const AnalyzeArgs& a) {
  Prepared p;
  p.analysis = a.io.analysis();
  auto& an = p.analysis;
  if (a.bin_ps) an.bin_ps = *a.bin_ps;
  if (a.range_ns) an.range_ns = *a.range_ns;
  if (a.peak_window_ns) an.peak_window_ns = *a.peak_window_ns;
  if (a.side_peaks) an.side_peaks = *a.side_peaks;
  if (a.bs_ratio) an.bs_ratio = *a.bs_ratio;
  if (!a.success.empty()) an.success = detail::parse_success(a.success);
  if (!a.error.empty()) an.error = detail::parse_error(a.error);
  if (!a.windows_ns.empty()) an.windows_ns = a.windows_ns;
  p.stream = read_stream(a.io.stream);
  p.offsets = resolve_offsets(p.stream, a.io.offsets());
  return p;
}

double single_window(const AnalyzeArgs& a, const AnalysisConfig& an) {
  if (a.window_ns) return *a.window_ns;
  return an.windows_ns.size() > 1 ? an.windows_ns[1] : an.windows_ns.front();
}

int cmd_fold(const AnalyzeArgs& a, std::ostream& console) {
  auto p = prepare(a);
  const double w = single_window(a, p.analysis);
  auto table = fold_pulses(p.stream, ns_to_ps(w), p.offsets);
  auto counts = table.pattern_counts();
  Sink sink(a.io.out, console);
  auto& out = *sink;
  out << "# n_pulses=" << counts.n_pulses << " window_ns=" << num(w) << " offsets_ps=" << offsets_text(p.offsets)
      << '\n';
  out << "mask,x1,x2,xx1,xx2,pulses\n";
  for (unsigned m = 0; m < 16; ++m)
    out << m << ',' << (m & 1) << ',' << ((m >> 1) & 1) << ',' << ((m >> 2) & 1) << ',' << ((m >> 3) & 1) << ','
        << counts.patterns[m] << '\n';
  return exit_ok;
}

int cmd_correlate(const AnalyzeArgs& a, std::ostream& console) {
  auto p = prepare(a);
  const auto ca = detail::require_channel(p.stream.header, parse_role(a.role_a));
  const auto cb = detail::require_channel(p.stream.header, parse_role(a.role_b));
  const auto bin = static_cast<std::uint64_t>(std::llround(p.analysis.bin_ps));
  if (bin == 0) throw InvalidArgument("--bin-ps must be >= 1");
  std::uint64_t range = ns_to_ps(p.analysis.range_ns);
  range = (range + bin - 1) / bin * bin;
  auto h = correlation_histogram(p.stream, ca, cb, bin, range);
  Sink sink(a.io.out, console);
  auto& out = *sink;
  out << "delay_ps,counts\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) out << num(h.bin_center(i)) << ',' << h.counts[i] << '\n';
  return exit_ok;
}

int cmd_sweep(const AnalyzeArgs& a, std::ostream& console) {
  auto p = prepare(a);
  const Arm arm = detail::parse_arm(a.arm);
  const auto herald = detail::parse_herald(a.herald);
  const double bs = p.analysis.bs_ratio.value_or(0.5);
  auto rows = detail::sweep_windows(p.stream, p.analysis.windows_ns, p.offsets);
  Sink sink(a.io.out, console);
  auto& out = *sink;
  out << "window_ns,trials,r1a,r1b,r2,singles_rate,doubles_rate,p1,p2plus,sigma_p1,sigma_p2plus,"
         "ps,sigma_ps,pe,sigma_pe,pe_x,pe_xx\n";
  for (const auto& row : rows) {
    out << num(row.window_ns) << ',';
    try {
      auto c = hbt_counts(row.counts, arm, herald);
      const double n = static_cast<double>(c.n);
      auto est = photon_stats(c, bs, a.exclusive ? SinglesMode::exclusive : SinglesMode::inclusive);
      out << c.n << ',' << c.r1a << ',' << c.r1b << ',' << c.r2 << ',' << num((c.r1a + c.r1b) / n) << ','
          << num(c.r2 / n) << ',' << num(est.stats.p1) << ',' << num(est.stats.p2plus) << ','
          << num(est.stats.sigma_p1) << ',' << num(est.stats.sigma_p2plus) << ',';
    } catch (const DataError&) {
      out << "0,0,0,0,,,,,,,";
    }
    auto st = pair_click_stats(row.counts, p.analysis.success, p.analysis.error);
    out << num(st.ps) << ',' << num(st.sigma_ps) << ',' << num(st.pe) << ',' << num(st.sigma_pe) << ','
        << num(st.pe_x) << ',' << num(st.pe_xx) << '\n';
  }
  return exit_ok;
}

int cmd_hbt(const AnalyzeArgs& a, std::ostream& console) {
  auto p = prepare(a);
  const double w = single_window(a, p.analysis);
  const Arm arm = detail::parse_arm(a.arm);
  const auto herald = detail::parse_herald(a.herald);
  const double bs = p.analysis.bs_ratio.value_or(0.5);
  auto counts = fold_pulses(p.stream, ns_to_ps(w), p.offsets).pattern_counts();
  auto c = hbt_counts(counts, arm, herald);
  auto est = photon_stats(c, bs, a.exclusive ? SinglesMode::exclusive : SinglesMode::inclusive);
  json j = detail::photon_stats_json(c, est);
  j["arm"] = detail::arm_name(arm);
  j["herald"] = herald ? json(detail::arm_name(*herald)) : json(nullptr);
  j["window_ns"] = w;
  j["bs_ratio"] = bs;
  j["offsets_ps"] = p.offsets;
  Sink sink(a.io.out, console);
  *sink << j.dump(2) << '\n';
  return exit_ok;
}

json pairs_json(const PatternCounts& counts, const AnalysisConfig& an, double window_ns) {
  auto st = pair_click_stats(counts, an.success, an.error);
  json j = detail::pair_stats_json(st);
  j["window_ns"] = window_ns;
  j["success"] = detail::success_name(an.success);
  j["error"] = detail::error_name(an.error);
  return j;
}

int cmd_pairs(const AnalyzeArgs& a, std::ostream& console) {
  auto p = prepare(a);
  const double w = single_window(a, p.analysis);
  auto counts = fold_pulses(p.stream, ns_to_ps(w), p.offsets).pattern_counts();
  json j = pairs_json(counts, p.analysis, w);
  j["offsets_ps"] = p.offsets;
  Sink sink(a.io.out, console);
  *sink << j.dump(2) << '\n';
  return exit_ok;
}

json ratio_json(const RatioEstimate& r) {
  return {{"value", r.value},
          {"sigma", r.sigma},
          {"upper_bound", r.upper_bound ? json(*r.upper_bound) : json(nullptr)}};
}

json peaks_json(const PeakAreas& p) {
  json side = json::array();
  for (const auto& s : p.side_peaks) side.push_back({{"index", s.index}, {"counts", s.counts}});
  return {{"zero_peak_counts", p.zero_peak_counts}, {"side_peaks", side}, {"window_ps", p.window_ps}};
}

int cmd_g2(const AnalyzeArgs& a, std::ostream& console) {
  auto p = prepare(a);
  const Arm arm = detail::parse_arm(a.arm);
  const auto& an = p.analysis;
  const double period = p.stream.header.period_ps();
  const double w = an.peak_window_ns * 1000.0;
  auto h = detail::arm_histogram(p.stream, arm, an.bin_ps, an.range_ns);
  auto peaks = integrate_peaks(h, period, w, detail::fitting_side_peaks(h, period, w, an.side_peaks));
  json j = ratio_json(g2_from_peaks(peaks));
  j["kind"] = "g2";
  j["arm"] = detail::arm_name(arm);
  j["peaks"] = peaks_json(peaks);
  Sink sink(a.io.out, console);
  *sink << j.dump(2) << '\n';
  return exit_ok;
}

int cmd_prep(const AnalyzeArgs& a, std::ostream& console) {
  auto p = prepare(a);
  const auto& an = p.analysis;
  if (a.min_peak < 1 || a.max_peak < a.min_peak) throw InvalidArgument("need 1 <= --min-peak <= --max-peak");
  const double period = p.stream.header.period_ps();
  const double w = an.peak_window_ns * 1000.0;
  constexpr int kFarMin = 20, kFarMax = 40;
  const int reach = std::max(a.max_peak, kFarMax);
  const double range_ns = std::max(an.range_ns, (reach * period + w) / 1000.0 + 1.0);
  auto h = detail::cross_histogram(p.stream, an.bin_ps, range_ns);
  auto peaks = integrate_peaks(h, period, w, reach);
  auto near = prep_efficiency(peaks, a.min_peak, a.max_peak);
  json j = ratio_json(near);
  j["kind"] = "prep_efficiency";
  j["peak_range"] = {a.min_peak, a.max_peak};
  try {
    auto far = prep_efficiency(peaks, kFarMin, kFarMax);
    j["far_peaks"] = ratio_json(far);
    j["near_over_far"] = near.value / far.value;
  } catch (const DataError&) {
    j["far_peaks"] = nullptr;
    j["near_over_far"] = nullptr;
  }
  j["zero_peak_counts"] = peaks.zero_peak_counts;
  Sink sink(a.io.out, console);
  *sink << j.dump(2) << '\n';
  return exit_ok;
}

void write_matrix_csv(const std::string& path, const Matrix4c& m, bool imag) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path);
  f << "row,HH,HV,VH,VV\n";
  const char* labels[4] = {"HH", "HV", "VH", "VV"};
  for (int r = 0; r < 4; ++r) {
    f << labels[r];
    for (int c = 0; c < 4; ++c) f << ',' << num(imag ? m(r, c).imag() : m(r, c).real());
    f << '\n';
  }
}

int cmd_tomography(const AnalyzeArgs& a, std::ostream& console) {
  std::ifstream in(a.io.stream);
  if (!in) throw DataError("cannot open " + a.io.stream);
  auto counts = read_tomography_csv(in);
  auto res = tomography_reconstruct(counts);
  json j;
  j["kind"] = "tomography";
  j["fidelity"] = fidelity(res.rho, phi_plus());
  j["fidelity_phase_optimized"] = fidelity_phase_optimized(res.rho);
  j["log_likelihood"] = res.log_likelihood;
  j["log_likelihood_projected"] = res.log_likelihood_projected;
  j["iterations"] = res.iterations;
  json re = json::array(), im = json::array();
  for (int r = 0; r < 4; ++r) {
    json rr = json::array(), ii = json::array();
    for (int c = 0; c < 4; ++c) {
      rr.push_back(res.rho(r, c).real());
      ii.push_back(res.rho(r, c).imag());
    }
    re.push_back(rr);
    im.push_back(ii);
  }
  j["rho_real"] = re;
  j["rho_imag"] = im;
  j["chsh_of_reconstruction"] = chsh_expectation(res.rho).s_value;
  if (!a.rho_out.empty()) {
    write_matrix_csv(a.rho_out + "_real.csv", res.rho.matrix(), false);
    write_matrix_csv(a.rho_out + "_imag.csv", res.rho.matrix(), true);
  }
  Sink sink(a.io.out, console);
  *sink << j.dump(2) << '\n';
  return exit_ok;
}

int cmd_chsh(const AnalyzeArgs& a, std::ostream& console) {
  std::ifstream in(a.io.stream);
  if (!in) throw DataError("cannot open " + a.io.stream);
  auto res = chsh_from_counts(read_chsh_csv(in));
  json j;
  j["kind"] = "chsh";
  j["s_value"] = res.s_value;
  j["sigma_s"] = res.sigma_s;
  const char* names[4] = {"E00", "E01", "E10", "E11"};
  for (int i = 0; i < 4; ++i) j["correlators"][names[i]] = {{"value", res.correlators[i].value}, {"sigma", res.correlators[i].sigma}};
  Sink sink(a.io.out, console);
  *sink << j.dump(2) << '\n';
  return exit_ok;
}

// ---- certify ----------------------------------------------------------------

struct CertifyArgs {
  AnalyzeArgs analyze;
  std::string stats;
  bool json_output = false;
  std::string json_out;
};

int cmd_certify_sps(const CertifyArgs& c, std::ostream& console) {
  struct Row {
    std::optional<double> window_ns;
    PhotonNumberStats stats;
    SpsDepth depth;
  };
  std::vector<Row> rows;
  auto depth_of = [](const PhotonNumberStats& s) {
    if (!(s.p1 > 0.0)) throw DataError("P1 = 0: no single-photon signal");
    return sps_depth(s);
  };
  if (!c.stats.empty()) {
    auto j = detail::read_json_file(c.stats);
    auto s = detail::photon_stats_from_json(j);
    std::optional<double> w;
    if (j.contains("window_ns") && j["window_ns"].is_number()) w = j["window_ns"].get<double>();
    rows.push_back({w, s, depth_of(s)});
  } else {
    if (c.analyze.io.stream.empty()) throw InvalidArgument("give a stream or --stats");
    auto p = prepare(c.analyze);
    const Arm arm = detail::parse_arm(c.analyze.arm);
    const auto herald = detail::parse_herald(c.analyze.herald);
    const double bs = p.analysis.bs_ratio.value_or(0.5);
    for (const auto& r : detail::sweep_windows(p.stream, p.analysis.windows_ns, p.offsets)) {
      auto counts = hbt_counts(r.counts, arm, herald);
      auto est = photon_stats(counts, bs, c.analyze.exclusive ? SinglesMode::exclusive : SinglesMode::inclusive);
      rows.push_back({r.window_ns, est.stats, depth_of(est.stats)});
    }
  }
  if (rows.empty()) throw DataError("no data");

  auto score = [](const SpsDepth& d) {
    return is_unbounded(d) ? INFINITY : std::get<DepthDb>(d).value_db;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (score(rows[i].depth) > score(rows[best].depth)) best = i;
  const bool violated = score(rows[best].depth) > 0.0;

  json j;
  j["mode"] = "sps";
  j["rows"] = json::array();
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) {
    json row = {{"window_ns", r.window_ns ? json(*r.window_ns) : json(nullptr)},
                {"p0", r.stats.p0},
                {"p1", r.stats.p1},
                {"p2plus", r.stats.p2plus},
                {"sigma_p1", r.stats.sigma_p1},
                {"sigma_p2plus", r.stats.sigma_p2plus},
                {"unbounded", is_unbounded(r.depth)}};
    std::string depth = "unbounded", sigma = "";
    if (!is_unbounded(r.depth)) {
      const auto& d = std::get<DepthDb>(r.depth);
      row["depth_db"] = d.value_db;
      row["depth_sigma_db"] = d.sigma_db;
      depth = fixed(d.value_db, 5);
      sigma = fixed(d.sigma_db, 3);
    } else {
      row["depth_db"] = nullptr;
      row["depth_sigma_db"] = nullptr;
    }
    j["rows"].push_back(row);
    table.push_back({r.window_ns ? fixed(*r.window_ns, 4) : "-", fixed(r.stats.p1, 6), fixed(r.stats.p2plus, 6),
                     depth, sigma});
  }
  j["best_index"] = best;
  j["best_window_ns"] = j["rows"][best]["window_ns"];
  j["violated"] = violated;

  if (!c.json_out.empty()) {
    std::ofstream f(c.json_out);
    if (!f) throw DataError("cannot write " + c.json_out);
    f << j.dump(2) << '\n';
  }
  if (c.json_output) {
    console << j.dump(2) << '\n';
  } else {
    print_table(console, {"window_ns", "p1", "p2plus", "depth_db", "sigma_db"}, table, best);
    console << "best window: " << (rows[best].window_ns ? fixed(*rows[best].window_ns, 4) + " ns" : "-") << '\n';
    if (!violated) console << "criterion not violated\n";
  }
  return violated ? exit_ok : exit_not_violated;
}

int cmd_certify_pairs(const CertifyArgs& c, std::ostream& console) {
  struct Row {
    std::optional<double> window_ns;
    PairClickStats stats;
    QngPairReport report;
  };
  std::vector<Row> rows;
  auto report_of = [](const PairClickStats& s) {
    auto r = pair_violation(s);
    return r.certified ? pair_depth(s) : r;
  };
  if (!c.stats.empty()) {
    auto j = detail::read_json_file(c.stats);
    auto s = detail::pair_stats_from_json(j);
    std::optional<double> w;
    if (j.contains("window_ns") && j["window_ns"].is_number()) w = j["window_ns"].get<double>();
    rows.push_back({w, s, report_of(s)});
  } else {
    if (c.analyze.io.stream.empty()) throw InvalidArgument("give a stream or --stats");
    auto p = prepare(c.analyze);
    for (const auto& r : detail::sweep_windows(p.stream, p.analysis.windows_ns, p.offsets)) {
      auto s = pair_click_stats(r.counts, p.analysis.success, p.analysis.error);
      rows.push_back({r.window_ns, s, report_of(s)});
    }
  }
  if (rows.empty()) throw DataError("no data");

  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].report.significance > rows[best].report.significance) best = i;
  const bool violated = std::any_of(rows.begin(), rows.end(), [](const Row& r) { return r.report.certified; });

  json j;
  j["mode"] = "pairs";
  j["rows"] = json::array();
  std::vector<std::vector<std::string>> table;
  for (const auto& r : rows) {
    const auto& rep = r.report;
    json row = detail::pair_stats_json(r.stats);
    row.erase("kind");
    row["window_ns"] = r.window_ns ? json(*r.window_ns) : json(nullptr);
    row["one_sided"] = rep.one_sided;
    row.update(depth_json(rep));
    j["rows"].push_back(row);
    table.push_back({r.window_ns ? fixed(*r.window_ns, 4) : "-", fixed(r.stats.ps, 6), fixed(r.stats.pe, 6),
                     fixed(rep.threshold, 6), fixed(rep.difference, 6), fixed(rep.significance, 5),
                     rep.t_coin_db ? fixed(*rep.t_coin_db, 5) : "-",
                     rep.t_coin_exact_db ? fixed(*rep.t_coin_exact_db, 5) : "-",
                     rep.t_coin_sigma_db ? fixed(*rep.t_coin_sigma_db, 3) : "-"});
  }
  j["best_index"] = best;
  j["best_window_ns"] = j["rows"][best]["window_ns"];
  j["violated"] = violated;

  if (!c.json_out.empty()) {
    std::ofstream f(c.json_out);
    if (!f) throw DataError("cannot write " + c.json_out);
    f << j.dump(2) << '\n';
  }
  if (c.json_output) {
    console << j.dump(2) << '\n';
  } else {
    print_table(console,
                {"window_ns", "ps", "pe", "threshold", "difference", "significance", "t_coin_db", "t_exact_db",
                 "sigma_db"},
                table, best);
    console << "best window: " << (rows[best].window_ns ? fixed(*rows[best].window_ns, 4) + " ns" : "-") << '\n';
    if (!violated) console << "criterion not violated\n";
  }
  return violated ? exit_ok : exit_not_violated;
}

// ---- oracle -----------------------------------------------------------------

struct OracleArgs {
  std::vector<double> mu;
  std::vector<double> modes;
  std::vector<double> eta;
  std::vector<double> dark;
  double bs_ratio = 0.5;
  std::string success = "detector_pair";
  std::string error = "mean";
  std::string out;
};

int cmd_oracle(const OracleArgs& a, std::ostream& console, std::ostream& err) {
  auto mus = a.mu.empty() ? logspace(1e-3, 2.0, 12) : a.mu;
  auto modes = a.modes.empty() ? std::vector<double>{1, 2, 10, 1e6} : a.modes;
  auto etas = a.eta.empty() ? logspace(0.01, 1.0, 12) : a.eta;
  auto darks = a.dark.empty() ? std::vector<double>{0.0, 1e-6, 1e-4} : a.dark;
  const auto success = detail::parse_success(a.success);
  const auto error = detail::parse_error(a.error);
  Sink sink(a.out, console);
  auto& out = *sink;
  out << "mu,modes,eta,dark_prob,ps,pe,threshold,margin\n";
  std::size_t violations = 0, points = 0;
  for (double k : modes) {
    if (!(k >= 1) || k != std::floor(k)) throw InvalidArgument("--modes must be positive integers");
    for (double mu : mus) {
      const auto K = static_cast<std::uint64_t>(k);
      auto dist = multimode_distribution(mu, K, required_n_max(mu, K));
      for (double eta : etas)
        for (double dark : darks) {
          DetectionChainParams chain{eta, eta, a.bs_ratio, a.bs_ratio, dark};
          auto st = detected_pair_click_probs(dist, chain, success, error);
          const double thr = pair_threshold(st.pe);
          const double margin = thr - st.ps;
          ++points;
          if (margin < -1e-12) ++violations;
          out << num(mu) << ',' << K << ',' << num(eta) << ',' << num(dark) << ',' << num(st.ps) << ','
              << num(st.pe) << ',' << num(thr) << ',' << num(margin) << '\n';
        }
    }
  }
  err << "points=" << points << " violations=" << violations << '\n';
  return exit_ok;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::string stream, tomography, chsh, pair_stats, config, out_dir;
};

int cmd_report(const ReportArgs& a, std::ostream& console) {
  ReportInputs in;
  if (!a.stream.empty()) in.stream = a.stream;
  if (!a.tomography.empty()) in.tomography = a.tomography;
  if (!a.chsh.empty()) in.chsh = a.chsh;
  if (!a.pair_stats.empty()) in.pair_stats = a.pair_stats;
  if (!a.config.empty()) {
    auto cfg = load_run_config(a.config);
    in.analysis = cfg.analysis;
    if (cfg.is_qd()) in.rabi_damping = std::get<QdSourceConfig>(cfg.source).rabi_damping;
  }
  for (const auto& p : write_report(in, a.out_dir)) console << p.string() << '\n';
  return exit_ok;
}

void add_window_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--window-ns", a.window_ns, "coincidence window (default: second configured window)");
}

void add_sweep_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--windows-ns", a.windows_ns, "ascending coincidence windows")->delimiter(',');
}

void add_hbt_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--arm", a.arm, "measured arm: x or xx");
  cmd->add_option("--herald", a.herald, "herald arm: none, x or xx");
  cmd->add_option("--bs-ratio", a.bs_ratio, "splitter transmission toward detector 1");
  cmd->add_flag("--exclusive", a.exclusive, "exclusive singles (subtract doubles)");
}

void add_pair_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--success", a.success, "detector_pair or any_cross");
  cmd->add_option("--error", a.error, "mean, sum or max");
}

void add_peak_options(CLI::App* cmd, AnalyzeArgs& a) {
  cmd->add_option("--bin-ps", a.bin_ps, "histogram bin width");
  cmd->add_option("--range-ns", a.range_ns, "histogram half range");
  cmd->add_option("--peak-window-ns", a.peak_window_ns, "integration window per peak");
  cmd->add_option("--side-peaks", a.side_peaks, "side peaks per side");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulate, analyze and certify pulsed photon-pair sources"};
  app.name("qngc");
  app.require_subcommand(1);
  std::function<int()> action;

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "simulate a source into a time-tag stream");
  simulate->add_option("--config", sim.config, "run config")->required();
  simulate->add_option("--pulses", sim.pulses, "override [run] pulses");
  simulate->add_option("--seed", sim.seed, "override [run] seed");
  simulate->add_option("--out", sim.out, "output stream path");
  simulate->add_option("--threads", sim.threads, "worker threads (default: QNGC_THREADS or all cores)");
  simulate->add_option("--format", sim.format, "qtt or csv")->check(CLI::IsMember({"qtt", "csv"}));
  simulate->callback([&] { action = [&] { return cmd_simulate(sim, out); }; });

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "analyze a stream or count table");
  analyze->require_subcommand(1);
  auto add_analysis = [&](const char* name, const char* help, int (*fn)(const AnalyzeArgs&, std::ostream&)) {
    auto* cmd = analyze->add_subcommand(name, help);
    an.io.add_to(cmd);
    cmd->callback([&, fn] { action = [&, fn] { return fn(an, out); }; });
    return cmd;
  };
  auto* fold = add_analysis("fold", "click-pattern counts of the folded stream", cmd_fold);
  add_window_options(fold, an);
  auto* correlate = add_analysis("correlate", "correlation histogram between two roles", cmd_correlate);
  correlate->add_option("--a", an.role_a, "start role");
  correlate->add_option("--b", an.role_b, "stop role");
  add_peak_options(correlate, an);
  auto* sweep = add_analysis("sweep", "click rates and probabilities per coincidence window", cmd_sweep);
  add_sweep_options(sweep, an);
  add_hbt_options(sweep, an);
  add_pair_options(sweep, an);
  auto* hbt = add_analysis("hbt", "photon-number statistics of one arm", cmd_hbt);
  add_window_options(hbt, an);
  add_hbt_options(hbt, an);
  auto* pairs = add_analysis("pairs", "success and error probabilities", cmd_pairs);
  add_window_options(pairs, an);
  add_pair_options(pairs, an);
  auto* g2 = add_analysis("g2", "zero over side peak ratio of one arm", cmd_g2);
  g2->add_option("--arm", an.arm, "x or xx");
  add_peak_options(g2, an);
  auto* prep = add_analysis("prep", "preparation efficiency from the cross-correlation", cmd_prep);
  add_peak_options(prep, an);
  prep->add_option("--min-peak", an.min_peak, "smallest side-peak index");
  prep->add_option("--max-peak", an.max_peak, "largest side-peak index");
  auto* tomo = add_analysis("tomography", "density matrix from a tomography count CSV", cmd_tomography);
  tomo->add_option("--rho-out", an.rho_out, "prefix for <prefix>_real.csv and <prefix>_imag.csv");
  add_analysis("chsh", "CHSH S from a count CSV", cmd_chsh);

  CertifyArgs cert;
  auto* certify = app.add_subcommand("certify", "per-window certification report");
  certify->require_subcommand(1);
  auto add_certify = [&](const char* name, const char* help, int (*fn)(const CertifyArgs&, std::ostream&)) {
    auto* cmd = certify->add_subcommand(name, help);
    cert.analyze.io.add_to(cmd, false);
    cmd->add_option("--stats", cert.stats, "stats JSON from analyze instead of a stream");
    cmd->add_flag("--json", cert.json_output, "print JSON instead of the table");
    cmd->add_option("--json-out", cert.json_out, "also write the JSON report here");
    add_sweep_options(cmd, cert.analyze);
    cmd->callback([&, fn] { action = [&, fn] { return fn(cert, out); }; });
    return cmd;
  };
  auto* sps = add_certify("sps", "single-photon depth", cmd_certify_sps);
  add_hbt_options(sps, cert.analyze);
  auto* pc = add_certify("pairs", "coincidence criterion and depth", cmd_certify_pairs);
  add_pair_options(pc, cert.analyze);

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle", "exact Gaussian-source grid against the threshold");
  oracle->add_option("--mu", orc.mu, "mean pairs per pulse")->delimiter(',');
  oracle->add_option("--modes", orc.modes, "mode counts")->delimiter(',');
  oracle->add_option("--eta", orc.eta, "per-arm efficiencies")->delimiter(',');
  oracle->add_option("--dark", orc.dark, "dark-click probabilities per window")->delimiter(',');
  oracle->add_option("--bs-ratio", orc.bs_ratio, "splitter ratio of both arms");
  oracle->add_option("--success", orc.success, "detector_pair or any_cross");
  oracle->add_option("--error", orc.error, "mean, sum or max");
  oracle->add_option("--out", orc.out, "output CSV (default: standard output)");
  oracle->callback([&] { action = [&] { return cmd_oracle(orc, out, err); }; });

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "figure data bundles");
  report->add_option("--stream", rep.stream, "time-tag stream");
  report->add_option("--tomography", rep.tomography, "tomography count CSV");
  report->add_option("--chsh", rep.chsh, "CHSH count CSV");
  report->add_option("--pair-stats", rep.pair_stats, "pair stats JSON");
  report->add_option("--config", rep.config, "run config for analysis settings");
  report->add_option("--out-dir", rep.out_dir, "bundle directory")->required();
  report->callback([&] { action = [&] { return cmd_report(rep, out); }; });

  auto* schema = app.add_subcommand("schema", "list every config key");
  schema->callback([&] {
    action = [&] {
      out << run_config_schema();
      return int(exit_ok);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    return action ? action() : exit_config;
  } catch (const CriterionNotViolated& e) {
    err << "criterion not violated: " << e.what() << '\n';
    return exit_not_violated;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return exit_config;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_failure;
  }
}

}  // namespace qngc::cli
