#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/algorithm/string.hpp>

#include "common.hpp"
#include "qngc/cascade_simulator.hpp"
#include "qngc/error.hpp"

namespace qngc::cli {

using detail::json;
using detail::num;

const std::vector<BundleSchema>& bundle_schemas() {
  static const std::vector<BundleSchema> s{
      {"fig1b_rabi.csv", "fig1b", {"power_ratio", "pulse_area_rad", "prep_probability"}},
      {"fig1c_density.csv", "fig1c", {"row", "col", "real", "imag"}},
      {"fig1d_chsh.csv", "fig1d", {"quantity", "value", "sigma"}},
      {"fig2b_unheralded_clicks.csv", "fig2b", {"window_ns", "n", "r1a", "r1b", "singles", "r2"}},
      {"fig2c_unheralded_stats.csv", "fig2c",
       {"window_ns", "p0", "p1", "p2plus", "sigma_p1", "sigma_p2plus", "depth_db", "depth_sigma_db"}},
      {"fig2e_heralded_clicks.csv", "fig2e", {"window_ns", "n", "r1a", "r1b", "singles", "r2"}},
      {"fig2f_heralded_stats.csv", "fig2f",
       {"window_ns", "p0", "p1", "p2plus", "sigma_p1", "sigma_p2plus", "depth_db", "depth_sigma_db"}},
      {"fig3b_cross_correlation.csv", "fig3b", {"delay_ps", "counts"}},
      {"fig3b_cross_peaks.csv", "fig3b", {"peak_index", "counts"}},
      {"fig3c_autocorrelation_x.csv", "fig3c", {"delay_ps", "counts"}},
      {"fig3d_autocorrelation_xx.csv", "fig3d", {"delay_ps", "counts"}},
      {"fig3cd_ratios.csv", "fig3cd", {"quantity", "value", "sigma", "upper_bound"}},
      {"fig3e_pair_probabilities.csv", "fig3e",
       {"window_ns", "ps", "sigma_ps", "pe", "sigma_pe", "pe_x", "pe_xx"}},
      {"fig3f_violation.csv", "fig3f",
       {"window_ns", "threshold", "difference", "significance", "t_coin_db", "t_coin_exact_db"}},
      {"fig3g_trajectory.csv", "fig3g", {"kind", "transmissivity", "pe", "ps", "critical"}},
  };
  return s;
}

std::string bundle_header(const BundleSchema& schema) {
  return "# qngc-bundle v" + std::to_string(kBundleVersion) + " " + schema.figure + "\n" +
         boost::join(schema.columns, ",") + "\n";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  boost::split(cells, line, boost::is_any_of(","));
  for (auto& c : cells) boost::trim(c);
  return cells;
}

// Reads a CSV with a header row; returns rows keyed by column name.
std::vector<std::map<std::string, std::string>> read_table(std::istream& in,
                                                           const std::vector<std::string>& required) {
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    boost::trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (header.empty()) {
      header = cells;
      for (const auto& r : required)
        if (std::find(header.begin(), header.end(), r) == header.end())
          throw DataError("CSV lacks column '" + r + "'");
      continue;
    }
    if (cells.size() != header.size())
      throw DataError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " cells");
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw DataError("no data: CSV is empty");
  return rows;
}

double cell_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v) || v < 0.0)
    throw DataError(what + ": expected a non-negative number, got '" + text + "'");
  return v;
}

PolarizationState cell_polarization(const std::string& text) {
  if (text.size() != 1) throw DataError("polarization label must be one of H, V, D, R, got '" + text + "'");
  try {
    return parse_polarization(static_cast<char>(std::toupper(static_cast<unsigned char>(text[0]))));
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
}

class BundleWriter {
 public:
  explicit BundleWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::ostream& open(const std::string& file) {
    const auto& all = bundle_schemas();
    auto it = std::find_if(all.begin(), all.end(), [&](const BundleSchema& s) { return s.file == file; });
    if (it == all.end()) throw std::logic_error("unregistered bundle " + file);
    out_.close();
    auto path = dir_ / file;
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError("cannot write " + path.string());
    out_ << bundle_header(*it);
    written_.push_back(path);
    return out_;
  }

  void close() { out_.close(); }
  const std::vector<std::filesystem::path>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  std::ofstream out_;
  std::vector<std::filesystem::path> written_;
};

void write_histogram(std::ostream& out, const CorrelationHistogram& h) {
  for (std::size_t i = 0; i < h.counts.size(); ++i) out << num(h.bin_center(i)) << ',' << h.counts[i] << '\n';
}

void write_ratio(std::ostream& out, const std::string& name, const RatioEstimate& r) {
  out << name << ',' << num(r.value) << ',' << num(r.sigma) << ',' << (r.upper_bound ? num(*r.upper_bound) : "")
      << '\n';
}

void write_click_rows(std::ostream& out, const std::vector<detail::WindowResult>& rows, std::optional<Arm> herald,
                      std::ostream& stats_out, double bs_ratio) {
  for (const auto& row : rows) {
    ClickCounts c;
    try {
      c = hbt_counts(row.counts, Arm::x, herald);
    } catch (const DataError&) {
      continue;  // no heralds in this window
    }
    out << num(row.window_ns) << ',' << c.n << ',' << c.r1a << ',' << c.r1b << ',' << (c.r1a + c.r1b) << ','
        << c.r2 << '\n';
    auto est = photon_stats(c, bs_ratio);
    const auto& s = est.stats;
    std::string depth, sigma;
    if (s.p1 > 0.0) {
      auto d = sps_depth(s);
      if (is_unbounded(d)) {
        depth = "inf";
      } else {
        depth = num(std::get<DepthDb>(d).value_db);
        sigma = num(std::get<DepthDb>(d).sigma_db);
      }
    }
    stats_out << num(row.window_ns) << ',' << num(s.p0) << ',' << num(s.p1) << ',' << num(s.p2plus) << ','
              << num(s.sigma_p1) << ',' << num(s.sigma_p2plus) << ',' << depth << ',' << sigma << '\n';
  }
}

void write_trajectory(std::ostream& out, const PairClickStats& stats) {
  for (int i = 0; i <= 80; ++i) {
    double pe = std::pow(10.0, -10.0 + 0.1 * i);
    out << "boundary,," << num(pe) << ',' << num(pair_threshold(pe)) << ",0\n";
  }
  out << "measured,1," << num(stats.pe) << ',' << num(stats.ps) << ",0\n";
  std::vector<double> grid;
  for (int i = 0; i <= 60; ++i) grid.push_back(std::pow(10.0, -0.05 * i));
  for (const auto& p : depth_curve(stats, grid))
    out << "trajectory," << num(p.transmissivity) << ',' << num(p.pe) << ',' << num(p.ps) << ','
        << (p.critical ? 1 : 0) << '\n';
}

}  // namespace

TomographyCounts read_tomography_csv(std::istream& in) {
  auto rows = read_table(in, {"x", "xx", "count"});
  TomographyCounts out;
  for (const auto& r : rows) {
    TomographyRecord rec;
    rec.x = cell_polarization(r.at("x"));
    rec.xx = cell_polarization(r.at("xx"));
    rec.count = cell_number(r.at("count"), "count");
    if (auto w = r.find("weight"); w != r.end()) rec.weight = cell_number(w->second, "weight");
    out.records.push_back(rec);
  }
  if (out.records.empty()) throw DataError("no data: tomography table has no rows");
  return out;
}

std::array<OutcomeCounts, 4> read_chsh_csv(std::istream& in) {
  auto rows = read_table(in, {"setting", "outcome", "count"});
  static const std::map<std::string, int> settings{{"00", 0}, {"01", 1}, {"10", 2}, {"11", 3}};
  static const std::map<std::string, int> outcomes{{"++", 0}, {"+-", 1}, {"-+", 2}, {"--", 3}};
  std::array<OutcomeCounts, 4> out{};
  std::array<std::array<bool, 4>, 4> seen{};
  for (const auto& r : rows) {
    auto s = settings.find(r.at("setting"));
    auto o = outcomes.find(r.at("outcome"));
    if (s == settings.end()) throw DataError("CHSH setting must be 00, 01, 10 or 11, got '" + r.at("setting") + "'");
    if (o == outcomes.end()) throw DataError("CHSH outcome must be ++, +-, -+ or --, got '" + r.at("outcome") + "'");
    if (seen[s->second][o->second]) throw DataError("duplicate CHSH row " + r.at("setting") + " " + r.at("outcome"));
    seen[s->second][o->second] = true;
    double c = cell_number(r.at("count"), "count");
    if (c != std::floor(c)) throw DataError("CHSH counts must be integers");
    out[s->second][o->second] = static_cast<std::uint64_t>(c);
  }
  if (rows.empty()) throw DataError("no data: CHSH table has no rows");
  return out;
}

std::vector<std::filesystem::path> write_report(const ReportInputs& in, const std::filesystem::path& out_dir) {
  if (!in.stream && !in.tomography && !in.chsh && !in.pair_stats)
    throw DataError("no data: give at least one of --stream, --tomography, --chsh, --pair-stats");

  std::optional<TimeTagStream> stream;
  if (in.stream) {
    stream = read_stream(*in.stream);
    bool photons = std::any_of(stream->tags.begin(), stream->tags.end(), [&](const TimeTag& t) {
      auto r = stream->header.role_of(t.channel);
      return r && *r != Role::sync;
    });
    if (stream->n_pulses() == 0 || !photons) throw DataError("no data: stream " + in.stream->string() + " is empty");
  }
  std::optional<TomographyCounts> tomo;
  if (in.tomography) {
    std::ifstream f(*in.tomography);
    if (!f) throw DataError("cannot open " + in.tomography->string());
    tomo = read_tomography_csv(f);
  }
  std::optional<std::array<OutcomeCounts, 4>> chsh;
  if (in.chsh) {
    std::ifstream f(*in.chsh);
    if (!f) throw DataError("cannot open " + in.chsh->string());
    chsh = read_chsh_csv(f);
  }

  std::filesystem::create_directories(out_dir);
  BundleWriter w(out_dir);
  json summary;
  summary["bundle_version"] = kBundleVersion;

  auto& rabi = w.open("fig1b_rabi.csv");
  for (int i = 0; i <= 100; ++i) {
    double ratio = 0.1 * i;
    double area = pulse_area_from_power(ratio);
    rabi << num(ratio) << ',' << num(area) << ',' << num(rabi_preparation_probability(area, in.rabi_damping)) << '\n';
  }

  if (tomo) {
    auto res = tomography_reconstruct(*tomo);
    auto& out = w.open("fig1c_density.csv");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        out << r << ',' << c << ',' << num(res.rho(r, c).real()) << ',' << num(res.rho(r, c).imag()) << '\n';
    summary["fidelity"] = fidelity(res.rho, phi_plus());
    summary["fidelity_phase_optimized"] = fidelity_phase_optimized(res.rho);
  }

  if (chsh) {
    auto res = chsh_from_counts(*chsh);
    auto& out = w.open("fig1d_chsh.csv");
    const char* names[4] = {"E00", "E01", "E10", "E11"};
    for (int i = 0; i < 4; ++i)
      out << names[i] << ',' << num(res.correlators[i].value) << ',' << num(res.correlators[i].sigma) << '\n';
    out << "S," << num(res.s_value) << ',' << num(res.sigma_s) << '\n';
    summary["chsh_s"] = res.s_value;
    summary["chsh_sigma"] = res.sigma_s;
  }

  std::optional<PairClickStats> best;
  if (stream) {
    const auto& a = in.analysis;
    const double bs = a.bs_ratio.value_or(0.5);
    const auto offsets = resolve_offsets(*stream, std::nullopt);
    const auto rows = detail::sweep_windows(*stream, a.windows_ns, offsets);

    {
      std::ostringstream clicks, stats;
      write_click_rows(clicks, rows, std::nullopt, stats, bs);
      w.open("fig2b_unheralded_clicks.csv") << clicks.str();
      w.open("fig2c_unheralded_stats.csv") << stats.str();
    }
    {
      std::ostringstream clicks, stats;
      write_click_rows(clicks, rows, Arm::xx, stats, bs);
      w.open("fig2e_heralded_clicks.csv") << clicks.str();
      w.open("fig2f_heralded_stats.csv") << stats.str();
    }

    const double period = stream->header.period_ps();
    const double peak_w = a.peak_window_ns * 1000.0;
    auto cross = detail::cross_histogram(*stream, a.bin_ps, a.range_ns);
    write_histogram(w.open("fig3b_cross_correlation.csv"), cross);
    auto x_hist = detail::arm_histogram(*stream, Arm::x, a.bin_ps, a.range_ns);
    write_histogram(w.open("fig3c_autocorrelation_x.csv"), x_hist);
    auto xx_hist = detail::arm_histogram(*stream, Arm::xx, a.bin_ps, a.range_ns);
    write_histogram(w.open("fig3d_autocorrelation_xx.csv"), xx_hist);

    auto& ratios = w.open("fig3cd_ratios.csv");
    int n_side = detail::fitting_side_peaks(cross, period, peak_w, a.side_peaks);
    auto cross_peaks = integrate_peaks(cross, period, peak_w, n_side);
    for (const auto& [name, hist] : {std::pair{"g2_x", &x_hist}, std::pair{"g2_xx", &xx_hist}}) {
      try {
        auto peaks = integrate_peaks(*hist, period, peak_w, detail::fitting_side_peaks(*hist, period, peak_w, a.side_peaks));
        write_ratio(ratios, name, g2_from_peaks(peaks));
      } catch (const DataError&) {
      }
    }
    try {
      write_ratio(ratios, "prep_efficiency", prep_efficiency(cross_peaks, 1, std::max(1, n_side)));
    } catch (const DataError&) {
    }
    w.close();
    auto& peaks_out = w.open("fig3b_cross_peaks.csv");
    peaks_out << "0," << cross_peaks.zero_peak_counts << '\n';
    for (const auto& p : cross_peaks.side_peaks) peaks_out << p.index << ',' << p.counts << '\n';

    std::ostringstream probs, viol;
    double best_sig = -INFINITY;
    for (const auto& row : rows) {
      auto st = pair_click_stats(row.counts, a.success, a.error);
      probs << num(row.window_ns) << ',' << num(st.ps) << ',' << num(st.sigma_ps) << ',' << num(st.pe) << ','
            << num(st.sigma_pe) << ',' << num(st.pe_x) << ',' << num(st.pe_xx) << '\n';
      auto r = pair_violation(st);
      std::string approx, exact;
      if (r.certified) {
        auto full = pair_depth(st);
        approx = full.t_coin_db ? num(*full.t_coin_db) : "";
        exact = full.t_coin_exact_db ? num(*full.t_coin_exact_db) : "";
      }
      viol << num(row.window_ns) << ',' << num(r.threshold) << ',' << num(r.difference) << ','
           << num(r.significance) << ',' << approx << ',' << exact << '\n';
      if (r.significance > best_sig || !best) {
        best_sig = r.significance;
        best = st;
      }
    }
    w.open("fig3e_pair_probabilities.csv") << probs.str();
    w.open("fig3f_violation.csv") << viol.str();
  }
  if (in.pair_stats) best = detail::pair_stats_from_json(detail::read_json_file(*in.pair_stats));
  if (best) {
    write_trajectory(w.open("fig3g_trajectory.csv"), *best);
    summary["pair_stats"] = detail::pair_stats_json(*best);
  }
  w.close();

  json manifest = summary;
  manifest["files"] = json::array();
  for (const auto& p : w.written()) {
    const auto name = p.filename().string();
    const auto& all = bundle_schemas();
    auto it = std::find_if(all.begin(), all.end(), [&](const BundleSchema& s) { return s.file == name; });
    manifest["files"].push_back({{"file", name}, {"figure", it->figure}, {"columns", it->columns}});
  }
  auto manifest_path = out_dir / "manifest.json";
  std::ofstream mf(manifest_path);
  mf << manifest.dump(2) << '\n';
  auto written = w.written();
  written.push_back(manifest_path);
  return written;
}

}  // namespace qngc::cli
