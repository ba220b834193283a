#include "common.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "qngc/error.hpp"

namespace qngc::cli {

std::uint64_t ns_to_ps(double ns) {
  if (!(ns > 0.0) || !std::isfinite(ns)) throw InvalidArgument("time span must be positive");
  return static_cast<std::uint64_t>(std::llround(ns * 1000.0));
}

RoleOffsets resolve_offsets(const TimeTagStream& stream, const std::optional<std::vector<double>>& explicit_ps) {
  if (!explicit_ps) return auto_offsets(stream);
  if (explicit_ps->size() != 4) throw InvalidArgument("--offsets-ps needs four values (x1,x2,xx1,xx2)");
  RoleOffsets out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = std::llround((*explicit_ps)[i]);
  return out;
}

namespace detail {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::uint8_t require_channel(const StreamHeader& header, Role role) {
  auto ch = header.channel_of(role);
  if (!ch) throw DataError("stream has no channel for role " + std::string(role_name(role)));
  return *ch;
}

namespace {

std::uint64_t range_ps_for(double bin_ps, double range_ns) {
  const auto bin = static_cast<std::uint64_t>(std::llround(bin_ps));
  if (bin == 0) throw InvalidArgument("bin width must be at least 1 ps");
  const std::uint64_t range = ns_to_ps(range_ns);
  return (range + bin - 1) / bin * bin;
}

void add_into(CorrelationHistogram& acc, const CorrelationHistogram& h) {
  if (acc.counts.empty()) {
    acc = h;
    return;
  }
  for (std::size_t i = 0; i < acc.counts.size(); ++i) acc.counts[i] += h.counts[i];
}

}  // namespace

CorrelationHistogram arm_histogram(const TimeTagStream& stream, Arm arm, double bin_ps, double range_ns) {
  const Role a = arm == Arm::x ? Role::x1 : Role::xx1;
  const Role b = arm == Arm::x ? Role::x2 : Role::xx2;
  const auto bin = static_cast<std::uint64_t>(std::llround(bin_ps));
  return correlation_histogram(stream, require_channel(stream.header, a), require_channel(stream.header, b), bin,
                               range_ps_for(bin_ps, range_ns));
}

CorrelationHistogram cross_histogram(const TimeTagStream& stream, double bin_ps, double range_ns) {
  const auto bin = static_cast<std::uint64_t>(std::llround(bin_ps));
  const std::uint64_t range = range_ps_for(bin_ps, range_ns);
  CorrelationHistogram acc;
  for (Role xx : {Role::xx1, Role::xx2})
    for (Role x : {Role::x1, Role::x2})
      add_into(acc, correlation_histogram(stream, require_channel(stream.header, xx),
                                          require_channel(stream.header, x), bin, range));
  return acc;
}

int fitting_side_peaks(const CorrelationHistogram& hist, double period_ps, double window_ps, int wanted) {
  const double room = static_cast<double>(hist.range_ps) - window_ps / 2.0;
  int fit = static_cast<int>(std::floor(room / period_ps));
  return std::max(0, std::min(fit, wanted));
}

std::vector<WindowResult> sweep_windows(const TimeTagStream& stream, const std::vector<double>& windows_ns,
                                        const RoleOffsets& offsets) {
  std::vector<std::uint64_t> ps;
  for (double w : windows_ns) ps.push_back(ns_to_ps(w));
  auto rows = window_sweep(stream, ps, offsets);
  std::vector<WindowResult> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({windows_ns[i], rows[i].counts});
  return out;
}

json photon_stats_json(const ClickCounts& counts, const PhotonStatsEstimate& est) {
  const auto& s = est.stats;
  json j;
  j["kind"] = "photon_stats";
  j["heralded"] = s.heralded;
  j["counts"] = {{"r1a", counts.r1a}, {"r1b", counts.r1b}, {"r2", counts.r2}, {"n", counts.n}};
  j["p0"] = s.p0;
  j["p1"] = s.p1;
  j["p2plus"] = s.p2plus;
  j["sigma_p0"] = est.sigma_p0;
  j["sigma_p1"] = s.sigma_p1;
  j["sigma_p2plus"] = s.sigma_p2plus;
  j["unbalanced_splitter"] = est.unbalanced_splitter;
  j["third_order_warning"] = est.third_order_warning;
  j["sps_depth_db"] = nullptr;
  j["sps_depth_sigma_db"] = nullptr;
  j["sps_depth_unbounded"] = false;
  if (s.p1 > 0.0) {
    auto d = sps_depth(s);
    if (is_unbounded(d)) {
      j["sps_depth_unbounded"] = true;
    } else {
      j["sps_depth_db"] = std::get<DepthDb>(d).value_db;
      j["sps_depth_sigma_db"] = std::get<DepthDb>(d).sigma_db;
    }
  }
  return j;
}

json pair_stats_json(const PairClickStats& stats) {
  json j;
  j["kind"] = "pair_stats";
  j["n_pulses"] = stats.n_pulses;
  j["ps"] = stats.ps;
  j["pe"] = stats.pe;
  j["sigma_ps"] = stats.sigma_ps;
  j["sigma_pe"] = stats.sigma_pe;
  j["pe_x"] = stats.pe_x;
  j["pe_xx"] = stats.pe_xx;
  auto r = pair_violation(stats);
  j["threshold"] = r.threshold;
  j["difference"] = r.difference;
  j["significance"] = std::isfinite(r.significance) ? json(r.significance) : json(nullptr);
  j["certified"] = r.certified;
  return j;
}

namespace {

double field(const json& j, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key) || j[key].is_null()) {
    if (fallback) return *fallback;
    throw DataError(std::string("stats JSON lacks numeric field '") + key + "'");
  }
  if (!j[key].is_number()) throw DataError(std::string("stats JSON field '") + key + "' is not a number");
  return j[key].get<double>();
}

}  // namespace

PhotonNumberStats photon_stats_from_json(const json& j) {
  PhotonNumberStats s;
  s.p1 = field(j, "p1");
  s.p2plus = field(j, "p2plus");
  s.p0 = field(j, "p0", 1.0 - s.p1 - s.p2plus);
  s.sigma_p1 = field(j, "sigma_p1", 0.0);
  s.sigma_p2plus = field(j, "sigma_p2plus", 0.0);
  s.heralded = j.value("heralded", false);
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("photon stats: ") + e.what());
  }
  return s;
}

PairClickStats pair_stats_from_json(const json& j) {
  PairClickStats s;
  s.ps = field(j, "ps");
  s.pe = field(j, "pe");
  s.sigma_ps = field(j, "sigma_ps", 0.0);
  s.sigma_pe = field(j, "sigma_pe", 0.0);
  s.pe_x = field(j, "pe_x", s.pe);
  s.pe_xx = field(j, "pe_xx", s.pe);
  s.n_pulses = j.contains("n_pulses") && j["n_pulses"].is_number_unsigned() ? j["n_pulses"].get<std::uint64_t>() : 0;
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("pair stats: ") + e.what());
  }
  return s;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string arm_name(Arm arm) { return arm == Arm::x ? "x" : "xx"; }

Arm parse_arm(const std::string& name) {
  if (name == "x") return Arm::x;
  if (name == "xx") return Arm::xx;
  throw InvalidArgument("arm must be x or xx, got '" + name + "'");
}

std::optional<Arm> parse_herald(const std::string& name) {
  if (name.empty() || name == "none") return std::nullopt;
  return parse_arm(name);
}

SuccessConvention parse_success(const std::string& name) {
  if (name == "detector_pair") return SuccessConvention::detector_pair;
  if (name == "any_cross") return SuccessConvention::any_cross;
  throw InvalidArgument("success convention must be detector_pair or any_cross");
}

ErrorAggregation parse_error(const std::string& name) {
  if (name == "mean") return ErrorAggregation::mean;
  if (name == "sum") return ErrorAggregation::sum;
  if (name == "max") return ErrorAggregation::max;
  throw InvalidArgument("error aggregation must be mean, sum or max");
}

std::string success_name(SuccessConvention s) {
  return s == SuccessConvention::detector_pair ? "detector_pair" : "any_cross";
}

std::string error_name(ErrorAggregation e) {
  switch (e) {
    case ErrorAggregation::mean: return "mean";
    case ErrorAggregation::sum: return "sum";
    case ErrorAggregation::max: return "max";
  }
  return "mean";
}

}  // namespace detail
}  // namespace qngc::cli
