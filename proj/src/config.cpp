#include "qngc/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qngc/error.hpp"

namespace qngc {

namespace {

namespace pt = boost::property_tree;

std::string where(const std::string& section, const std::string& key) {
  return "[" + section + "] " + key;
}

double to_double(const std::string& section, const std::string& key, const std::string& text) {
  std::string t = boost::trim_copy(text);
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(where(section, key) + ": expected a number, got '" + text + "'");
  return v;
}

std::uint64_t to_uint(const std::string& section, const std::string& key, const std::string& text) {
  std::string t = boost::trim_copy(text);
  // Accept 1e8 style for pulse counts as long as the value is integral.
  double v = to_double(section, key, t);
  if (v < 0 || v != std::floor(v) || v > 1.8e19)
    throw ConfigError(where(section, key) + ": expected a non-negative integer, got '" + text + "'");
  if (t.find_first_of(".eE") == std::string::npos) {
    errno = 0;
    char* end = nullptr;
    unsigned long long u = std::strtoull(t.c_str(), &end, 10);
    if (errno == ERANGE || end != t.c_str() + t.size())
      throw ConfigError(where(section, key) + ": integer out of range");
    return u;
  }
  return static_cast<std::uint64_t>(v);
}

bool to_bool(const std::string& section, const std::string& key, const std::string& text) {
  std::string t = boost::to_lower_copy(boost::trim_copy(text));
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(where(section, key) + ": expected true or false, got '" + text + "'");
}

std::uint8_t to_channel(const std::string& section, const std::string& key, const std::string& text) {
  std::uint64_t v = to_uint(section, key, text);
  if (v > 255) throw ConfigError(where(section, key) + ": channel id must be 0..255");
  return static_cast<std::uint8_t>(v);
}

std::optional<BlochAxis> to_axis(const std::string& section, const std::string& key, const std::string& text) {
  std::string t = boost::to_lower_copy(boost::trim_copy(text));
  if (t == "none" || t.empty()) return std::nullopt;
  if (t == "x") return BlochAxis::sigma_x();
  if (t == "y") return BlochAxis::sigma_y();
  if (t == "z") return BlochAxis::sigma_z();
  std::vector<double> v;
  try {
    v = parse_number_list(t);
  } catch (const ConfigError&) {
    throw ConfigError(where(section, key) + ": expected none, x, y, z or three numbers");
  }
  if (v.size() != 3) throw ConfigError(where(section, key) + ": expected three numbers");
  const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(norm > 0)) throw ConfigError(where(section, key) + ": axis must be non-zero");
  try {
    return BlochAxis(v[0] / norm, v[1] / norm, v[2] / norm);
  } catch (const InvalidArgument& e) {
    throw ConfigError(where(section, key) + ": " + e.what());
  }
}

// Settings that combine several keys are collected first and resolved after
// the whole document has been read.
struct Pending {
  std::string source_type = "qd";
  std::map<std::string, std::string> source;
  std::string state = "phi_plus";
  std::optional<double> state_visibility;
  double state_phase = 0.0;
  std::vector<double> state_real;
  std::vector<double> state_imag;
};

struct KeySpec {
  std::string type;
  std::string meaning;
  std::function<void(RunConfig&, Pending&, const std::string&)> apply;
};

using SectionTable = std::map<std::string, KeySpec>;

constexpr std::array<const char*, 4> kRoleSuffix{"x1", "x2", "xx1", "xx2"};

std::map<std::string, SectionTable> build_schema() {
  std::map<std::string, SectionTable> s;

  auto& run = s["run"];
  run["seed"] = {"uint", "top-level seed for every random stream",
                 [](RunConfig& c, Pending&, const std::string& v) { c.seed = to_uint("run", "seed", v); }};
  run["pulses"] = {"uint", "number of laser pulses to simulate",
                   [](RunConfig& c, Pending&, const std::string& v) { c.pulses = to_uint("run", "pulses", v); }};
  run["out"] = {"path", "output stream file",
                [](RunConfig& c, Pending&, const std::string& v) { c.out = boost::trim_copy(v); }};

  // Source keys are validated against the type once it is known.
  auto& src = s["source"];
  auto keep = [](const char* key) {
    return [key](RunConfig&, Pending& p, const std::string& v) { p.source[key] = v; };
  };
  src["type"] = {"qd|spdc", "source model",
                 [](RunConfig&, Pending& p, const std::string& v) {
                   p.source_type = boost::to_lower_copy(boost::trim_copy(v));
                   if (p.source_type != "qd" && p.source_type != "spdc")
                     throw ConfigError("[source] type: expected qd or spdc, got '" + v + "'");
                 }};
  src["rep_rate_hz"] = {"float", "laser repetition rate (qd, spdc)", keep("rep_rate_hz")};
  src["pulse_area_rad"] = {"float", "excitation pulse area (qd)", keep("pulse_area_rad")};
  src["power_ratio"] = {"float", "excitation power over pi-pulse power, sets the area (qd)", keep("power_ratio")};
  src["rabi_damping"] = {"float", "Rabi damping per radian (qd)", keep("rabi_damping")};
  src["prep_probability"] = {"float", "preparation probability, overrides the Rabi model (qd)",
                             keep("prep_probability")};
  src["tau_xx_ps"] = {"float", "biexciton lifetime (qd)", keep("tau_xx_ps")};
  src["tau_x_ps"] = {"float", "exciton lifetime (qd)", keep("tau_x_ps")};
  src["blink_on_prob"] = {"float", "stationary on fraction of the emitter (qd)", keep("blink_on_prob")};
  src["blink_switch_prob"] = {"float", "per-pulse telegraph switching probability (qd)", keep("blink_switch_prob")};
  src["fss_ueV"] = {"float", "fine-structure splitting in micro-eV (qd)", keep("fss_ueV")};
  src["eps_x"] = {"float", "extra uncorrelated X-arm photon probability per pulse (qd)", keep("eps_x")};
  src["eps_xx"] = {"float", "extra uncorrelated XX-arm photon probability per pulse (qd)", keep("eps_xx")};
  src["mu"] = {"float", "mean pairs per pulse (spdc)", keep("mu")};
  src["modes"] = {"uint", "number of independent pair modes (spdc)", keep("modes")};
  src["lifetime_ps"] = {"float", "emission-time spread of a pair (spdc)", keep("lifetime_ps")};
  src["state"] = {"phi_plus|werner|hh|mixed|custom", "polarization state of the pair (qd)",
                  [](RunConfig&, Pending& p, const std::string& v) {
                    p.state = boost::to_lower_copy(boost::trim_copy(v));
                  }};
  src["state_visibility"] = {"float", "Werner weight p of the Bell state (state = werner)",
                             [](RunConfig&, Pending& p, const std::string& v) {
                               p.state_visibility = to_double("source", "state_visibility", v);
                             }};
  src["state_phase"] = {"float", "phase of the |VV> amplitude (phi_plus, werner)",
                        [](RunConfig&, Pending& p, const std::string& v) {
                          p.state_phase = to_double("source", "state_phase", v);
                        }};
  src["state_real"] = {"16 floats", "row-major real part of rho (state = custom)",
                       [](RunConfig&, Pending& p, const std::string& v) { p.state_real = parse_number_list(v); }};
  src["state_imag"] = {"16 floats", "row-major imaginary part of rho (state = custom)",
                       [](RunConfig&, Pending& p, const std::string& v) { p.state_imag = parse_number_list(v); }};

  auto& chain = s["chain"];
  auto per_detector = [&chain](const std::string& base, const std::string& type, const std::string& meaning,
                               std::function<void(DetectorConfig&, const std::string&, const std::string&)> set) {
    chain[base] = {type, meaning + " (all detectors)",
                   [set, base](RunConfig& c, Pending&, const std::string& v) {
                     for (auto& d : c.chain.detectors) set(d, base, v);
                   }};
    for (std::size_t i = 0; i < 4; ++i) {
      std::string key = base + "_" + kRoleSuffix[i];
      chain[key] = {type, meaning + " (" + kRoleSuffix[i] + " only)",
                    [set, key, i](RunConfig& c, Pending&, const std::string& v) {
                      set(c.chain.detectors[i], key, v);
                    }};
    }
  };
  per_detector("efficiency", "float", "detection efficiency",
               [](DetectorConfig& d, const std::string& k, const std::string& v) {
                 d.efficiency = to_double("chain", k, v);
               });
  per_detector("dark_rate_hz", "float", "dark count rate",
               [](DetectorConfig& d, const std::string& k, const std::string& v) {
                 d.dark_rate_hz = to_double("chain", k, v);
               });
  per_detector("jitter_ps", "float", "Gaussian timing jitter sigma",
               [](DetectorConfig& d, const std::string& k, const std::string& v) {
                 d.jitter_sigma_ps = to_double("chain", k, v);
               });
  per_detector("dead_time_ps", "uint", "dead time",
               [](DetectorConfig& d, const std::string& k, const std::string& v) {
                 d.dead_time_ps = to_uint("chain", k, v);
               });
  chain["bs_ratio_x"] = {"float", "X-arm splitter transmission toward x1",
                         [](RunConfig& c, Pending&, const std::string& v) {
                           c.chain.x_arm.bs_ratio = to_double("chain", "bs_ratio_x", v);
                         }};
  chain["bs_ratio_xx"] = {"float", "XX-arm splitter transmission toward xx1",
                          [](RunConfig& c, Pending&, const std::string& v) {
                            c.chain.xx_arm.bs_ratio = to_double("chain", "bs_ratio_xx", v);
                          }};
  chain["analyzer_x"] = {"none|x|y|z|3 floats", "polarization analyzer of the X arm (normalized), x1 records +1",
                         [](RunConfig& c, Pending&, const std::string& v) {
                           c.chain.x_arm.analyzer = to_axis("chain", "analyzer_x", v);
                         }};
  chain["analyzer_xx"] = {"none|x|y|z|3 floats", "polarization analyzer of the XX arm (normalized), xx1 records +1",
                          [](RunConfig& c, Pending&, const std::string& v) {
                            c.chain.xx_arm.analyzer = to_axis("chain", "analyzer_xx", v);
                          }};
  const std::array<const char*, 5> channel_keys{"channel_sync", "channel_x1", "channel_x2", "channel_xx1",
                                                "channel_xx2"};
  for (std::size_t i = 0; i < channel_keys.size(); ++i) {
    std::string key = channel_keys[i];
    chain[key] = {"uint8", "channel id of the " + key.substr(8) + " role",
                  [key, i](RunConfig& c, Pending&, const std::string& v) {
                    c.chain.channel_ids[i] = to_channel("chain", key, v);
                  }};
  }
  chain["implicit_sync"] = {"bool", "derive pulse times from the header instead of sync tags",
                            [](RunConfig& c, Pending&, const std::string& v) {
                              c.chain.implicit_sync = to_bool("chain", "implicit_sync", v);
                            }};
  chain["sync_divider"] = {"uint", "pulses per sync tag",
                           [](RunConfig& c, Pending&, const std::string& v) {
                             std::uint64_t d = to_uint("chain", "sync_divider", v);
                             if (d == 0 || d > 0xffffffffULL)
                               throw ConfigError("[chain] sync_divider: must be 1..2^32-1");
                             c.chain.sync_divider = static_cast<std::uint32_t>(d);
                           }};
  chain["t0_ps"] = {"uint", "time of pulse 0",
                    [](RunConfig& c, Pending&, const std::string& v) { c.chain.t0_ps = to_uint("chain", "t0_ps", v); }};

  auto& an = s["analysis"];
  an["windows_ns"] = {"float list", "coincidence windows for sweeps and certification",
                      [](RunConfig& c, Pending&, const std::string& v) {
                        c.analysis.windows_ns = parse_number_list(v);
                        if (c.analysis.windows_ns.empty()) throw ConfigError("[analysis] windows_ns: empty list");
                      }};
  an["bin_ps"] = {"float", "correlation histogram bin width",
                  [](RunConfig& c, Pending&, const std::string& v) { c.analysis.bin_ps = to_double("analysis", "bin_ps", v); }};
  an["range_ns"] = {"float", "correlation histogram half range",
                    [](RunConfig& c, Pending&, const std::string& v) {
                      c.analysis.range_ns = to_double("analysis", "range_ns", v);
                    }};
  an["side_peaks"] = {"uint", "side peaks integrated on each side",
                      [](RunConfig& c, Pending&, const std::string& v) {
                        c.analysis.side_peaks = static_cast<int>(to_uint("analysis", "side_peaks", v));
                      }};
  an["peak_window_ns"] = {"float", "integration window of each correlation peak",
                          [](RunConfig& c, Pending&, const std::string& v) {
                            c.analysis.peak_window_ns = to_double("analysis", "peak_window_ns", v);
                          }};
  an["success"] = {"detector_pair|any_cross", "success probability convention",
                   [](RunConfig& c, Pending&, const std::string& v) {
                     std::string t = boost::trim_copy(v);
                     if (t == "detector_pair") c.analysis.success = SuccessConvention::detector_pair;
                     else if (t == "any_cross") c.analysis.success = SuccessConvention::any_cross;
                     else throw ConfigError("[analysis] success: expected detector_pair or any_cross");
                   }};
  an["error"] = {"mean|sum|max", "aggregation of the two arms' double clicks",
                 [](RunConfig& c, Pending&, const std::string& v) {
                   std::string t = boost::trim_copy(v);
                   if (t == "mean") c.analysis.error = ErrorAggregation::mean;
                   else if (t == "sum") c.analysis.error = ErrorAggregation::sum;
                   else if (t == "max") c.analysis.error = ErrorAggregation::max;
                   else throw ConfigError("[analysis] error: expected mean, sum or max");
                 }};
  an["bs_ratio"] = {"float", "splitter ratio used by photon-number estimates",
                    [](RunConfig& c, Pending&, const std::string& v) {
                      c.analysis.bs_ratio = to_double("analysis", "bs_ratio", v);
                    }};
  return s;
}

const std::map<std::string, SectionTable>& schema() {
  static const auto s = build_schema();
  return s;
}

const std::vector<std::string> kQdKeys{"rep_rate_hz", "pulse_area_rad", "power_ratio", "rabi_damping",
                                       "prep_probability", "tau_xx_ps", "tau_x_ps", "blink_on_prob",
                                       "blink_switch_prob", "fss_ueV", "eps_x", "eps_xx"};
const std::vector<std::string> kSpdcKeys{"rep_rate_hz", "mu", "modes", "lifetime_ps"};

DensityMatrix build_state(const Pending& p) {
  try {
    if (p.state == "phi_plus") return DensityMatrix::pure(phi_plus(p.state_phase));
    if (p.state == "hh") {
      Vector4c hh = Vector4c::Zero();
      hh(0) = 1.0;
      return DensityMatrix::pure(hh);
    }
    if (p.state == "mixed") return DensityMatrix::maximally_mixed();
    if (p.state == "werner") {
      if (!p.state_visibility) throw ConfigError("[source] state = werner needs state_visibility");
      double v = *p.state_visibility;
      Matrix4c bell = DensityMatrix::pure(phi_plus(p.state_phase)).matrix();
      return DensityMatrix(v * bell + (1.0 - v) * Matrix4c::Identity() / 4.0);
    }
    if (p.state == "custom") {
      if (p.state_real.size() != 16) throw ConfigError("[source] state_real: expected 16 numbers");
      if (!p.state_imag.empty() && p.state_imag.size() != 16)
        throw ConfigError("[source] state_imag: expected 16 numbers");
      Matrix4c m;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          m(r, c) = Complex(p.state_real[r * 4 + c], p.state_imag.empty() ? 0.0 : p.state_imag[r * 4 + c]);
      return DensityMatrix(m);
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[source] state: ") + e.what());
  }
  throw ConfigError("[source] state: expected phi_plus, werner, hh, mixed or custom, got '" + p.state + "'");
}

void resolve_source(RunConfig& cfg, const Pending& p) {
  const auto& allowed = p.source_type == "qd" ? kQdKeys : kSpdcKeys;
  for (const auto& [key, value] : p.source)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("[source] " + key + ": not a key of type " + p.source_type);
  auto num = [&](const std::string& key, double& out) {
    if (auto it = p.source.find(key); it != p.source.end()) out = to_double("source", key, it->second);
  };

  if (p.source_type == "spdc") {
    bool state_keys = p.state != "phi_plus" || p.state_visibility || !p.state_real.empty() || !p.state_imag.empty();
    if (state_keys) throw ConfigError("[source] state keys apply to type qd only");
    SpdcSourceConfig s;
    num("rep_rate_hz", s.rep_rate_hz);
    num("mu", s.mu);
    num("lifetime_ps", s.lifetime_ps);
    if (auto it = p.source.find("modes"); it != p.source.end()) s.modes = to_uint("source", "modes", it->second);
    cfg.source = s;
    return;
  }
  QdSourceConfig q;
  num("rep_rate_hz", q.rep_rate_hz);
  if (p.source.count("pulse_area_rad") && p.source.count("power_ratio"))
    throw ConfigError("[source] give pulse_area_rad or power_ratio, not both");
  num("pulse_area_rad", q.pulse_area_rad);
  if (auto it = p.source.find("power_ratio"); it != p.source.end()) {
    double ratio = to_double("source", "power_ratio", it->second);
    if (ratio < 0) throw ConfigError("[source] power_ratio: must be >= 0");
    q.pulse_area_rad = pulse_area_from_power(ratio);
  }
  num("rabi_damping", q.rabi_damping);
  if (auto it = p.source.find("prep_probability"); it != p.source.end())
    q.prep_probability = to_double("source", "prep_probability", it->second);
  num("tau_xx_ps", q.tau_xx_ps);
  num("tau_x_ps", q.tau_x_ps);
  num("blink_on_prob", q.blink_on_prob);
  num("blink_switch_prob", q.blink_switch_prob);
  num("fss_ueV", q.fss_ueV);
  num("eps_x", q.eps_x);
  num("eps_xx", q.eps_xx);
  q.rho = build_state(p);
  cfg.source = q;
}

bool has_role_suffix(const std::string& key) {
  return std::any_of(kRoleSuffix.begin(), kRoleSuffix.end(), [&](const char* s) {
    std::string suffix = std::string("_") + s;
    return key.size() > suffix.size() && key.compare(key.size() - suffix.size(), suffix.size(), suffix) == 0 &&
           key.rfind("channel_", 0) != 0;
  });
}

}  // namespace

double RunConfig::rep_rate_hz() const {
  return std::visit([](const auto& s) { return s.rep_rate_hz; }, source);
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(", \t"), boost::token_compress_on);
  std::vector<double> out;
  for (const auto& part : parts) {
    if (boost::trim_copy(part).empty()) continue;
    out.push_back(to_double("list", "value", part));
  }
  return out;
}

RunConfig parse_run_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }

  RunConfig cfg;
  Pending pending;
  const auto& sch = schema();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' outside of any section");
    auto sec = sch.find(section);
    if (sec == sch.end()) throw ConfigError("unknown section [" + section + "]");
    // Blanket per-detector keys go first so per-role keys override them.
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [key, node] : body) {
      if (!node.empty()) throw ConfigError(where(section, key) + ": nested keys are not allowed");
      entries.emplace_back(key, node.data());
    }
    std::stable_partition(entries.begin(), entries.end(),
                          [&](const auto& e) { return section != "chain" || !has_role_suffix(e.first); });
    for (const auto& [key, value] : entries) {
      auto key_spec = sec->second.find(key);
      if (key_spec == sec->second.end()) throw ConfigError("unknown key " + where(section, key));
      key_spec->second.apply(cfg, pending, value);
    }
  }
  resolve_source(cfg, pending);

  try {
    std::visit([](const auto& s) { s.validate(); }, cfg.source);
    cfg.chain.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config value: ") + e.what());
  }
  const auto& a = cfg.analysis;
  for (double w : a.windows_ns)
    if (!(w > 0)) throw ConfigError("[analysis] windows_ns: windows must be positive");
  if (!std::is_sorted(a.windows_ns.begin(), a.windows_ns.end()))
    throw ConfigError("[analysis] windows_ns: windows must be ascending");
  if (!(a.bin_ps >= 1) || !(a.range_ns > 0) || !(a.peak_window_ns > 0))
    throw ConfigError("[analysis] bin_ps, range_ns and peak_window_ns must be positive");
  if (a.bs_ratio && !(*a.bs_ratio > 0 && *a.bs_ratio < 1))
    throw ConfigError("[analysis] bs_ratio: must lie strictly between 0 and 1");
  if (cfg.pulses == 0) throw ConfigError("[run] pulses: must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in);
}

std::string run_config_schema() {
  std::ostringstream out;
  for (const auto& [section, keys] : schema())
    for (const auto& [key, key_spec] : keys)
      out << section << '.' << key << " (" << key_spec.type << "): " << key_spec.meaning << '\n';
  return out.str();
}

}  // namespace qngc
