#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qngc/cascade_simulator.hpp"
#include "qngc/photon_number_models.hpp"

namespace qngc {

struct AnalysisConfig {
  std::vector<double> windows_ns{0.12, 0.16, 0.28, 0.8};
  double bin_ps = 16.0;
  double range_ns = 100.0;
  int side_peaks = 5;
  double peak_window_ns = 4.0;
  SuccessConvention success = SuccessConvention::detector_pair;
  ErrorAggregation error = ErrorAggregation::mean;
  std::optional<double> bs_ratio;  // defaults to the chain's X-arm ratio
};

/// Whole-run configuration read from a sectioned key-value file:
///
///   [run]      seed, pulses, out
///   [source]   type = qd | spdc, then the fields of that source
///   [chain]    detector, splitter and channel settings
///   [analysis] windows and binning
///
/// Unknown sections or keys and ill-typed values raise ConfigError.
struct RunConfig {
  std::variant<QdSourceConfig, SpdcSourceConfig> source = QdSourceConfig{};
  ChannelConfig chain;
  AnalysisConfig analysis;
  std::uint64_t seed = 1;
  std::uint64_t pulses = 10000;
  std::optional<std::string> out;

  bool is_qd() const { return std::holds_alternative<QdSourceConfig>(source); }
  double rep_rate_hz() const;
};

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every accepted key with its section, type and meaning, one per line.
std::string run_config_schema();

std::vector<double> parse_number_list(const std::string& text);

}  // namespace qngc
