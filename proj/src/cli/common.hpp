#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qngc/cli.hpp"
#include "qngc/qng_criteria.hpp"

namespace qngc::cli::detail {

using nlohmann::json;

std::string num(double v);

std::uint8_t require_channel(const StreamHeader& header, Role role);

/// t_B - t_A histogram of the two detectors of one arm.
CorrelationHistogram arm_histogram(const TimeTagStream& stream, Arm arm, double bin_ps, double range_ns);

/// X minus XX delays summed over the four cross detector pairs.
CorrelationHistogram cross_histogram(const TimeTagStream& stream, double bin_ps, double range_ns);

/// Side peaks that fit inside the histogram range.
int fitting_side_peaks(const CorrelationHistogram& hist, double period_ps, double window_ps, int wanted);

struct WindowResult {
  double window_ns = 0.0;
  PatternCounts counts;
};

std::vector<WindowResult> sweep_windows(const TimeTagStream& stream, const std::vector<double>& windows_ns,
                                        const RoleOffsets& offsets);

json photon_stats_json(const ClickCounts& counts, const PhotonStatsEstimate& est);
json pair_stats_json(const PairClickStats& stats);

PhotonNumberStats photon_stats_from_json(const json& j);
PairClickStats pair_stats_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);

std::string arm_name(Arm arm);
Arm parse_arm(const std::string& name);
std::optional<Arm> parse_herald(const std::string& name);
SuccessConvention parse_success(const std::string& name);
ErrorAggregation parse_error(const std::string& name);
std::string success_name(SuccessConvention s);
std::string error_name(ErrorAggregation e);

}  // namespace qngc::cli::detail
