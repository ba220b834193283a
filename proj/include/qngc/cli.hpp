#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qngc/coincidence.hpp"
#include "qngc/config.hpp"
#include "qngc/estimators.hpp"
#include "qngc/polarization.hpp"

namespace qngc::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_data = 3,
  exit_not_violated = 4,
};

/// Entry point of the `qngc` tool. Never throws; maps errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Tomography counts with columns x,xx,count[,weight]; labels H, V, D, R.
TomographyCounts read_tomography_csv(std::istream& in);

/// CHSH counts with columns setting,outcome,count; setting is 00, 01, 10 or 11
/// (X index then XX index) and outcome one of ++, +-, -+, --.
std::array<OutcomeCounts, 4> read_chsh_csv(std::istream& in);

/// One CSV file of a figure bundle.
struct BundleSchema {
  std::string file;
  std::string figure;
  std::vector<std::string> columns;
};

inline constexpr int kBundleVersion = 1;

/// Every file `report` can emit, in a fixed order.
const std::vector<BundleSchema>& bundle_schemas();

/// "# qngc-bundle v<version> <figure>" followed by the column header.
std::string bundle_header(const BundleSchema& schema);

struct ReportInputs {
  std::optional<std::filesystem::path> stream;
  std::optional<std::filesystem::path> tomography;
  std::optional<std::filesystem::path> chsh;
  std::optional<std::filesystem::path> pair_stats;  // JSON from `analyze pairs`
  AnalysisConfig analysis;
  double rabi_damping = 0.0;
};

/// Writes the bundles the inputs support into out_dir and returns their
/// paths. Throws DataError("no data") if no input yields any rows.
std::vector<std::filesystem::path> write_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

/// Offsets from auto_offsets unless given explicitly.
RoleOffsets resolve_offsets(const TimeTagStream& stream, const std::optional<std::vector<double>>& explicit_ps);

std::uint64_t ns_to_ps(double ns);

}  // namespace qngc::cli
