#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qngc {

/// Detector roles of the four-detector pair setup plus the laser sync.
enum class Role : std::uint8_t { sync = 0, x1 = 1, x2 = 2, xx1 = 3, xx2 = 4 };

/// The two optical modes of the pair: exciton (X) and biexciton (XX).
enum class Arm { x, xx };

inline constexpr std::array<Role, 4> kPhotonRoles{Role::x1, Role::x2, Role::xx1, Role::xx2};

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

/// Bit of a role in a pulse click mask (x1 = bit 0 ... xx2 = bit 3).
inline constexpr std::uint8_t role_bit(Role role) {
  return static_cast<std::uint8_t>(1u << (static_cast<unsigned>(role) - 1u));
}

struct TimeTag {
  std::uint64_t time_ps;
  std::uint8_t channel;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

inline bool tag_order(const TimeTag& a, const TimeTag& b) {
  return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
}

struct RoleBinding {
  Role role;
  std::uint8_t channel;

  friend bool operator==(const RoleBinding&, const RoleBinding&) = default;
};

/// File header of the "QTT1" time-tag format.
///
/// Layout, all little-endian:
///   char[4]  magic "QTT1"
///   u16      version (1)
///   u16      flags (bit 0: implicit sync)
///   u64      repetition rate in millihertz
///   u64      t0_ps, time of pulse 0 when sync is implicit
///   u32      sync divider (pulses per sync tag, >= 1)
///   u64      pulse count
///   u8       number of role bindings, then per binding u8 role, u8 channel
///   u64      tag count
///   records  u8 channel, u64 time_ps (9 bytes each, time non-decreasing)
struct StreamHeader {
  static constexpr std::array<char, 4> kMagic{'Q', 'T', 'T', '1'};
  static constexpr std::uint16_t kVersion = 1;

  std::uint16_t version = kVersion;
  bool implicit_sync = false;
  std::uint64_t rep_rate_mhz = 75'840'000'000ULL;
  std::uint64_t t0_ps = 0;
  std::uint32_t sync_divider = 1;
  std::uint64_t pulse_count = 0;
  std::vector<RoleBinding> roles;
  std::uint64_t tag_count = 0;

  /// Default bindings sync=0, x1=1, x2=2, xx1=3, xx2=4.
  static StreamHeader with_default_roles(double rep_rate_hz);

  double rep_rate_hz() const { return static_cast<double>(rep_rate_mhz) * 1e-3; }
  double period_ps() const { return 1e15 / static_cast<double>(rep_rate_mhz); }
  /// t0 + floor(k * period) in exact integer arithmetic.
  std::uint64_t pulse_time(std::uint64_t k) const;
  /// Offset of pulse k from an arbitrary reference pulse: floor(k * period).
  std::uint64_t pulse_offset(std::uint64_t k) const;

  std::optional<std::uint8_t> channel_of(Role role) const;
  std::optional<Role> role_of(std::uint8_t channel) const;
  bool knows_channel(std::uint8_t channel) const { return role_of(channel).has_value(); }

  /// Throws FormatError(bad_header) on duplicate roles or channels.
  void validate() const;
};

struct TimeTagStream {
  StreamHeader header;
  std::vector<TimeTag> tags;

  /// Sorted by (time, channel), channels known to the header.
  void validate() const;
  /// Pulse times, from sync tags (interpolated for dividers) or from t0.
  std::vector<std::uint64_t> pulse_times() const;
  std::uint64_t n_pulses() const;
};

/// Sequential reader; checks monotonicity and channel membership per record.
class StreamReader {
 public:
  explicit StreamReader(const std::filesystem::path& path);

  const StreamHeader& header() const { return header_; }
  /// Next tag, or nullopt at the end of the stream.
  std::optional<TimeTag> next();

 private:
  std::ifstream in_;
  StreamHeader header_;
  std::uint64_t remaining_ = 0;
  std::uint64_t last_time_ = 0;
  std::array<bool, 256> known_{};
  std::vector<char> buffer_;
  std::size_t buffer_pos_ = 0;
  std::size_t buffer_len_ = 0;
};

/// Streaming writer; the tag count is patched in on close.
class StreamWriter {
 public:
  StreamWriter(const std::filesystem::path& path, StreamHeader header);
  ~StreamWriter();
  StreamWriter(const StreamWriter&) = delete;
  StreamWriter& operator=(const StreamWriter&) = delete;

  void write(const TimeTag& tag);
  void close();

 private:
  void flush_buffer();

  std::ofstream out_;
  StreamHeader header_;
  std::streampos count_pos_{};
  std::uint64_t count_ = 0;
  std::uint64_t last_time_ = 0;
  std::array<bool, 256> known_{};
  std::vector<char> buffer_;
  bool closed_ = false;
};

TimeTagStream read_stream(const std::filesystem::path& path);
void write_stream(const StreamHeader& header, const std::vector<TimeTag>& tags,
                  const std::filesystem::path& path);

/// Serializes to the binary format in memory.
std::vector<char> encode_stream(const TimeTagStream& stream);

/// "channel,time_ps" rows after a header line.
void write_stream_csv(const TimeTagStream& stream, std::ostream& out);
/// Reads tags from CSV; the header supplies rate and roles.
TimeTagStream read_stream_csv(std::istream& in, StreamHeader header);

}  // namespace qngc
