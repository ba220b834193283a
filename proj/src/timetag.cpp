#include "qngc/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "qngc/error.hpp"

namespace qngc {

namespace {

constexpr std::size_t kRecordBytes = 9;
constexpr std::size_t kBufferRecords = 1 << 16;

template <typename T>
void put_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::vector<char> encode_header(const StreamHeader& h) {
  std::vector<char> out(StreamHeader::kMagic.begin(), StreamHeader::kMagic.end());
  put_le<std::uint16_t>(out, h.version);
  put_le<std::uint16_t>(out, h.implicit_sync ? 1 : 0);
  put_le<std::uint64_t>(out, h.rep_rate_mhz);
  put_le<std::uint64_t>(out, h.t0_ps);
  put_le<std::uint32_t>(out, h.sync_divider);
  put_le<std::uint64_t>(out, h.pulse_count);
  out.push_back(static_cast<char>(h.roles.size()));
  for (const auto& b : h.roles) {
    out.push_back(static_cast<char>(b.role));
    out.push_back(static_cast<char>(b.channel));
  }
  put_le<std::uint64_t>(out, h.tag_count);
  return out;
}

void encode_record(std::vector<char>& out, const TimeTag& t) {
  out.push_back(static_cast<char>(t.channel));
  put_le<std::uint64_t>(out, t.time_ps);
}

void read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw FormatError(FormatErrorKind::truncated, "time-tag file is truncated");
}

StreamHeader decode_header(std::istream& in) {
  char fixed[4 + 2 + 2 + 8 + 8 + 4 + 8 + 1];
  in.read(fixed, 4);
  if (in.gcount() != 4 || std::memcmp(fixed, StreamHeader::kMagic.data(), 4) != 0)
    throw FormatError(FormatErrorKind::bad_magic, "not a QTT1 time-tag file (bad magic)");
  read_exact(in, fixed + 4, sizeof(fixed) - 4);

  StreamHeader h;
  const char* p = fixed + 4;
  h.version = get_le<std::uint16_t>(p);
  if (h.version != StreamHeader::kVersion)
    throw FormatError(FormatErrorKind::bad_version, "unsupported time-tag format version " + std::to_string(h.version));
  const auto flags = get_le<std::uint16_t>(p + 2);
  h.implicit_sync = (flags & 1u) != 0;
  h.rep_rate_mhz = get_le<std::uint64_t>(p + 4);
  h.t0_ps = get_le<std::uint64_t>(p + 12);
  h.sync_divider = get_le<std::uint32_t>(p + 20);
  h.pulse_count = get_le<std::uint64_t>(p + 24);
  const auto n_roles = static_cast<unsigned char>(p[32]);
  std::vector<char> roles(2 * n_roles);
  if (n_roles > 0) read_exact(in, roles.data(), roles.size());
  for (unsigned i = 0; i < n_roles; ++i) {
    const auto role = static_cast<unsigned char>(roles[2 * i]);
    if (role > static_cast<unsigned>(Role::xx2))
      throw FormatError(FormatErrorKind::bad_header, "unknown role id " + std::to_string(role));
    h.roles.push_back({static_cast<Role>(role), static_cast<std::uint8_t>(roles[2 * i + 1])});
  }
  char count[8];
  read_exact(in, count, 8);
  h.tag_count = get_le<std::uint64_t>(count);
  h.validate();
  return h;
}

}  // namespace

std::string_view role_name(Role role) {
  switch (role) {
    case Role::sync: return "sync";
    case Role::x1: return "X1";
    case Role::x2: return "X2";
    case Role::xx1: return "XX1";
    case Role::xx2: return "XX2";
  }
  return "?";
}

Role parse_role(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "sync") return Role::sync;
  if (lower == "x1") return Role::x1;
  if (lower == "x2") return Role::x2;
  if (lower == "xx1") return Role::xx1;
  if (lower == "xx2") return Role::xx2;
  throw InvalidArgument("unknown detector role '" + std::string(name) + "'");
}

StreamHeader StreamHeader::with_default_roles(double rep_rate_hz) {
  if (!(rep_rate_hz > 0.0)) throw InvalidArgument("repetition rate must be positive");
  StreamHeader h;
  h.rep_rate_mhz = static_cast<std::uint64_t>(std::llround(rep_rate_hz * 1e3));
  h.roles = {{Role::sync, 0}, {Role::x1, 1}, {Role::x2, 2}, {Role::xx1, 3}, {Role::xx2, 4}};
  return h;
}

std::uint64_t StreamHeader::pulse_offset(std::uint64_t k) const {
  const unsigned __int128 num = static_cast<unsigned __int128>(k) * 1'000'000'000'000'000ULL;
  return static_cast<std::uint64_t>(num / rep_rate_mhz);
}

std::uint64_t StreamHeader::pulse_time(std::uint64_t k) const { return t0_ps + pulse_offset(k); }

std::optional<std::uint8_t> StreamHeader::channel_of(Role role) const {
  for (const auto& b : roles)
    if (b.role == role) return b.channel;
  return std::nullopt;
}

std::optional<Role> StreamHeader::role_of(std::uint8_t channel) const {
  for (const auto& b : roles)
    if (b.channel == channel) return b.role;
  return std::nullopt;
}

void StreamHeader::validate() const {
  if (rep_rate_mhz == 0) throw FormatError(FormatErrorKind::bad_header, "repetition rate is zero");
  if (sync_divider == 0) throw FormatError(FormatErrorKind::bad_header, "sync divider is zero");
  for (std::size_t i = 0; i < roles.size(); ++i)
    for (std::size_t j = i + 1; j < roles.size(); ++j) {
      if (roles[i].role == roles[j].role)
        throw FormatError(FormatErrorKind::bad_header, "duplicate role " + std::string(role_name(roles[i].role)));
      if (roles[i].channel == roles[j].channel)
        throw FormatError(FormatErrorKind::bad_header, "channel bound to two roles");
    }
}

void TimeTagStream::validate() const {
  header.validate();
  std::array<bool, 256> known{};
  for (const auto& b : header.roles) known[b.channel] = true;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!known[tags[i].channel])
      throw FormatError(FormatErrorKind::unknown_channel, "tag on unknown channel " + std::to_string(tags[i].channel));
    if (i > 0 && tags[i].time_ps < tags[i - 1].time_ps)
      throw FormatError(FormatErrorKind::non_monotone, "tag times decrease at index " + std::to_string(i));
  }
}

std::vector<std::uint64_t> TimeTagStream::pulse_times() const {
  std::vector<std::uint64_t> times;
  if (header.implicit_sync) {
    times.reserve(header.pulse_count);
    for (std::uint64_t k = 0; k < header.pulse_count; ++k) times.push_back(header.pulse_time(k));
    return times;
  }
  const auto sync = header.channel_of(Role::sync);
  if (!sync) throw DataError("stream has neither sync tags nor implicit sync");
  for (const auto& t : tags) {
    if (t.channel != *sync) continue;
    for (std::uint32_t i = 0; i < header.sync_divider; ++i) times.push_back(t.time_ps + header.pulse_offset(i));
  }
  if (header.pulse_count > 0 && times.size() > header.pulse_count) times.resize(header.pulse_count);
  return times;
}

std::uint64_t TimeTagStream::n_pulses() const {
  if (header.implicit_sync) return header.pulse_count;
  const auto sync = header.channel_of(Role::sync);
  if (!sync) return 0;
  const auto n_sync = static_cast<std::uint64_t>(
      std::count_if(tags.begin(), tags.end(), [&](const TimeTag& t) { return t.channel == *sync; }));
  std::uint64_t n = n_sync * header.sync_divider;
  if (header.pulse_count > 0) n = std::min(n, header.pulse_count);
  return n;
}

StreamReader::StreamReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
  if (!in_) throw FormatError(FormatErrorKind::io, "cannot open " + path.string());
  header_ = decode_header(in_);
  remaining_ = header_.tag_count;
  for (const auto& b : header_.roles) known_[b.channel] = true;
  buffer_.resize(kBufferRecords * kRecordBytes);
}

std::optional<TimeTag> StreamReader::next() {
  if (remaining_ == 0) return std::nullopt;
  if (buffer_pos_ == buffer_len_) {
    const std::uint64_t records = std::min<std::uint64_t>(remaining_, kBufferRecords);
    buffer_len_ = static_cast<std::size_t>(records) * kRecordBytes;
    read_exact(in_, buffer_.data(), buffer_len_);
    buffer_pos_ = 0;
  }
  const char* p = buffer_.data() + buffer_pos_;
  TimeTag tag{get_le<std::uint64_t>(p + 1), static_cast<std::uint8_t>(p[0])};
  buffer_pos_ += kRecordBytes;
  if (!known_[tag.channel])
    throw FormatError(FormatErrorKind::unknown_channel, "tag on unknown channel " + std::to_string(tag.channel));
  if (tag.time_ps < last_time_) throw FormatError(FormatErrorKind::non_monotone, "tag times decrease");
  last_time_ = tag.time_ps;
  --remaining_;
  return tag;
}

StreamWriter::StreamWriter(const std::filesystem::path& path, StreamHeader header)
    : out_(path, std::ios::binary | std::ios::trunc), header_(std::move(header)) {
  if (!out_) throw FormatError(FormatErrorKind::io, "cannot open " + path.string() + " for writing");
  header_.validate();
  for (const auto& b : header_.roles) known_[b.channel] = true;
  header_.tag_count = 0;
  const auto bytes = encode_header(header_);
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  count_pos_ = static_cast<std::streamoff>(bytes.size() - 8);
  buffer_.reserve(kBufferRecords * kRecordBytes);
}

StreamWriter::~StreamWriter() {
  try {
    close();
  } catch (...) {
  }
}

void StreamWriter::write(const TimeTag& tag) {
  if (!known_[tag.channel])
    throw FormatError(FormatErrorKind::unknown_channel, "tag on unknown channel " + std::to_string(tag.channel));
  if (tag.time_ps < last_time_) throw FormatError(FormatErrorKind::non_monotone, "tag times decrease");
  last_time_ = tag.time_ps;
  encode_record(buffer_, tag);
  ++count_;
  if (buffer_.size() >= kBufferRecords * kRecordBytes) flush_buffer();
}

void StreamWriter::flush_buffer() {
  out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  buffer_.clear();
}

void StreamWriter::close() {
  if (closed_) return;
  closed_ = true;
  flush_buffer();
  std::vector<char> count;
  put_le<std::uint64_t>(count, count_);
  out_.seekp(count_pos_);
  out_.write(count.data(), 8);
  out_.close();
  if (!out_) throw FormatError(FormatErrorKind::io, "failed writing time-tag file");
}

TimeTagStream read_stream(const std::filesystem::path& path) {
  StreamReader reader(path);
  TimeTagStream stream{reader.header(), {}};
  stream.tags.reserve(reader.header().tag_count);
  while (auto tag = reader.next()) stream.tags.push_back(*tag);
  return stream;
}

void write_stream(const StreamHeader& header, const std::vector<TimeTag>& tags,
                  const std::filesystem::path& path) {
  StreamWriter writer(path, header);
  for (const auto& t : tags) writer.write(t);
  writer.close();
}

std::vector<char> encode_stream(const TimeTagStream& stream) {
  StreamHeader h = stream.header;
  h.tag_count = stream.tags.size();
  auto out = encode_header(h);
  out.reserve(out.size() + stream.tags.size() * kRecordBytes);
  for (const auto& t : stream.tags) encode_record(out, t);
  return out;
}

void write_stream_csv(const TimeTagStream& stream, std::ostream& out) {
  out << "channel,time_ps\n";
  for (const auto& t : stream.tags) out << static_cast<unsigned>(t.channel) << ',' << t.time_ps << '\n';
}

TimeTagStream read_stream_csv(std::istream& in, StreamHeader header) {
  TimeTagStream stream{std::move(header), {}};
  std::string line;
  if (!std::getline(in, line) || line.rfind("channel,time_ps", 0) != 0)
    throw FormatError(FormatErrorKind::bad_header, "CSV tag file must start with 'channel,time_ps'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    unsigned channel = 0;
    std::uint64_t time = 0;
    char comma = 0;
    if (!(row >> channel >> comma >> time) || comma != ',' || channel > 255)
      throw FormatError(FormatErrorKind::bad_header, "malformed CSV tag row: " + line);
    stream.tags.push_back({time, static_cast<std::uint8_t>(channel)});
  }
  stream.header.tag_count = stream.tags.size();
  stream.validate();
  return stream;
}

}  // namespace qngc
