#include "tricascade/timetag_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace tricascade {

namespace {

std::string hex_bytes(std::span<const std::uint8_t> bytes) {
  std::string s;
  char buf[4];
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%02x", bytes[i]);
    if (i) s += ' ';
    s += buf;
  }
  return s;
}

template <typename T>
void put_le(std::uint8_t* p, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::array<std::uint8_t, kTtrHeaderBytes> encode_header(const TtrHeader& header) {
  std::array<std::uint8_t, kTtrHeaderBytes> b{};
  std::memcpy(b.data(), kTtrMagic.data(), 4);
  put_le<std::uint16_t>(b.data() + 4, kTtrVersion);
  put_le<std::uint32_t>(b.data() + 6, header.resolution_ps);
  b[10] = header.channel_count;
  return b;
}

TtrHeader decode_header(std::span<const std::uint8_t, kTtrHeaderBytes> b) {
  if (std::memcmp(b.data(), kTtrMagic.data(), 4) != 0)
    throw FormatError("bad magic at offset 0: got bytes " + hex_bytes(b.subspan(0, 4)) +
                      ", expected 54 54 52 31 (\"TTR1\")");
  const auto version = get_le<std::uint16_t>(b.data() + 4);
  if (version != kTtrVersion)
    throw FormatError("unsupported version at offset 4: got bytes " + hex_bytes(b.subspan(4, 2)) +
                      " (version " + std::to_string(version) + "), expected 01 00");
  TtrHeader h;
  h.resolution_ps = get_le<std::uint32_t>(b.data() + 6);
  if (h.resolution_ps == 0)
    throw FormatError("zero resolution at offset 6: got bytes " + hex_bytes(b.subspan(6, 4)));
  h.channel_count = b[10];
  for (std::size_t i = 11; i < kTtrHeaderBytes; ++i)
    if (b[i] != 0)
      throw FormatError("reserved header bytes at offset 11 must be zero: got " + hex_bytes(b.subspan(11, 5)));
  return h;
}

TimeTagWriter::TimeTagWriter(const std::string& path, const TtrHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), header_(header) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
  if (header.resolution_ps == 0) throw StructuralError("resolution must be positive");
  const auto h = encode_header(header);
  out_.write(reinterpret_cast<const char*>(h.data()), static_cast<std::streamsize>(h.size()));
  if (!out_) throw IoError("write to '" + path + "' failed");
}

void TimeTagWriter::write(std::span<const TimeTag> tags) {
  buffer_.resize(tags.size() * kTtrRecordBytes);
  auto* p = reinterpret_cast<std::uint8_t*>(buffer_.data());
  for (const auto& t : tags) {
    if (t.channel >= header_.channel_count)
      throw StructuralError("channel " + std::to_string(t.channel) + " outside the declared " +
                            std::to_string(header_.channel_count) + " channels");
    if (t.timestamp_ps % header_.resolution_ps != 0)
      throw StructuralError("timestamp " + std::to_string(t.timestamp_ps) + " ps is not a multiple of the resolution");
    if (records_ > 0 && t.timestamp_ps < last_) throw StructuralError("time tags must be written in order");
    last_ = t.timestamp_ps;
    ++records_;
    p[0] = t.channel;
    put_le<std::uint64_t>(p + 1, t.timestamp_ps / header_.resolution_ps);
    p += kTtrRecordBytes;
  }
  out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  if (!out_) throw IoError("write to '" + path_ + "' failed");
}

void TimeTagWriter::close() {
  out_.flush();
  if (!out_) throw IoError("write to '" + path_ + "' failed");
  out_.close();
  if (out_.fail()) throw IoError("closing '" + path_ + "' failed");
}

TimeTagReader::TimeTagReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open '" + path + "' for reading");
  std::array<std::uint8_t, kTtrHeaderBytes> h{};
  in_.read(reinterpret_cast<char*>(h.data()), static_cast<std::streamsize>(h.size()));
  if (in_.gcount() != static_cast<std::streamsize>(h.size()))
    throw FormatError("'" + path + "' is shorter than the 16-byte header (" + std::to_string(in_.gcount()) +
                      " bytes: " + hex_bytes(std::span(h.data(), static_cast<std::size_t>(in_.gcount()))) + ")");
  header_ = decode_header(h);
}

bool TimeTagReader::read(std::vector<TimeTag>& out, std::size_t max_records) {
  buffer_.resize(max_records * kTtrRecordBytes);
  in_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  const auto got = static_cast<std::size_t>(in_.gcount());
  if (got % kTtrRecordBytes != 0) {
    const std::size_t tail = got % kTtrRecordBytes;
    const auto offset = kTtrHeaderBytes + (records_ + got / kTtrRecordBytes) * kTtrRecordBytes;
    throw FormatError("truncated record at offset " + std::to_string(offset) + ": trailing bytes " +
                      hex_bytes(std::span(reinterpret_cast<const std::uint8_t*>(buffer_.data()) + got - tail, tail)));
  }
  const auto* p = reinterpret_cast<const std::uint8_t*>(buffer_.data());
  for (std::size_t k = 0; k < got / kTtrRecordBytes; ++k, p += kTtrRecordBytes) {
    const auto offset = kTtrHeaderBytes + records_ * kTtrRecordBytes;
    const std::uint8_t ch = p[0];
    if (ch >= header_.channel_count)
      throw FormatError("record at offset " + std::to_string(offset) + ": channel byte " +
                        hex_bytes(std::span(p, 1)) + " is not below the channel count " +
                        std::to_string(header_.channel_count));
    const auto ticks = get_le<std::uint64_t>(p + 1);
    if (ticks > UINT64_MAX / header_.resolution_ps)
      throw FormatError("record at offset " + std::to_string(offset) + ": timestamp bytes " +
                        hex_bytes(std::span(p + 1, 8)) + " overflow picoseconds");
    const std::uint64_t ps = ticks * header_.resolution_ps;
    if (records_ > 0 && ps < last_ps_)
      throw FormatError("record at offset " + std::to_string(offset) + ": timestamp bytes " +
                        hex_bytes(std::span(p + 1, 8)) + " go backwards in time");
    last_ps_ = ps;
    ++records_;
    out.push_back({ch, ps});
  }
  return got > 0;
}

void write_time_tags(const std::string& path, const TimeTagStream& stream) {
  TimeTagWriter w(path, {stream.resolution_ps, stream.channel_count});
  w.write(stream.tags);
  w.close();
}

TimeTagStream read_time_tags(const std::string& path, std::uint64_t acquisition_ps) {
  TimeTagReader r(path);
  TimeTagStream s;
  s.resolution_ps = r.header().resolution_ps;
  s.channel_count = r.header().channel_count;
  while (r.read(s.tags)) {
  }
  s.acquisition_ps = acquisition_ps > 0 ? acquisition_ps
                                        : (s.tags.empty() ? 0 : r.last_timestamp_ps() + s.resolution_ps);
  return s;
}

TimeTagStream emissions_as_tags(std::span<const EmissionEvent> events, std::uint32_t resolution_ps,
                                std::uint8_t transition_count, double duration_ns) {
  if (resolution_ps == 0) throw StructuralError("resolution must be positive");
  TimeTagStream s;
  s.resolution_ps = resolution_ps;
  s.channel_count = transition_count;
  s.acquisition_ps = static_cast<std::uint64_t>(std::llround(duration_ns * 1e3));
  s.tags.reserve(events.size());
  for (const auto& e : events) {
    if (e.transition >= transition_count) throw StructuralError("transition index outside the channel count");
    const auto ps = static_cast<std::uint64_t>(e.time_ns * 1e3);
    s.tags.push_back({static_cast<std::uint8_t>(e.transition), ps / resolution_ps * resolution_ps});
  }
  std::stable_sort(s.tags.begin(), s.tags.end(), tag_before);
  return s;
}

}  // namespace tricascade
