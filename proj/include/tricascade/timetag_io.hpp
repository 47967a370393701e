#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "tricascade/detection.hpp"
#include "tricascade/mcsim.hpp"

namespace tricascade {

// TTR1 layout, all integers little-endian:
//   header  "TTR1" | u16 version=1 | u32 resolution_ps | u8 channel_count | 5 zero bytes
//   record  u8 channel | u64 timestamp in resolution units
inline constexpr std::array<char, 4> kTtrMagic{'T', 'T', 'R', '1'};
inline constexpr std::uint16_t kTtrVersion = 1;
inline constexpr std::size_t kTtrHeaderBytes = 16;
inline constexpr std::size_t kTtrRecordBytes = 9;

struct TtrHeader {
  std::uint32_t resolution_ps = 1;
  std::uint8_t channel_count = 0;

  friend bool operator==(const TtrHeader&, const TtrHeader&) = default;
};

std::array<std::uint8_t, kTtrHeaderBytes> encode_header(const TtrHeader& header);
/// Throws FormatError naming the offending bytes.
TtrHeader decode_header(std::span<const std::uint8_t, kTtrHeaderBytes> bytes);

/// Sequential writer; checks channel range, order and resolution alignment.
class TimeTagWriter {
 public:
  TimeTagWriter(const std::string& path, const TtrHeader& header);

  void write(std::span<const TimeTag> tags);
  /// Flushes and closes; throws IoError if the data did not reach the file.
  void close();
  std::uint64_t records() const { return records_; }

 private:
  std::ofstream out_;
  std::string path_;
  TtrHeader header_;
  std::uint64_t records_ = 0;
  std::uint64_t last_ = 0;
  std::vector<char> buffer_;
};

/// Block source of sorted time tags. An importer for another time-tagger
/// format implements this interface and can then drive the same streaming
/// correlators as the TTR1 reader.
class TagSource {
 public:
  virtual ~TagSource() = default;
  /// Appends up to `max_records` tags (timestamps in ps) to `out`; returns
  /// false once the source is exhausted and nothing was read.
  virtual bool read(std::vector<TimeTag>& out, std::size_t max_records) = 0;
};

/// Sequential reader with bounded memory: records are returned in blocks.
class TimeTagReader : public TagSource {
 public:
  explicit TimeTagReader(const std::string& path);

  const TtrHeader& header() const { return header_; }

  bool read(std::vector<TimeTag>& out, std::size_t max_records = 1 << 16) override;

  std::uint64_t records_read() const { return records_; }
  /// Largest timestamp seen so far, in ps.
  std::uint64_t last_timestamp_ps() const { return last_ps_; }

 private:
  std::ifstream in_;
  std::string path_;
  TtrHeader header_;
  std::uint64_t records_ = 0;
  std::uint64_t last_ps_ = 0;
  std::vector<char> buffer_;
};

void write_time_tags(const std::string& path, const TimeTagStream& stream);

/// Whole-file read. The acquisition time is taken as the last timestamp plus
/// one resolution tick unless `acquisition_ps` is given.
TimeTagStream read_time_tags(const std::string& path, std::uint64_t acquisition_ps = 0);

/// Raw emissions as tags with channel = transition index, floored to
/// `resolution_ps`. Intended for debugging the simulator.
TimeTagStream emissions_as_tags(std::span<const EmissionEvent> events, std::uint32_t resolution_ps,
                                std::uint8_t transition_count, double duration_ns);

}  // namespace tricascade
