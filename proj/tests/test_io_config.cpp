#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "helpers.hpp"
#include "tricascade/config.hpp"
#include "tricascade/timetag_io.hpp"

using namespace tricascade;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& name) : path(fs::temp_directory_path() / ("tricascade_test_" + name)) {}
  ~TempFile() { fs::remove(path); }
  std::string str() const { return path.string(); }
};

std::vector<std::uint8_t> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

int config_error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("header encoding is bit exact") {
  const auto h = encode_header({512, 3});
  const std::array<std::uint8_t, 16> expected{'T', 'T', 'R', '1', 1, 0, 0, 2, 0, 0, 3, 0, 0, 0, 0, 0};
  CHECK(h == expected);
  CHECK(decode_header(h) == TtrHeader{512, 3});
}

TEST_CASE("header errors name the offending bytes") {
  auto h = encode_header({512, 3});
  h[0] = 'X';
  try {
    decode_header(h);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("58") != std::string::npos);
    CHECK(e.category() == ErrorCategory::format);
  }
  h = encode_header({512, 3});
  h[4] = 2;
  CHECK_THROWS_AS(decode_header(h), FormatError);
  h = encode_header({512, 3});
  h[13] = 1;
  CHECK_THROWS_AS(decode_header(h), FormatError);
  CHECK_THROWS_AS(decode_header(encode_header({0, 3})), FormatError);
}

TEST_CASE("record layout and file round trip") {
  TempFile f("roundtrip.ttr");
  auto s = testutil::random_stream(50000, 3, 1'000'000'000, 512, 17);
  s.channel_count = 3;
  write_time_tags(f.str(), s);
  const auto raw = bytes_of(f.path);
  REQUIRE(raw.size() == 16 + 9 * s.tags.size());
  // first record: channel byte then the timestamp in ticks, little endian
  CHECK(raw[16] == s.tags[0].channel);
  std::uint64_t ticks = 0;
  for (int k = 7; k >= 0; --k) ticks = ticks << 8 | raw[17 + k];
  CHECK(ticks * 512 == s.tags[0].timestamp_ps);

  const auto back = read_time_tags(f.str(), s.acquisition_ps);
  CHECK(back.tags == s.tags);
  CHECK(back.resolution_ps == 512);
  CHECK(back.channel_count == 3);
  CHECK(back.acquisition_ps == s.acquisition_ps);
  CHECK(read_time_tags(f.str()).acquisition_ps == s.tags.back().timestamp_ps + 512);
}

TEST_CASE("block reader returns the same stream in pieces") {
  TempFile f("blocks.ttr");
  auto s = testutil::random_stream(10000, 2, 1'000'000, 1, 5);
  write_time_tags(f.str(), s);
  TimeTagReader r(f.str());
  std::vector<TimeTag> all, block;
  while (true) {
    block.clear();
    if (!r.read(block, 777)) break;
    CHECK(block.size() <= 777);
    all.insert(all.end(), block.begin(), block.end());
  }
  CHECK(all == s.tags);
  CHECK(r.records_read() == s.tags.size());
}

TEST_CASE("writer rejects malformed tags") {
  TempFile f("bad_write.ttr");
  TimeTagWriter w(f.str(), {512, 2});
  const std::vector<TimeTag> bad_channel{{2, 0}}, misaligned{{0, 100}}, ok{{0, 1024}}, backwards{{1, 512}};
  CHECK_THROWS_AS(w.write(bad_channel), StructuralError);
  CHECK_THROWS_AS(w.write(misaligned), StructuralError);
  w.write(ok);
  CHECK_THROWS_AS(w.write(backwards), StructuralError);
  w.close();
  CHECK(w.records() == 1);
  CHECK_THROWS_AS(TimeTagWriter("/nonexistent_dir/x.ttr", {1, 1}), IoError);
}

TEST_CASE("reader rejects corrupt files") {
  TempFile f("corrupt.ttr");
  TimeTagStream s;
  s.resolution_ps = 1;
  s.channel_count = 2;
  s.tags = {{0, 10}, {1, 20}, {0, 30}};
  write_time_tags(f.str(), s);
  const auto good = bytes_of(f.path);

  auto truncated = good;
  truncated.resize(good.size() - 3);
  write_bytes(f.path, truncated);
  CHECK_THROWS_AS(read_time_tags(f.str()), FormatError);

  auto short_header = good;
  short_header.resize(10);
  write_bytes(f.path, short_header);
  CHECK_THROWS_AS(read_time_tags(f.str()), FormatError);

  auto bad_channel = good;
  bad_channel[16 + 9] = 5;
  write_bytes(f.path, bad_channel);
  CHECK_THROWS_AS(read_time_tags(f.str()), FormatError);

  auto backwards = good;
  backwards[16 + 2 * 9 + 1] = 1;  // third timestamp 1 < 20
  write_bytes(f.path, backwards);
  CHECK_THROWS_AS(read_time_tags(f.str()), FormatError);

  CHECK_THROWS_AS(read_time_tags("/nonexistent_dir/none.ttr"), IoError);
}

TEST_CASE("header-only file holds an empty stream") {
  TempFile f("empty.ttr");
  TimeTagStream s;
  s.resolution_ps = 512;
  s.channel_count = 3;
  write_time_tags(f.str(), s);
  CHECK(fs::file_size(f.path) == 16);
  CHECK(read_time_tags(f.str()).tags.empty());
}

TEST_CASE("default config survives a serialize-parse round trip") {
  const RunConfig c;
  const auto text = serialize_config(c);
  const auto again = serialize_config(parse_config(text));
  CHECK(text == again);
  CHECK(parse_config("").seed == 1);
}

TEST_CASE("config values are parsed and round trip exactly") {
  const std::string text = R"(# custom run
[ladder]
levels = G, X, XX
labels = A, B
wavelengths_nm = 900, 910
lifetimes_ns = 2.8, 0.1
channels = 1, 0

[pump]
mode = pulsed
period_ns = 12.5
eta_ex = 0.9
n_pulses = 1000

[detectors]
efficiency = 0.3
jitter_fwhm_ps = 250, 300
resolution_ps = 512

[correlate]
bin_width_ps = 1024
max_delay_ps = 10240
pairing = start_stop
coincidence_mode = pulsed

[seed]
value = 42
)";
  const auto c = parse_config(text);
  CHECK(c.ladder.transitions.size() == 2);
  CHECK(c.ladder.transitions[0].radiative_rate_per_ns == doctest::Approx(1.0 / 2.8));
  CHECK(c.ladder.channel_routing.at("A") == 1);
  CHECK(c.pump.mode == PumpMode::pulsed);
  CHECK(c.pump.period_ns == 12.5);
  CHECK(c.n_pulses == 1000);
  CHECK(c.detectors.size() == 2);
  CHECK(c.detectors[1].efficiency == 0.3);
  CHECK(c.detectors[0].jitter_fwhm_ps == 250.0);
  CHECK(c.correlate.mode == PairingMode::start_stop);
  CHECK(c.triple.mode == CoincidenceMode::pulsed);
  CHECK(c.seed == 42);

  const auto text2 = serialize_config(c);
  const auto c2 = parse_config(text2);
  CHECK(serialize_config(c2) == text2);
  CHECK(c2.ladder.transitions[0].radiative_rate_per_ns == c.ladder.transitions[0].radiative_rate_per_ns);
  CHECK(to_sim_config(c2).n_pulses == 1000);
  CHECK(to_detection_config(c2).routing == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("config errors carry line numbers") {
  CHECK(config_error_line("[ladder]\nlabels = A, B, C\n[bogus]\n") == 3);
  CHECK(config_error_line("[pump]\nrate_per_ns = 0.1\nspeed = 3\n") == 3);
  CHECK(config_error_line("[pump]\nrate_per_ns = abc\n") == 2);
  CHECK(config_error_line("[pump]\nrate_per_ns = 0.1\nrate_per_ns = 0.2\n") == 3);
  CHECK(config_error_line("[seed]\nvalue = 1\n[seed]\n") == 3);
  CHECK(config_error_line("levels = 4\n") == 1);
  CHECK(config_error_line("[ladder]\nrates_per_ns = 1, 2\n") == 2);
  CHECK(config_error_line("[ladder]\nrates_per_ns = 1,1,1\nlifetimes_ns = 1,1,1\n") == 3);
  CHECK(config_error_line("[detectors]\nefficiency = 0.1, 0.2\njitter_fwhm_ps = 1, 2, 3\n") == 2);
  CHECK(config_error_line("[pump]\nrate_per_ns = -1\n") > 0);
  CHECK_THROWS_AS(parse_config("[ladder]\nchannels = 0, 1, 7\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent_dir/run.ini"), IoError);
}

TEST_CASE("single detector values broadcast over the existing channels") {
  const auto c = parse_config("[detectors]\nefficiency = 0.5\n");
  REQUIRE(c.detectors.size() == 3);
  for (const auto& d : c.detectors) CHECK(d.efficiency == 0.5);
  CHECK(c.detectors[2].jitter_fwhm_ps == 300.0);
}
