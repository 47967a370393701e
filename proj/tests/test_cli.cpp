#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "helpers.hpp"
#include "tricascade/timetag_io.hpp"

using namespace tricascade;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "tricascade");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("tricascade_cli_" + std::to_string(std::rand()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Last JSON object printed on stdout.
Json json_of(const std::string& text) {
  const auto start = text.rfind("\n{");
  return Json::parse(start == std::string::npos ? text : text.substr(start + 1));
}

}  // namespace

TEST_CASE("budget reproduces the efficiency arithmetic") {
  auto r = run({"budget"});
  REQUIRE(r.code == 0);
  auto j = Json::parse(r.out);
  CHECK(j["p_triplet"].get<double>() == doctest::Approx(2.3642e-4).epsilon(1e-4));
  CHECK(j["rate_hz"].get<double>() == doctest::Approx(1.70e4).epsilon(0.01));

  r = run({"budget", "--eta-ex", "0"});
  CHECK(Json::parse(r.out)["rate_hz"].get<double>() == 0.0);

  r = run({"budget", "--pair-prob", "0.0054"});
  CHECK(Json::parse(r.out)["eta_c"].get<double>() == doctest::Approx(0.461).epsilon(1e-3));

  r = run({"budget", "--eta-d1", "1.5"});
  CHECK(r.code == 2);
  CHECK(r.err.find("--eta-d1") != std::string::npos);
}

TEST_CASE("usage errors and unknown subcommands") {
  CHECK(run({"budget", "--no-such-flag"}).code != 0);
  CHECK(run({"simulate"}).code != 0);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("simulate writes a header-only file for zero duration") {
  TempDir d;
  const auto r = run({"simulate", "-o", d.file("empty.ttr"), "--duration-ns", "0"});
  REQUIRE(r.code == 0);
  CHECK(fs::file_size(d.file("empty.ttr")) == 16);
  const auto s = read_time_tags(d.file("empty.ttr"));
  CHECK(s.resolution_ps == 512);
  CHECK(s.channel_count == 3);
}

TEST_CASE("simulate is deterministic and prints its full configuration") {
  TempDir d;
  const auto a = run({"simulate", "-o", d.file("a.ttr"), "--duration-ns", "2e5", "--seed", "7"});
  const auto b = run({"simulate", "-o", d.file("b.ttr"), "--duration-ns", "2e5", "--seed", "7"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(d.file("a.ttr")) == slurp(d.file("b.ttr")));
  const auto s = read_time_tags(d.file("a.ttr"));
  CHECK(s.tags.size() > 0);
  CHECK(s.resolution_ps == 512);
  CHECK(s.channel_count == 3);
  const auto summary = json_of(a.out);
  CHECK(summary["records"].get<std::uint64_t>() == s.tags.size());

  // The logged configuration reproduces the run.
  std::istringstream log(a.err);
  std::ostringstream cfg;
  bool in_cfg = false;
  for (std::string line; std::getline(log, line);) {
    if (line == "# configuration:") {
      in_cfg = true;
      continue;
    }
    if (in_cfg && line.rfind("#", 0) == 0) cfg << (line.size() > 4 ? line.substr(4) : "") << "\n";
  }
  CHECK(cfg.str().find("value = 7") != std::string::npos);
  std::ofstream(d.file("run.ini")) << cfg.str();
  REQUIRE(run({"simulate", "--config", d.file("run.ini"), "-o", d.file("c.ttr")}).code == 0);
  CHECK(slurp(d.file("c.ttr")) == slurp(d.file("a.ttr")));
}

TEST_CASE("simulate reports config errors with line numbers") {
  TempDir d;
  std::ofstream(d.file("bad.ini")) << "[pump]\nrate_per_ns = 0.1\nbogus = 1\n";
  const auto r = run({"simulate", "--config", d.file("bad.ini"), "-o", d.file("x.ttr")});
  CHECK(r.code == 2);
  CHECK(r.err.find("line 3") != std::string::npos);
  CHECK(run({"simulate", "-o", "/nonexistent_dir/x.ttr", "--duration-ns", "10"}).code == 5);
}

TEST_CASE("correlate shows cascade bunching and handles empty channels") {
  TempDir d;
  REQUIRE(run({"simulate", "-o", d.file("c.ttr"), "--duration-ns", "2e6", "--pump-rate-per-ns", "0.3"}).code == 0);
  auto r = run({"correlate", "-i", d.file("c.ttr"), "--a", "0", "--b", "2", "--csv", d.file("g2.csv"), "--max-delay-ps",
                "20480"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK_FALSE(j["zero_rate"].get<bool>());
  std::istringstream csv(slurp(d.file("g2.csv")));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "tau_ps,counts,g2");
  std::vector<double> tau, g2;
  while (std::getline(csv, line)) {
    double t, c, g;
    char sep;
    std::istringstream(line) >> t >> sep >> c >> sep >> g;
    tau.push_back(t);
    g2.push_back(g);
  }
  double peak = 0, peak_tau = 0;
  for (std::size_t i = 0; i < tau.size(); ++i)
    if (g2[i] > peak) peak = g2[i], peak_tau = tau[i];
  CHECK(peak > 1.0);
  CHECK(peak_tau > 0.0);

  // channel 3 does not exist in the file's data; it has no tags
  TimeTagStream s = read_time_tags(d.file("c.ttr"));
  s.channel_count = 4;
  write_time_tags(d.file("four.ttr"), s);
  r = run({"correlate", "-i", d.file("four.ttr"), "--a", "0", "--b", "3", "--csv", d.file("z.csv")});
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["zero_rate"].get<bool>());
  std::string header;
  std::getline(std::istringstream(slurp(d.file("z.csv"))) >> std::ws, header);
  CHECK(header == "tau_ps,counts");
}

TEST_CASE("correlate fit on Poisson data finds no significant dip") {
  TempDir d;
  write_time_tags(d.file("p.ttr"), testutil::poisson_stream({0.1, 0.1}, 2e6, 1, 8));
  const auto r = run({"correlate", "-i", d.file("p.ttr"), "--a", "0", "--b", "1", "--bin-width-ps", "512",
                      "--csv", d.file("p.csv"), "--fit", "negative"});
  REQUIRE(r.code == 0);
  const auto fit = Json::parse(r.out)["fit"];
  CHECK(std::abs(fit["a"].get<double>()) < 3.0 * fit["a_std_error"].get<double>());
}

TEST_CASE("fit and lifetime subcommands read CSV input") {
  TempDir d;
  {
    std::ofstream f(d.file("g2.csv"));
    f << "tau_ps,counts,g2\n";
    for (int i = -100; i <= 100; ++i) f << i * 100 << ",0," << cli::format_double(1.0 - 0.4 * std::exp(-std::abs(i * 0.1) / 1.5)) << "\n";
  }
  auto r = run({"fit", "-i", d.file("g2.csv")});
  REQUIRE(r.code == 0);
  auto j = Json::parse(r.out);
  CHECK(j["a"].get<double>() == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(j["tau_fit_ns"].get<double>() == doctest::Approx(1.5).epsilon(1e-6));

  {
    std::ofstream f(d.file("decay.csv"));
    f << "time_ns,counts\n";
    for (int i = 0; i < 200; ++i) f << i * 0.1 << "," << cli::format_double(500.0 * std::exp(-i * 0.1 / 2.8)) << "\n";
  }
  r = run({"lifetime", "-i", d.file("decay.csv")});
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["tau_ns"].get<double>() == doctest::Approx(2.8).epsilon(1e-6));

  std::ofstream(d.file("junk.csv")) << "time_ns,counts\n1,abc\n";
  CHECK(run({"lifetime", "-i", d.file("junk.csv")}).code == 3);
}

TEST_CASE("triple: Poisson input is not significant") {
  TempDir d;
  write_time_tags(d.file("p3.ttr"), testutil::poisson_stream({0.05, 0.05, 0.05}, 1e7, 1, 3));
  const auto r = run({"triple", "-i", d.file("p3.ttr"), "--csv", d.file("m.csv")});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK_FALSE(j["significant"].get<bool>());
  CHECK(j["genuine"].get<double>() >= 0.0);
  CHECK(slurp(d.file("m.csv")).rfind("tau21_ps\\tau31_ps", 0) == 0);
}

TEST_CASE("triple: pulsed simulation shows the period grid") {
  TempDir d;
  std::ofstream(d.file("pulsed.ini")) << "[pump]\nmode = pulsed\nperiod_ns = 12.5\neta_ex = 0.9\nn_pulses = 2000000\n"
                                         "[detectors]\nefficiency = 0.5\nchain_efficiency = 0.5\n";
  REQUIRE(run({"simulate", "--config", d.file("pulsed.ini"), "-o", d.file("p.ttr")}).code == 0);
  const auto r = run({"triple", "-i", d.file("p.ttr"), "--mode", "pulsed", "--period-ps", "12500", "--range-ps",
                      "40000", "--csv", d.file("m.csv")});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  REQUIRE(j["side_peaks"].size() >= 25);
  double c21 = 0, c31 = 0;
  for (const auto& p : j["side_peaks"])
    if (p["m"] == 0 && p["n"] == 0) c21 = p["centroid21_ps"], c31 = p["centroid31_ps"];
  for (const auto& p : j["side_peaks"]) {
    if (p["sum"].get<double>() < 50) continue;
    CHECK(std::abs(p["centroid21_ps"].get<double>() - c21 - 12500.0 * p["m"].get<double>()) <= 512.0);
    CHECK(std::abs(p["centroid31_ps"].get<double>() - c31 - 12500.0 * p["n"].get<double>()) <= 512.0);
  }
  CHECK(j["threshold"].get<double>() > 0.0);
  CHECK(j["genuine"].get<double>() > 0.0);
}

TEST_CASE("triple: oversized window fails before allocating") {
  TempDir d;
  write_time_tags(d.file("p3.ttr"), testutil::poisson_stream({0.05, 0.05, 0.05}, 1e4, 1, 3));
  const auto r = run({"triple", "-i", d.file("p3.ttr"), "--range-ps", "1000000000"});
  CHECK(r.code == 4);
}

TEST_CASE("the installed binary maps a bad magic to the format exit code") {
  TempDir d;
  std::ofstream(d.file("bad.ttr"), std::ios::binary) << "XXXX0000000000000000";
  const std::string cmd = std::string(TRICASCADE_TOOL) + " correlate -i " + d.file("bad.ttr") + " > " +
                          d.file("o.txt") + " 2> " + d.file("e.txt");
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 3);
  CHECK(slurp(d.file("e.txt")).find("58 58 58 58") != std::string::npos);
}
