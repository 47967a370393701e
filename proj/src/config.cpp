#include "tricascade/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace tricascade {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"ladder", {"levels", "labels", "wavelengths_nm", "rates_per_ns", "lifetimes_ns", "channels"}},
    {"pump", {"mode", "rate_per_ns", "period_ns", "eta_ex", "duration_ns", "n_pulses"}},
    {"detectors",
     {"efficiency", "jitter_fwhm_ps", "dead_time_ps", "dark_rate_per_ns", "background_rate_per_ns",
      "resolution_ps", "chain_efficiency"}},
    {"correlate",
     {"bin_width_ps", "max_delay_ps", "pairing", "triple_range_ps", "coincidence_mode", "window_t21_ps",
      "window_t31_ps", "pulsed_window_ps", "exclusion_radius_ps", "significance_sigma"}},
    {"seed", {"value"}},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(std::string_view(s).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& key, int line) {
  T v{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError("'" + key + "': cannot read '" + text + "' as a number", line);
  return v;
}

template <typename T>
std::vector<T> parse_numbers(const Entry& e, const std::string& key) {
  std::vector<T> out;
  for (const auto& item : split_list(e.value)) out.push_back(parse_number<T>(item, key, e.line));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& f) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ", ";
    s += f(values[i]);
  }
  return s;
}

std::map<std::string, Section> tokenize(const std::string& text) {
  std::map<std::string, Section> sections;
  std::string current;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header '" + s + "'", line);
      current = trim(s.substr(1, s.size() - 2));
      if (!kKnownKeys.count(current)) throw ConfigError("unknown section [" + current + "]", line);
      if (sections.count(current)) throw ConfigError("section [" + current + "] appears twice", line);
      sections[current][""] = {"", line};  // remembers where the section starts
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", line);
    if (current.empty()) throw ConfigError("key outside of any section", line);
    const std::string key = trim(s.substr(0, eq));
    if (!kKnownKeys.at(current).count(key))
      throw ConfigError("unknown key '" + key + "' in [" + current + "]", line);
    auto& sec = sections[current];
    if (sec.count(key)) throw ConfigError("duplicate key '" + key + "' in [" + current + "]", line);
    sec[key] = {trim(s.substr(eq + 1)), line};
  }
  return sections;
}

const Entry* find(const std::map<std::string, Section>& sections, const std::string& sec, const std::string& key) {
  auto s = sections.find(sec);
  if (s == sections.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

int section_line(const std::map<std::string, Section>& sections, const std::string& sec) {
  const Entry* e = find(sections, sec, "");
  return e ? e->line : 0;
}

void apply_ladder(const std::map<std::string, Section>& s, RunConfig& c) {
  if (!s.count("ladder")) return;
  const CascadeLadder base = c.ladder;
  std::vector<std::string> levels = base.states;
  std::vector<std::string> labels;
  std::vector<double> wavelengths, rates;
  std::vector<int> channels;
  for (const auto& t : base.transitions) {
    labels.push_back(t.label);
    wavelengths.push_back(t.wavelength_nm);
    rates.push_back(t.radiative_rate_per_ns);
    channels.push_back(base.channel_routing.at(t.label));
  }
  if (auto e = find(s, "ladder", "levels")) levels = split_list(e->value);
  if (auto e = find(s, "ladder", "labels")) labels = split_list(e->value);
  if (auto e = find(s, "ladder", "wavelengths_nm")) wavelengths = parse_numbers<double>(*e, "wavelengths_nm");
  const Entry* r = find(s, "ladder", "rates_per_ns");
  const Entry* l = find(s, "ladder", "lifetimes_ns");
  if (r && l) throw ConfigError("give either rates_per_ns or lifetimes_ns, not both", l->line);
  if (r) rates = parse_numbers<double>(*r, "rates_per_ns");
  if (l) {
    rates.clear();
    for (double v : parse_numbers<double>(*l, "lifetimes_ns")) {
      if (!(v > 0.0)) throw ConfigError("lifetimes_ns must be positive", l->line);
      rates.push_back(1.0 / v);
    }
  }
  if (auto e = find(s, "ladder", "channels")) channels = parse_numbers<int>(*e, "channels");

  const std::size_t n = levels.size();
  const int at = section_line(s, "ladder");
  if (n < 2) throw ConfigError("ladder needs at least two levels", at);
  auto check = [&](std::size_t size, const char* key) {
    const Entry* e = find(s, "ladder", key);
    if (size != n - 1)
      throw ConfigError(std::string(key) + " lists " + std::to_string(size) + " values but the ladder has " +
                            std::to_string(n - 1) + " transitions",
                        e ? e->line : at);
  };
  check(labels.size(), "labels");
  check(wavelengths.size(), "wavelengths_nm");
  check(rates.size(), r ? "rates_per_ns" : "lifetimes_ns");
  check(channels.size(), "channels");

  CascadeLadder ladder;
  ladder.states = levels;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ladder.transitions.push_back({i + 1, i, labels[i], wavelengths[i], rates[i]});
    if (channels[i] < 0 || channels[i] > 255) throw ConfigError("channel ids must lie in 0..255", at);
    ladder.channel_routing[labels[i]] = static_cast<std::uint8_t>(channels[i]);
  }
  try {
    require_valid(ladder);
  } catch (const StructuralError& err) {
    throw ConfigError(err.what(), at);
  }
  c.ladder = std::move(ladder);
}

void apply_pump(const std::map<std::string, Section>& s, RunConfig& c) {
  if (auto e = find(s, "pump", "mode")) {
    if (e->value == "cw") c.pump.mode = PumpMode::cw;
    else if (e->value == "pulsed") c.pump.mode = PumpMode::pulsed;
    else throw ConfigError("pump mode must be 'cw' or 'pulsed', got '" + e->value + "'", e->line);
  }
  if (auto e = find(s, "pump", "rate_per_ns")) c.pump.rate_per_ns = parse_number<double>(e->value, "rate_per_ns", e->line);
  if (auto e = find(s, "pump", "period_ns")) c.pump.period_ns = parse_number<double>(e->value, "period_ns", e->line);
  if (auto e = find(s, "pump", "eta_ex")) c.pump.eta_ex = parse_number<double>(e->value, "eta_ex", e->line);
  if (auto e = find(s, "pump", "duration_ns")) c.duration_ns = parse_number<double>(e->value, "duration_ns", e->line);
  if (auto e = find(s, "pump", "n_pulses")) c.n_pulses = parse_number<std::uint64_t>(e->value, "n_pulses", e->line);
  try {
    require_valid(c.pump);
  } catch (const StructuralError& err) {
    throw ConfigError(err.what(), section_line(s, "pump"));
  }
  if (!(c.duration_ns >= 0.0)) throw ConfigError("duration_ns must be nonnegative", section_line(s, "pump"));
}

void apply_detectors(const std::map<std::string, Section>& s, RunConfig& c) {
  if (auto e = find(s, "detectors", "chain_efficiency")) {
    c.chain_efficiency = parse_number<double>(e->value, "chain_efficiency", e->line);
    if (!(c.chain_efficiency >= 0.0 && c.chain_efficiency <= 1.0))
      throw ConfigError("chain_efficiency must lie in [0, 1]", e->line);
  }
  const char* keys[] = {"efficiency", "jitter_fwhm_ps", "dead_time_ps", "dark_rate_per_ns", "background_rate_per_ns",
                        "resolution_ps"};
  std::map<std::string, std::vector<double>> given;
  std::size_t count = 0;
  for (const char* k : keys)
    if (auto e = find(s, "detectors", k)) {
      given[k] = parse_numbers<double>(*e, k);
      count = std::max(count, given[k].size());
    }
  if (given.empty()) return;
  if (count == 1) count = c.detectors.size();  // single values broadcast over the current channels
  if (count != c.detectors.size()) {
    // A new channel count: every per-channel key must be spelled out or broadcast.
    std::vector<DetectorChannel> fresh(count);
    for (std::size_t i = 0; i < count; ++i) {
      fresh[i] = i < c.detectors.size() ? c.detectors[i] : c.detectors.back();
      fresh[i].id = static_cast<std::uint8_t>(i);
    }
    c.detectors = std::move(fresh);
  }
  for (const auto& [k, values] : given) {
    if (values.empty()) continue;
    const Entry* e = find(s, "detectors", k);
    if (values.size() != 1 && values.size() != count)
      throw ConfigError(k + " lists " + std::to_string(values.size()) + " values for " + std::to_string(count) +
                            " channels",
                        e->line);
    for (std::size_t i = 0; i < count; ++i) {
      const double v = values.size() == 1 ? values[0] : values[i];
      auto& d = c.detectors[i];
      if (k == "efficiency") {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("efficiency must lie in [0, 1]", e->line);
        d.efficiency = v;
      } else if (k == "resolution_ps") {
        if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::uint32_t>(v)))
          throw ConfigError("resolution_ps must be a positive integer", e->line);
        d.resolution_ps = static_cast<std::uint32_t>(v);
      } else {
        if (!(v >= 0.0)) throw ConfigError(k + " must be nonnegative", e->line);
        if (k == "jitter_fwhm_ps") d.jitter_fwhm_ps = v;
        else if (k == "dead_time_ps") d.dead_time_ps = v;
        else if (k == "dark_rate_per_ns") d.dark_rate_per_ns = v;
        else d.background_rate_per_ns = v;
      }
    }
  }
}

std::pair<std::int64_t, std::int64_t> parse_range(const Entry& e, const std::string& key) {
  const auto v = parse_numbers<std::int64_t>(e, key);
  if (v.size() != 2 || v[0] > v[1]) throw ConfigError(key + " needs 'min, max' with min <= max", e.line);
  return {v[0], v[1]};
}

void apply_correlate(const std::map<std::string, Section>& s, RunConfig& c) {
  auto& o = c.correlate;
  auto& t = c.triple;
  if (auto e = find(s, "correlate", "bin_width_ps")) o.bin_width_ps = parse_number<std::int64_t>(e->value, "bin_width_ps", e->line);
  if (auto e = find(s, "correlate", "max_delay_ps")) o.max_delay_ps = parse_number<std::int64_t>(e->value, "max_delay_ps", e->line);
  if (auto e = find(s, "correlate", "pairing")) {
    if (e->value == "multi_stop") o.mode = PairingMode::multi_stop;
    else if (e->value == "start_stop") o.mode = PairingMode::start_stop;
    else throw ConfigError("pairing must be 'multi_stop' or 'start_stop'", e->line);
  }
  if (auto e = find(s, "correlate", "triple_range_ps")) t.range_ps = parse_number<std::int64_t>(e->value, "triple_range_ps", e->line);
  if (auto e = find(s, "correlate", "coincidence_mode")) {
    if (e->value == "cw") t.mode = CoincidenceMode::cw;
    else if (e->value == "pulsed") t.mode = CoincidenceMode::pulsed;
    else throw ConfigError("coincidence_mode must be 'cw' or 'pulsed'", e->line);
  }
  if (auto e = find(s, "correlate", "window_t21_ps")) std::tie(t.window.t21_min_ps, t.window.t21_max_ps) = parse_range(*e, "window_t21_ps");
  if (auto e = find(s, "correlate", "window_t31_ps")) std::tie(t.window.t31_min_ps, t.window.t31_max_ps) = parse_range(*e, "window_t31_ps");
  if (auto e = find(s, "correlate", "pulsed_window_ps")) t.pulsed_window_ps = parse_number<std::int64_t>(e->value, "pulsed_window_ps", e->line);
  if (auto e = find(s, "correlate", "exclusion_radius_ps")) t.exclusion_radius_ps = parse_number<std::int64_t>(e->value, "exclusion_radius_ps", e->line);
  if (auto e = find(s, "correlate", "significance_sigma")) t.significance_sigma = parse_number<double>(e->value, "significance_sigma", e->line);

  const int at = section_line(s, "correlate");
  if (o.bin_width_ps <= 0) throw ConfigError("bin_width_ps must be positive", at);
  if (o.max_delay_ps < 0 || o.max_delay_ps % o.bin_width_ps != 0)
    throw ConfigError("max_delay_ps must be a nonnegative multiple of bin_width_ps", at);
  if (t.range_ps <= 0 || t.pulsed_window_ps <= 0 || t.exclusion_radius_ps < 0)
    throw ConfigError("triple ranges must be positive", at);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  const auto sections = tokenize(text);
  RunConfig c;
  apply_ladder(sections, c);
  apply_pump(sections, c);
  apply_detectors(sections, c);
  apply_correlate(sections, c);
  if (auto e = find(sections, "seed", "value")) c.seed = parse_number<std::uint64_t>(e->value, "value", e->line);

  for (const auto& [label, ch] : c.ladder.channel_routing) {
    const bool known = std::any_of(c.detectors.begin(), c.detectors.end(), [&](const auto& d) { return d.id == ch; });
    if (!known)
      throw ConfigError("transition " + label + " is routed to channel " + std::to_string(ch) +
                            " which has no [detectors] entry",
                        section_line(sections, "ladder"));
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  const auto& tr = c.ladder.transitions;
  auto per_transition = [&](auto f) {
    std::string s;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      if (i) s += ", ";
      s += f(tr[i]);
    }
    return s;
  };
  o << "[ladder]\n";
  o << "levels = " << join(c.ladder.states, [](const std::string& v) { return v; }) << "\n";
  o << "labels = " << per_transition([](const Transition& t) { return t.label; }) << "\n";
  o << "wavelengths_nm = " << per_transition([](const Transition& t) { return fmt(t.wavelength_nm); }) << "\n";
  o << "rates_per_ns = " << per_transition([](const Transition& t) { return fmt(t.radiative_rate_per_ns); }) << "\n";
  o << "channels = "
    << per_transition([&](const Transition& t) { return fmt_int(int(c.ladder.channel_routing.at(t.label))); }) << "\n";

  o << "\n[pump]\n";
  o << "mode = " << (c.pump.mode == PumpMode::cw ? "cw" : "pulsed") << "\n";
  o << "rate_per_ns = " << fmt(c.pump.rate_per_ns) << "\n";
  o << "period_ns = " << fmt(c.pump.period_ns) << "\n";
  o << "eta_ex = " << fmt(c.pump.eta_ex) << "\n";
  o << "duration_ns = " << fmt(c.duration_ns) << "\n";
  o << "n_pulses = " << c.n_pulses << "\n";

  const auto& d = c.detectors;
  o << "\n[detectors]\n";
  o << "efficiency = " << join(d, [](const DetectorChannel& x) { return fmt(x.efficiency); }) << "\n";
  o << "jitter_fwhm_ps = " << join(d, [](const DetectorChannel& x) { return fmt(x.jitter_fwhm_ps); }) << "\n";
  o << "dead_time_ps = " << join(d, [](const DetectorChannel& x) { return fmt(x.dead_time_ps); }) << "\n";
  o << "dark_rate_per_ns = " << join(d, [](const DetectorChannel& x) { return fmt(x.dark_rate_per_ns); }) << "\n";
  o << "background_rate_per_ns = " << join(d, [](const DetectorChannel& x) { return fmt(x.background_rate_per_ns); })
    << "\n";
  o << "resolution_ps = " << join(d, [](const DetectorChannel& x) { return fmt_int(x.resolution_ps); }) << "\n";
  o << "chain_efficiency = " << fmt(c.chain_efficiency) << "\n";

  const auto& t = c.triple;
  o << "\n[correlate]\n";
  o << "bin_width_ps = " << c.correlate.bin_width_ps << "\n";
  o << "max_delay_ps = " << c.correlate.max_delay_ps << "\n";
  o << "pairing = " << (c.correlate.mode == PairingMode::multi_stop ? "multi_stop" : "start_stop") << "\n";
  o << "triple_range_ps = " << t.range_ps << "\n";
  o << "coincidence_mode = " << (t.mode == CoincidenceMode::cw ? "cw" : "pulsed") << "\n";
  o << "window_t21_ps = " << t.window.t21_min_ps << ", " << t.window.t21_max_ps << "\n";
  o << "window_t31_ps = " << t.window.t31_min_ps << ", " << t.window.t31_max_ps << "\n";
  o << "pulsed_window_ps = " << t.pulsed_window_ps << "\n";
  o << "exclusion_radius_ps = " << t.exclusion_radius_ps << "\n";
  o << "significance_sigma = " << fmt(t.significance_sigma) << "\n";

  o << "\n[seed]\n";
  o << "value = " << c.seed << "\n";
  return o.str();
}

SimConfig to_sim_config(const RunConfig& c) {
  SimConfig s;
  s.ladder = c.ladder;
  s.pump = c.pump;
  s.duration_ns = c.duration_ns;
  s.n_pulses = c.n_pulses;
  s.seed = c.seed;
  return s;
}

DetectionConfig to_detection_config(const RunConfig& c) {
  DetectionConfig d;
  d.channels = c.detectors;
  d.routing = c.ladder.routing_table();
  d.chain_efficiency = c.chain_efficiency;
  d.seed = derive_seed(c.seed, 1);
  return d;
}

}  // namespace tricascade
