#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tricascade/analysis.hpp"
#include "tricascade/dynamics.hpp"
#include "tricascade/random.hpp"
#include "tricascade/timetag_io.hpp"

namespace tricascade::cli {

using Json = nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

constexpr std::size_t kReadBlock = 1 << 16;

RunConfig load_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

/// Writes to `path`, or to `fallback` when the path is empty.
template <typename F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  write(f);
  f.flush();
  if (!f) throw IoError("write to '" + path + "' failed");
}

std::uint8_t channel_arg(int ch, const char* flag) {
  if (ch < 0 || ch > 255) throw ConfigError(std::string(flag) + " must be a channel id in 0..255");
  return static_cast<std::uint8_t>(ch);
}

void print_run_header(std::ostream& log, const RunConfig& cfg) {
  log << "# rng: " << kRngAlgorithm << "\n# configuration:\n";
  std::istringstream lines(serialize_config(cfg));
  for (std::string line; std::getline(lines, line);) log << (line.empty() ? "#" : "#   " + line) << "\n";
}

Json fit_json(const FitResult& f) {
  return Json{{"a", f.a},
              {"tau_fit_ns", f.tau_fit_ns},
              {"g2_at_zero", f.g2_at_zero},
              {"residual_rms", f.residual_rms},
              {"a_std_error", f.std_errors[0]},
              {"tau_fit_std_error", f.std_errors[1]},
              {"a_significant", std::abs(f.a) >= 3.0 * f.std_errors[0]},
              {"points", f.points},
              {"iterations", f.iterations},
              {"converged", f.converged}};
}

FitSide parse_side(const std::string& s) {
  if (s == "negative") return FitSide::negative;
  if (s == "positive") return FitSide::positive;
  throw ConfigError("--side must be 'negative' or 'positive'");
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  const std::vector<double>* column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return &columns[i];
    return nullptr;
  }
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path + "' is empty");
  {
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) t.header.push_back(cell);
  }
  t.columns.resize(t.header.size());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col >= t.header.size()) throw FormatError(path + ":" + std::to_string(row) + ": too many columns");
      double v = 0.0;
      if (cell == "nan") {
        v = std::nan("");
      } else {
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size())
          throw FormatError(path + ":" + std::to_string(row) + ": cannot read '" + cell + "'");
      }
      t.columns[col++].push_back(v);
    }
    if (col != t.header.size()) throw FormatError(path + ":" + std::to_string(row) + ": too few columns");
  }
  return t;
}

}  // namespace

void run_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& log) {
  RunConfig cfg = load_or_default(args.config_path);
  if (args.duration_ns) cfg.duration_ns = *args.duration_ns;
  if (args.n_pulses) cfg.n_pulses = *args.n_pulses;
  if (args.seed) cfg.seed = *args.seed;
  if (args.pump_rate_per_ns) cfg.pump.rate_per_ns = *args.pump_rate_per_ns;
  if (!(cfg.duration_ns >= 0.0)) throw ConfigError("--duration-ns must be nonnegative");
  require_valid(cfg.pump);
  print_run_header(log, cfg);

  const SimConfig sim_cfg = to_sim_config(cfg);
  const DetectionConfig det_cfg = to_detection_config(cfg);
  const bool pulsed = cfg.pump.mode == PumpMode::pulsed;
  const double duration_ns = pulsed ? static_cast<double>(cfg.n_pulses) * cfg.pump.period_ns : cfg.duration_ns;
  const std::uint32_t resolution = common_resolution(det_cfg.channels);
  if (pulsed && cfg.pump.period_ns * 1e3 < 10.0 * resolution)
    log << "warning: pulse period is shorter than ten time-tagger bins\n";

  DetectionPipeline pipeline(det_cfg, duration_ns);
  const auto transitions = static_cast<std::uint8_t>(cfg.ladder.transitions.size());
  TtrHeader header = args.raw_emissions ? TtrHeader{resolution, transitions}
                                        : TtrHeader{pipeline.resolution_ps(), pipeline.channel_count()};
  TimeTagWriter writer(args.out_path, header);
  std::vector<std::uint64_t> per_channel(header.channel_count, 0);
  std::uint64_t emissions = 0;

  std::vector<EmissionEvent> events;
  std::vector<TimeTag> ready;
  auto deliver = [&](double block_end_ns, bool last) {
    emissions += events.size();
    if (args.raw_emissions) {
      auto tags = emissions_as_tags(events, resolution, transitions, duration_ns);
      ready = std::move(tags.tags);
    } else {
      pipeline.push(events, block_end_ns, ready);
      if (last) pipeline.finish(ready);
    }
    for (const auto& t : ready) ++per_channel[t.channel];
    writer.write(ready);
    ready.clear();
    events.clear();
  };

  if (pulsed) {
    PulsedSimulator sim(sim_cfg);
    const auto per_block = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(args.block_ns / cfg.pump.period_ns));
    while (sim.pulses_done() < cfg.n_pulses) {
      sim.advance_pulses(std::min(per_block, cfg.n_pulses - sim.pulses_done()), events);
      deliver(static_cast<double>(sim.pulses_done()) * cfg.pump.period_ns, false);
    }
  } else {
    CwSimulator sim(sim_cfg);
    for (double t = 0.0; t < duration_ns;) {
      t = std::min(duration_ns, t + args.block_ns);
      sim.advance_until(t, events);
      deliver(t, false);
    }
  }
  deliver(duration_ns, true);
  writer.close();

  Json summary{{"out", args.out_path},
               {"rng", std::string(kRngAlgorithm)},
               {"seed", cfg.seed},
               {"mode", pulsed ? "pulsed" : "cw"},
               {"duration_ns", duration_ns},
               {"emissions", emissions},
               {"records", writer.records()},
               {"resolution_ps", header.resolution_ps},
               {"channel_count", header.channel_count},
               {"records_per_channel", per_channel},
               {"raw_emissions", args.raw_emissions}};
  out << summary.dump(2) << "\n";
}

void run_correlate(const CorrelateArgs& args, std::ostream& out, std::ostream& log) {
  RunConfig cfg = load_or_default(args.config_path);
  CorrelateOptions opts = cfg.correlate;
  if (args.bin_width_ps) opts.bin_width_ps = *args.bin_width_ps;
  if (args.max_delay_ps) opts.max_delay_ps = *args.max_delay_ps;
  if (args.pairing) {
    if (*args.pairing == "multi_stop") opts.mode = PairingMode::multi_stop;
    else if (*args.pairing == "start_stop") opts.mode = PairingMode::start_stop;
    else throw ConfigError("--pairing must be 'multi_stop' or 'start_stop'");
  }
  if (opts.bin_width_ps <= 0 || opts.max_delay_ps < 0 || opts.max_delay_ps % opts.bin_width_ps != 0)
    throw ConfigError("--max-delay-ps must be a nonnegative multiple of a positive --bin-width-ps");
  const auto a = channel_arg(args.channel_a, "--a");
  const auto b = channel_arg(args.channel_b, "--b");

  TimeTagReader reader(args.in_path);
  if (static_cast<std::uint64_t>(opts.bin_width_ps) < reader.header().resolution_ps)
    throw ConfigError("--bin-width-ps is finer than the file resolution");
  StreamingCorrelator corr(a, b, opts);
  std::vector<TimeTag> block;
  while (reader.read(block, kReadBlock)) {
    corr.feed(block);
    block.clear();
  }
  const std::uint64_t acquisition =
      args.acquisition_ps ? *args.acquisition_ps
                          : (reader.records_read() ? reader.last_timestamp_ps() + reader.header().resolution_ps : 0);
  const Histogram1D h = corr.finish(acquisition);
  const auto g2 = normalize(h, "ch" + std::to_string(a), "ch" + std::to_string(b));
  log << "# correlate: " << reader.records_read() << " records, " << h.total_starts << " starts, " << h.total_stops
      << " stops\n";

  emit(args.csv_path, out, [&](std::ostream& o) {
    o << (g2 ? "tau_ps,counts,g2\n" : "tau_ps,counts\n");
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      o << h.axis.center_ps(i) << ',' << h.counts[i];
      if (g2) o << ',' << format_double(g2->values[i]);
      o << '\n';
    }
  });

  Json j{{"channel_a", a},
         {"channel_b", b},
         {"bin_width_ps", opts.bin_width_ps},
         {"max_delay_ps", opts.max_delay_ps},
         {"pairing", opts.mode == PairingMode::multi_stop ? "multi_stop" : "start_stop"},
         {"total_starts", h.total_starts},
         {"total_stops", h.total_stops},
         {"acquisition_ps", h.acquisition_ps},
         {"pairs", h.sum()},
         {"zero_rate", !g2.has_value()}};
  if (args.fit_side && g2) {
    try {
      j["fit"] = fit_json(fit_antibunching(*g2, parse_side(*args.fit_side)));
    } catch (const FitError& e) {
      j["fit"] = fit_json(e.best());
      j["fit"]["error"] = e.what();
    }
  }
  emit(args.json_path, out, [&](std::ostream& o) { o << j.dump(2) << "\n"; });
}

void run_triple(const TripleArgs& args, std::ostream& out, std::ostream& log) {
  RunConfig cfg = load_or_default(args.config_path);
  TripleSettings t = cfg.triple;
  if (args.mode) {
    if (*args.mode == "cw") t.mode = CoincidenceMode::cw;
    else if (*args.mode == "pulsed") t.mode = CoincidenceMode::pulsed;
    else throw ConfigError("--mode must be 'cw' or 'pulsed'");
  }
  if (args.range_ps) t.range_ps = *args.range_ps;
  if (args.pulsed_window_ps) t.pulsed_window_ps = *args.pulsed_window_ps;
  const std::int64_t w = args.bin_width_ps.value_or(cfg.correlate.bin_width_ps);
  const std::int64_t period =
      args.period_ps.value_or(static_cast<std::int64_t>(std::llround(cfg.pump.period_ns * 1e3)));
  if (args.channels.size() != 3) throw ConfigError("--channels needs three channel ids");
  if (t.range_ps <= 0 || w <= 0) throw ConfigError("--range-ps and --bin-width-ps must be positive");

  const std::uint8_t c1 = channel_arg(args.channels[0], "--channels");
  const std::uint8_t c2 = channel_arg(args.channels[1], "--channels");
  const std::uint8_t c3 = channel_arg(args.channels[2], "--channels");
  const DelayWindow range{-t.range_ps, t.range_ps, -t.range_ps, t.range_ps};

  TimeTagReader reader(args.in_path);
  for (auto c : {c1, c2, c3})
    if (c >= reader.header().channel_count)
      throw ConfigError("channel " + std::to_string(c) + " is not present in '" + args.in_path + "'");
  StreamingTriples acc(c1, c2, c3, range, w);
  std::vector<TimeTag> block;
  while (reader.read(block, kReadBlock)) {
    acc.feed(block);
    block.clear();
  }
  const std::uint64_t acquisition =
      args.acquisition_ps ? *args.acquisition_ps
                          : (reader.records_read() ? reader.last_timestamp_ps() + reader.header().resolution_ps : 0);
  const Histogram2D h = acc.finish(acquisition);
  log << "# triple: " << reader.records_read() << " records, " << h.sum() << " coincidences in range\n";

  ExtractionParams p;
  p.mode = t.mode;
  p.accidental.exclusion_radius_ps = t.exclusion_radius_ps;
  p.significance_sigma = t.significance_sigma;
  p.period_ps = period;
  std::optional<std::vector<SidePeak>> peaks;
  if (t.mode == CoincidenceMode::cw) {
    p.window = t.window;
  } else {
    peaks = find_side_peaks(h, period);
    const auto central = std::find_if(peaks->begin(), peaks->end(), [](const SidePeak& s) { return s.m == 0 && s.n == 0; });
    if (central == peaks->end()) throw EstimationError("central peak cell does not fit inside the histogram");
    p.window = centered_window(central->centroid21_ps, central->centroid31_ps, t.pulsed_window_ps, w);
  }
  const auto r = extract_genuine_triplets(h, p);

  emit(args.csv_path, out, [&](std::ostream& o) {
    o << "tau21_ps\\tau31_ps";
    for (std::size_t j = 0; j < h.tau31().size(); ++j) o << ',' << h.tau31().center_ps(j);
    o << '\n';
    for (std::size_t i = 0; i < h.tau21().size(); ++i) {
      o << h.tau21().center_ps(i);
      for (std::size_t j = 0; j < h.tau31().size(); ++j) o << ',' << h.at(i, j);
      o << '\n';
    }
  });

  Json j{{"channels", {c1, c2, c3}},
         {"bin_width_ps", w},
         {"tau21_axis_ps", {h.tau21().center_ps(0), h.tau21().center_ps(h.tau21().size() - 1)}},
         {"tau31_axis_ps", {h.tau31().center_ps(0), h.tau31().center_ps(h.tau31().size() - 1)}},
         {"acquisition_ps", h.acquisition_ps},
         {"mode", t.mode == CoincidenceMode::cw ? "cw" : "pulsed"},
         {"window_ps",
          {{"tau21", {r.window.t21_min_ps, r.window.t21_max_ps}}, {"tau31", {r.window.t31_min_ps, r.window.t31_max_ps}}}},
         {"window_bins", r.window_bins},
         {"total", r.total_counts},
         {"random", r.random_floor_counts},
         {"partial", r.partially_correlated_counts},
         {"genuine", r.genuine_counts},
         {"genuine_std_error", r.genuine_std_error},
         {"significance", r.significance},
         {"significant", r.significant},
         {"clamped", r.clamped},
         {"acquisition_minutes", r.acquisition_minutes},
         {"rate_per_minute", r.rate_per_minute},
         {"threshold", r.threshold_counts ? Json(*r.threshold_counts) : Json(nullptr)}};
  if (r.accidentals) {
    j["floor_per_bin"] = r.accidentals->floor_per_bin;
    j["floor_std_error"] = r.accidentals->floor_std_error;
    j["ridge_levels"] = r.accidentals->ridge_levels;
  }
  if (peaks) {
    Json arr = Json::array();
    for (const auto& s : *peaks)
      arr.push_back({{"m", s.m},
                     {"n", s.n},
                     {"centroid21_ps", s.centroid21_ps},
                     {"centroid31_ps", s.centroid31_ps},
                     {"max_count", s.max_count},
                     {"sum", s.window_sum},
                     {"partially_correlated", s.partially_correlated()}});
    j["period_ps"] = period;
    j["side_peaks"] = arr;
  }
  emit(args.json_path, out, [&](std::ostream& o) { o << j.dump(2) << "\n"; });
}

void run_fit(const FitArgs& args, std::ostream& out) {
  const auto table = read_csv(args.in_path);
  const auto* g2 = table.column("g2");
  if (!g2) throw FormatError("'" + args.in_path + "' has no g2 column");
  G2Curve c;
  if (const auto* tps = table.column("tau_ps")) {
    for (double v : *tps) c.tau_ns.push_back(v * 1e-3);
  } else if (const auto* tns = table.column("tau_ns")) {
    c.tau_ns = *tns;
  } else {
    throw FormatError("'" + args.in_path + "' has neither a tau_ps nor a tau_ns column");
  }
  c.values = *g2;
  FitOptions o;
  o.poisson_weights = args.poisson_weights;
  o.max_iterations = args.max_iterations;
  Json j;
  try {
    j = fit_json(fit_antibunching(c, parse_side(args.side), o));
  } catch (const FitError& e) {
    j = fit_json(e.best());
    j["error"] = e.what();
    out << j.dump(2) << "\n";
    throw;
  }
  j["side"] = args.side;
  out << j.dump(2) << "\n";
}

void run_lifetime(const LifetimeArgs& args, std::ostream& out) {
  const auto table = read_csv(args.in_path);
  const auto* t = table.column("time_ns");
  const auto* c = table.column("counts");
  if (!t || !c) throw FormatError("'" + args.in_path + "' needs time_ns and counts columns");
  const auto fit = fit_lifetime({*t, *c}, args.start_ns);
  out << Json{{"tau_ns", fit.tau_ns},
              {"tau_std_error", fit.tau_std_error},
              {"amplitude", fit.amplitude},
              {"start_ns", (*t)[fit.start_index]},
              {"points", fit.points},
              {"iterations", fit.iterations}}
             .dump(2)
      << "\n";
}

void run_budget(const BudgetArgs& a, std::ostream& out) {
  const std::pair<const char*, double> unit[] = {{"--eta-d1", a.eta_d1}, {"--eta-d2", a.eta_d2}, {"--eta-d3", a.eta_d3},
                                                 {"--eta-c", a.eta_c},   {"--eta-f", a.eta_f},   {"--eta-g", a.eta_g},
                                                 {"--eta-ex", a.eta_ex}};
  for (const auto& [flag, v] : unit)
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(flag) + " must lie in [0, 1], got " + format_double(v));
  if (!(a.n_p_hz >= 0.0) || !std::isfinite(a.n_p_hz)) throw ConfigError("--n-p-hz must be a nonnegative rate");
  if (a.pair_prob && !(*a.pair_prob > 0.0 && *a.pair_prob <= 1.0))
    throw ConfigError("--pair-prob must lie in (0, 1], got " + format_double(*a.pair_prob));

  const EfficiencyBudget b{a.eta_d1, a.eta_d2, a.eta_d3, a.eta_c, a.eta_f, a.eta_g, a.eta_ex, a.n_p_hz};
  Json j{{"p_triplet", triplet_detection_probability(b)}, {"rate_hz", predict_coherent_triplet_rate(b)}};
  if (a.pair_prob) {
    const auto inv = invert_collection_efficiency(*a.pair_prob, a.eta_d1, a.eta_d2, a.eta_g, a.eta_f);
    j["eta_c"] = inv.eta_c;
    j["eta_c_clamped"] = inv.clamped;
    j["eta_c_inconsistent"] = inv.inconsistent;
  }
  j["inputs"] = {{"eta_d1", a.eta_d1}, {"eta_d2", a.eta_d2}, {"eta_d3", a.eta_d3}, {"eta_c", a.eta_c},
                 {"eta_f", a.eta_f},   {"eta_g", a.eta_g},   {"eta_ex", a.eta_ex}, {"n_p_hz", a.n_p_hz}};
  out << j.dump(2) << "\n";
}

void run_sweep(const SweepArgs& args, std::ostream& out, std::ostream& log) {
  const RunConfig cfg = load_or_default(args.config_path);
  if (args.points < 2) throw ConfigError("--points must be at least 2");
  if (!(args.min_rate_per_ns >= 0.0) || !(args.max_rate_per_ns > args.min_rate_per_ns))
    throw ConfigError("--min-rate-per-ns and --max-rate-per-ns must satisfy 0 <= min < max");
  if (args.geometric && !(args.min_rate_per_ns > 0.0)) throw ConfigError("--geometric needs --min-rate-per-ns > 0");
  const auto grid = args.geometric ? geometric_grid(args.min_rate_per_ns, args.max_rate_per_ns, args.points)
                                   : linear_grid(args.min_rate_per_ns, args.max_rate_per_ns, args.points);
  print_run_header(log, cfg);

  if (args.pl) {
    const auto pl = pl_intensity_vs_power(cfg.ladder, grid);
    out << "pump_rate_per_ns";
    for (const auto& l : pl.labels) out << ",flux_" << l << "_per_ns";
    out << '\n';
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << format_double(grid[i]);
      for (Eigen::Index k = 0; k < pl.flux_per_ns.cols(); ++k)
        out << ',' << format_double(pl.flux_per_ns(static_cast<Eigen::Index>(i), k));
      out << '\n';
    }
    return;
  }
  const auto sweep = bunching_visibility_sweep(cfg.ladder, args.alpha, args.beta, grid);
  out << "pump_rate_per_ns,g2_peak,peak_delay_ns,antibunching_floor\n";
  for (const auto& p : sweep)
    out << format_double(p.pump_rate_per_ns) << ',' << format_double(p.g2_peak) << ','
        << format_double(p.peak_delay_ns) << ',' << format_double(p.antibunching_floor) << '\n';
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cascaded multi-photon emission: simulation and time-tag correlation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tricascade 1.0");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Monte Carlo cascade + detector chain, written as a TTR1 file");
  s->add_option("--config", sim.config_path, "Run configuration file (defaults built in)");
  s->add_option("-o,--out", sim.out_path, "Output TTR1 file")->required();
  s->add_option("--duration-ns", sim.duration_ns, "cw acquisition time [ns]");
  s->add_option("--n-pulses", sim.n_pulses, "pulsed: number of pump pulses");
  s->add_option("--seed", sim.seed, "RNG seed");
  s->add_option("--pump-rate-per-ns", sim.pump_rate_per_ns, "cw pump rate W_p [1/ns]");
  s->add_flag("--raw-emissions", sim.raw_emissions, "Write emissions (channel = transition index), no detectors");
  s->add_option("--block-ns", sim.block_ns, "Streaming block length [ns]")->check(CLI::PositiveNumber);

  CorrelateArgs cor;
  auto* c = app.add_subcommand("correlate", "1D multi-stop correlation histogram and g2 of two channels");
  c->add_option("-i,--in", cor.in_path, "Input TTR1 file")->required();
  c->add_option("--config", cor.config_path, "Run configuration ([correlate] section)");
  c->add_option("--a", cor.channel_a, "Start channel id");
  c->add_option("--b", cor.channel_b, "Stop channel id");
  c->add_option("--bin-width-ps", cor.bin_width_ps, "Bin width [ps]");
  c->add_option("--max-delay-ps", cor.max_delay_ps, "Half-width of the delay axis [ps]");
  c->add_option("--pairing", cor.pairing, "multi_stop | start_stop");
  c->add_option("--acquisition-ps", cor.acquisition_ps, "Acquisition time [ps] (default: last tag + 1 tick)");
  c->add_option("--csv", cor.csv_path, "Histogram CSV path (default stdout)");
  c->add_option("--json", cor.json_path, "Summary JSON path (default stdout)");
  c->add_option("--fit", cor.fit_side, "Fit 1 - a exp(-|tau|/tau_fit) on the 'negative' or 'positive' side");

  TripleArgs tri;
  auto* t = app.add_subcommand("triple", "2D triple-coincidence histogram and genuine-triplet extraction");
  t->add_option("-i,--in", tri.in_path, "Input TTR1 file")->required();
  t->add_option("--config", tri.config_path, "Run configuration ([correlate] section)");
  t->add_option("--channels", tri.channels, "Start, second and third channel ids")->expected(3);
  t->add_option("--mode", tri.mode, "cw | pulsed");
  t->add_option("--range-ps", tri.range_ps, "Histogram half-width on both axes [ps]");
  t->add_option("--bin-width-ps", tri.bin_width_ps, "Bin width [ps]");
  t->add_option("--period-ps", tri.period_ps, "Pulse period [ps] (pulsed mode)");
  t->add_option("--pulsed-window-ps", tri.pulsed_window_ps, "Central window width [ps] (pulsed mode)");
  t->add_option("--acquisition-ps", tri.acquisition_ps, "Acquisition time [ps]");
  t->add_option("--csv", tri.csv_path, "Matrix CSV path (default stdout)");
  t->add_option("--json", tri.json_path, "Decomposition JSON path (default stdout)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Antibunching fit of a correlate CSV");
  f->add_option("-i,--in", fit.in_path, "CSV with tau_ps (or tau_ns) and g2 columns")->required();
  f->add_option("--side", fit.side, "negative | positive");
  f->add_flag("--poisson-weights", fit.poisson_weights, "Weight residuals by 1/g2");
  f->add_option("--max-iterations", fit.max_iterations, "Optimizer iteration limit");

  LifetimeArgs life;
  auto* l = app.add_subcommand("lifetime", "Mono-exponential decay fit");
  l->add_option("-i,--in", life.in_path, "CSV with time_ns and counts columns")->required();
  l->add_option("--start-ns", life.start_ns, "Fit start [ns] (default: peak bin)");

  BudgetArgs bud;
  auto* b = app.add_subcommand("budget", "Detection-efficiency budget arithmetic");
  b->add_option("--eta-d1", bud.eta_d1, "Detector 1 efficiency");
  b->add_option("--eta-d2", bud.eta_d2, "Detector 2 efficiency");
  b->add_option("--eta-d3", bud.eta_d3, "Detector 3 efficiency");
  b->add_option("--eta-c", bud.eta_c, "Collection efficiency");
  b->add_option("--eta-f", bud.eta_f, "Fibre coupling efficiency");
  b->add_option("--eta-g", bud.eta_g, "Grating efficiency");
  b->add_option("--eta-ex", bud.eta_ex, "Triexciton excitation probability per pulse");
  b->add_option("--n-p-hz", bud.n_p_hz, "Pulse repetition rate [Hz]");
  b->add_option("--pair-prob", bud.pair_prob, "Measured pair coincidence probability (inverts eta_c)");

  SweepArgs sw;
  auto* w = app.add_subcommand("sweep", "Model power series: bunching peak and antibunching floor");
  w->add_option("--config", sw.config_path, "Run configuration ([ladder] section)");
  w->add_option("--alpha", sw.alpha, "Start transition label");
  w->add_option("--beta", sw.beta, "Stop transition label");
  w->add_option("--min-rate-per-ns", sw.min_rate_per_ns, "Lowest pump rate [1/ns]");
  w->add_option("--max-rate-per-ns", sw.max_rate_per_ns, "Highest pump rate [1/ns]");
  w->add_option("--points", sw.points, "Number of pump rates");
  w->add_flag("--geometric", sw.geometric, "Geometric instead of linear spacing");
  w->add_flag("--pl", sw.pl, "Emit per-line emission flux instead of g2 features");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*s) run_simulate(sim, out, err);
    else if (*c) run_correlate(cor, out, err);
    else if (*t) run_triple(tri, out, err);
    else if (*f) run_fit(fit, out);
    else if (*l) run_lifetime(life, out);
    else if (*b) run_budget(bud, out);
    else if (*w) run_sweep(sw, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace tricascade::cli
