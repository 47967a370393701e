#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tricascade/config.hpp"

namespace tricascade::cli {

struct SimulateArgs {
  std::string config_path;  // empty: built-in defaults
  std::string out_path;
  std::optional<double> duration_ns;
  std::optional<std::uint64_t> n_pulses;
  std::optional<std::uint64_t> seed;
  std::optional<double> pump_rate_per_ns;
  bool raw_emissions = false;  // channel = transition index, no detector chain
  double block_ns = 1e5;
};

struct CorrelateArgs {
  std::string in_path;
  std::string config_path;
  int channel_a = 0;
  int channel_b = 1;
  std::optional<std::int64_t> bin_width_ps;
  std::optional<std::int64_t> max_delay_ps;
  std::optional<std::string> pairing;
  std::optional<std::uint64_t> acquisition_ps;
  std::string csv_path;   // empty: stdout
  std::string json_path;  // empty: stdout
  std::optional<std::string> fit_side;  // "negative" | "positive"
};

struct TripleArgs {
  std::string in_path;
  std::string config_path;
  std::vector<int> channels{0, 1, 2};
  std::optional<std::string> mode;  // cw | pulsed
  std::optional<std::int64_t> range_ps;
  std::optional<std::int64_t> bin_width_ps;
  std::optional<std::int64_t> period_ps;
  std::optional<std::int64_t> pulsed_window_ps;
  std::optional<std::uint64_t> acquisition_ps;
  std::string csv_path;
  std::string json_path;
};

struct FitArgs {
  std::string in_path;  // correlate CSV
  std::string side = "negative";
  bool poisson_weights = false;
  int max_iterations = 200;
};

struct LifetimeArgs {
  std::string in_path;  // CSV: time_ns,counts
  std::optional<double> start_ns;
};

struct BudgetArgs {
  double eta_d1 = 0.25, eta_d2 = 0.25, eta_d3 = 0.15;
  double eta_c = 0.46, eta_f = 0.85, eta_g = 0.75;
  double eta_ex = 0.9;
  double n_p_hz = 80e6;
  std::optional<double> pair_prob;
};

struct SweepArgs {
  std::string config_path;
  std::string alpha = "XXLXR";
  std::string beta = "XLXR";
  double min_rate_per_ns = 0.02;
  double max_rate_per_ns = 1.0;
  std::size_t points = 8;
  bool geometric = false;
  bool pl = false;  // emit emission fluxes instead of g2 features
};

/// Each command writes its primary output to `out` (or the given paths) and a
/// short human-readable log to `log`. Errors propagate as tricascade::Error.
void run_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& log);
void run_correlate(const CorrelateArgs& args, std::ostream& out, std::ostream& log);
void run_triple(const TripleArgs& args, std::ostream& out, std::ostream& log);
void run_fit(const FitArgs& args, std::ostream& out);
void run_lifetime(const LifetimeArgs& args, std::ostream& out);
void run_budget(const BudgetArgs& args, std::ostream& out);
void run_sweep(const SweepArgs& args, std::ostream& out, std::ostream& log);

/// Full command-line entry point; returns the process exit code.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

/// Shortest round-trip decimal form used in every CSV and JSON number.
std::string format_double(double v);

}  // namespace tricascade::cli
