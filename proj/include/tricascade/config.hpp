#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tricascade/correlator.hpp"
#include "tricascade/detection.hpp"
#include "tricascade/levelscheme.hpp"
#include "tricascade/mcsim.hpp"

namespace tricascade {

/// Settings for the 2D analysis.
struct TripleSettings {
  std::int64_t range_ps = 16384;  // histogram half-width on both axes
  CoincidenceMode mode = CoincidenceMode::cw;
  DelayWindow window = default_cw_window();
  std::int64_t pulsed_window_ps = 5000;
  std::int64_t exclusion_radius_ps = 4000;
  double significance_sigma = 3.0;
};

/// Everything a run needs. Text form (sections and keys):
///
///   [ladder]     levels, labels, wavelengths_nm, rates_per_ns | lifetimes_ns, channels
///   [pump]       mode, rate_per_ns, period_ns, eta_ex, duration_ns, n_pulses
///   [detectors]  efficiency, jitter_fwhm_ps, dead_time_ps, dark_rate_per_ns,
///                background_rate_per_ns, resolution_ps (one value per channel), chain_efficiency
///   [correlate]  bin_width_ps, max_delay_ps, pairing, triple_range_ps, coincidence_mode,
///                window_t21_ps, window_t31_ps, pulsed_window_ps, exclusion_radius_ps,
///                significance_sigma
///   [seed]       value
///
/// Lists are comma separated; '#' starts a comment. Transition i of the
/// ladder decays level i+1 to level i.
struct RunConfig {
  CascadeLadder ladder = default_ladder();
  PumpProfile pump = PumpProfile::cw(0.05);
  double duration_ns = 1e6;
  std::uint64_t n_pulses = 0;
  std::vector<DetectorChannel> detectors = default_channels();
  double chain_efficiency = default_chain_efficiency();
  CorrelateOptions correlate;
  TripleSettings triple;
  std::uint64_t seed = 1;
};

/// Parses the text form; keys absent from the text keep their defaults.
/// Throws ConfigError carrying the line number for unknown sections or keys,
/// malformed values and inconsistent list lengths.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Complete text form with every value written out (shortest round-trip
/// decimal), so that parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& config);

SimConfig to_sim_config(const RunConfig& config);
DetectionConfig to_detection_config(const RunConfig& config);

}  // namespace tricascade
