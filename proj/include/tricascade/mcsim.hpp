#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tricascade/levelscheme.hpp"
#include "tricascade/random.hpp"

namespace tricascade {

/// One photon emitted on ladder transition `transition` (index into
/// CascadeLadder::transitions). Time is continuous, in ns.
struct EmissionEvent {
  double time_ns = 0.0;
  std::uint32_t transition = 0;

  friend bool operator==(const EmissionEvent&, const EmissionEvent&) = default;
};

struct SimConfig {
  CascadeLadder ladder = default_ladder();
  PumpProfile pump = PumpProfile::cw(0.05);
  double duration_ns = 1e6;     // cw
  std::uint64_t n_pulses = 0;   // pulsed; duration = n_pulses * period
  std::uint64_t seed = 1;
  std::size_t initial_level = 0;
};

struct EmissionStream {
  std::vector<EmissionEvent> events;
  double duration_ns = 0.0;
  std::vector<std::string> warnings;
};

/// Exact-jump (Gillespie) trajectory under constant pumping. The trajectory
/// can be advanced in arbitrary slices; the concatenated output does not depend
/// on how the run is sliced.
class CwSimulator {
 public:
  explicit CwSimulator(const SimConfig& config);

  /// Appends every emission with time < t_end_ns.
  void advance_until(double t_end_ns, std::vector<EmissionEvent>& out);

  std::size_t level() const { return level_; }

 private:
  void schedule();

  std::vector<double> up_rate_;
  std::vector<double> down_rate_;
  std::vector<std::int64_t> down_transition_;
  Rng rng_;
  std::size_t level_;
  double now_ = 0.0;
  double next_jump_ = 0.0;
};

/// Instantaneous sequential promotion at every pulse (each ladder step taken
/// with probability eta_ex), free radiative decay between pulses.
class PulsedSimulator {
 public:
  explicit PulsedSimulator(const SimConfig& config);

  /// Runs the next `count` pulse cycles.
  void advance_pulses(std::uint64_t count, std::vector<EmissionEvent>& out);

  std::uint64_t pulses_done() const { return pulse_; }
  std::size_t level() const { return level_; }

 private:
  std::vector<double> down_rate_;
  std::vector<std::int64_t> down_transition_;
  double period_;
  double eta_;
  Rng rng_;
  std::size_t level_;
  std::uint64_t pulse_ = 0;
};

EmissionStream simulate_cw(const SimConfig& config);

/// `tagger_resolution_ps` > 0 enables the short-period warning (period below
/// ten tagger bins).
EmissionStream simulate_pulsed(const SimConfig& config, double tagger_resolution_ps = 0.0);

/// Dispatches on the pump mode.
EmissionStream simulate(const SimConfig& config, double tagger_resolution_ps = 0.0);

}  // namespace tricascade
