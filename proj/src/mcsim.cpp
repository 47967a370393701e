#include "tricascade/mcsim.hpp"

#include <limits>

namespace tricascade {
namespace {

void fill_decay_tables(const CascadeLadder& ladder, std::vector<double>& rate,
                       std::vector<std::int64_t>& transition) {
  rate.assign(ladder.level_count(), 0.0);
  transition.assign(ladder.level_count(), -1);
  for (std::size_t i = 0; i < ladder.transitions.size(); ++i) {
    rate[ladder.transitions[i].upper] = ladder.transitions[i].radiative_rate_per_ns;
    transition[ladder.transitions[i].upper] = static_cast<std::int64_t>(i);
  }
}

void check_level(const CascadeLadder& ladder, std::size_t level) {
  if (level >= ladder.level_count()) throw StructuralError("initial level out of range");
}

}  // namespace

CwSimulator::CwSimulator(const SimConfig& config)
    : rng_(config.seed), level_(config.initial_level) {
  require_valid(config.ladder);
  require_valid(config.pump);
  check_level(config.ladder, level_);
  if (config.pump.mode != PumpMode::cw) throw StructuralError("cw simulator needs a cw pump");
  fill_decay_tables(config.ladder, down_rate_, down_transition_);
  up_rate_.assign(config.ladder.level_count(), config.pump.rate_per_ns);
  up_rate_.back() = 0.0;
  schedule();
}

void CwSimulator::schedule() {
  const double total = up_rate_[level_] + down_rate_[level_];
  next_jump_ = total > 0.0 ? now_ + rng_.exponential(total) : std::numeric_limits<double>::infinity();
}

void CwSimulator::advance_until(double t_end_ns, std::vector<EmissionEvent>& out) {
  while (next_jump_ < t_end_ns) {
    now_ = next_jump_;
    const double up = up_rate_[level_];
    const double total = up + down_rate_[level_];
    if (rng_.uniform() * total < up) {
      ++level_;
    } else {
      out.push_back({now_, static_cast<std::uint32_t>(down_transition_[level_])});
      --level_;
    }
    schedule();
  }
}

PulsedSimulator::PulsedSimulator(const SimConfig& config)
    : period_(config.pump.period_ns),
      eta_(config.pump.eta_ex),
      rng_(config.seed),
      level_(config.initial_level) {
  require_valid(config.ladder);
  require_valid(config.pump);
  check_level(config.ladder, level_);
  if (config.pump.mode != PumpMode::pulsed) throw StructuralError("pulsed simulator needs a pulsed pump");
  fill_decay_tables(config.ladder, down_rate_, down_transition_);
}

void PulsedSimulator::advance_pulses(std::uint64_t count, std::vector<EmissionEvent>& out) {
  const std::size_t top = down_rate_.size() - 1;
  for (std::uint64_t k = 0; k < count; ++k, ++pulse_) {
    const double start = static_cast<double>(pulse_) * period_;
    const double end = start + period_;
    while (level_ < top && rng_.bernoulli(eta_)) ++level_;
    double t = start;
    while (down_rate_[level_] > 0.0) {
      t += rng_.exponential(down_rate_[level_]);
      if (t >= end) break;
      out.push_back({t, static_cast<std::uint32_t>(down_transition_[level_])});
      --level_;
    }
  }
}

EmissionStream simulate_cw(const SimConfig& config) {
  if (!(config.duration_ns >= 0.0)) throw StructuralError("duration must be nonnegative");
  EmissionStream s;
  s.duration_ns = config.duration_ns;
  CwSimulator sim(config);
  sim.advance_until(config.duration_ns, s.events);
  return s;
}

EmissionStream simulate_pulsed(const SimConfig& config, double tagger_resolution_ps) {
  EmissionStream s;
  PulsedSimulator sim(config);
  s.duration_ns = static_cast<double>(config.n_pulses) * config.pump.period_ns;
  if (tagger_resolution_ps > 0.0 && config.pump.period_ns * 1e3 < 10.0 * tagger_resolution_ps)
    s.warnings.push_back("pulse period is shorter than ten time-tagger bins");
  sim.advance_pulses(config.n_pulses, s.events);
  return s;
}

EmissionStream simulate(const SimConfig& config, double tagger_resolution_ps) {
  return config.pump.mode == PumpMode::cw ? simulate_cw(config)
                                          : simulate_pulsed(config, tagger_resolution_ps);
}

}  // namespace tricascade
