#include "tricascade/levelscheme.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tricascade {

std::optional<std::size_t> CascadeLadder::find_transition(std::string_view label) const {
  for (std::size_t i = 0; i < transitions.size(); ++i)
    if (transitions[i].label == label) return i;
  return std::nullopt;
}

std::optional<std::size_t> CascadeLadder::transition_from(std::size_t level) const {
  for (std::size_t i = 0; i < transitions.size(); ++i)
    if (transitions[i].upper == level) return i;
  return std::nullopt;
}

std::vector<std::uint8_t> CascadeLadder::routing_table() const {
  std::vector<std::uint8_t> table;
  table.reserve(transitions.size());
  for (const auto& t : transitions) {
    auto it = channel_routing.find(t.label);
    if (it == channel_routing.end())
      throw StructuralError("transition '" + t.label + "' is not routed to a detector channel");
    table.push_back(it->second);
  }
  return table;
}

double CascadeLadder::max_lifetime_ns() const {
  double m = 0.0;
  for (const auto& t : transitions) m = std::max(m, t.lifetime_ns());
  return m;
}

CascadeLadder default_ladder() {
  CascadeLadder ladder;
  ladder.states = {"G", "X_R", "X_LX_R", "XX_LX_R"};
  ladder.transitions = {
      {1, 0, "XR", 940.9, 1.0 / 2.8},
      {2, 1, "XLXR", 893.1, 1.0 / 1.5},
      {3, 2, "XXLXR", 894.5, 1.0 / 0.7},
  };
  ladder.channel_routing = {{"XXLXR", 0}, {"XLXR", 1}, {"XR", 2}};
  return ladder;
}

CascadeLadder uniform_ladder(const std::vector<double>& rates_per_ns) {
  CascadeLadder ladder;
  ladder.states.push_back("L0");
  for (std::size_t i = 0; i < rates_per_ns.size(); ++i) {
    const std::string label = "T" + std::to_string(i + 1);
    ladder.states.push_back("L" + std::to_string(i + 1));
    ladder.transitions.push_back({i + 1, i, label, 900.0, rates_per_ns[i]});
    ladder.channel_routing[label] = static_cast<std::uint8_t>(i);
  }
  return ladder;
}

std::vector<LadderViolation> validate_ladder(const CascadeLadder& ladder) {
  std::vector<LadderViolation> out;
  auto error = [&](std::string kind, std::optional<std::size_t> t, std::optional<std::size_t> l,
                   std::string msg) {
    out.push_back({Severity::error, std::move(kind), t, l, std::move(msg)});
  };

  const std::size_t n = ladder.level_count();
  if (n < 2) error("too few levels", std::nullopt, std::nullopt, "ladder needs at least two levels");

  std::set<std::string> labels;
  std::vector<int> leaving(n, 0);
  for (std::size_t i = 0; i < ladder.transitions.size(); ++i) {
    const auto& t = ladder.transitions[i];
    const auto tag = "transition " + std::to_string(i) + " ('" + t.label + "')";
    if (t.upper >= n || t.lower >= n) {
      error("level out of range", i, std::nullopt, tag + " references a missing level");
      continue;
    }
    if (t.upper != t.lower + 1)
      error("non-adjacent transition", i, t.upper,
            tag + " connects " + std::to_string(t.upper) + " -> " + std::to_string(t.lower));
    else
      ++leaving[t.upper];
    if (!(t.radiative_rate_per_ns > 0.0) || !std::isfinite(t.radiative_rate_per_ns))
      error("nonpositive rate", i, std::nullopt, tag + " has a nonpositive radiative rate");
    if (!(t.wavelength_nm > 0.0) || !std::isfinite(t.wavelength_nm))
      error("nonpositive wavelength", i, std::nullopt, tag + " has a nonpositive wavelength");
    if (!labels.insert(t.label).second)
      error("duplicate label", i, std::nullopt, tag + " reuses a label");
    if (!ladder.channel_routing.contains(t.label))
      error("unrouted transition", i, std::nullopt, tag + " is not routed to a detector channel");
  }
  for (std::size_t level = 1; level < n; ++level) {
    if (leaving[level] == 0)
      error("missing transition", std::nullopt, level,
            "level " + std::to_string(level) + " has no radiative decay");
    else if (leaving[level] > 1)
      error("duplicate transition", std::nullopt, level,
            "level " + std::to_string(level) + " has more than one radiative decay");
  }

  std::map<std::uint8_t, std::string> by_channel;
  for (const auto& [label, channel] : ladder.channel_routing) {
    if (!labels.contains(label)) {
      error("unknown routed label", std::nullopt, std::nullopt,
            "routing names unknown transition '" + label + "'");
      continue;
    }
    auto [it, fresh] = by_channel.emplace(channel, label);
    if (!fresh)
      out.push_back({Severity::warning, "shared channel", std::nullopt, std::nullopt,
                     "transitions '" + it->second + "' and '" + label + "' share channel " +
                         std::to_string(channel)});
  }
  return out;
}

bool has_errors(const std::vector<LadderViolation>& violations) {
  return std::any_of(violations.begin(), violations.end(),
                     [](const auto& v) { return v.severity == Severity::error; });
}

void require_valid(const CascadeLadder& ladder) {
  for (const auto& v : validate_ladder(ladder))
    if (v.severity == Severity::error) throw StructuralError("invalid ladder: " + v.message);
}

void require_valid(const PumpProfile& pump) {
  if (!(pump.rate_per_ns >= 0.0) || !std::isfinite(pump.rate_per_ns))
    throw StructuralError("pump rate must be finite and nonnegative");
  if (pump.mode == PumpMode::pulsed) {
    if (!(pump.period_ns > 0.0)) throw StructuralError("pulse period must be positive");
    if (!(pump.eta_ex >= 0.0 && pump.eta_ex <= 1.0))
      throw StructuralError("eta_ex must lie in [0, 1]");
  }
}

}  // namespace tricascade
