#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tricascade/errors.hpp"

namespace tricascade {

/// A radiative ladder-down transition `upper -> lower`.
struct Transition {
  std::size_t upper = 0;
  std::size_t lower = 0;
  std::string label;
  double wavelength_nm = 0.0;
  double radiative_rate_per_ns = 0.0;

  double lifetime_ns() const { return 1.0 / radiative_rate_per_ns; }
};

/// Ordered excitonic level scheme, ground state first.
struct CascadeLadder {
  std::vector<std::string> states;
  std::vector<Transition> transitions;
  /// transition label -> detector channel id
  std::map<std::string, std::uint8_t> channel_routing;

  std::size_t level_count() const { return states.size(); }

  std::optional<std::size_t> find_transition(std::string_view label) const;

  /// Index of the transition leaving `level`, if any.
  std::optional<std::size_t> transition_from(std::size_t level) const;

  /// transition index -> channel id. Throws StructuralError for unrouted labels.
  std::vector<std::uint8_t> routing_table() const;

  double max_lifetime_ns() const;
};

/// Triexciton cascade G -> X_R -> X_LX_R -> XX_LX_R with the exciton at 2.8 ns.
///
/// Transition labels are "XR" (exciton, 940.9 nm), "XLXR" (separated
/// biexciton, 893.1 nm) and "XXLXR" (triexciton, 894.5 nm). The biexciton and
/// triexciton lifetimes (1.5 ns, 0.7 ns) are placeholders sized so that the
/// full cascade spans about 5 ns. Routing: triexciton -> channel 0 (start),
/// biexciton -> 1, exciton -> 2.
CascadeLadder default_ladder();

/// Ladder with `rates_per_ns.size()` transitions above the ground state,
/// labels "T1".."Tn" routed to channels 0..n-1.
CascadeLadder uniform_ladder(const std::vector<double>& rates_per_ns);

enum class Severity { error, warning };

struct LadderViolation {
  Severity severity = Severity::error;
  std::string kind;
  std::optional<std::size_t> transition;
  std::optional<std::size_t> level;
  std::string message;
};

/// Every invariant violation of `ladder`; empty means valid. Shared detector
/// channels are reported as warnings only.
std::vector<LadderViolation> validate_ladder(const CascadeLadder& ladder);

bool has_errors(const std::vector<LadderViolation>& violations);

/// Throws StructuralError listing the first error-level violation.
void require_valid(const CascadeLadder& ladder);

enum class PumpMode { cw, pulsed };

struct PumpProfile {
  PumpMode mode = PumpMode::cw;
  double rate_per_ns = 0.0;  // W_p, cw
  double period_ns = 12.5;   // pulsed
  double eta_ex = 0.0;       // per-step promotion probability, pulsed

  static PumpProfile cw(double rate_per_ns) { return {PumpMode::cw, rate_per_ns, 12.5, 0.0}; }
  static PumpProfile pulsed(double period_ns, double eta_ex) {
    return {PumpMode::pulsed, 0.0, period_ns, eta_ex};
  }
};

void require_valid(const PumpProfile& pump);

template <typename Scalar = double>
using RateGenerator = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Up-shift pattern U with U(i+1, i) = 1 and matching diagonal, so that
/// build_generator(ladder, w) == build_generator(ladder, 0) + w * U.
template <typename Scalar = double>
RateGenerator<Scalar> up_shift_matrix(std::size_t levels) {
  RateGenerator<Scalar> u = RateGenerator<Scalar>::Zero(levels, levels);
  for (std::size_t i = 0; i + 1 < levels; ++i) {
    u(i + 1, i) = Scalar(1);
    u(i, i) = Scalar(-1);
  }
  return u;
}

/// Column-stochastic rate generator: Q(j, i) is the rate of i -> j and every
/// column sums to zero. The pump rate is applied to every ladder-up step.
template <typename Scalar = double>
RateGenerator<Scalar> build_generator(const CascadeLadder& ladder, Scalar pump_rate_per_ns) {
  require_valid(ladder);
  if (!(pump_rate_per_ns >= Scalar(0)))
    throw StructuralError("pump rate must be nonnegative");
  const auto n = static_cast<Eigen::Index>(ladder.level_count());
  RateGenerator<Scalar> q = RateGenerator<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) q(i + 1, i) = pump_rate_per_ns;
  for (const auto& t : ladder.transitions)
    q(static_cast<Eigen::Index>(t.lower), static_cast<Eigen::Index>(t.upper)) +=
        static_cast<Scalar>(t.radiative_rate_per_ns);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar out = Scalar(0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) out += q(j, i);
    q(i, i) = -out;
  }
  return q;
}

}  // namespace tricascade
