#include "tricascade/dynamics.hpp"

#include <algorithm>
#include <limits>

namespace tricascade {
namespace {

std::size_t transition_index(const CascadeLadder& ladder, std::string_view label) {
  auto idx = ladder.find_transition(label);
  if (!idx) throw StructuralError("unknown transition '" + std::string(label) + "'");
  return *idx;
}

struct ConditionalModel {
  RateGenerator<double> q;
  PopulationVector<double> stationary;
};

ConditionalModel make_model(const CascadeLadder& ladder, double pump_rate_per_ns) {
  ConditionalModel m;
  m.q = build_generator(ladder, pump_rate_per_ns);
  m.stationary = steady_state(m.q);
  return m;
}

double conditional(const CascadeLadder& ladder, const ConditionalModel& m, std::size_t alpha,
                   std::size_t beta, double tau_ns) {
  const auto& a = ladder.transitions[alpha];
  const auto& b = ladder.transitions[beta];
  const double reference = m.stationary(static_cast<Eigen::Index>(b.upper));
  if (!(reference > 0.0))
    throw NormalizationError("steady-state flux of '" + b.label + "' is zero");
  const auto start = pure_state(ladder.level_count(), a.lower);
  const auto p = propagate(m.q, start, tau_ns);
  return std::max(0.0, p(static_cast<Eigen::Index>(b.upper))) / reference;
}

}  // namespace

double g2_conditional(const CascadeLadder& ladder, double pump_rate_per_ns, std::size_t alpha,
                      std::size_t beta, double tau_ns) {
  if (alpha >= ladder.transitions.size() || beta >= ladder.transitions.size())
    throw StructuralError("transition index out of range");
  return conditional(ladder, make_model(ladder, pump_rate_per_ns), alpha, beta, tau_ns);
}

G2Curve g2_cross(const CascadeLadder& ladder, const PumpProfile& pump, std::string_view alpha,
                 std::string_view beta, std::span<const double> tau_grid) {
  require_valid(pump);
  if (pump.mode != PumpMode::cw)
    throw StructuralError("analytic g2 needs a cw pump (an instantaneous rate)");
  const auto ia = transition_index(ladder, alpha);
  const auto ib = transition_index(ladder, beta);
  const auto model = make_model(ladder, pump.rate_per_ns);

  G2Curve curve;
  curve.alpha = std::string(alpha);
  curve.beta = std::string(beta);
  curve.tau_ns.assign(tau_grid.begin(), tau_grid.end());
  curve.values.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    if (!std::isfinite(tau)) throw StructuralError("delay grid must be finite");
    double v;
    if (tau > 0.0)
      v = conditional(ladder, model, ia, ib, tau);
    else if (tau < 0.0)
      v = conditional(ladder, model, ib, ia, -tau);
    else
      v = 0.5 * (conditional(ladder, model, ia, ib, 0.0) + conditional(ladder, model, ib, ia, 0.0));
    curve.values.push_back(v);
  }
  return curve;
}

CurveExtremum bunching_peak(const G2Curve& curve) {
  CurveExtremum best{0.0, -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < curve.tau_ns.size(); ++i)
    if (curve.tau_ns[i] > 0.0 && curve.values[i] > best.value) best = {curve.tau_ns[i], curve.values[i]};
  return best;
}

CurveExtremum antibunching_minimum(const G2Curve& curve) {
  CurveExtremum best{0.0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < curve.tau_ns.size(); ++i)
    if (curve.tau_ns[i] < 0.0 && curve.values[i] < best.value) best = {curve.tau_ns[i], curve.values[i]};
  return best;
}

IntensityCurves pl_intensity_vs_power(const CascadeLadder& ladder, std::span<const double> power_grid) {
  require_valid(ladder);
  IntensityCurves out;
  out.pump_rate_per_ns.assign(power_grid.begin(), power_grid.end());
  for (const auto& t : ladder.transitions) out.labels.push_back(t.label);
  out.flux_per_ns = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(power_grid.size()),
                                          static_cast<Eigen::Index>(ladder.transitions.size()));
  for (std::size_t r = 0; r < power_grid.size(); ++r) {
    const double w = power_grid[r];
    if (!(w >= 0.0)) throw StructuralError("pump rates must be nonnegative");
    if (w == 0.0) continue;  // everything relaxes to the ground state
    const auto p = steady_state(build_generator(ladder, w));
    for (std::size_t c = 0; c < ladder.transitions.size(); ++c) {
      const auto& t = ladder.transitions[c];
      out.flux_per_ns(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          t.radiative_rate_per_ns * p(static_cast<Eigen::Index>(t.upper));
    }
  }
  return out;
}

double loglog_slope(const IntensityCurves& curves, std::size_t transition, std::size_t first,
                    std::size_t last) {
  if (last <= first + 1 || last > curves.pump_rate_per_ns.size())
    throw StructuralError("slope fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(last - first);
  for (std::size_t i = first; i < last; ++i) {
    const double x = std::log(curves.pump_rate_per_ns[i]);
    const double y = std::log(curves.flux_per_ns(static_cast<Eigen::Index>(i),
                                                 static_cast<Eigen::Index>(transition)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<VisibilityPoint> bunching_visibility_sweep(const CascadeLadder& ladder,
                                                       std::string_view alpha, std::string_view beta,
                                                       std::span<const double> power_grid,
                                                       const SweepOptions& options) {
  const auto ia = transition_index(ladder, alpha);
  const auto ib = transition_index(ladder, beta);
  const double span = options.peak_span_lifetimes * ladder.max_lifetime_ns();

  std::vector<VisibilityPoint> out;
  out.reserve(power_grid.size());
  for (double w : power_grid) {
    const auto model = make_model(ladder, w);
    VisibilityPoint pt;
    pt.pump_rate_per_ns = w;
    pt.g2_peak = -1.0;
    for (double tau = options.peak_step_ns; tau <= span; tau += options.peak_step_ns) {
      const double v = conditional(ladder, model, ia, ib, tau);
      if (v > pt.g2_peak) {
        pt.g2_peak = v;
        pt.peak_delay_ns = tau;
      }
    }
    // midpoint rule over [-window, 0)
    double acc = 0.0;
    const double h = options.floor_window_ns / options.floor_samples;
    for (int k = 0; k < options.floor_samples; ++k)
      acc += conditional(ladder, model, ib, ia, (k + 0.5) * h);
    pt.antibunching_floor = acc / options.floor_samples;
    out.push_back(pt);
  }
  return out;
}

std::vector<double> linear_grid(double first, double last, std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = points == 1 ? first : first + (last - first) * static_cast<double>(i) / (points - 1);
  return g;
}

std::vector<double> geometric_grid(double first, double last, std::size_t points) {
  std::vector<double> g(points);
  const double ratio = std::log(last / first);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = points == 1 ? first : first * std::exp(ratio * static_cast<double>(i) / (points - 1));
  return g;
}

}  // namespace tricascade
