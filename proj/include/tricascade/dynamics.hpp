#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "tricascade/errors.hpp"
#include "tricascade/expm.hpp"
#include "tricascade/levelscheme.hpp"

namespace tricascade {

template <typename Scalar = double>
using PopulationVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Unit population on `level`.
template <typename Scalar = double>
PopulationVector<Scalar> pure_state(std::size_t levels, std::size_t level) {
  PopulationVector<Scalar> p = PopulationVector<Scalar>::Zero(static_cast<Eigen::Index>(levels));
  p(static_cast<Eigen::Index>(level)) = Scalar(1);
  return p;
}

/// Stationary distribution: Q p = 0, sum(p) = 1.
template <typename Scalar = double>
PopulationVector<Scalar> steady_state(const RateGenerator<Scalar>& q) {
  const Eigen::Index n = q.rows();
  if (n == 0 || q.cols() != n) throw StructuralError("rate generator must be square and nonempty");

  Eigen::FullPivLU<RateGenerator<Scalar>> lu(q);
  lu.setThreshold(Scalar(1e-12));
  if (lu.rank() != n - 1)
    throw DegeneracyError("rate generator null space has dimension " +
                          std::to_string(n - lu.rank()) + " (disconnected ladder)");

  RateGenerator<Scalar> a = q;
  a.row(n - 1).setOnes();
  PopulationVector<Scalar> rhs = PopulationVector<Scalar>::Zero(n);
  rhs(n - 1) = Scalar(1);
  PopulationVector<Scalar> p = a.fullPivLu().solve(rhs);
  for (Eigen::Index i = 0; i < n; ++i)
    if (p(i) < Scalar(0)) p(i) = Scalar(0);
  return p / p.sum();
}

/// p(tau) = exp(Q tau) p0.
template <typename Scalar = double>
PopulationVector<Scalar> propagate(const RateGenerator<Scalar>& q, const PopulationVector<Scalar>& p0,
                                   Scalar tau_ns) {
  if (!(tau_ns >= Scalar(0))) throw StructuralError("propagation time must be nonnegative");
  if (tau_ns == Scalar(0)) return p0;
  const RateGenerator<Scalar> scaled = q * tau_ns;
  return matrix_exponential(scaled) * p0;
}

/// Normalized cross-correlation of the `alpha` (start) and `beta` (stop) lines
/// on a delay grid; tau > 0 means beta detected after alpha.
struct G2Curve {
  std::vector<double> tau_ns;
  std::vector<double> values;
  std::string alpha;
  std::string beta;
};

/// One-sided conditional correlation for tau >= 0: after an alpha emission the
/// ladder sits on alpha's lower level; g2 is the resulting beta flux relative
/// to the steady-state beta flux.
double g2_conditional(const CascadeLadder& ladder, double pump_rate_per_ns, std::size_t alpha,
                      std::size_t beta, double tau_ns);

/// Two-sided g2 from the rate model. For tau < 0 the roles of alpha and beta
/// swap; at exactly tau = 0 the mean of the two one-sided limits is reported,
/// which keeps g2_ab(tau) == g2_ba(-tau) on every grid.
///
/// Throws NormalizationError when beta's steady-state flux is zero.
G2Curve g2_cross(const CascadeLadder& ladder, const PumpProfile& pump, std::string_view alpha,
                 std::string_view beta, std::span<const double> tau_grid);

/// Largest g2 on the positive side and the corresponding delay.
struct CurveExtremum {
  double tau_ns = 0.0;
  double value = 0.0;
};
CurveExtremum bunching_peak(const G2Curve& curve);
/// Smallest g2 on the negative side.
CurveExtremum antibunching_minimum(const G2Curve& curve);

/// Steady-state emission flux Gamma_i p_i of every transition (columns, in
/// ladder order) at every pump rate (rows).
struct IntensityCurves {
  std::vector<double> pump_rate_per_ns;
  std::vector<std::string> labels;
  Eigen::MatrixXd flux_per_ns;
};

IntensityCurves pl_intensity_vs_power(const CascadeLadder& ladder, std::span<const double> power_grid);

/// Least-squares slope of log(flux) against log(power) for one transition over
/// the grid points with index in [first, last).
double loglog_slope(const IntensityCurves& curves, std::size_t transition, std::size_t first,
                    std::size_t last);

struct VisibilityPoint {
  double pump_rate_per_ns = 0.0;
  double g2_peak = 0.0;
  double peak_delay_ns = 0.0;
  double antibunching_floor = 0.0;
};

struct SweepOptions {
  /// Resolution of the positive-delay search for the bunching peak.
  double peak_step_ns = 0.005;
  /// Peak search extends to this many times the longest lifetime.
  double peak_span_lifetimes = 10.0;
  /// The floor is g2 averaged over [-floor_window_ns, 0), i.e. the value a
  /// detector bin of this width adjacent to zero delay would record.
  double floor_window_ns = 0.512;
  int floor_samples = 256;
};

std::vector<VisibilityPoint> bunching_visibility_sweep(const CascadeLadder& ladder,
                                                       std::string_view alpha, std::string_view beta,
                                                       std::span<const double> power_grid,
                                                       const SweepOptions& options = {});

std::vector<double> linear_grid(double first, double last, std::size_t points);
std::vector<double> geometric_grid(double first, double last, std::size_t points);

}  // namespace tricascade
