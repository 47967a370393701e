#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tricascade/dynamics.hpp"
#include "tricascade/errors.hpp"

namespace tricascade {

enum class FitSide { negative, positive };

struct FitResult {
  double a = 0.0;
  double tau_fit_ns = 0.0;
  double g2_at_zero = 1.0;  // 1 - a
  double residual_rms = 0.0;
  std::array<double, 2> std_errors{};  // (a, tau_fit)
  int iterations = 0;
  bool converged = false;
  std::size_t points = 0;
};

/// Thrown when the optimizer runs out of iterations or cannot start;
/// `best()` holds the lowest-cost parameters reached.
class FitError : public Error {
 public:
  FitError(const std::string& what, FitResult best)
      : Error(ErrorCategory::compute, what), best_(best) {}
  const FitResult& best() const noexcept { return best_; }

 private:
  FitResult best_;
};

struct FitOptions {
  int max_iterations = 200;
  double tolerance = 1e-12;  // relative step and cost change
  /// Per-point weights 1/max(y, floor) ~ Poisson variance of a count curve.
  bool poisson_weights = false;
  double weight_floor = 1e-3;
};

/// Least squares of 1 - a exp(tau / tau_fit) on tau < 0, or of the mirrored
/// form 1 - a exp(-tau / tau_fit) on tau > 0.
FitResult fit_antibunching(const G2Curve& curve, FitSide side, const FitOptions& options = {});

/// Decay histogram: counts per bin, bin centres in ns.
struct DecayHistogram {
  std::vector<double> time_ns;
  std::vector<double> counts;
};

struct LifetimeFit {
  double tau_ns = 0.0;
  double tau_std_error = 0.0;
  double amplitude = 0.0;
  std::size_t start_index = 0;
  std::size_t points = 0;
  int iterations = 0;
};

/// Mono-exponential fit A exp(-(t - t0)/tau) from the peak bin (or from the
/// first bin at or after `start_ns`) to the end of the histogram. Residuals
/// are Poisson weighted.
LifetimeFit fit_lifetime(const DecayHistogram& histogram, std::optional<double> start_ns = std::nullopt,
                         const FitOptions& options = {});

/// Histogram of delays `delays_ns` into `bins` equal bins over [0, span_ns).
DecayHistogram histogram_delays(std::span<const double> delays_ns, double span_ns, std::size_t bins);

/// 1/tau_t = 1/tau_d - 1/tau_r; nullopt when tau_d >= tau_r (tunneling not
/// resolvable).
std::optional<double> tunneling_decompose(double tau_d_ns, double tau_r_ns);

struct EfficiencyBudget {
  double eta_d1 = 0.25;
  double eta_d2 = 0.25;
  double eta_d3 = 0.15;
  double eta_c = 0.46;
  double eta_f = 0.85;
  double eta_g = 0.75;
  double eta_ex = 0.9;
  double n_p_hz = 80e6;

  /// Throws StructuralError naming the first field out of range.
  void validate() const;
};

double triplet_detection_probability(const EfficiencyBudget& b);

struct CollectionInversion {
  double eta_c = 0.0;
  bool clamped = false;       // raw value exceeded 1
  bool inconsistent = false;  // pair probability above the other stages' product
};

CollectionInversion invert_collection_efficiency(double pair_probability, double eta_d1, double eta_d2,
                                                 double eta_g, double eta_f);

double predict_coherent_triplet_rate(const EfficiencyBudget& b);

}  // namespace tricascade
