#include "tricascade/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

namespace tricascade {

namespace {

/// Normal equations of a two-parameter weighted least-squares problem at one
/// parameter point: h = J^T W J, g = J^T W r with r = y - model.
struct Linearization {
  Eigen::Matrix2d h;
  Eigen::Vector2d g;
  double cost = 0.0;
};

struct LmOutcome {
  Eigen::Vector2d p;
  Linearization lin;
  int iterations = 0;
  bool converged = false;
};

/// Damped Gauss-Newton. `linearize` returns nullopt for parameters outside the
/// model's domain; such trial steps are rejected like uphill ones.
template <typename F>
LmOutcome levenberg_marquardt(Eigen::Vector2d p, F&& linearize, const FitOptions& options) {
  auto first = linearize(p);
  if (!first) throw FitError("initial parameters lie outside the model domain", {});
  LmOutcome out{p, *first, 0, false};
  double lambda = 1e-3 * std::max(out.lin.h.diagonal().maxCoeff(), 1e-300);

  for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
    if (out.lin.cost == 0.0 || out.lin.g.cwiseAbs().maxCoeff() == 0.0) {
      out.converged = true;
      return out;
    }
    Eigen::Matrix2d damped = out.lin.h;
    damped.diagonal() += lambda * out.lin.h.diagonal().cwiseMax(1e-300);
    const Eigen::Vector2d step = damped.ldlt().solve(out.lin.g);
    const Eigen::Vector2d trial_p = out.p + step;
    auto trial = step.allFinite() ? linearize(trial_p) : std::nullopt;
    if (trial && trial->cost <= out.lin.cost) {
      const double drop = out.lin.cost - trial->cost;
      out.p = trial_p;
      out.lin = *trial;
      lambda = std::max(lambda / 10.0, 1e-15);
      const bool small_step =
          (step.cwiseAbs().array() <= options.tolerance * (out.p.cwiseAbs().array() + options.tolerance)).all();
      if (small_step || drop <= options.tolerance * out.lin.cost) {
        out.converged = true;
        ++out.iterations;
        return out;
      }
    } else {
      lambda *= 10.0;
      // No step can lower the cost any further: the minimum is resolved to
      // rounding precision.
      if (lambda > 1e16) {
        out.converged = true;
        return out;
      }
    }
  }
  return out;
}

Eigen::Matrix2d covariance(const Eigen::Matrix2d& h) {
  Eigen::FullPivLU<Eigen::Matrix2d> lu(h);
  if (!lu.isInvertible())
    return Eigen::Matrix2d::Constant(std::numeric_limits<double>::infinity());
  return lu.inverse();
}

}  // namespace

FitResult fit_antibunching(const G2Curve& curve, FitSide side, const FitOptions& options) {
  if (curve.tau_ns.size() != curve.values.size()) throw StructuralError("curve delay and value lengths differ");
  std::vector<double> x, y;  // x = |tau|
  for (std::size_t i = 0; i < curve.tau_ns.size(); ++i) {
    const double t = curve.tau_ns[i];
    if ((side == FitSide::negative && t < 0.0) || (side == FitSide::positive && t > 0.0)) {
      if (!std::isfinite(curve.values[i]) || !std::isfinite(t)) throw StructuralError("curve holds non-finite values");
      x.push_back(std::abs(t));
      y.push_back(curve.values[i]);
    }
  }
  const std::size_t n = x.size();
  if (n < 5) throw StructuralError("antibunching fit needs at least 5 points on the chosen side");

  std::vector<double> w(n, 1.0);
  if (options.poisson_weights)
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / std::max(y[i], options.weight_floor);

  // Starting point: depth of the dip and the delay where it has recovered to
  // 1 - a/e.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return x[i] < x[j]; });
  const double a0 = 1.0 - *std::min_element(y.begin(), y.end());
  double tau0 = 0.0;
  const double target = 1.0 - a0 / std::exp(1.0);
  for (auto i : order)
    if ((a0 >= 0.0 && y[i] >= target) || (a0 < 0.0 && y[i] <= target)) {
      tau0 = x[i];
      break;
    }
  if (!(tau0 > 0.0)) tau0 = x[order[n / 2]];

  auto linearize = [&](const Eigen::Vector2d& p) -> std::optional<Linearization> {
    const double a = p(0), tau = p(1);
    if (!(tau > 0.0) || !std::isfinite(a)) return std::nullopt;
    Linearization lin;
    lin.h.setZero();
    lin.g.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(-x[i] / tau);
      const double r = y[i] - (1.0 - a * e);
      const Eigen::Vector2d j(-e, -a * e * x[i] / (tau * tau));
      lin.h.noalias() += w[i] * j * j.transpose();
      lin.g += w[i] * r * j;
      lin.cost += w[i] * r * r;
    }
    return lin;
  };

  const auto lm = levenberg_marquardt(Eigen::Vector2d(a0, tau0), linearize, options);
  FitResult r;
  r.a = lm.p(0);
  r.tau_fit_ns = lm.p(1);
  r.g2_at_zero = 1.0 - r.a;
  r.iterations = lm.iterations;
  r.converged = lm.converged;
  r.points = n;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double res = y[i] - (1.0 - r.a * std::exp(-x[i] / r.tau_fit_ns));
    sse += res * res;
  }
  r.residual_rms = std::sqrt(sse / static_cast<double>(n));
  const Eigen::Matrix2d cov = covariance(lm.lin.h) * (lm.lin.cost / static_cast<double>(n - 2));
  r.std_errors = {std::sqrt(cov(0, 0)), std::sqrt(cov(1, 1))};
  if (!lm.converged) throw FitError("antibunching fit did not converge", r);
  return r;
}

DecayHistogram histogram_delays(std::span<const double> delays_ns, double span_ns, std::size_t bins) {
  if (bins == 0 || !(span_ns > 0.0)) throw StructuralError("decay histogram needs bins and a positive span");
  DecayHistogram h;
  const double width = span_ns / static_cast<double>(bins);
  h.counts.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) h.time_ns.push_back((static_cast<double>(k) + 0.5) * width);
  for (double d : delays_ns)
    if (d >= 0.0 && d < span_ns) h.counts[std::min(bins - 1, static_cast<std::size_t>(d / width))] += 1.0;
  return h;
}

LifetimeFit fit_lifetime(const DecayHistogram& histogram, std::optional<double> start_ns,
                         const FitOptions& options) {
  const auto& t = histogram.time_ns;
  const auto& c = histogram.counts;
  if (t.size() != c.size() || t.empty()) throw StructuralError("decay histogram is empty or ragged");

  std::size_t start = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
  if (start_ns) {
    start = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), *start_ns) - t.begin());
    if (start >= t.size()) throw FitError("fit start lies beyond the histogram", {});
  }
  const std::size_t n = t.size() - start;
  const auto nonzero = std::count_if(c.begin() + static_cast<std::ptrdiff_t>(start), c.end(),
                                     [](double v) { return v > 0.0; });
  if (nonzero == 0) throw FitError("decay tail holds no counts", {});
  if (nonzero < 10) throw FitError("decay tail needs at least 10 nonzero bins", {});

  const double t0 = t[start];
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = t[start + i] - t0;
    y[i] = c[start + i];
  }

  // Log-linear regression on the nonzero bins for the starting point.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (y[i] > 0) {
      const double ly = std::log(y[i]);
      sx += x[i];
      sy += ly;
      sxx += x[i] * x[i];
      sxy += x[i] * ly;
      m += 1;
    }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  double tau0 = slope < 0.0 ? -1.0 / slope : (x.back() > 0 ? x.back() : 1.0);
  double amp0 = std::max(y[0], 1e-3);

  // Poisson maximum likelihood: weights 1/mu refreshed at every point, cost is
  // the deviance.
  auto linearize = [&](const Eigen::Vector2d& p) -> std::optional<Linearization> {
    const double amp = p(0), tau = p(1);
    if (!(amp > 0.0) || !(tau > 0.0)) return std::nullopt;
    Linearization lin;
    lin.h.setZero();
    lin.g.setZero();
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(-x[i] / tau);
      const double mu = amp * e;
      if (!(mu > 0.0)) return std::nullopt;
      const Eigen::Vector2d j(e, amp * e * x[i] / (tau * tau));
      const double wi = 1.0 / mu;
      lin.h.noalias() += wi * j * j.transpose();
      lin.g += wi * (y[i] - mu) * j;
      lin.cost += 2.0 * (mu - y[i] + (y[i] > 0.0 ? y[i] * std::log(y[i] / mu) : 0.0));
    }
    return lin;
  };

  const auto lm = levenberg_marquardt(Eigen::Vector2d(amp0, tau0), linearize, options);
  LifetimeFit r;
  r.amplitude = lm.p(0);
  r.tau_ns = lm.p(1);
  r.start_index = start;
  r.points = n;
  r.iterations = lm.iterations;
  r.tau_std_error = std::sqrt(covariance(lm.lin.h)(1, 1));
  if (!lm.converged) {
    FitResult best;
    best.tau_fit_ns = r.tau_ns;
    best.a = r.amplitude;
    best.iterations = lm.iterations;
    throw FitError("lifetime fit did not converge", best);
  }
  return r;
}

std::optional<double> tunneling_decompose(double tau_d_ns, double tau_r_ns) {
  if (!(tau_d_ns > 0.0) || !(tau_r_ns > 0.0)) throw StructuralError("lifetimes must be positive");
  if (tau_d_ns >= tau_r_ns) return std::nullopt;
  return 1.0 / (1.0 / tau_d_ns - 1.0 / tau_r_ns);
}

void EfficiencyBudget::validate() const {
  const std::pair<const char*, double> fields[] = {{"eta_d1", eta_d1}, {"eta_d2", eta_d2}, {"eta_d3", eta_d3},
                                                   {"eta_c", eta_c},   {"eta_f", eta_f},   {"eta_g", eta_g},
                                                   {"eta_ex", eta_ex}};
  for (const auto& [name, v] : fields)
    if (!(v >= 0.0 && v <= 1.0)) throw StructuralError(std::string(name) + " must lie in [0, 1]");
  if (!(n_p_hz >= 0.0) || !std::isfinite(n_p_hz)) throw StructuralError("n_p must be a nonnegative rate");
}

double triplet_detection_probability(const EfficiencyBudget& b) {
  b.validate();
  const double stage = b.eta_c * b.eta_g * b.eta_f;
  return b.eta_d1 * b.eta_d2 * b.eta_d3 * stage * stage * stage;
}

CollectionInversion invert_collection_efficiency(double pair_probability, double eta_d1, double eta_d2,
                                                 double eta_g, double eta_f) {
  const std::pair<const char*, double> fields[] = {
      {"pair probability", pair_probability}, {"eta_d1", eta_d1}, {"eta_d2", eta_d2}, {"eta_g", eta_g}, {"eta_f", eta_f}};
  for (const auto& [name, v] : fields)
    if (!(v > 0.0 && v <= 1.0)) throw StructuralError(std::string(name) + " must lie in (0, 1]");
  const double others = eta_d1 * eta_d2 * eta_g * eta_g * eta_f * eta_f;
  CollectionInversion r;
  r.eta_c = std::sqrt(pair_probability / others);
  r.inconsistent = pair_probability > others;
  if (r.eta_c > 1.0) {
    r.eta_c = 1.0;
    r.clamped = true;
  }
  return r;
}

double predict_coherent_triplet_rate(const EfficiencyBudget& b) {
  return b.eta_ex * triplet_detection_probability(b) * b.n_p_hz;
}

}  // namespace tricascade
