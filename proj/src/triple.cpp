#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tricascade/correlator.hpp"

namespace tricascade {

DelayWindow default_cw_window() { return {-768, 1280, -1280, 2304}; }

Histogram2D::Histogram2D(DelayAxis tau21, DelayAxis tau31, std::array<std::uint8_t, 3> channels)
    : tau21_(tau21), tau31_(tau31), channels_(channels) {
  if (tau21_.size() > kMaxBinsPerAxis || tau31_.size() > kMaxBinsPerAxis)
    throw SizeError("triple histogram axis exceeds " + std::to_string(kMaxBinsPerAxis) + " bins");
  const std::size_t cells = tau21_.size() * tau31_.size();
  dense_ = cells <= kMaxDenseBins;
  if (dense_) cells_.assign(cells, 0);
}

std::uint64_t Histogram2D::at(std::size_t i21, std::size_t i31) const {
  const std::size_t key = i21 * tau31_.size() + i31;
  if (dense_) return cells_[key];
  auto it = sparse_.find(key);
  return it == sparse_.end() ? 0 : it->second;
}

void Histogram2D::add(std::size_t i21, std::size_t i31, std::uint64_t n) {
  const std::size_t key = i21 * tau31_.size() + i31;
  if (dense_)
    cells_[key] += n;
  else
    sparse_[key] += n;
}

std::uint64_t Histogram2D::sum() const {
  std::uint64_t s = 0;
  if (dense_)
    for (auto c : cells_) s += c;
  else
    for (const auto& [k, c] : sparse_) s += c;
  return s;
}

bool Histogram2D::same_binning(const Histogram2D& other) const {
  return tau21_ == other.tau21_ && tau31_ == other.tau31_ && channels_ == other.channels_;
}

void accumulate_triples(std::span<const std::uint64_t> t1, std::size_t begin, std::size_t end,
                        std::span<const std::uint64_t> t2, std::span<const std::uint64_t> t3,
                        Histogram2D& hist) {
  const DelayAxis& ax21 = hist.tau21();
  const DelayAxis& ax31 = hist.tau31();
  const std::int64_t min21 = ax21.min_delay_ps(), max21 = ax21.max_delay_ps();
  const std::int64_t min31 = ax31.min_delay_ps(), max31 = ax31.max_delay_ps();
  std::size_t lo2 = 0, lo3 = 0;
  if (begin < end) {
    auto clamp0 = [](std::int64_t v) { return static_cast<std::uint64_t>(std::max<std::int64_t>(v, 0)); };
    const auto a0 = static_cast<std::int64_t>(t1[begin]);
    lo2 = static_cast<std::size_t>(std::lower_bound(t2.begin(), t2.end(), clamp0(a0 + min21)) - t2.begin());
    lo3 = static_cast<std::size_t>(std::lower_bound(t3.begin(), t3.end(), clamp0(a0 + min31)) - t3.begin());
  }
  for (std::size_t i = begin; i < end; ++i) {
    const auto a = static_cast<std::int64_t>(t1[i]);
    while (lo2 < t2.size() && static_cast<std::int64_t>(t2[lo2]) < a + min21) ++lo2;
    while (lo3 < t3.size() && static_cast<std::int64_t>(t3[lo3]) < a + min31) ++lo3;
    for (std::size_t j = lo2; j < t2.size(); ++j) {
      const std::int64_t d21 = static_cast<std::int64_t>(t2[j]) - a;
      if (d21 > max21) break;
      const std::size_t i21 = ax21.index(d21);
      for (std::size_t k = lo3; k < t3.size(); ++k) {
        const std::int64_t d31 = static_cast<std::int64_t>(t3[k]) - a;
        if (d31 > max31) break;
        hist.add(i21, ax31.index(d31));
      }
    }
  }
}

namespace {

Histogram2D empty_triple_histogram(std::uint8_t ch1, std::uint8_t ch2, std::uint8_t ch3, const DelayWindow& range,
                                   std::int64_t bin_width_ps) {
  if (ch1 == ch2 || ch1 == ch3 || ch2 == ch3) throw StructuralError("triple coincidences need three distinct channels");
  if (bin_width_ps <= 0) throw StructuralError("bin width must be positive");
  // Size check happens before any allocation.
  const auto bins = [&](std::int64_t lo, std::int64_t hi) {
    return hi < lo ? 0.0 : static_cast<double>(hi - lo) / static_cast<double>(bin_width_ps) + 1.0;
  };
  if (bins(range.t21_min_ps, range.t21_max_ps) > static_cast<double>(kMaxBinsPerAxis) ||
      bins(range.t31_min_ps, range.t31_max_ps) > static_cast<double>(kMaxBinsPerAxis))
    throw SizeError("triple histogram window exceeds " + std::to_string(kMaxBinsPerAxis) + " bins per axis");
  return Histogram2D(DelayAxis::covering(range.t21_min_ps, range.t21_max_ps, bin_width_ps),
                     DelayAxis::covering(range.t31_min_ps, range.t31_max_ps, bin_width_ps), {ch1, ch2, ch3});
}

}  // namespace

Histogram2D triple_histogram(const TimeTagStream& stream, std::uint8_t ch1, std::uint8_t ch2,
                             std::uint8_t ch3, const DelayWindow& range, std::int64_t bin_width_ps) {
  Histogram2D hist = empty_triple_histogram(ch1, ch2, ch3, range, bin_width_ps);
  std::vector<std::uint64_t> t1, t2, t3;
  for (const auto& t : stream.tags) {
    if (t.channel == ch1) t1.push_back(t.timestamp_ps);
    else if (t.channel == ch2) t2.push_back(t.timestamp_ps);
    else if (t.channel == ch3) t3.push_back(t.timestamp_ps);
  }
  accumulate_triples(t1, 0, t1.size(), t2, t3, hist);
  hist.acquisition_ps = stream.acquisition_ps;
  hist.total_starts = t1.size();
  return hist;
}

StreamingTriples::StreamingTriples(std::uint8_t ch1, std::uint8_t ch2, std::uint8_t ch3, const DelayWindow& range,
                                   std::int64_t bin_width_ps)
    : hist_(empty_triple_histogram(ch1, ch2, ch3, range, bin_width_ps)) {}

void StreamingTriples::feed(std::span<const TimeTag> tags) {
  const auto& ch = hist_.channels();
  for (const auto& t : tags) {
    if (seen_ && t.timestamp_ps < last_ts_) throw StructuralError("streaming triple input is not sorted");
    seen_ = true;
    last_ts_ = t.timestamp_ps;
    if (t.channel == ch[0]) t1_.push_back(t.timestamp_ps);
    else if (t.channel == ch[1]) t2_.push_back(t.timestamp_ps);
    else if (t.channel == ch[2]) t3_.push_back(t.timestamp_ps);
  }
  flush(false);
}

void StreamingTriples::flush(bool all) {
  const std::int64_t reach = std::max(hist_.tau21().max_delay_ps(), hist_.tau31().max_delay_ps());
  std::size_t end = next_start_;
  while (end < t1_.size() &&
         (all || static_cast<std::int64_t>(t1_[end]) + reach < static_cast<std::int64_t>(last_ts_)))
    ++end;
  accumulate_triples(t1_, next_start_, end, t2_, t3_, hist_);
  hist_.total_starts += end - next_start_;
  next_start_ = end;

  const std::int64_t anchor = static_cast<std::int64_t>(next_start_ < t1_.size() ? t1_[next_start_] : last_ts_);
  auto compact = [](std::vector<std::uint64_t>& v, std::int64_t horizon) {
    std::size_t drop = 0;
    while (drop < v.size() && static_cast<std::int64_t>(v[drop]) < horizon) ++drop;
    if (drop > 4096 && drop * 2 > v.size()) v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(drop));
  };
  compact(t2_, anchor + hist_.tau21().min_delay_ps());
  compact(t3_, anchor + hist_.tau31().min_delay_ps());
  if (next_start_ > 4096 && next_start_ * 2 > t1_.size()) {
    t1_.erase(t1_.begin(), t1_.begin() + static_cast<std::ptrdiff_t>(next_start_));
    next_start_ = 0;
  }
}

Histogram2D StreamingTriples::finish(std::uint64_t acquisition_ps) {
  flush(true);
  hist_.acquisition_ps = acquisition_ps;
  return hist_;
}

Histogram2D merge_histograms(std::span<const Histogram2D> parts) {
  if (parts.empty()) throw StructuralError("nothing to merge");
  Histogram2D out = parts.front();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const auto& h = parts[p];
    if (!h.same_binning(out)) throw StructuralError("histogram axes differ");
    for (std::size_t i = 0; i < out.tau21().size(); ++i)
      for (std::size_t j = 0; j < out.tau31().size(); ++j)
        if (auto c = h.at(i, j)) out.add(i, j, c);
    out.acquisition_ps += h.acquisition_ps;
    out.total_starts += h.total_starts;
  }
  return out;
}

// ---------------------------------------------------------------------------

double AccidentalEstimate::ridge32_at(std::int64_t d) const {
  const std::int64_t k = d + ridge32_offset;
  if (k < 0 || k >= static_cast<std::int64_t>(ridge32.size())) return std::numeric_limits<double>::quiet_NaN();
  return ridge32[static_cast<std::size_t>(k)];
}

std::size_t AccidentalEstimate::ridge32_support_at(std::int64_t d) const {
  const std::int64_t k = d + ridge32_offset;
  if (k < 0 || k >= static_cast<std::int64_t>(ridge32_support.size())) return 0;
  return ridge32_support[static_cast<std::size_t>(k)];
}

AccidentalEstimate estimate_accidentals(const Histogram2D& hist, const AccidentalOptions& options) {
  const DelayAxis& ax21 = hist.tau21();
  const DelayAxis& ax31 = hist.tau31();
  if (ax21.bin_width_ps != ax31.bin_width_ps) throw EstimationError("accidental estimate needs equal bin widths");
  const std::int64_t w = ax21.bin_width_ps;
  const std::int64_t radius = options.exclusion_radius_ps;
  auto far = [&](std::int64_t delay) { return delay > radius || delay < -radius; };

  const std::size_t n21 = ax21.size(), n31 = ax31.size();
  AccidentalEstimate est;
  est.ridge32_offset = -(ax31.first_bin - ax21.last_bin);
  const std::size_t n32 = static_cast<std::size_t>((ax31.last_bin - ax21.first_bin) - (ax31.first_bin - ax21.last_bin) + 1);
  std::vector<double> s21(n21, 0.0), s31(n31, 0.0), s32(n32, 0.0);
  est.ridge21_support.assign(n21, 0);
  est.ridge31_support.assign(n31, 0);
  est.ridge32_support.assign(n32, 0);

  double floor_sum = 0.0, floor_sq = 0.0;
  for (std::size_t i = 0; i < n21; ++i) {
    const std::int64_t k21 = ax21.first_bin + static_cast<std::int64_t>(i);
    for (std::size_t j = 0; j < n31; ++j) {
      const std::int64_t k31 = ax31.first_bin + static_cast<std::int64_t>(j);
      const bool f21 = far(k21 * w), f31 = far(k31 * w), f32 = far((k31 - k21) * w);
      const auto c = static_cast<double>(hist.at(i, j));
      const auto d = static_cast<std::size_t>(k31 - k21 + est.ridge32_offset);
      if (f31 && f32) {
        s21[i] += c;
        ++est.ridge21_support[i];
      }
      if (f21 && f32) {
        s31[j] += c;
        ++est.ridge31_support[j];
      }
      if (f21 && f31) {
        s32[d] += c;
        ++est.ridge32_support[d];
      }
      if (f21 && f31 && f32) {
        floor_sum += c;
        floor_sq += c * c;
        ++est.floor_bins;
      }
    }
  }
  if (est.floor_bins < options.min_floor_bins)
    throw EstimationError("only " + std::to_string(est.floor_bins) +
                          " histogram cells lie outside the correlation ridges (need " +
                          std::to_string(options.min_floor_bins) + ")");

  const double nf = static_cast<double>(est.floor_bins);
  est.floor_per_bin = floor_sum / nf;
  const double var = nf > 1 ? std::max(0.0, (floor_sq - floor_sum * floor_sum / nf) / (nf - 1)) : 0.0;
  est.floor_std_error = std::sqrt(var / nf);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto finish = [&](const std::vector<double>& s, const std::vector<std::size_t>& support) {
    std::vector<double> out(s.size(), nan);
    for (std::size_t k = 0; k < s.size(); ++k)
      if (support[k] > 0) out[k] = s[k] / static_cast<double>(support[k]);
    return out;
  };
  est.ridge21 = finish(s21, est.ridge21_support);
  est.ridge31 = finish(s31, est.ridge31_support);
  est.ridge32 = finish(s32, est.ridge32_support);

  auto near_peak = [&](const std::vector<double>& profile, std::int64_t first_bin, const char* name) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < profile.size(); ++k) {
      const std::int64_t delay = (first_bin + static_cast<std::int64_t>(k)) * w;
      if (!far(delay) && !std::isnan(profile[k])) best = std::max(best, profile[k]);
    }
    if (!std::isfinite(best))
      throw EstimationError(std::string("ridge ") + name + " has no far-region support near zero delay");
    return best;
  };
  est.ridge_levels[0] = near_peak(est.ridge21, ax21.first_bin, "21");
  est.ridge_levels[1] = near_peak(est.ridge31, ax31.first_bin, "31");
  est.ridge_levels[2] = near_peak(est.ridge32, -est.ridge32_offset, "32");
  est.threshold = *std::max_element(est.ridge_levels.begin(), est.ridge_levels.end());
  return est;
}

TripleCoincidenceResult genuine_from_counts(double total, double random, double partial,
                                            double acquisition_minutes) {
  TripleCoincidenceResult r;
  r.total_counts = total;
  r.random_floor_counts = random;
  r.partially_correlated_counts = partial;
  r.acquisition_minutes = acquisition_minutes;
  const double g = total - random - partial;
  r.clamped = g < 0.0;
  r.genuine_counts = std::max(0.0, g);
  r.rate_per_minute = acquisition_minutes > 0.0 ? r.genuine_counts / acquisition_minutes : 0.0;
  return r;
}

namespace {

constexpr double kPsPerMinute = 60e12;

struct WindowCells {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
};

WindowCells cells_in(const Histogram2D& h, const DelayWindow& win) {
  WindowCells out;
  for (std::size_t i = 0; i < h.tau21().size(); ++i) {
    const auto c21 = h.tau21().center_ps(i);
    if (c21 < win.t21_min_ps || c21 > win.t21_max_ps) continue;
    for (std::size_t j = 0; j < h.tau31().size(); ++j) {
      const auto c31 = h.tau31().center_ps(j);
      if (c31 >= win.t31_min_ps && c31 <= win.t31_max_ps) out.cells.emplace_back(i, j);
    }
  }
  return out;
}

bool window_inside(const Histogram2D& h, const DelayWindow& win) {
  return win.t21_min_ps >= h.tau21().center_ps(0) && win.t21_max_ps <= h.tau21().center_ps(h.tau21().size() - 1) &&
         win.t31_min_ps >= h.tau31().center_ps(0) && win.t31_max_ps <= h.tau31().center_ps(h.tau31().size() - 1);
}

TripleCoincidenceResult extract_cw(const Histogram2D& hist, const ExtractionParams& params) {
  const auto est = estimate_accidentals(hist, params.accidental);
  const auto win = cells_in(hist, params.window);
  if (win.cells.empty()) throw EstimationError("coincidence window holds no histogram bins");

  const DelayAxis& ax21 = hist.tau21();
  const DelayAxis& ax31 = hist.tau31();
  double total = 0.0, ridge_sum = 0.0;
  std::vector<double> n_per21(ax21.size(), 0.0), n_per31(ax31.size(), 0.0), n_per32(est.ridge32.size(), 0.0);
  for (auto [i, j] : win.cells) {
    total += static_cast<double>(hist.at(i, j));
    const std::int64_t d = (ax31.first_bin + static_cast<std::int64_t>(j)) - (ax21.first_bin + static_cast<std::int64_t>(i));
    const double r21 = est.ridge21[i], r31 = est.ridge31[j], r32 = est.ridge32_at(d);
    if (std::isnan(r21) || std::isnan(r31) || std::isnan(r32))
      throw EstimationError("histogram does not extend far enough past the window to measure every ridge");
    ridge_sum += r21 + r31 + r32;
    n_per21[i] += 1;
    n_per31[j] += 1;
    n_per32[static_cast<std::size_t>(d + est.ridge32_offset)] += 1;
  }
  const double nb = static_cast<double>(win.cells.size());
  const double floor = est.floor_per_bin;
  const double random = floor * nb;
  const double partial = ridge_sum - 3.0 * floor * nb;

  auto r = genuine_from_counts(total, random, partial, static_cast<double>(hist.acquisition_ps) / kPsPerMinute);
  r.mode = CoincidenceMode::cw;
  r.window = params.window;
  r.window_bins = win.cells.size();
  r.threshold_counts = est.threshold;

  double var = total + 4.0 * nb * nb * est.floor_std_error * est.floor_std_error;
  auto add_profile_var = [&](const std::vector<double>& mult, const std::vector<double>& prof,
                             const std::vector<std::size_t>& support) {
    for (std::size_t k = 0; k < mult.size(); ++k)
      if (mult[k] > 0 && support[k] > 0) var += mult[k] * mult[k] * std::max(prof[k], 0.0) / static_cast<double>(support[k]);
  };
  add_profile_var(n_per21, est.ridge21, est.ridge21_support);
  add_profile_var(n_per31, est.ridge31, est.ridge31_support);
  add_profile_var(n_per32, est.ridge32, est.ridge32_support);
  r.genuine_std_error = std::sqrt(var);
  const double raw = total - random - partial;
  r.significance = r.genuine_std_error > 0 ? raw / r.genuine_std_error : 0.0;
  r.significant = r.significance >= params.significance_sigma;
  r.accidentals = est;
  return r;
}

TripleCoincidenceResult extract_pulsed(const Histogram2D& hist, const ExtractionParams& params) {
  if (params.period_ps <= 0) throw EstimationError("pulsed extraction needs a positive period");
  const auto central = cells_in(hist, params.window);
  if (central.cells.empty()) throw EstimationError("central window holds no histogram bins");

  const std::int64_t p = params.period_ps;
  const std::int64_t span21 = (hist.tau21().center_ps(hist.tau21().size() - 1) - hist.tau21().center_ps(0)) / p + 1;
  const std::int64_t span31 = (hist.tau31().center_ps(hist.tau31().size() - 1) - hist.tau31().center_ps(0)) / p + 1;
  double partial_max = -1.0, any_max = -1.0, accidental_sum = 0.0;
  int accidental_peaks = 0;
  for (std::int64_t m = -span21; m <= span21; ++m) {
    for (std::int64_t n = -span31; n <= span31; ++n) {
      if (m == 0 && n == 0) continue;
      const auto shifted = params.window.shifted(m * p, n * p);
      if (!window_inside(hist, shifted)) continue;
      std::uint64_t peak = 0, sum = 0;
      for (auto [i, j] : cells_in(hist, shifted).cells) {
        const auto c = hist.at(i, j);
        peak = std::max(peak, c);
        sum += c;
      }
      SidePeak sp{m, n};
      if (sp.partially_correlated()) {
        partial_max = std::max(partial_max, static_cast<double>(peak));
      } else {
        accidental_sum += static_cast<double>(sum);
        ++accidental_peaks;
      }
      any_max = std::max(any_max, static_cast<double>(peak));
    }
  }
  if (any_max < 0.0) throw EstimationError("histogram holds no complete side peak at the pulse period");
  const double threshold = partial_max >= 0.0 ? partial_max : any_max;

  double total = 0.0, genuine = 0.0, above = 0.0;
  for (auto [i, j] : central.cells) {
    const auto c = static_cast<double>(hist.at(i, j));
    total += c;
    if (c > threshold) {
      genuine += c - threshold;
      above += c;
    }
  }
  double random = accidental_peaks > 0 ? accidental_sum / accidental_peaks : 0.0;
  random = std::min(random, total - genuine);
  auto r = genuine_from_counts(total, random, total - genuine - random,
                               static_cast<double>(hist.acquisition_ps) / kPsPerMinute);
  r.mode = CoincidenceMode::pulsed;
  r.window = params.window;
  r.window_bins = central.cells.size();
  r.threshold_counts = threshold;
  r.genuine_std_error = std::sqrt(above + 1.0);
  r.significance = r.genuine_counts / r.genuine_std_error;
  r.significant = r.significance >= params.significance_sigma;
  return r;
}

}  // namespace

TripleCoincidenceResult extract_genuine_triplets(const Histogram2D& hist, const ExtractionParams& params) {
  return params.mode == CoincidenceMode::cw ? extract_cw(hist, params) : extract_pulsed(hist, params);
}

DelayWindow centered_window(double c21_ps, double c31_ps, std::int64_t width_ps, std::int64_t bin_width_ps) {
  const double half = 0.5 * static_cast<double>(width_ps);
  auto snap_lo = [&](double v) {
    return static_cast<std::int64_t>(std::ceil(v / static_cast<double>(bin_width_ps))) * bin_width_ps;
  };
  auto snap_hi = [&](double v) {
    return static_cast<std::int64_t>(std::floor(v / static_cast<double>(bin_width_ps))) * bin_width_ps;
  };
  return {snap_lo(c21_ps - half), snap_hi(c21_ps + half), snap_lo(c31_ps - half), snap_hi(c31_ps + half)};
}

std::vector<SidePeak> find_side_peaks(const Histogram2D& hist, std::int64_t period_ps) {
  if (period_ps <= 0) throw EstimationError("period must be positive");
  const DelayAxis& ax21 = hist.tau21();
  const DelayAxis& ax31 = hist.tau31();
  const double half = 0.5 * static_cast<double>(period_ps);

  auto summarize = [&](double o21, double o31) {
    SidePeak sp;
    double s = 0, m21 = 0, m31 = 0;
    for (std::size_t i = 0; i < ax21.size(); ++i) {
      const double c21 = static_cast<double>(ax21.center_ps(i));
      if (c21 < o21 - half || c21 >= o21 + half) continue;
      for (std::size_t j = 0; j < ax31.size(); ++j) {
        const double c31 = static_cast<double>(ax31.center_ps(j));
        if (c31 < o31 - half || c31 >= o31 + half) continue;
        const auto c = hist.at(i, j);
        s += static_cast<double>(c);
        m21 += static_cast<double>(c) * c21;
        m31 += static_cast<double>(c) * c31;
        sp.max_count = std::max(sp.max_count, c);
      }
    }
    sp.window_sum = static_cast<std::uint64_t>(s);
    sp.centroid21_ps = s > 0 ? m21 / s : o21;
    sp.centroid31_ps = s > 0 ? m31 / s : o31;
    return sp;
  };

  // Align the cells on the central peak.
  double o21 = 0.0, o31 = 0.0;
  for (int iter = 0; iter < 3; ++iter) {
    const auto c = summarize(o21, o31);
    o21 = c.centroid21_ps;
    o31 = c.centroid31_ps;
  }

  std::vector<SidePeak> peaks;
  const double lo21 = static_cast<double>(ax21.min_delay_ps()), hi21 = static_cast<double>(ax21.max_delay_ps());
  const double lo31 = static_cast<double>(ax31.min_delay_ps()), hi31 = static_cast<double>(ax31.max_delay_ps());
  const auto p = static_cast<double>(period_ps);
  for (auto m = static_cast<std::int64_t>(std::floor((lo21 - o21) / p)); m <= static_cast<std::int64_t>(std::ceil((hi21 - o21) / p)); ++m) {
    for (auto n = static_cast<std::int64_t>(std::floor((lo31 - o31) / p)); n <= static_cast<std::int64_t>(std::ceil((hi31 - o31) / p)); ++n) {
      const double c21 = o21 + static_cast<double>(m) * p, c31 = o31 + static_cast<double>(n) * p;
      if (c21 - half < lo21 || c21 + half > hi21 || c31 - half < lo31 || c31 + half > hi31) continue;
      auto sp = summarize(c21, c31);
      sp.m = m;
      sp.n = n;
      peaks.push_back(sp);
    }
  }
  return peaks;
}

}  // namespace tricascade
