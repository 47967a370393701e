#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tricascade/detection.hpp"
#include "tricascade/dynamics.hpp"

namespace tricascade {

/// Delay axis of centred bins: bin k covers [k w - w/2, k w + w/2) ps.
struct DelayAxis {
  std::int64_t bin_width_ps = 512;
  std::int64_t first_bin = 0;
  std::int64_t last_bin = 0;

  std::size_t size() const { return static_cast<std::size_t>(last_bin - first_bin + 1); }
  std::int64_t center_ps(std::size_t i) const { return (first_bin + static_cast<std::int64_t>(i)) * bin_width_ps; }
  /// Smallest and largest integer delay that falls inside the axis.
  std::int64_t min_delay_ps() const;
  std::int64_t max_delay_ps() const;
  /// Index of `delay` (which must lie inside the axis).
  std::size_t index(std::int64_t delay_ps) const {
    return static_cast<std::size_t>((2 * (delay_ps - first_bin * bin_width_ps) + bin_width_ps) /
                                    (2 * bin_width_ps));
  }

  /// Bins whose centres lie in [min_ps, max_ps].
  static DelayAxis covering(std::int64_t min_ps, std::int64_t max_ps, std::int64_t bin_width_ps);

  friend bool operator==(const DelayAxis&, const DelayAxis&) = default;
};

struct Histogram1D {
  DelayAxis axis;
  std::vector<std::uint64_t> counts;
  std::uint64_t total_starts = 0;
  std::uint64_t total_stops = 0;
  std::uint64_t acquisition_ps = 0;

  std::int64_t tau_min_ps() const { return axis.first_bin * axis.bin_width_ps - axis.bin_width_ps / 2; }
  std::int64_t tau_max_ps() const { return axis.last_bin * axis.bin_width_ps + (axis.bin_width_ps + 1) / 2; }
  std::uint64_t sum() const;
};

enum class PairingMode {
  multi_stop,  // every stop within the window
  start_stop,  // only the first stop at or after each start
};

struct CorrelateOptions {
  std::int64_t bin_width_ps = 512;
  std::int64_t max_delay_ps = 51200;  // multiple of bin_width_ps
  PairingMode mode = PairingMode::multi_stop;
};

struct CorrelationResult {
  Histogram1D histogram;
  std::optional<G2Curve> g2;  // absent when a channel is empty
  bool zero_rate = false;
};

/// Empty histogram for the configured axis.
Histogram1D make_histogram(const CorrelateOptions& options);

/// g2 = counts / (N_A N_B w / T); nullopt if either channel is empty.
std::optional<G2Curve> normalize(const Histogram1D& histogram, std::string alpha = "A", std::string beta = "B");

/// Histogram of t_B - t_A over all (A, B) pairs within +-max_delay, one
/// forward sweep. A tag never pairs with itself when chA == chB.
CorrelationResult cross_correlate(const TimeTagStream& stream, std::uint8_t channel_a,
                                  std::uint8_t channel_b, const CorrelateOptions& options = {});

/// Same result computed over `chunks` index ranges of the stream, each with
/// its stop window extended across the chunk boundary, merged afterwards.
/// Runs the chunks on worker threads when `parallel` is set.
CorrelationResult cross_correlate_chunked(const TimeTagStream& stream, std::uint8_t channel_a,
                                          std::uint8_t channel_b, const CorrelateOptions& options,
                                          std::size_t chunks, bool parallel = true);

/// Incremental correlator with memory bounded by the tags inside one window.
class StreamingCorrelator {
 public:
  StreamingCorrelator(std::uint8_t channel_a, std::uint8_t channel_b, const CorrelateOptions& options);

  /// Tags must continue the sorted order of earlier calls.
  void feed(std::span<const TimeTag> tags);
  Histogram1D finish(std::uint64_t acquisition_ps);

  std::size_t buffered() const { return starts_.size() + stops_.size(); }

 private:
  void flush(bool all);

  std::uint8_t a_;
  std::uint8_t b_;
  CorrelateOptions options_;
  Histogram1D hist_;
  // for autocorrelation only starts_ is used
  std::vector<std::uint64_t> starts_;
  std::vector<std::uint64_t> stops_;
  std::size_t next_start_ = 0;
  std::uint64_t last_ts_ = 0;
  bool seen_ = false;
};

/// Elementwise sum; throws StructuralError on axis mismatch.
Histogram1D merge_histograms(std::span<const Histogram1D> parts);

// ---------------------------------------------------------------------------
// Triple coincidences

/// Extent of a delay region in ps (inclusive bounds on bin centres).
struct DelayWindow {
  std::int64_t t21_min_ps = 0;
  std::int64_t t21_max_ps = 0;
  std::int64_t t31_min_ps = 0;
  std::int64_t t31_max_ps = 0;

  bool contains(std::int64_t t21, std::int64_t t31) const {
    return t21 >= t21_min_ps && t21 <= t21_max_ps && t31 >= t31_min_ps && t31 <= t31_max_ps;
  }
  DelayWindow shifted(std::int64_t d21, std::int64_t d31) const {
    return {t21_min_ps + d21, t21_max_ps + d21, t31_min_ps + d31, t31_max_ps + d31};
  }
  friend bool operator==(const DelayWindow&, const DelayWindow&) = default;
};

/// tau21 in [-0.768, 1.28] ns, tau31 in [-1.28, 2.304] ns: 4 x 7 bins of 512 ps.
DelayWindow default_cw_window();

inline constexpr std::size_t kMaxBinsPerAxis = 1'000'000;
inline constexpr std::size_t kMaxDenseBins = 4'000'000;

/// Counts over (tau21, tau31) = (t2 - t1, t3 - t1); dense storage up to
/// kMaxDenseBins cells, hash map beyond.
class Histogram2D {
 public:
  Histogram2D() = default;
  Histogram2D(DelayAxis tau21, DelayAxis tau31, std::array<std::uint8_t, 3> channels);

  const DelayAxis& tau21() const { return tau21_; }
  const DelayAxis& tau31() const { return tau31_; }
  const std::array<std::uint8_t, 3>& channels() const { return channels_; }
  bool dense() const { return dense_; }

  std::uint64_t at(std::size_t i21, std::size_t i31) const;
  void add(std::size_t i21, std::size_t i31, std::uint64_t n = 1);
  std::uint64_t sum() const;

  std::uint64_t acquisition_ps = 0;
  std::uint64_t total_starts = 0;

  bool same_binning(const Histogram2D& other) const;

 private:
  DelayAxis tau21_;
  DelayAxis tau31_;
  std::array<std::uint8_t, 3> channels_{0, 1, 2};
  bool dense_ = true;
  std::vector<std::uint64_t> cells_;
  std::unordered_map<std::uint64_t, std::uint64_t> sparse_;
};

/// For every channel-1 tag (start) bins every (channel-2, channel-3) pair whose
/// delays fall in `range`. Throws SizeError if an axis would exceed
/// kMaxBinsPerAxis bins.
Histogram2D triple_histogram(const TimeTagStream& stream, std::uint8_t ch1, std::uint8_t ch2,
                             std::uint8_t ch3, const DelayWindow& range, std::int64_t bin_width_ps = 512);

/// Start-tag index range variant used for chunked evaluation.
void accumulate_triples(std::span<const std::uint64_t> t1, std::size_t begin, std::size_t end,
                        std::span<const std::uint64_t> t2, std::span<const std::uint64_t> t3,
                        Histogram2D& hist);

Histogram2D merge_histograms(std::span<const Histogram2D> parts);

/// Incremental triple_histogram for sorted blocks of tags; keeps only the tags
/// that a pending start can still reach.
class StreamingTriples {
 public:
  StreamingTriples(std::uint8_t ch1, std::uint8_t ch2, std::uint8_t ch3, const DelayWindow& range,
                   std::int64_t bin_width_ps = 512);

  void feed(std::span<const TimeTag> tags);
  Histogram2D finish(std::uint64_t acquisition_ps);

  std::size_t buffered() const { return t1_.size() + t2_.size() + t3_.size(); }

 private:
  void flush(bool all);

  Histogram2D hist_;
  std::vector<std::uint64_t> t1_, t2_, t3_;
  std::size_t next_start_ = 0;
  std::uint64_t last_ts_ = 0;
  bool seen_ = false;
};

struct AccidentalOptions {
  /// Cells with both delays (and their difference) beyond this radius are
  /// taken as fully accidental.
  std::int64_t exclusion_radius_ps = 4000;
  std::size_t min_floor_bins = 100;
};

/// Ridge profiles are means over the far region at fixed near-axis delay.
struct AccidentalEstimate {
  double floor_per_bin = 0.0;
  double floor_std_error = 0.0;
  std::size_t floor_bins = 0;
  /// Peak of each ridge profile near zero: (t2 with t1), (t3 with t1), (t3 with t2).
  std::array<double, 3> ridge_levels{};
  double threshold = 0.0;

  std::vector<double> ridge21;  // per tau21 bin
  std::vector<double> ridge31;  // per tau31 bin
  std::vector<double> ridge32;  // per (i31 - i21) offset, see ridge32_offset
  std::vector<std::size_t> ridge21_support, ridge31_support, ridge32_support;
  std::int64_t ridge32_offset = 0;  // ridge32[d + ridge32_offset] holds offset d in bins

  double ridge32_at(std::int64_t d) const;
  std::size_t ridge32_support_at(std::int64_t d) const;
};

AccidentalEstimate estimate_accidentals(const Histogram2D& hist, const AccidentalOptions& options = {});

enum class CoincidenceMode { cw, pulsed };

struct ExtractionParams {
  CoincidenceMode mode = CoincidenceMode::cw;
  DelayWindow window = default_cw_window();
  AccidentalOptions accidental;
  std::int64_t period_ps = 12500;     // pulsed
  double significance_sigma = 3.0;
};

struct TripleCoincidenceResult {
  double total_counts = 0.0;
  double random_floor_counts = 0.0;
  double partially_correlated_counts = 0.0;
  double genuine_counts = 0.0;
  double acquisition_minutes = 0.0;
  double rate_per_minute = 0.0;
  DelayWindow window;
  CoincidenceMode mode = CoincidenceMode::cw;
  std::optional<double> threshold_counts;
  std::size_t window_bins = 0;
  double genuine_std_error = 0.0;
  double significance = 0.0;  // genuine / std error
  bool significant = false;
  bool clamped = false;       // subtraction went negative and was clamped to 0
  std::optional<AccidentalEstimate> accidentals;
};

/// Count arithmetic: genuine = total - random - partial, rate per minute.
TripleCoincidenceResult genuine_from_counts(double total, double random, double partial,
                                            double acquisition_minutes);

TripleCoincidenceResult extract_genuine_triplets(const Histogram2D& hist, const ExtractionParams& params);

struct SidePeak {
  std::int64_t m = 0;  // tau21 grid index (multiples of the period)
  std::int64_t n = 0;  // tau31 grid index
  double centroid21_ps = 0.0;
  double centroid31_ps = 0.0;
  std::uint64_t max_count = 0;
  std::uint64_t window_sum = 0;
  /// Two of the three photons come from the same pulse.
  bool partially_correlated() const { return (m == 0 || n == 0 || m == n) && !(m == 0 && n == 0); }
};

/// Peaks of a pulsed triple histogram on the grid (m P, n P), each summarised
/// over a period-sized cell aligned on the central peak's centroid. The
/// central peak is returned with m = n = 0.
std::vector<SidePeak> find_side_peaks(const Histogram2D& hist, std::int64_t period_ps);

/// Window of `width_ps` per axis centred on (c21, c31), snapped to bin centres.
DelayWindow centered_window(double c21_ps, double c31_ps, std::int64_t width_ps, std::int64_t bin_width_ps);

}  // namespace tricascade
