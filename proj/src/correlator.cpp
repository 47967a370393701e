#include "tricascade/correlator.hpp"

#include <algorithm>
#include <future>
#include <string>

namespace tricascade {

std::int64_t DelayAxis::min_delay_ps() const { return first_bin * bin_width_ps - bin_width_ps / 2; }

std::int64_t DelayAxis::max_delay_ps() const {
  return last_bin * bin_width_ps + (bin_width_ps + 1) / 2 - 1;
}

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

std::vector<std::uint64_t> channel_times(const TimeTagStream& s, std::uint8_t ch) {
  std::vector<std::uint64_t> out;
  for (const auto& t : s.tags)
    if (t.channel == ch) out.push_back(t.timestamp_ps);
  return out;
}

void check_options(const CorrelateOptions& o) {
  if (o.bin_width_ps <= 0) throw StructuralError("bin width must be positive");
  if (o.max_delay_ps < 0) throw StructuralError("max delay must be nonnegative");
  if (o.max_delay_ps % o.bin_width_ps != 0)
    throw StructuralError("max delay must be a whole number of bins");
}

/// Pairs every start in [begin, end) with the stops inside the axis. When
/// `same` is set the two spans are the same array and index i never pairs
/// with itself.
void accumulate_pairs(std::span<const std::uint64_t> starts, std::size_t begin, std::size_t end,
                      std::span<const std::uint64_t> stops, bool same, PairingMode mode,
                      Histogram1D& h) {
  if (begin >= end || stops.empty()) return;
  const DelayAxis& axis = h.axis;
  const std::int64_t dmin = axis.min_delay_ps();
  const std::int64_t dmax = axis.max_delay_ps();
  const std::size_t n = stops.size();
  auto* counts = h.counts.data();

  if (mode == PairingMode::multi_stop) {
    const auto first = static_cast<std::int64_t>(starts[begin]) + dmin;
    std::size_t lo = static_cast<std::size_t>(
        std::lower_bound(stops.begin(), stops.end(), static_cast<std::uint64_t>(std::max<std::int64_t>(first, 0))) -
        stops.begin());
    for (std::size_t i = begin; i < end; ++i) {
      const auto a = static_cast<std::int64_t>(starts[i]);
      while (lo < n && static_cast<std::int64_t>(stops[lo]) < a + dmin) ++lo;
      const std::int64_t hi = a + dmax;
      for (std::size_t j = lo; j < n; ++j) {
        const auto b = static_cast<std::int64_t>(stops[j]);
        if (b > hi) break;
        if (same && j == i) continue;
        ++counts[axis.index(b - a)];
      }
    }
    return;
  }

  // start-stop: the next stop in stream order at or after the start
  std::size_t next = static_cast<std::size_t>(
      std::lower_bound(stops.begin(), stops.end(), starts[begin]) - stops.begin());
  for (std::size_t i = begin; i < end; ++i) {
    const auto a = static_cast<std::int64_t>(starts[i]);
    std::size_t j;
    if (same) {
      j = i + 1;
    } else {
      while (next < n && static_cast<std::int64_t>(stops[next]) < a) ++next;
      j = next;
    }
    if (j >= n) continue;
    const std::int64_t d = static_cast<std::int64_t>(stops[j]) - a;
    if (d >= dmin && d <= dmax) ++counts[axis.index(d)];
  }
}

CorrelationResult finish_result(Histogram1D h, std::uint8_t a, std::uint8_t b) {
  CorrelationResult r;
  r.g2 = normalize(h, "ch" + std::to_string(a), "ch" + std::to_string(b));
  r.zero_rate = !r.g2.has_value();
  r.histogram = std::move(h);
  return r;
}

}  // namespace

DelayAxis DelayAxis::covering(std::int64_t min_ps, std::int64_t max_ps, std::int64_t bin_width_ps) {
  if (bin_width_ps <= 0) throw StructuralError("bin width must be positive");
  DelayAxis axis;
  axis.bin_width_ps = bin_width_ps;
  axis.first_bin = ceil_div(min_ps, bin_width_ps);
  axis.last_bin = floor_div(max_ps, bin_width_ps);
  if (axis.last_bin < axis.first_bin) throw StructuralError("delay range holds no bin centre");
  return axis;
}

std::uint64_t Histogram1D::sum() const {
  std::uint64_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

Histogram1D make_histogram(const CorrelateOptions& options) {
  check_options(options);
  Histogram1D h;
  h.axis = DelayAxis::covering(-options.max_delay_ps, options.max_delay_ps, options.bin_width_ps);
  h.counts.assign(h.axis.size(), 0);
  return h;
}

std::optional<G2Curve> normalize(const Histogram1D& h, std::string alpha, std::string beta) {
  if (h.total_starts == 0 || h.total_stops == 0 || h.acquisition_ps == 0) return std::nullopt;
  const double expected = static_cast<double>(h.total_starts) * static_cast<double>(h.total_stops) *
                          static_cast<double>(h.axis.bin_width_ps) / static_cast<double>(h.acquisition_ps);
  G2Curve c;
  c.alpha = std::move(alpha);
  c.beta = std::move(beta);
  c.tau_ns.reserve(h.counts.size());
  c.values.reserve(h.counts.size());
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    c.tau_ns.push_back(static_cast<double>(h.axis.center_ps(i)) * 1e-3);
    c.values.push_back(static_cast<double>(h.counts[i]) / expected);
  }
  return c;
}

CorrelationResult cross_correlate(const TimeTagStream& stream, std::uint8_t channel_a,
                                  std::uint8_t channel_b, const CorrelateOptions& options) {
  return cross_correlate_chunked(stream, channel_a, channel_b, options, 1, false);
}

CorrelationResult cross_correlate_chunked(const TimeTagStream& stream, std::uint8_t channel_a,
                                          std::uint8_t channel_b, const CorrelateOptions& options,
                                          std::size_t chunks, bool parallel) {
  if (options.bin_width_ps < static_cast<std::int64_t>(stream.resolution_ps))
    throw StructuralError("bin width is finer than the stream resolution");
  const bool same = channel_a == channel_b;
  const auto ta = channel_times(stream, channel_a);
  const auto tb = same ? std::vector<std::uint64_t>{} : channel_times(stream, channel_b);
  const std::span<const std::uint64_t> starts(ta);
  const std::span<const std::uint64_t> stops = same ? starts : std::span<const std::uint64_t>(tb);

  Histogram1D proto = make_histogram(options);
  chunks = std::max<std::size_t>(1, chunks);

  // Chunk boundaries fall on stream indices; each chunk owns the starts whose
  // stream position lies inside it and reaches into its neighbours for stops.
  std::vector<std::size_t> bounds{0};
  {
    std::size_t seen_a = 0, pos = 0;
    for (std::size_t c = 1; c < chunks; ++c) {
      const std::size_t cut = stream.tags.size() * c / chunks;
      for (; pos < cut; ++pos)
        if (stream.tags[pos].channel == channel_a) ++seen_a;
      bounds.push_back(seen_a);
    }
    bounds.push_back(ta.size());
  }

  auto work = [&](std::size_t c) {
    Histogram1D h = proto;
    accumulate_pairs(starts, bounds[c], bounds[c + 1], stops, same, options.mode, h);
    return h;
  };

  std::vector<Histogram1D> parts;
  if (parallel && chunks > 1) {
    std::vector<std::future<Histogram1D>> jobs;
    for (std::size_t c = 0; c < chunks; ++c) jobs.push_back(std::async(std::launch::async, work, c));
    for (auto& j : jobs) parts.push_back(j.get());
  } else {
    for (std::size_t c = 0; c < chunks; ++c) parts.push_back(work(c));
  }
  Histogram1D h = merge_histograms(parts);
  h.total_starts = ta.size();
  h.total_stops = stops.size();
  h.acquisition_ps = stream.acquisition_ps;
  return finish_result(std::move(h), channel_a, channel_b);
}

StreamingCorrelator::StreamingCorrelator(std::uint8_t channel_a, std::uint8_t channel_b,
                                         const CorrelateOptions& options)
    : a_(channel_a), b_(channel_b), options_(options), hist_(make_histogram(options)) {}

void StreamingCorrelator::feed(std::span<const TimeTag> tags) {
  const bool same = a_ == b_;
  for (const auto& t : tags) {
    if (seen_ && t.timestamp_ps < last_ts_) throw StructuralError("streaming correlator input is not sorted");
    seen_ = true;
    last_ts_ = t.timestamp_ps;
    if (t.channel == a_) {
      starts_.push_back(t.timestamp_ps);
      ++hist_.total_starts;
      if (same) ++hist_.total_stops;
    } else if (t.channel == b_) {
      stops_.push_back(t.timestamp_ps);
      ++hist_.total_stops;
    }
  }
  flush(false);
}

void StreamingCorrelator::flush(bool all) {
  const bool same = a_ == b_;
  const std::int64_t dmax = hist_.axis.max_delay_ps();
  const std::int64_t dmin = hist_.axis.min_delay_ps();
  std::size_t end = next_start_;
  while (end < starts_.size() &&
         (all || static_cast<std::int64_t>(starts_[end]) + dmax < static_cast<std::int64_t>(last_ts_)))
    ++end;
  const std::span<const std::uint64_t> starts(starts_);
  accumulate_pairs(starts, next_start_, end, same ? starts : std::span<const std::uint64_t>(stops_), same,
                   options_.mode, hist_);
  next_start_ = end;

  // Drop tags that no pending start can reach.
  const std::int64_t horizon = next_start_ < starts_.size()
                                   ? static_cast<std::int64_t>(starts_[next_start_]) + std::min<std::int64_t>(dmin, 0)
                                   : static_cast<std::int64_t>(last_ts_) + std::min<std::int64_t>(dmin, 0);
  auto reachable = [&](std::uint64_t t) { return static_cast<std::int64_t>(t) >= horizon; };
  if (same) {
    // Start-stop autocorrelation pairs index i with i + 1, so keep one extra.
    std::size_t drop = 0;
    while (drop < next_start_ && !reachable(starts_[drop])) ++drop;
    if (options_.mode == PairingMode::start_stop && drop > 0) --drop;
    if (drop > 4096 && drop * 2 > starts_.size()) {
      starts_.erase(starts_.begin(), starts_.begin() + static_cast<std::ptrdiff_t>(drop));
      next_start_ -= drop;
    }
  } else {
    if (next_start_ > 4096 && next_start_ * 2 > starts_.size()) {
      starts_.erase(starts_.begin(), starts_.begin() + static_cast<std::ptrdiff_t>(next_start_));
      next_start_ = 0;
    }
    std::size_t drop = 0;
    while (drop < stops_.size() && !reachable(stops_[drop])) ++drop;
    if (drop > 4096 && drop * 2 > stops_.size())
      stops_.erase(stops_.begin(), stops_.begin() + static_cast<std::ptrdiff_t>(drop));
  }
}

Histogram1D StreamingCorrelator::finish(std::uint64_t acquisition_ps) {
  flush(true);
  hist_.acquisition_ps = acquisition_ps;
  return hist_;
}

Histogram1D merge_histograms(std::span<const Histogram1D> parts) {
  if (parts.empty()) throw StructuralError("nothing to merge");
  Histogram1D out = parts.front();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const auto& h = parts[p];
    if (!(h.axis == out.axis) || h.counts.size() != out.counts.size())
      throw StructuralError("histogram axes differ");
    for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += h.counts[i];
    out.total_starts += h.total_starts;
    out.total_stops += h.total_stops;
    out.acquisition_ps += h.acquisition_ps;
  }
  return out;
}

}  // namespace tricascade
