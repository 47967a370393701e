#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tricascade/correlator.hpp"
#include "tricascade/detection.hpp"
#include "tricascade/random.hpp"

namespace testutil {

using namespace tricascade;

/// Independent homogeneous Poisson channels, timestamps floored to `resolution_ps`.
inline TimeTagStream poisson_stream(const std::vector<double>& rates_per_ns, double duration_ns,
                                    std::uint32_t resolution_ps, std::uint64_t seed) {
  TimeTagStream s;
  s.resolution_ps = resolution_ps;
  s.channel_count = static_cast<std::uint8_t>(rates_per_ns.size());
  s.acquisition_ps = static_cast<std::uint64_t>(duration_ns * 1e3);
  for (std::size_t ch = 0; ch < rates_per_ns.size(); ++ch) {
    if (rates_per_ns[ch] <= 0.0) continue;
    Rng rng(derive_seed(seed, ch));
    for (double t = rng.exponential(rates_per_ns[ch]); t < duration_ns; t += rng.exponential(rates_per_ns[ch])) {
      const auto ps = static_cast<std::uint64_t>(t * 1e3);
      s.tags.push_back({static_cast<std::uint8_t>(ch), ps / resolution_ps * resolution_ps});
    }
  }
  std::sort(s.tags.begin(), s.tags.end(), tag_before);
  return s;
}

/// `n` tags with uniform random channels and timestamps in [0, span_ps),
/// clustered so that coincidences are common.
inline TimeTagStream random_stream(std::size_t n, std::uint8_t channels, std::uint64_t span_ps,
                                   std::uint32_t resolution_ps, std::uint64_t seed) {
  Rng rng(seed);
  TimeTagStream s;
  s.resolution_ps = resolution_ps;
  s.channel_count = channels;
  s.acquisition_ps = span_ps;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ch = static_cast<std::uint8_t>(rng.next() % channels);
    const auto ps = rng.next() % span_ps;
    s.tags.push_back({ch, ps / resolution_ps * resolution_ps});
  }
  std::sort(s.tags.begin(), s.tags.end(), tag_before);
  return s;
}

/// All-pairs reference for the multi-stop histogram.
inline std::vector<std::uint64_t> brute_force_1d(const TimeTagStream& s, std::uint8_t a, std::uint8_t b,
                                                 const DelayAxis& axis) {
  std::vector<std::uint64_t> counts(axis.size(), 0);
  const std::int64_t w = axis.bin_width_ps;
  for (std::size_t i = 0; i < s.tags.size(); ++i) {
    if (s.tags[i].channel != a) continue;
    for (std::size_t j = 0; j < s.tags.size(); ++j) {
      if (s.tags[j].channel != b || i == j) continue;
      const std::int64_t d = static_cast<std::int64_t>(s.tags[j].timestamp_ps) - static_cast<std::int64_t>(s.tags[i].timestamp_ps);
      // nearest bin centre, ties toward +infinity
      const double k = std::floor((static_cast<double>(d) + 0.5 * static_cast<double>(w)) / static_cast<double>(w));
      const auto kk = static_cast<std::int64_t>(k);
      if (kk >= axis.first_bin && kk <= axis.last_bin) ++counts[static_cast<std::size_t>(kk - axis.first_bin)];
    }
  }
  return counts;
}

/// All-triples reference for the 2D histogram.
inline std::vector<std::uint64_t> brute_force_2d(const TimeTagStream& s, std::uint8_t c1, std::uint8_t c2,
                                                 std::uint8_t c3, const DelayAxis& ax21, const DelayAxis& ax31) {
  std::vector<std::uint64_t> counts(ax21.size() * ax31.size(), 0);
  std::vector<std::int64_t> t1, t2, t3;
  for (const auto& t : s.tags) {
    const auto ts = static_cast<std::int64_t>(t.timestamp_ps);
    if (t.channel == c1) t1.push_back(ts);
    if (t.channel == c2) t2.push_back(ts);
    if (t.channel == c3) t3.push_back(ts);
  }
  auto bin = [](std::int64_t d, const DelayAxis& ax) -> std::int64_t {
    const double w = static_cast<double>(ax.bin_width_ps);
    const auto k = static_cast<std::int64_t>(std::floor((static_cast<double>(d) + 0.5 * w) / w));
    return (k >= ax.first_bin && k <= ax.last_bin) ? k - ax.first_bin : -1;
  };
  for (auto a : t1)
    for (auto b : t2) {
      const auto i = bin(b - a, ax21);
      if (i < 0) continue;
      for (auto c : t3) {
        const auto j = bin(c - a, ax31);
        if (j >= 0) ++counts[static_cast<std::size_t>(i) * ax31.size() + static_cast<std::size_t>(j)];
      }
    }
  return counts;
}

}  // namespace testutil
