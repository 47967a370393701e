#include "tricascade/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace tricascade {

std::uint64_t TimeTagStream::count(std::uint8_t channel) const {
  return static_cast<std::uint64_t>(
      std::count_if(tags.begin(), tags.end(), [&](const TimeTag& t) { return t.channel == channel; }));
}

bool TimeTagStream::is_sorted() const { return std::is_sorted(tags.begin(), tags.end(), tag_before); }

std::vector<DetectorChannel> default_channels() {
  return {
      {0, 0.25, 300.0, 0.0, 0.0, 0.0, 512},
      {1, 0.25, 300.0, 0.0, 0.0, 0.0, 512},
      {2, 0.15, 300.0, 0.0, 0.0, 0.0, 512},
  };
}

double default_chain_efficiency() { return 0.46 * 0.85 * 0.75; }

double fwhm_to_sigma(double fwhm) { return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0))); }

std::uint32_t common_resolution(std::span<const DetectorChannel> channels) {
  std::uint32_t r = 0;
  for (const auto& c : channels) r = std::gcd(r, c.resolution_ps);
  return r == 0 ? 1 : r;
}

namespace {

constexpr double kJitterClip = 8.0;

void check_channel(const DetectorChannel& c) {
  if (!(c.efficiency >= 0.0 && c.efficiency <= 1.0))
    throw StructuralError("channel " + std::to_string(c.id) + ": efficiency outside [0, 1]");
  if (c.resolution_ps == 0)
    throw StructuralError("channel " + std::to_string(c.id) + ": resolution must be positive");
  if (!(c.jitter_fwhm_ps >= 0.0) || !(c.dead_time_ps >= 0.0) || !(c.dark_rate_per_ns >= 0.0) ||
      !(c.background_rate_per_ns >= 0.0))
    throw StructuralError("channel " + std::to_string(c.id) + ": times and rates must be nonnegative");
}

}  // namespace

DetectionPipeline::DetectionPipeline(const DetectionConfig& config, double duration_ns)
    : slot_(256, -1),
      routing_(config.routing),
      chain_(config.chain_efficiency),
      duration_ns_(duration_ns),
      rng_(config.seed),
      resolution_(common_resolution(config.channels)) {
  if (!(chain_ >= 0.0 && chain_ <= 1.0)) throw StructuralError("chain efficiency outside [0, 1]");
  if (config.channels.empty()) throw StructuralError("no detector channels configured");
  std::uint32_t max_res = 0;
  for (const auto& c : config.channels) {
    check_channel(c);
    if (slot_[c.id] >= 0) throw StructuralError("duplicate channel id " + std::to_string(c.id));
    slot_[c.id] = static_cast<int>(channels_.size());
    ChannelState st{c, fwhm_to_sigma(c.jitter_fwhm_ps), Rng(derive_seed(config.seed, 1000 + c.id)),
                    std::numeric_limits<double>::infinity()};
    const double rate = c.noise_rate_per_ns();
    if (rate > 0.0) st.next_noise_ns = st.noise_rng.exponential(rate);
    margin_ps_ = std::max(margin_ps_, kJitterClip * st.sigma_ps);
    max_res = std::max(max_res, c.resolution_ps);
    channel_count_ = std::max<std::uint8_t>(channel_count_, static_cast<std::uint8_t>(c.id + 1));
    channels_.push_back(std::move(st));
  }
  margin_ps_ += max_res + 1.0;
  for (std::uint8_t ch : routing_)
    if (slot_[ch] < 0) throw StructuralError("routing targets unconfigured channel " + std::to_string(ch));
}

DetectionPipeline::ChannelState& DetectionPipeline::channel(std::uint8_t id) { return channels_[slot_[id]]; }

void DetectionPipeline::push(std::span<const EmissionEvent> events, double block_end_ns,
                             std::vector<TimeTag>& ready) {
  const double duration_ps = duration_ns_ * 1e3;
  for (const auto& e : events) {
    if (e.transition >= routing_.size())
      throw StructuralError("transition " + std::to_string(e.transition) + " is not routed");
    auto& ch = channel(routing_[e.transition]);
    if (!rng_.bernoulli(chain_ * ch.params.efficiency)) continue;
    double t = e.time_ns * 1e3;
    if (ch.sigma_ps > 0.0) t += ch.sigma_ps * std::clamp(rng_.normal(), -kJitterClip, kJitterClip);
    if (t < 0.0 || t >= duration_ps) continue;
    const std::uint64_t res = ch.params.resolution_ps;
    pending_.push_back({ch.params.id, static_cast<std::uint64_t>(t) / res * res});
  }

  const double noise_end = std::min(block_end_ns, duration_ns_);
  for (auto& ch : channels_) {
    const double rate = ch.params.noise_rate_per_ns();
    const std::uint64_t res = ch.params.resolution_ps;
    while (ch.next_noise_ns < noise_end) {
      pending_.push_back({ch.params.id, static_cast<std::uint64_t>(ch.next_noise_ns * 1e3) / res * res});
      ch.next_noise_ns += ch.noise_rng.exponential(rate);
    }
  }

  const double cut = block_end_ns * 1e3 - margin_ps_;
  if (cut > 0.0) release(static_cast<std::uint64_t>(cut), ready);
}

void DetectionPipeline::finish(std::vector<TimeTag>& ready) {
  release(std::numeric_limits<std::uint64_t>::max(), ready);
}

void DetectionPipeline::release(std::uint64_t before_ps, std::vector<TimeTag>& ready) {
  std::sort(pending_.begin(), pending_.end(), tag_before);
  auto split = std::partition_point(pending_.begin(), pending_.end(),
                                    [&](const TimeTag& t) { return t.timestamp_ps < before_ps; });
  for (auto it = pending_.begin(); it != split; ++it) {
    auto& ch = channel(it->channel);
    if (ch.has_last && static_cast<double>(it->timestamp_ps - ch.last_accepted) < ch.params.dead_time_ps)
      continue;
    ch.has_last = true;
    ch.last_accepted = it->timestamp_ps;
    ready.push_back(*it);
  }
  pending_.erase(pending_.begin(), split);
}

TimeTagStream detect(std::span<const EmissionEvent> emissions, double duration_ns,
                     const DetectionConfig& config) {
  DetectionPipeline pipeline(config, duration_ns);
  TimeTagStream out;
  out.resolution_ps = pipeline.resolution_ps();
  out.channel_count = pipeline.channel_count();
  out.acquisition_ps = static_cast<std::uint64_t>(std::llround(duration_ns * 1e3));
  pipeline.push(emissions, duration_ns, out.tags);
  pipeline.finish(out.tags);
  return out;
}

TimeTagStream merge_streams(std::span<const TimeTagStream> streams) {
  TimeTagStream out;
  out.resolution_ps = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    const auto& s = streams[i];
    if (!s.is_sorted()) throw StructuralError("input stream " + std::to_string(i) + " is not sorted");
    out.resolution_ps = std::gcd(out.resolution_ps, s.resolution_ps);
    out.channel_count = std::max(out.channel_count, s.channel_count);
    out.acquisition_ps = std::max(out.acquisition_ps, s.acquisition_ps);
    total += s.tags.size();
  }
  if (out.resolution_ps == 0) out.resolution_ps = 1;
  out.tags.reserve(total);

  // (tag, stream index, position); ties between streams resolve by channel
  // and then by stream order, which keeps the merge deterministic.
  using Head = std::pair<std::size_t, std::size_t>;
  auto later = [&](const Head& a, const Head& b) {
    const auto& ta = streams[a.first].tags[a.second];
    const auto& tb = streams[b.first].tags[b.second];
    if (tag_before(ta, tb)) return false;
    if (tag_before(tb, ta)) return true;
    return a.first > b.first;
  };
  std::priority_queue<Head, std::vector<Head>, decltype(later)> heap(later);
  for (std::size_t i = 0; i < streams.size(); ++i)
    if (!streams[i].tags.empty()) heap.push({i, 0});
  while (!heap.empty()) {
    auto [s, p] = heap.top();
    heap.pop();
    out.tags.push_back(streams[s].tags[p]);
    if (p + 1 < streams[s].tags.size()) heap.push({s, p + 1});
  }
  return out;
}

}  // namespace tricascade
