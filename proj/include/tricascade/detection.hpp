#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tricascade/mcsim.hpp"
#include "tricascade/random.hpp"

namespace tricascade {

struct DetectorChannel {
  std::uint8_t id = 0;
  double efficiency = 1.0;
  double jitter_fwhm_ps = 0.0;  // Gaussian
  double dead_time_ps = 0.0;
  double dark_rate_per_ns = 0.0;
  double background_rate_per_ns = 0.0;
  std::uint32_t resolution_ps = 1;

  double noise_rate_per_ns() const { return dark_rate_per_ns + background_rate_per_ns; }
};

/// A detection record; `timestamp_ps` is a multiple of the channel resolution.
struct TimeTag {
  std::uint8_t channel = 0;
  std::uint64_t timestamp_ps = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

/// Stream order: timestamp, then channel id.
inline bool tag_before(const TimeTag& a, const TimeTag& b) {
  return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps : a.channel < b.channel;
}

struct TimeTagStream {
  std::vector<TimeTag> tags;
  std::uint32_t resolution_ps = 1;
  std::uint8_t channel_count = 0;
  std::uint64_t acquisition_ps = 0;

  std::uint64_t count(std::uint8_t channel) const;
  bool is_sorted() const;
};

/// Three APDs with 300 ps jitter and 512 ps tagger bins; efficiencies 25%,
/// 25%, 15% at the triexciton, biexciton and exciton wavelengths.
std::vector<DetectorChannel> default_channels();

/// Collection x fibre x grating efficiency, 0.46 * 0.85 * 0.75.
double default_chain_efficiency();

/// sigma = FWHM / (2 sqrt(2 ln 2)).
double fwhm_to_sigma(double fwhm);

struct DetectionConfig {
  std::vector<DetectorChannel> channels = default_channels();
  /// transition index -> channel id
  std::vector<std::uint8_t> routing;
  double chain_efficiency = default_chain_efficiency();
  std::uint64_t seed = 1;
};

/// Finest resolution that divides every channel's resolution.
std::uint32_t common_resolution(std::span<const DetectorChannel> channels);

/// Streaming detector chain: thinning, Gaussian jitter (truncated at 8 sigma),
/// quantization, Poisson dark/background counts and per-channel dead time.
/// Emissions are pushed in time-ordered blocks; tags are released once no
/// later block can precede them. The output does not depend on block sizes.
class DetectionPipeline {
 public:
  DetectionPipeline(const DetectionConfig& config, double duration_ns);

  /// `events` must all have time < block_end_ns and come after earlier blocks.
  void push(std::span<const EmissionEvent> events, double block_end_ns, std::vector<TimeTag>& ready);

  /// Releases everything still pending.
  void finish(std::vector<TimeTag>& ready);

  std::uint32_t resolution_ps() const { return resolution_; }
  std::uint8_t channel_count() const { return channel_count_; }

 private:
  struct ChannelState {
    DetectorChannel params;
    double sigma_ps = 0.0;
    Rng noise_rng;
    double next_noise_ns;
    bool has_last = false;
    std::uint64_t last_accepted = 0;
  };

  void release(std::uint64_t before_ps, std::vector<TimeTag>& ready);
  ChannelState& channel(std::uint8_t id);

  std::vector<ChannelState> channels_;
  std::vector<int> slot_;  // channel id -> index into channels_
  std::vector<std::uint8_t> routing_;
  double chain_;
  double duration_ns_;
  double margin_ps_ = 0.0;
  Rng rng_;
  std::vector<TimeTag> pending_;
  std::uint32_t resolution_;
  std::uint8_t channel_count_ = 0;
};

/// Whole-stream detection; throws StructuralError for unrouted transitions.
TimeTagStream detect(std::span<const EmissionEvent> emissions, double duration_ns,
                     const DetectionConfig& config);

/// Globally sorted union of sorted streams. Throws StructuralError for an
/// unsorted input.
TimeTagStream merge_streams(std::span<const TimeTagStream> streams);

}  // namespace tricascade
