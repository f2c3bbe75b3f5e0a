#pragma once

#include "diag/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

namespace diag {

enum class FaultType { NO = 0, IF = 1, OF = 2, BF = 3 };

std::string to_string(FaultType type);
FaultType parse_fault_type(const std::string& text);
int class_id(FaultType type);
/// NO, IF, OF, BF with ids 0..3.
LabelSet bearing_label_set();

/// Parameters of the synthetic test rig. A segment is a shaft-rate sinusoid
/// with harmonics plus white noise; faulty bearings add a train of decaying
/// resonance bursts at the fault characteristic frequency.
struct SynthSpec {
  double shaft_speed_rpm = 1200.0;
  FaultType fault_type = FaultType::NO;

  // Fault characteristic frequency = multiplier x shaft frequency.
  double outer_race_multiplier = 3.58;
  double inner_race_multiplier = 5.42;
  double ball_multiplier = 4.71;

  double resonance_hz = 3000.0;
  double decay_rate = 800.0;  // 1/s, burst envelope exp(-decay_rate * t)
  double noise_std = 0.15;
  double sampling_rate_hz = 20000.0;
  std::size_t segment_len = 12000;
  std::uint64_t rng_seed = 0;

  // Each fault location also rings a path-specific mode at
  // resonance_hz * ratio (speed independent).
  double outer_race_path_ratio = 1.0;
  double inner_race_path_ratio = 1.35;
  double ball_path_ratio = 0.7;

  double reference_rpm = 1000.0;
  double unbalance_amplitude = 3.0;  // at reference_rpm; scales with speed^2
  double impact_amplitude = 1.0;     // at reference_rpm; scales with speed
  int shaft_harmonics = 3;
  double impact_jitter = 0.01;  // uniform +/- fraction of the impact period

  double shaft_hz() const { return shaft_speed_rpm / 60.0; }
  /// 0 for NO.
  double fault_frequency_hz() const;
  double path_ratio() const;
};

/// Throws ConfigError unless every frequency is below Nyquist and a faulty
/// segment spans at least 5 impacts.
void validate(const SynthSpec& spec);

/// `count` segments of one fault type; deterministic in spec.rng_seed.
Dataset generate(const SynthSpec& spec, std::size_t count);

/// 4 classes x per_class segments at one shaft speed. `domain_index`
/// decorrelates the draws of domains sharing a base seed.
Dataset generate_domain(const SynthSpec& base, double shaft_speed_rpm, std::size_t per_class,
                        std::uint64_t domain_index);

/// Two domains differing only in shaft speed.
std::pair<Dataset, Dataset> generate_domain_pair(const SynthSpec& base, double source_rpm, double target_rpm,
                                                 std::size_t per_class);

/// Writes one raw_f64_le file per class plus manifest.json into `dir`;
/// returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace diag
