#include "diag/synth.hpp"

#include "diag/error.hpp"
#include "diag/seeding.hpp"
#include "diag/signal_io.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace diag {

std::string to_string(FaultType type) {
  switch (type) {
    case FaultType::NO: return "NO";
    case FaultType::IF: return "IF";
    case FaultType::OF: return "OF";
    case FaultType::BF: return "BF";
  }
  return "?";
}

FaultType parse_fault_type(const std::string& text) {
  if (text == "NO") return FaultType::NO;
  if (text == "IF") return FaultType::IF;
  if (text == "OF") return FaultType::OF;
  if (text == "BF") return FaultType::BF;
  throw ConfigError("unknown fault type '" + text + "' (expected NO, IF, OF or BF)");
}

int class_id(FaultType type) { return static_cast<int>(type); }

LabelSet bearing_label_set() {
  LabelSet labels;
  for (FaultType t : {FaultType::NO, FaultType::IF, FaultType::OF, FaultType::BF})
    labels.push_back(FaultLabel{class_id(t), to_string(t)});
  return labels;
}

double SynthSpec::fault_frequency_hz() const {
  switch (fault_type) {
    case FaultType::OF: return outer_race_multiplier * shaft_hz();
    case FaultType::IF: return inner_race_multiplier * shaft_hz();
    case FaultType::BF: return ball_multiplier * shaft_hz();
    case FaultType::NO: break;
  }
  return 0.0;
}

double SynthSpec::path_ratio() const {
  switch (fault_type) {
    case FaultType::OF: return outer_race_path_ratio;
    case FaultType::IF: return inner_race_path_ratio;
    case FaultType::BF: return ball_path_ratio;
    case FaultType::NO: break;
  }
  return 0.0;
}

void validate(const SynthSpec& s) {
  auto fail = [](const std::string& msg) { throw ConfigError("synth: " + msg); };
  if (!(s.shaft_speed_rpm > 0)) fail("shaft_speed_rpm must be positive");
  if (!(s.sampling_rate_hz > 0)) fail("sampling_rate_hz must be positive");
  if (s.segment_len == 0) fail("segment_len must be positive");
  if (!(s.resonance_hz > 0) || !(s.decay_rate > 0)) fail("resonance_hz and decay_rate must be positive");
  if (!(s.noise_std >= 0)) fail("noise_std must be non-negative");
  if (!(s.reference_rpm > 0)) fail("reference_rpm must be positive");
  if (s.shaft_harmonics < 1) fail("shaft_harmonics must be at least 1");
  if (!(s.impact_jitter >= 0 && s.impact_jitter < 0.5)) fail("impact_jitter must lie in [0, 0.5)");
  for (double m : {s.outer_race_multiplier, s.inner_race_multiplier, s.ball_multiplier})
    if (!(m > 0)) fail("fault multipliers must be positive");

  const double nyquist = s.sampling_rate_hz / 2.0;
  if (s.shaft_harmonics * s.shaft_hz() >= nyquist) fail("shaft harmonics exceed the Nyquist frequency");
  if (s.fault_type == FaultType::NO) return;

  const double ff = s.fault_frequency_hz();
  std::ostringstream msg;
  if (ff >= nyquist) {
    msg << "fault frequency " << ff << " Hz is not below Nyquist (" << nyquist << " Hz)";
    fail(msg.str());
  }
  if (s.resonance_hz >= nyquist || s.resonance_hz * s.path_ratio() >= nyquist) {
    msg << "resonance modes must lie below Nyquist (" << nyquist << " Hz)";
    fail(msg.str());
  }
  if (!(s.path_ratio() > 0)) fail("path ratios must be positive");
  const double duration = static_cast<double>(s.segment_len) / s.sampling_rate_hz;
  if (duration * ff < 5.0) {
    msg << "segment of " << duration << " s holds fewer than 5 impacts at " << ff << " Hz";
    fail(msg.str());
  }
}

namespace {

std::vector<double> synth_segment(const SynthSpec& s, std::uint64_t seed) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const double fs = s.sampling_rate_hz;
  const double fr = s.shaft_hz();
  const double speed_ratio = s.shaft_speed_rpm / s.reference_rpm;
  const double unbalance = s.unbalance_amplitude * speed_ratio * speed_ratio;
  const double phase = two_pi * unit(rng);

  std::vector<double> x(s.segment_len);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double t = static_cast<double>(n) / fs;
    double v = 0.0;
    for (int h = 1; h <= s.shaft_harmonics; ++h) v += unbalance / h * std::sin(two_pi * h * fr * t + h * phase);
    x[n] = v + s.noise_std * noise(rng);
  }
  if (s.fault_type == FaultType::NO) return x;

  const double period = 1.0 / s.fault_frequency_hz();
  const double amp = s.impact_amplitude * speed_ratio;
  const double f1 = s.resonance_hz;
  const double f2 = s.resonance_hz * s.path_ratio();
  const double duration = static_cast<double>(x.size()) / fs;
  // Burst support: envelope falls below 1e-6 of its peak.
  const auto burst_len = static_cast<std::size_t>(std::ceil(std::log(1e6) / s.decay_rate * fs));

  const double t0 = period * unit(rng);
  for (std::size_t k = 0;; ++k) {
    const double jitter = s.impact_jitter * (2.0 * unit(rng) - 1.0);
    const double ti = t0 + (static_cast<double>(k) + jitter) * period;
    if (ti >= duration) break;
    if (ti < 0) continue;
    const auto first = static_cast<std::size_t>(std::ceil(ti * fs));
    for (std::size_t n = first; n < x.size() && n < first + burst_len; ++n) {
      const double tau = static_cast<double>(n) / fs - ti;
      x[n] += amp * std::exp(-s.decay_rate * tau) * (std::sin(two_pi * f1 * tau) + std::sin(two_pi * f2 * tau));
    }
  }
  return x;
}

}  // namespace

Dataset generate(const SynthSpec& spec, std::size_t count) {
  validate(spec);
  if (count == 0) throw ConfigError("synth: count must be positive");
  Dataset ds;
  ds.name = to_string(spec.fault_type);
  ds.label_set = bearing_label_set();
  ds.sampling_rate_hz = spec.sampling_rate_hz;
  ds.segments.resize(count);
  ds.labels.assign(count, class_id(spec.fault_type));
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k)
    ds.segments[static_cast<std::size_t>(k)] = synth_segment(spec, derive_seed(spec.rng_seed, {static_cast<std::uint64_t>(k)}));
  return ds;
}

Dataset generate_domain(const SynthSpec& base, double shaft_speed_rpm, std::size_t per_class,
                        std::uint64_t domain_index) {
  Dataset ds;
  std::ostringstream name;
  name << "synth_" << shaft_speed_rpm << "rpm";
  ds.name = name.str();
  ds.label_set = bearing_label_set();
  ds.sampling_rate_hz = base.sampling_rate_hz;
  for (FaultType t : {FaultType::NO, FaultType::IF, FaultType::OF, FaultType::BF}) {
    SynthSpec spec = base;
    spec.shaft_speed_rpm = shaft_speed_rpm;
    spec.fault_type = t;
    spec.rng_seed = derive_seed(base.rng_seed, {domain_index, static_cast<std::uint64_t>(class_id(t))});
    Dataset part = generate(spec, per_class);
    for (auto& seg : part.segments) ds.segments.push_back(std::move(seg));
    ds.labels.insert(ds.labels.end(), part.labels.begin(), part.labels.end());
  }
  return ds;
}

std::pair<Dataset, Dataset> generate_domain_pair(const SynthSpec& base, double source_rpm, double target_rpm,
                                                 std::size_t per_class) {
  return {generate_domain(base, source_rpm, per_class, 0), generate_domain(base, target_rpm, per_class, 1)};
}

std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  manifest.name = dataset.name;
  manifest.labels = dataset.label_set;
  manifest.sampling_rate_hz = dataset.sampling_rate_hz;
  for (const auto& label : dataset.label_set) {
    std::vector<double> samples;
    std::size_t count = 0, len = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels[i] != label.class_id) continue;
      len = dataset.segments[i].size();
      samples.insert(samples.end(), dataset.segments[i].begin(), dataset.segments[i].end());
      ++count;
    }
    if (count == 0) continue;
    const std::string file = label.class_name + ".f64";
    write_record_raw(dir / file, samples);
    manifest.entries.push_back(ManifestEntry{file, RecordFormat::raw_f64_le, label.class_id, len, count, 0});
  }
  const auto path = dir / "manifest.json";
  write_manifest(path, manifest);
  return path;
}

}  // namespace diag
