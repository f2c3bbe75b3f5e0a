#include "diag/error.hpp"
#include "diag/signal_io.hpp"
#include "diag/spectrum.hpp"
#include "diag/synth.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <map>

using namespace diag;

namespace {

// Short-window RMS of the first difference: suppresses the low-frequency
// shaft terms and keeps the high-frequency bursts.
std::vector<double> envelope(const std::vector<double>& x, std::size_t window) {
  std::vector<double> d2(x.size(), 0.0);
  for (std::size_t n = 1; n < x.size(); ++n) d2[n] = (x[n] - x[n - 1]) * (x[n] - x[n - 1]);
  std::vector<double> env(x.size(), 0.0);
  double acc = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    acc += d2[n];
    if (n >= window) acc -= d2[n - window];
    env[n] = std::sqrt(std::max(acc, 0.0) / static_cast<double>(window));
  }
  return env;
}

std::size_t autocorrelation_peak(const std::vector<double>& e, std::size_t min_lag, std::size_t max_lag) {
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= static_cast<double>(e.size());
  std::size_t best = min_lag;
  double best_val = -1e300;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (std::size_t n = 0; n + lag < e.size(); ++n) s += (e[n] - mean) * (e[n + lag] - mean);
    s /= static_cast<double>(e.size());
    if (s > best_val) {
      best_val = s;
      best = lag;
    }
  }
  return best;
}

double band_energy(const std::vector<double>& seg, double fs, double lo, double hi) {
  const std::size_t n = default_fft_len(seg.size());
  const auto a = fft_amplitudes(seg, n);
  double e = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(n);
    if (f >= lo && f <= hi) e += a[k] * a[k];
  }
  return e;
}

}  // namespace

TEST_CASE("healthy noise-free signal peaks at the shaft frequency") {
  SynthSpec s;
  s.noise_std = 0.0;
  const Dataset d = generate(s, 1);
  const std::size_t n = default_fft_len(s.segment_len);
  const auto a = fft_amplitudes(d.segments[0], n);
  const auto top = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
  const double shaft_bin = s.shaft_hz() * static_cast<double>(n) / s.sampling_rate_hz;
  CHECK(std::abs(static_cast<double>(top) - shaft_bin) < 1.0);
}

TEST_CASE("outer-race envelope repeats at the fault frequency") {
  SynthSpec s;
  s.fault_type = FaultType::OF;
  s.shaft_speed_rpm = 1200;
  s.rng_seed = 7;
  CHECK(s.fault_frequency_hz() == doctest::Approx(71.6));
  const Dataset d = generate(s, 3);
  const double expected_lag = s.sampling_rate_hz / 71.6;
  for (const auto& seg : d.segments) {
    const std::size_t lag = autocorrelation_peak(envelope(seg, 10), 100, 800);
    CHECK(std::abs(static_cast<double>(lag) - expected_lag) <= 3.0);
  }
}

TEST_CASE("every faulty segment holds at least five impulses") {
  for (FaultType f : {FaultType::IF, FaultType::OF, FaultType::BF}) {
    SynthSpec s;
    s.fault_type = f;
    s.noise_std = 0.05;
    s.shaft_speed_rpm = 960;
    const Dataset d = generate(s, 4);
    const double period = s.sampling_rate_hz / s.fault_frequency_hz();
    const double expected = static_cast<double>(s.segment_len) / period;
    for (const auto& seg : d.segments) {
      const auto env = envelope(seg, 10);
      int count = 0;
      double last = -1e9;
      for (std::size_t n = 1; n < env.size(); ++n) {
        if (env[n] > 3.0 * s.noise_std && env[n - 1] <= 3.0 * s.noise_std && n - last > period / 2) {
          ++count;
          last = static_cast<double>(n);
        }
      }
      CHECK(count >= 5);
      CHECK(std::abs(count - expected) <= 2.0);
    }
  }
}

TEST_CASE("faulty spectra carry more resonance-band energy than healthy ones") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SynthSpec s;
    s.rng_seed = seed;
    const Dataset d = generate_domain(s, 1200, 5, 0);
    std::map<int, double> energy;
    for (std::size_t i = 0; i < d.size(); ++i)
      energy[d.labels[i]] += band_energy(d.segments[i], s.sampling_rate_hz, s.resonance_hz - 500, s.resonance_hz + 500);
    for (int c : {1, 2, 3}) CHECK(energy[c] > energy[0]);
  }
}

TEST_CASE("seeding") {
  SynthSpec a;
  a.fault_type = FaultType::IF;
  a.rng_seed = 1;
  SynthSpec b = a;
  b.rng_seed = 2;
  const Dataset da = generate(a, 2), db = generate(b, 2);
  CHECK(da.segments != db.segments);
  CHECK(da.labels == db.labels);
  CHECK(generate(a, 2).segments == da.segments);
  CHECK(da.segments[0] != da.segments[1]);
}

TEST_CASE("domain pairs") {
  SynthSpec base;
  base.rng_seed = 5;
  const auto [src, tgt] = generate_domain_pair(base, 960, 1320, 25);
  CHECK(src.size() == 100);
  CHECK(tgt.size() == 100);
  for (const Dataset* d : {&src, &tgt}) {
    std::map<int, int> counts;
    for (int l : d->labels) ++counts[l];
    CHECK(counts.size() == 4);
    for (const auto& [c, n] : counts) CHECK(n == 25);
    CHECK(d->label_set == bearing_label_set());
  }
  CHECK(src.name != tgt.name);
}

TEST_CASE("spec validation") {
  SynthSpec s;
  s.fault_type = FaultType::OF;
  s.resonance_hz = 15000;
  CHECK_THROWS_AS(generate(s, 1), ConfigError);
  s = SynthSpec{};
  s.fault_type = FaultType::IF;
  s.segment_len = 500;
  CHECK_THROWS_AS(generate(s, 1), ConfigError);
  s = SynthSpec{};
  s.shaft_speed_rpm = 300000;
  CHECK_THROWS_AS(generate(s, 1), ConfigError);
  CHECK_THROWS_AS(parse_fault_type("XF"), ConfigError);
  CHECK(parse_fault_type("BF") == FaultType::BF);
}

TEST_CASE("generated data flows through the manifest path") {
  const auto dir = testutil::scratch("synth_write");
  SynthSpec base;
  base.segment_len = 4000;
  const Dataset d = generate_domain(base, 1080, 3, 2);
  const auto manifest = write_dataset(d, dir / "dom");
  const Dataset back = build_dataset(load_manifest(manifest));
  CHECK(back.segments == d.segments);
  CHECK(back.labels == d.labels);
  CHECK(back.sampling_rate_hz == d.sampling_rate_hz);
}
