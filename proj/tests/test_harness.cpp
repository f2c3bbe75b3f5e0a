#include "diag/error.hpp"
#include "diag/harness.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numeric>

using namespace diag;

namespace {

DomainSource synth_domain(const std::string& name, double rpm, std::size_t per_class, std::uint64_t seed,
                          std::size_t segment_len = 4000) {
  DomainSource d;
  d.name = name;
  d.synth = SynthSpec{};
  d.synth->shaft_speed_rpm = rpm;
  d.synth->segment_len = segment_len;
  d.synth->rng_seed = seed;
  d.per_class = per_class;
  return d;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.repeats = 3;
  c.hdh.repeats = 3;
  c.rng_seed = 77;
  return c;
}

std::vector<Domain> load_all(const ExperimentConfig& c) {
  std::vector<Domain> out;
  for (std::size_t i = 0; i < c.domains.size(); ++i) out.push_back(load_domain(c.domains[i], i, c));
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  const std::string text = R"({
    "domains": [{"name": "a", "manifest": "a/manifest.json"},
                {"name": "b", "synth": {"shaft_speed_rpm": 1320, "noise_std": 0.2}, "per_class": 7}],
    "methods": ["svm_sa", "baseline1"], "repeats": 4,
    "dim": {"policy": "variance", "fraction": 0.8},
    "cv": {"c_grid": [0.1, 1], "folds": 3},
    "hdh": {"repeats": 5}, "rng_seed": 9, "workers": 2, "output": "out/r.csv", "format": "csv"})";
  const ExperimentConfig c = parse_experiment_config(text, "/base");
  REQUIRE(c.domains.size() == 2);
  CHECK(*c.domains[0].manifest == std::filesystem::path("/base/a/manifest.json"));
  CHECK(c.domains[1].synth->shaft_speed_rpm == 1320);
  CHECK(c.domains[1].synth->noise_std == 0.2);
  CHECK(c.domains[1].per_class == 7);
  CHECK(c.methods == std::vector<Method>{Method::svm_sa, Method::baseline1});
  CHECK(c.repeats == 4);
  CHECK(std::get<VarianceFraction>(c.dim).fraction == 0.8);
  CHECK(c.cv.c_grid == std::vector<double>{0.1, 1.0});
  CHECK(c.cv.folds == 3);
  CHECK(c.hdh.repeats == 5);
  CHECK(c.rng_seed == 9);
  CHECK(c.format == ReportFormat::csv);
  CHECK(c.output == std::filesystem::path("/base/out/r.csv"));

  const ExperimentConfig defaults = parse_experiment_config("{}");
  CHECK(defaults.repeats == 20);
  CHECK(defaults.methods.size() == 5);
  CHECK(std::get<FixedDim>(defaults.dim).d == 30);
  CHECK(defaults.cv.folds == 5);
  CHECK(defaults.knn_k == 1);

  CHECK_THROWS_AS(parse_experiment_config(R"({"methods": []})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"repeats": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"methods": ["svm"]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"repeat": 3})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"domains": [{"name": "x"}]})"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[1,"), ParseError);
}

TEST_CASE("pair counts") {
  ExperimentConfig c = small_config();
  c.methods = {Method::baseline1};
  c.hdh.enabled = false;
  for (int i = 0; i < 4; ++i) c.domains.push_back(synth_domain("d" + std::to_string(i), 960 + 120 * i, 3, 1));
  const auto domains = load_all(c);
  CHECK(run_grid(domains, c).pairs.size() == 12);
  CHECK(run_grid({domains[0], domains[1]}, c).pairs.size() == 2);
  CHECK_THROWS_AS(run_grid({domains[0]}, c), ConfigError);

  ExperimentConfig parallel = c;
  parallel.workers = 3;
  CHECK(run_grid(domains, parallel).pairs.size() == 12);
}

TEST_CASE("no-shift control: every method above 0.95") {
  ExperimentConfig c = small_config();
  c.domains = {synth_domain("a", 960, 25, 3, 12000), synth_domain("b", 960, 25, 3, 12000)};
  const auto domains = load_all(c);
  const PairResult r = run_pair(domains[0], domains[1], c, 5);
  REQUIRE(r.methods.size() == 5);
  for (const auto& m : r.methods) {
    INFO(to_string(m.method));
    CHECK(m.mean_accuracy > 0.95);
  }
}

TEST_CASE("report invariants") {
  ExperimentConfig c = small_config();
  c.domains = {synth_domain("slow", 960, 6, 4), synth_domain("fast", 1320, 6, 4)};
  const auto domains = load_all(c);
  const PairResult r = run_pair(domains[0], domains[1], c, 11);
  CHECK(r.sa_dim > 0);
  REQUIRE(r.hdh.has_value());
  CHECK(r.hdh->raw_values.size() == 3);
  for (const auto& m : r.methods) {
    INFO(to_string(m.method));
    CHECK(m.accuracies.size() == 3);
    for (double a : m.accuracies) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
    CHECK(m.mean_accuracy == std::accumulate(m.accuracies.begin(), m.accuracies.end(), 0.0) / 3.0);
    for (const auto& row : m.confusion) CHECK(std::accumulate(row.begin(), row.end(), 0L) == 6 * 3);
    if (!is_stochastic(m.method)) {
      CHECK(m.accuracies[0] == m.accuracies[1]);
      CHECK(m.accuracies[1] == m.accuracies[2]);
      CHECK(m.std_accuracy == 0.0);
    } else {
      CHECK(m.chosen_c.size() == 3);
    }
  }
}

TEST_CASE("identical inputs and seed reproduce accuracies") {
  ExperimentConfig c = small_config();
  c.domains = {synth_domain("slow", 960, 6, 4), synth_domain("fast", 1320, 6, 4)};
  const auto domains = load_all(c);
  const PairResult a = run_pair(domains[0], domains[1], c, 13), b = run_pair(domains[0], domains[1], c, 13);
  for (std::size_t i = 0; i < a.methods.size(); ++i) {
    CHECK(a.methods[i].accuracies == b.methods[i].accuracies);
    CHECK(a.methods[i].confusion == b.methods[i].confusion);
  }
  CHECK(a.hdh == b.hdh);
}

TEST_CASE("label-set and dimension mismatches are configuration errors") {
  ExperimentConfig c = small_config();
  c.domains = {synth_domain("a", 960, 3, 1), synth_domain("b", 1320, 3, 1)};
  auto domains = load_all(c);
  Domain other = domains[1];
  other.features.label_set = {{0, "NO"}, {1, "XX"}};
  CHECK_THROWS_AS(run_pair(domains[0], other, c, 1), ConfigError);
  Domain narrow = domains[1];
  narrow.features.rows = narrow.features.rows.leftCols(100).eval();
  CHECK_THROWS_AS(run_pair(domains[0], narrow, c, 1), ConfigError);
}

TEST_CASE("target labels are only read at scoring") {
  ExperimentConfig c = small_config();
  c.domains = {synth_domain("a", 960, 5, 2), synth_domain("b", 1320, 5, 2)};
  auto domains = load_all(c);
  Domain sentinel = domains[1];
  sentinel.features.labels = std::vector<int>(static_cast<std::size_t>(sentinel.features.n()), -12345);

  std::vector<std::string> stages;
  bool threw_scoring = false;
  try {
    run_pair(domains[0], sentinel, c, 3, [&](std::string_view s) { stages.emplace_back(s); });
  } catch (const ScoringError&) {
    threw_scoring = true;
  }
  CHECK(threw_scoring);
  REQUIRE_FALSE(stages.empty());
  CHECK(stages.back() == "score");
  for (Method m : c.methods) {
    CHECK(std::find(stages.begin(), stages.end(), "train:" + to_string(m)) != stages.end());
    CHECK(std::find(stages.begin(), stages.end(), "predict:" + to_string(m)) != stages.end());
  }
  CHECK(std::find(stages.begin(), stages.end(), "adapt") != stages.end());
}

TEST_CASE("json round trip and csv layout") {
  ExperimentConfig c = small_config();
  c.domains = {synth_domain("a", 960, 5, 8), synth_domain("b", 1200, 5, 8)};
  const ExperimentReport r = run_grid(load_all(c), c);
  CHECK(report_from_json(report_to_json(r)) == r);

  const std::string csv = report_to_csv(r);
  CHECK(csv == report_to_csv(report_from_json(report_to_json(r))));
  CHECK(csv.rfind("source,target,method,repeats,mean_accuracy,std_accuracy,chosen_d,chosen_c,hdh_raw_features,"
                  "hdh_aligned,wall_time_s\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 5);

  const auto dir = testutil::scratch("emit");
  emit_report(r, ReportFormat::csv, dir / "r.csv");
  emit_report(r, ReportFormat::json, dir / "r.json");
  CHECK(std::filesystem::file_size(dir / "r.csv") == csv.size());
  testutil::write_text(dir / "file", "x");
  CHECK_THROWS_AS(emit_report(r, ReportFormat::csv, dir / "file" / "r.csv"), IoError);
}

TEST_CASE("synth request parsing") {
  const SynthRequest r = parse_synth_request(R"({"speeds_rpm": [960, 1320], "per_class": 4, "noise_std": 0.1})");
  CHECK(r.speeds_rpm == std::vector<double>{960, 1320});
  CHECK(r.per_class == 4);
  CHECK(r.base.noise_std == 0.1);
  CHECK_THROWS_AS(parse_synth_request(R"({"speed": 3})"), ConfigError);
}
