#pragma once

#include "diag/subspace.hpp"
#include "diag/svm.hpp"
#include "diag/synth.hpp"
#include "diag/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace diag {

enum class Method { baseline1, baseline2, svm_na, nn_sa, svm_sa };

std::string to_string(Method method);
Method parse_method(const std::string& text);
const std::vector<Method>& all_methods();
/// True for methods whose output depends on a seed (cross-validation folds).
bool is_stochastic(Method method);

enum class ReportFormat { json, csv };
ReportFormat parse_report_format(const std::string& text);

/// Where a domain's data comes from: a dataset manifest or the synthetic rig.
struct DomainSource {
  std::string name;
  std::optional<std::filesystem::path> manifest;
  std::optional<SynthSpec> synth;  // shaft_speed_rpm selects the working condition
  std::size_t per_class = 100;
};

struct HdhConfig {
  bool enabled = true;
  int repeats = 10;
  double split_fraction = 0.5;
};

struct ExperimentConfig {
  std::vector<DomainSource> domains;
  std::vector<Method> methods = all_methods();
  int repeats = 20;
  DimPolicy dim = FixedDim{30};
  CVConfig cv{};
  double baseline2_variance = 0.9;
  int knn_k = 1;
  HdhConfig hdh{};
  std::uint64_t rng_seed = 0;
  std::size_t fft_len = 0;
  int workers = 1;
  std::filesystem::path output = "report.json";
  ReportFormat format = ReportFormat::json;
  std::optional<std::filesystem::path> dump_dir;
  std::optional<std::filesystem::path> cache_dir;
};

/// Throws ConfigError on an empty method list, repeats < 1 and similar.
void validate(const ExperimentConfig& config);

/// Parses the JSON config; relative paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct SynthRequest {
  SynthSpec base;
  std::vector<double> speeds_rpm;
  std::size_t per_class = 100;
};
/// `diag synth` spec file: SynthSpec fields plus "speeds_rpm" and "per_class".
SynthRequest parse_synth_request(const std::string& json_text);

struct Domain {
  std::string name;
  FeatureMatrix features;
};

/// Loads or generates the domain, then featurizes it.
Domain load_domain(const DomainSource& source, std::size_t index, const ExperimentConfig& config);

struct MethodResult {
  Method method = Method::baseline1;
  std::vector<double> accuracies;  // one per repeat
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<std::vector<long>> confusion;  // [true][predicted], summed over repeats
  long chosen_d = 0;                         // 0 when the method has no subspace
  std::vector<double> chosen_c;              // per repeat; empty for non-SVM methods
  double wall_time_s = 0.0;

  bool operator==(const MethodResult&) const = default;
};

struct HdhSummary {
  double raw_mean = 0.0;
  double raw_std = 0.0;
  std::vector<double> raw_values;
  double aligned_mean = 0.0;
  double aligned_std = 0.0;
  std::vector<double> aligned_values;

  bool operator==(const HdhSummary&) const = default;
};

struct PairResult {
  std::string source;
  std::string target;
  LabelSet labels;
  long sa_dim = 0;
  std::vector<MethodResult> methods;
  std::optional<HdhSummary> hdh;
  std::vector<std::string> warnings;

  bool operator==(const PairResult&) const = default;
};

struct ExperimentReport {
  int repeats = 0;
  std::string dim_policy;
  int cv_folds = 0;
  std::vector<double> c_grid;
  std::uint64_t rng_seed = 0;
  std::vector<PairResult> pairs;

  bool operator==(const ExperimentReport&) const = default;
};

/// Called as each pipeline stage starts: "adapt", "train:<method>",
/// "predict:<method>", "score".
using StageObserver = std::function<void(std::string_view stage)>;

struct MethodPredictions {
  Method method = Method::baseline1;
  std::vector<std::vector<int>> per_repeat;
  long chosen_d = 0;
  std::vector<double> chosen_c;
  double wall_time_s = 0.0;
};

struct PairPredictions {
  long sa_dim = 0;
  std::vector<MethodPredictions> methods;
  std::optional<HdhSummary> hdh;
  std::vector<std::string> warnings;
  std::optional<TrainedSVM> svm_sa_model;  // first repeat, for dumps
};

/// Every adaptation, training and prediction stage. The target domain enters
/// as bare feature rows, so no stage here can read target labels.
PairPredictions predict_pair(const FeatureMatrix& source, const RowMatrix& target_rows, const ExperimentConfig& config,
                             std::uint64_t pair_seed, const StageObserver& observer = {});

/// predict_pair followed by scoring against the target labels.
PairResult run_pair(const Domain& source, const Domain& target, const ExperimentConfig& config,
                    std::uint64_t pair_seed, const StageObserver& observer = {});

/// All ordered (source, target) pairs with source != target.
ExperimentReport run_grid(const std::vector<Domain>& domains, const ExperimentConfig& config);

/// Loads every configured domain and runs the grid.
ExperimentReport run_experiment(const ExperimentConfig& config);

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);
/// One row per (pair, method); header documented in the README.
std::string report_to_csv(const ExperimentReport& report);
void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace diag
