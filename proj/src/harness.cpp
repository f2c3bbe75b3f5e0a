#include "diag/harness.hpp"

#include "diag/classifiers.hpp"
#include "diag/divergence.hpp"
#include "diag/error.hpp"
#include "diag/kernels.hpp"
#include "diag/seeding.hpp"
#include "diag/signal_io.hpp"
#include "diag/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace diag {

using json = nlohmann::json;

namespace {

const std::map<std::string, Method>& method_names() {
  static const std::map<std::string, Method> names{{"baseline1", Method::baseline1},
                                                   {"baseline2", Method::baseline2},
                                                   {"svm_na", Method::svm_na},
                                                   {"nn_sa", Method::nn_sa},
                                                   {"svm_sa", Method::svm_sa}};
  return names;
}

bool uses_alignment(Method m) { return m == Method::nn_sa || m == Method::svm_sa; }

void require_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void read_opt(const json& obj, const char* key, T& out, const std::string& where) {
  if (obj.contains(key)) out = get_as<T>(obj, key, where);
}

const std::initializer_list<const char*> kSynthKeys{
    "shaft_speed_rpm",     "fault_type",          "outer_race_multiplier", "inner_race_multiplier",
    "ball_multiplier",     "resonance_hz",        "decay_rate",            "noise_std",
    "sampling_rate_hz",    "segment_len",         "rng_seed",              "outer_race_path_ratio",
    "inner_race_path_ratio", "ball_path_ratio",   "reference_rpm",         "unbalance_amplitude",
    "impact_amplitude",    "shaft_harmonics",     "impact_jitter"};

SynthSpec synth_from_json(const json& j, const std::string& where) {
  SynthSpec s;
  read_opt(j, "shaft_speed_rpm", s.shaft_speed_rpm, where);
  if (j.contains("fault_type")) s.fault_type = parse_fault_type(get_as<std::string>(j, "fault_type", where));
  read_opt(j, "outer_race_multiplier", s.outer_race_multiplier, where);
  read_opt(j, "inner_race_multiplier", s.inner_race_multiplier, where);
  read_opt(j, "ball_multiplier", s.ball_multiplier, where);
  read_opt(j, "resonance_hz", s.resonance_hz, where);
  read_opt(j, "decay_rate", s.decay_rate, where);
  read_opt(j, "noise_std", s.noise_std, where);
  read_opt(j, "sampling_rate_hz", s.sampling_rate_hz, where);
  read_opt(j, "segment_len", s.segment_len, where);
  read_opt(j, "rng_seed", s.rng_seed, where);
  read_opt(j, "outer_race_path_ratio", s.outer_race_path_ratio, where);
  read_opt(j, "inner_race_path_ratio", s.inner_race_path_ratio, where);
  read_opt(j, "ball_path_ratio", s.ball_path_ratio, where);
  read_opt(j, "reference_rpm", s.reference_rpm, where);
  read_opt(j, "unbalance_amplitude", s.unbalance_amplitude, where);
  read_opt(j, "impact_amplitude", s.impact_amplitude, where);
  read_opt(j, "shaft_harmonics", s.shaft_harmonics, where);
  read_opt(j, "impact_jitter", s.impact_jitter, where);
  return s;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Class ids in ascending order: the declared label set, else the distinct source labels.
std::vector<int> class_ids(const FeatureMatrix& source) {
  std::set<int> ids;
  for (const auto& l : source.label_set) ids.insert(l.class_id);
  if (ids.empty() && source.labels)
    for (int l : *source.labels) ids.insert(l);
  return {ids.begin(), ids.end()};
}

void mean_std(const std::vector<double>& v, double& mean, double& std) {
  const double n = static_cast<double>(v.size());
  mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  std = std::sqrt(ss / n);
}

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

std::string to_string(Method method) {
  for (const auto& [name, m] : method_names())
    if (m == method) return name;
  throw ConfigError("unknown method");
}

Method parse_method(const std::string& text) {
  const auto it = method_names().find(text);
  if (it == method_names().end())
    throw ConfigError("unknown method '" + text + "' (expected baseline1, baseline2, svm_na, nn_sa or svm_sa)");
  return it->second;
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::baseline1, Method::baseline2, Method::svm_na, Method::nn_sa,
                                           Method::svm_sa};
  return methods;
}

bool is_stochastic(Method method) { return method == Method::svm_na || method == Method::svm_sa; }

ReportFormat parse_report_format(const std::string& text) {
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  throw ConfigError("unknown report format '" + text + "' (expected json or csv)");
}

void validate(const ExperimentConfig& config) {
  if (config.methods.empty()) throw ConfigError("config: at least one method is required");
  std::set<Method> seen;
  for (Method m : config.methods)
    if (!seen.insert(m).second) throw ConfigError("config: method '" + to_string(m) + "' listed twice");
  if (config.repeats < 1) throw ConfigError("config: repeats must be >= 1");
  if (config.knn_k < 1) throw ConfigError("config: knn_k must be >= 1");
  if (config.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (!(config.baseline2_variance > 0.0 && config.baseline2_variance <= 1.0))
    throw ConfigError("config: baseline2_variance must lie in (0, 1]");
  if (config.cv.c_grid.empty()) throw ConfigError("config: cv.c_grid is empty");
  for (double c : config.cv.c_grid)
    if (!(c > 0.0)) throw ConfigError("config: cv.c_grid values must be positive");
  if (config.cv.folds < 2) throw ConfigError("config: cv.folds must be >= 2");
  if (config.hdh.repeats < 1) throw ConfigError("config: hdh.repeats must be >= 1");
  if (!(config.hdh.split_fraction > 0.0 && config.hdh.split_fraction < 1.0))
    throw ConfigError("config: hdh.split_fraction must lie in (0, 1)");
  if (const auto* f = std::get_if<FixedDim>(&config.dim); f && f->d < 1) throw ConfigError("config: dim must be >= 1");
  if (const auto* v = std::get_if<VarianceFraction>(&config.dim); v && !(v->fraction > 0.0 && v->fraction <= 1.0))
    throw ConfigError("config: variance fraction must lie in (0, 1]");
  std::set<std::string> names;
  for (const auto& d : config.domains) {
    if (d.name.empty()) throw ConfigError("config: every domain needs a name");
    if (!names.insert(d.name).second) throw ConfigError("config: duplicate domain name '" + d.name + "'");
    if (d.manifest.has_value() == d.synth.has_value())
      throw ConfigError("config: domain '" + d.name + "' needs exactly one of manifest or synth");
    if (d.synth && d.per_class < 1) throw ConfigError("config: domain '" + d.name + "' per_class must be >= 1");
  }
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  const json j = parse_json(json_text, "experiment config");
  require_keys(j,
               {"domains", "methods", "repeats", "dim", "cv", "baseline2_variance", "knn_k", "hdh", "rng_seed",
                "fft_len", "workers", "output", "format", "dump_dir", "cache_dir"},
               "config");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  ExperimentConfig c;
  if (j.contains("domains")) {
    const json& domains = j.at("domains");
    if (!domains.is_array()) throw ConfigError("config.domains: expected an array");
    for (std::size_t i = 0; i < domains.size(); ++i) {
      const std::string where = "config.domains[" + std::to_string(i) + "]";
      const json& d = domains[i];
      require_keys(d, {"name", "manifest", "synth", "per_class"}, where);
      DomainSource src;
      src.name = get_as<std::string>(d, "name", where);
      if (d.contains("manifest")) src.manifest = resolve(get_as<std::string>(d, "manifest", where));
      if (d.contains("synth")) {
        require_keys(d.at("synth"), kSynthKeys, where + ".synth");
        src.synth = synth_from_json(d.at("synth"), where + ".synth");
      }
      read_opt(d, "per_class", src.per_class, where);
      c.domains.push_back(std::move(src));
    }
  }
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : get_as<std::vector<std::string>>(j, "methods", "config")) c.methods.push_back(parse_method(m));
  }
  read_opt(j, "repeats", c.repeats, "config");
  if (j.contains("dim")) {
    const json& d = j.at("dim");
    require_keys(d, {"policy", "d", "fraction"}, "config.dim");
    const std::string policy = get_as<std::string>(d, "policy", "config.dim");
    if (policy == "fixed") {
      FixedDim f;
      read_opt(d, "d", f.d, "config.dim");
      c.dim = f;
    } else if (policy == "variance") {
      VarianceFraction v;
      read_opt(d, "fraction", v.fraction, "config.dim");
      c.dim = v;
    } else {
      throw ConfigError("config.dim.policy: expected 'fixed' or 'variance', got '" + policy + "'");
    }
  }
  if (j.contains("cv")) {
    const json& cv = j.at("cv");
    require_keys(cv, {"c_grid", "folds", "tol", "max_iterations"}, "config.cv");
    read_opt(cv, "c_grid", c.cv.c_grid, "config.cv");
    read_opt(cv, "folds", c.cv.folds, "config.cv");
    read_opt(cv, "tol", c.cv.solver.tol, "config.cv");
    read_opt(cv, "max_iterations", c.cv.solver.max_iterations, "config.cv");
  }
  read_opt(j, "baseline2_variance", c.baseline2_variance, "config");
  read_opt(j, "knn_k", c.knn_k, "config");
  if (j.contains("hdh")) {
    const json& h = j.at("hdh");
    require_keys(h, {"enabled", "repeats", "split_fraction"}, "config.hdh");
    read_opt(h, "enabled", c.hdh.enabled, "config.hdh");
    read_opt(h, "repeats", c.hdh.repeats, "config.hdh");
    read_opt(h, "split_fraction", c.hdh.split_fraction, "config.hdh");
  }
  read_opt(j, "rng_seed", c.rng_seed, "config");
  read_opt(j, "fft_len", c.fft_len, "config");
  read_opt(j, "workers", c.workers, "config");
  if (j.contains("output")) c.output = resolve(get_as<std::string>(j, "output", "config"));
  if (j.contains("format")) c.format = parse_report_format(get_as<std::string>(j, "format", "config"));
  if (j.contains("dump_dir")) c.dump_dir = resolve(get_as<std::string>(j, "dump_dir", "config"));
  if (j.contains("cache_dir")) c.cache_dir = resolve(get_as<std::string>(j, "cache_dir", "config"));
  validate(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(slurp(path), path.parent_path());
}

SynthRequest parse_synth_request(const std::string& json_text) {
  const json j = parse_json(json_text, "synth spec");
  if (!j.is_object()) throw ConfigError("synth spec: expected a JSON object");
  json spec = j;
  spec.erase("speeds_rpm");
  spec.erase("per_class");
  require_keys(spec, kSynthKeys, "synth spec");
  SynthRequest r;
  r.base = synth_from_json(spec, "synth spec");
  if (j.contains("speeds_rpm"))
    r.speeds_rpm = get_as<std::vector<double>>(j, "speeds_rpm", "synth spec");
  else
    r.speeds_rpm = {r.base.shaft_speed_rpm};
  read_opt(j, "per_class", r.per_class, "synth spec");
  if (r.speeds_rpm.empty()) throw ConfigError("synth spec: speeds_rpm is empty");
  if (r.per_class < 1) throw ConfigError("synth spec: per_class must be >= 1");
  return r;
}

Domain load_domain(const DomainSource& source, std::size_t index, const ExperimentConfig& config) {
  std::optional<std::filesystem::path> cache;
  if (config.cache_dir && source.manifest) {
    cache = *config.cache_dir / (source.name + "_fft" + std::to_string(config.fft_len) + ".fm");
    if (std::filesystem::exists(*cache)) {
      Domain d{source.name, read_feature_cache(*cache)};
      d.features.label_set = load_manifest(*source.manifest).labels;
      return d;
    }
  }
  Dataset data;
  if (source.manifest) {
    data = build_dataset(load_manifest(*source.manifest));
  } else if (source.synth) {
    data = generate_domain(*source.synth, source.synth->shaft_speed_rpm, source.per_class, index);
  } else {
    throw ConfigError("domain '" + source.name + "' has neither manifest nor synth spec");
  }
  Domain d{source.name, featurize(data, config.fft_len)};
  if (cache) {
    std::filesystem::create_directories(*config.cache_dir);
    write_feature_cache(*cache, d.features);
  }
  return d;
}

PairPredictions predict_pair(const FeatureMatrix& source, const RowMatrix& target_rows, const ExperimentConfig& config,
                             std::uint64_t pair_seed, const StageObserver& observer) {
  auto stage = [&](std::string_view name) {
    if (observer) observer(name);
  };
  if (!source.labels) throw ConfigError("source domain has no labels");
  if (source.dim() != target_rows.cols())
    throw ConfigError("feature dimension mismatch: source " + std::to_string(source.dim()) + ", target " +
                      std::to_string(target_rows.cols()));
  const std::vector<int>& ys = *source.labels;
  const RowMatrix& xs = source.rows;
  const auto repeats = static_cast<std::size_t>(config.repeats);

  PairPredictions out;
  const bool need_sa = config.hdh.enabled || std::any_of(config.methods.begin(), config.methods.end(), uses_alignment);
  Subspace zs, zt;
  AlignmentMatrix m;
  if (need_sa) {
    stage("adapt");
    const PcaModel ps = pca_decompose(xs);
    const PcaModel pt = pca_decompose(target_rows);
    const Eigen::Index d = select_dim(ps.eigenvalues, pt.eigenvalues, config.dim);
    zs = truncate(ps, d);
    zt = truncate(pt, d);
    m = align(zs, zt);
    out.sa_dim = static_cast<long>(d);
  }

  for (Method method : config.methods) {
    const auto start = std::chrono::steady_clock::now();
    MethodPredictions mp;
    mp.method = method;
    const std::string name = to_string(method);
    switch (method) {
      case Method::baseline1: {
        stage("train:" + name);
        stage("predict:" + name);
        mp.per_repeat.assign(repeats, baseline1_nn(xs, ys, target_rows));
        break;
      }
      case Method::baseline2: {
        stage("train:" + name);
        stage("predict:" + name);
        JointPcaResult r = baseline2_joint_pca_nn(xs, ys, target_rows, config.baseline2_variance);
        mp.chosen_d = static_cast<long>(r.d);
        mp.per_repeat.assign(repeats, std::move(r.predictions));
        break;
      }
      case Method::nn_sa: {
        stage("train:" + name);
        const SimilarityMatrix sim = similarity(xs, target_rows, zs, zt, m);
        stage("predict:" + name);
        mp.chosen_d = out.sa_dim;
        mp.per_repeat.assign(repeats, knn_predict(sim, ys, config.knn_k));
        break;
      }
      case Method::svm_na:
      case Method::svm_sa: {
        stage("train:" + name);
        RowMatrix train, cross;
        if (method == Method::svm_na) {
          train = kernels::parallel::inner_products(xs, xs);
          cross = kernels::parallel::inner_products(xs, target_rows);
        } else {
          const SourceKernel k = source_kernel(xs, zs, zt, m);
          if (k.max_asymmetry > 1e-6)
            out.warnings.push_back("svm_sa: source kernel asymmetry " + fmt_double(k.max_asymmetry) +
                                   " before symmetrisation");
          const double trace = k.values.trace();
          const double n = static_cast<double>(k.values.rows());
          const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k.values, Eigen::EigenvaluesOnly);
          const double min_eig = es.eigenvalues().minCoeff();
          if (min_eig < -1e-6 * trace / n)
            out.warnings.push_back("svm_sa: source kernel is indefinite (minimum eigenvalue " + fmt_double(min_eig) +
                                   ")");
          train = k.values;
          cross = cross_kernel(xs, target_rows, zs, zt, m);
          mp.chosen_d = out.sa_dim;
        }
        // CV fold shuffling is the only seeded step, so each repeat gets its own seed.
        for (std::size_t r = 0; r < repeats; ++r) {
          CVConfig cv = config.cv;
          cv.rng_seed = derive_seed(pair_seed, {static_cast<std::uint64_t>(method), r});
          SvmResult res = svm_with_kernel(train, ys, cross, cv);
          if (r == 0) stage("predict:" + name);
          mp.chosen_c.push_back(res.c);
          mp.per_repeat.push_back(std::move(res.predictions));
          if (method == Method::svm_sa && r == 0) out.svm_sa_model = std::move(res.model);
        }
        break;
      }
    }
    mp.wall_time_s = seconds_since(start);
    out.methods.push_back(std::move(mp));
  }

  if (config.hdh.enabled) {
    stage("hdh");
    const std::uint64_t seed = derive_seed(pair_seed, {0x4844ull});
    const RepeatedDivergence raw =
        estimate_hdh_repeated(xs, target_rows, config.hdh.repeats, seed, config.hdh.split_fraction);
    const RepeatedDivergence aligned =
        estimate_hdh_repeated(project_source_aligned(xs, zs, m), project_target(target_rows, zt), config.hdh.repeats,
                              seed, config.hdh.split_fraction);
    out.hdh = HdhSummary{raw.mean, raw.std, raw.values, aligned.mean, aligned.std, aligned.values};
  }
  return out;
}

PairResult run_pair(const Domain& source, const Domain& target, const ExperimentConfig& config,
                    std::uint64_t pair_seed, const StageObserver& observer) {
  validate(config);
  const std::string ctx = "pair " + source.name + " -> " + target.name + ": ";
  const LabelSet& ls = source.features.label_set;
  const LabelSet& lt = target.features.label_set;
  if (!ls.empty() && !lt.empty() && ls != lt) throw ConfigError(ctx + "source and target declare different label sets");
  if (source.features.dim() != target.features.dim())
    throw ConfigError(ctx + "feature dimensions differ (" + std::to_string(source.features.dim()) + " vs " +
                      std::to_string(target.features.dim()) + ")");

  PairPredictions pred;
  try {
    pred = predict_pair(source.features, target.features.rows, config, pair_seed, observer);
  } catch (const Error& e) {
    throw_error(e.kind(), ctx + e.what());
  }

  if (observer) observer("score");
  const std::vector<int> classes = class_ids(source.features);
  const auto n_t = static_cast<std::size_t>(target.features.n());
  if (!target.features.labels || target.features.labels->size() != n_t)
    throw ScoringError(ctx + "target labels are missing");
  std::vector<std::size_t> truth(n_t);
  for (std::size_t i = 0; i < n_t; ++i) {
    const int label = (*target.features.labels)[i];
    const auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label)
      throw ScoringError(ctx + "target sample " + std::to_string(i) + " has undeclared label " +
                         std::to_string(label));
    truth[i] = static_cast<std::size_t>(it - classes.begin());
  }

  PairResult result;
  result.source = source.name;
  result.target = target.name;
  result.labels = ls.empty() ? lt : ls;
  result.sa_dim = pred.sa_dim;
  result.hdh = pred.hdh;
  result.warnings = pred.warnings;
  for (const MethodPredictions& mp : pred.methods) {
    MethodResult mr;
    mr.method = mp.method;
    mr.chosen_d = mp.chosen_d;
    mr.chosen_c = mp.chosen_c;
    mr.wall_time_s = mp.wall_time_s;
    mr.confusion.assign(classes.size(), std::vector<long>(classes.size(), 0));
    for (const auto& p : mp.per_repeat) {
      std::size_t correct = 0;
      for (std::size_t i = 0; i < n_t; ++i) {
        const auto it = std::lower_bound(classes.begin(), classes.end(), p[i]);
        if (it == classes.end() || *it != p[i])
          throw ScoringError(ctx + to_string(mp.method) + " predicted unknown class " + std::to_string(p[i]));
        const auto col = static_cast<std::size_t>(it - classes.begin());
        ++mr.confusion[truth[i]][col];
        correct += col == truth[i];
      }
      mr.accuracies.push_back(static_cast<double>(correct) / static_cast<double>(n_t));
    }
    mean_std(mr.accuracies, mr.mean_accuracy, mr.std_accuracy);
    result.methods.push_back(std::move(mr));
  }

  if (config.dump_dir) {
    const auto dir = *config.dump_dir / (source.name + "_to_" + target.name);
    std::filesystem::create_directories(dir);
    for (const MethodPredictions& mp : pred.methods)
      write_predictions_csv(dir / (to_string(mp.method) + "_predictions.csv"), mp.per_repeat.front());
    if (pred.svm_sa_model) save_model(dir / "svm_sa_model", *pred.svm_sa_model);
  }
  return result;
}

ExperimentReport run_grid(const std::vector<Domain>& domains, const ExperimentConfig& config) {
  validate(config);
  if (domains.size() < 2) throw ConfigError("run_grid needs at least 2 domains, got " + std::to_string(domains.size()));
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t s = 0; s < domains.size(); ++s)
    for (std::size_t t = 0; t < domains.size(); ++t)
      if (s != t) pairs.emplace_back(s, t);

  ExperimentReport report;
  report.repeats = config.repeats;
  report.dim_policy = describe(config.dim);
  report.cv_folds = config.cv.folds;
  report.c_grid = config.cv.c_grid;
  report.rng_seed = config.rng_seed;
  report.pairs.resize(pairs.size());

  std::vector<std::string> kinds(pairs.size()), errors(pairs.size());
  const auto n_pairs = static_cast<long>(pairs.size());
#pragma omp parallel for schedule(dynamic) num_threads(config.workers)
  for (long p = 0; p < n_pairs; ++p) {
    const auto [s, t] = pairs[static_cast<std::size_t>(p)];
    try {
      report.pairs[static_cast<std::size_t>(p)] =
          run_pair(domains[s], domains[t], config, derive_seed(config.rng_seed, {s, t}));
    } catch (const Error& e) {
      kinds[static_cast<std::size_t>(p)] = e.kind();
      errors[static_cast<std::size_t>(p)] = e.what();
    }
  }
  for (std::size_t p = 0; p < pairs.size(); ++p)
    if (!errors[p].empty()) throw_error(kinds[p], errors[p]);
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  validate(config);
  std::vector<Domain> domains(config.domains.size());
  for (std::size_t i = 0; i < domains.size(); ++i) {
    try {
      domains[i] = load_domain(config.domains[i], i, config);
    } catch (const Error& e) {
      throw_error(e.kind(), "domain '" + config.domains[i].name + "': " + e.what());
    }
  }
  return run_grid(domains, config);
}

}  // namespace diag
