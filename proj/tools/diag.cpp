// diag: command-line front end for the cross-condition diagnosis experiments.
#include "diag/divergence.hpp"
#include "diag/error.hpp"
#include "diag/harness.hpp"
#include "diag/signal_io.hpp"
#include "diag/spectrum.hpp"
#include "diag/subspace.hpp"
#include "diag/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using json = nlohmann::json;

int report_error(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw diag::IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "30" or "fixed:30" -> fixed dimension; "variance:0.9" -> variance fraction.
diag::DimPolicy parse_dim(const std::string& text) {
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw diag::ConfigError("--dim: cannot parse '" + text + "'");
    return v;
  };
  const auto colon = text.find(':');
  const std::string kind = colon == std::string::npos ? "fixed" : text.substr(0, colon);
  const std::string value = colon == std::string::npos ? text : text.substr(colon + 1);
  if (kind == "fixed") {
    const double d = number(value);
    if (d < 1 || d != static_cast<double>(static_cast<long>(d)))
      throw diag::ConfigError("--dim: fixed dimension must be a positive integer");
    return diag::FixedDim{static_cast<Eigen::Index>(d)};
  }
  if (kind == "variance" || kind == "var") return diag::VarianceFraction{number(value)};
  throw diag::ConfigError("--dim: expected N, fixed:N or variance:F");
}

std::vector<diag::Method> parse_methods(const std::string& text) {
  std::vector<diag::Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(diag::parse_method(item));
  return out;
}

json repeated_json(const diag::RepeatedDivergence& r) {
  return {{"mean", r.mean}, {"std", r.std}, {"values", r.values}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-condition bearing fault diagnosis with subspace alignment"};
  app.require_subcommand(1);

  std::string config_path, output, format, dim_text, methods_text;
  int repeats = 0, workers = 0;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Run every ordered domain pair from an experiment config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--repeats", repeats, "Repeats per pair")->check(CLI::PositiveNumber);
  run->add_option("--dim", dim_text, "Subspace dimension: N, fixed:N or variance:F");
  run->add_option("--methods", methods_text, "Comma-separated: baseline1,baseline2,svm_na,nn_sa,svm_sa");
  auto* seed_opt = run->add_option("--seed", seed, "Master RNG seed");
  run->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  run->add_option("--workers", workers, "Concurrent pairs")->check(CLI::PositiveNumber);
  run->add_option("--output", output, "Report path (overrides the config)");

  std::string spec_path, out_dir;
  auto* synth = app.add_subcommand("synth", "Generate synthetic domains as manifests + raw records");
  synth->add_option("--spec", spec_path, "Synth spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_dir, "Output directory")->required();

  std::string source_path, target_path, hdh_dim = "30";
  int hdh_repeats = 10;
  double split = 0.5;
  std::size_t fft_len = 0;
  std::uint64_t hdh_seed = 0;
  auto* hdh = app.add_subcommand("hdh", "Estimate the HdH divergence between two domains, before and after alignment");
  hdh->add_option("--source", source_path, "Source manifest")->required()->check(CLI::ExistingFile);
  hdh->add_option("--target", target_path, "Target manifest")->required()->check(CLI::ExistingFile);
  hdh->add_option("--dim", hdh_dim, "Subspace dimension: N, fixed:N or variance:F")->capture_default_str();
  hdh->add_option("--repeats", hdh_repeats, "Random splits to average")->capture_default_str()->check(CLI::PositiveNumber);
  hdh->add_option("--split", split, "Train fraction of each domain")->capture_default_str();
  hdh->add_option("--seed", hdh_seed, "RNG seed")->capture_default_str();
  hdh->add_option("--fft-len", fft_len, "FFT length (0 = next power of two)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage_error", e.what(), 64);
  }

  try {
    if (*run) {
      diag::ExperimentConfig config = diag::load_experiment_config(config_path);
      if (repeats > 0) config.repeats = repeats;
      if (!dim_text.empty()) config.dim = parse_dim(dim_text);
      if (!methods_text.empty()) config.methods = parse_methods(methods_text);
      if (*seed_opt) config.rng_seed = seed;
      if (!format.empty()) config.format = diag::parse_report_format(format);
      if (workers > 0) config.workers = workers;
      if (!output.empty()) config.output = output;
      diag::validate(config);
      const diag::ExperimentReport report = diag::run_experiment(config);
      for (const auto& p : report.pairs)
        for (const auto& w : p.warnings)
          std::cerr << json{{"warning", {{"pair", p.source + "->" + p.target}, {"message", w}}}}.dump() << "\n";
      diag::emit_report(report, config.format, config.output);
      std::cout << json{{"report", config.output.string()}, {"pairs", report.pairs.size()}}.dump() << "\n";
    } else if (*synth) {
      const diag::SynthRequest req = diag::parse_synth_request(slurp(spec_path));
      json written = json::array();
      for (std::size_t i = 0; i < req.speeds_rpm.size(); ++i) {
        const diag::Dataset data = diag::generate_domain(req.base, req.speeds_rpm[i], req.per_class, i);
        const auto manifest = diag::write_dataset(data, std::filesystem::path(out_dir) / data.name);
        written.push_back({{"name", data.name}, {"manifest", manifest.string()}, {"segments", data.size()}});
      }
      std::cout << json{{"domains", written}}.dump(2) << "\n";
    } else if (*hdh) {
      const auto load = [&](const std::string& path) {
        return diag::featurize(diag::build_dataset(diag::load_manifest(path)), fft_len);
      };
      const diag::FeatureMatrix s = load(source_path);
      const diag::FeatureMatrix t = load(target_path);
      if (s.dim() != t.dim()) throw diag::ConfigError("source and target feature dimensions differ");
      const diag::PcaModel ps = diag::pca_decompose(s.rows);
      const diag::PcaModel pt = diag::pca_decompose(t.rows);
      const Eigen::Index d = diag::select_dim(ps.eigenvalues, pt.eigenvalues, parse_dim(hdh_dim));
      const diag::Subspace zs = diag::truncate(ps, d), zt = diag::truncate(pt, d);
      const diag::AlignmentMatrix m = diag::align(zs, zt);
      const auto raw = diag::estimate_hdh_repeated(s.rows, t.rows, hdh_repeats, hdh_seed, split);
      const auto aligned = diag::estimate_hdh_repeated(diag::project_source_aligned(s.rows, zs, m),
                                                       diag::project_target(t.rows, zt), hdh_repeats, hdh_seed, split);
      std::cout << json{{"source", source_path},
                        {"target", target_path},
                        {"dim", d},
                        {"hdh_raw_features", repeated_json(raw)},
                        {"hdh_aligned", repeated_json(aligned)}}
                       .dump(2)
                << "\n";
    }
  } catch (const diag::Error& e) {
    return report_error(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal_error", e.what(), 2);
  }
  return 0;
}
