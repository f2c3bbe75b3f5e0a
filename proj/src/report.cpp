#include "diag/error.hpp"
#include "diag/harness.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <map>

namespace diag {

using json = nlohmann::json;

namespace {

json labels_to_json(const LabelSet& labels) {
  json out = json::array();
  for (const auto& l : labels) out.push_back({{"class_id", l.class_id}, {"class_name", l.class_name}});
  return out;
}

json repeated_to_json(double mean, double std, const std::vector<double>& values) {
  return {{"mean", mean}, {"std", std}, {"values", values}};
}

json method_to_json(const MethodResult& m) {
  return {{"method", to_string(m.method)},
          {"mean_accuracy", m.mean_accuracy},
          {"std_accuracy", m.std_accuracy},
          {"accuracies", m.accuracies},
          {"confusion", m.confusion},
          {"chosen_d", m.chosen_d},
          {"chosen_c", m.chosen_c},
          {"wall_time_s", m.wall_time_s}};
}

json pair_to_json(const PairResult& p) {
  json j{{"source", p.source},
         {"target", p.target},
         {"labels", labels_to_json(p.labels)},
         {"sa_dim", p.sa_dim},
         {"warnings", p.warnings}};
  json methods = json::array();
  for (const auto& m : p.methods) methods.push_back(method_to_json(m));
  j["methods"] = std::move(methods);
  if (p.hdh) {
    j["hdh_raw_features"] = repeated_to_json(p.hdh->raw_mean, p.hdh->raw_std, p.hdh->raw_values);
    j["hdh_aligned"] = repeated_to_json(p.hdh->aligned_mean, p.hdh->aligned_std, p.hdh->aligned_values);
  }
  return j;
}

// Shortest representation that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Most frequent value; the smallest wins ties.
double modal(const std::vector<double>& values) {
  std::map<double, int> counts;
  for (double v : values) ++counts[v];
  double best = values.front();
  int best_count = 0;
  for (const auto& [v, c] : counts)
    if (c > best_count) {
      best = v;
      best_count = c;
    }
  return best;
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
  json j{{"repeats", report.repeats},
         {"dim_policy", report.dim_policy},
         {"cv_folds", report.cv_folds},
         {"c_grid", report.c_grid},
         {"rng_seed", report.rng_seed}};
  json pairs = json::array();
  for (const auto& p : report.pairs) pairs.push_back(pair_to_json(p));
  j["pairs"] = std::move(pairs);
  return j.dump(2) + "\n";
}

ExperimentReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ExperimentReport r;
    r.repeats = j.at("repeats").get<int>();
    r.dim_policy = j.at("dim_policy").get<std::string>();
    r.cv_folds = j.at("cv_folds").get<int>();
    r.c_grid = j.at("c_grid").get<std::vector<double>>();
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    for (const json& pj : j.at("pairs")) {
      PairResult p;
      p.source = pj.at("source").get<std::string>();
      p.target = pj.at("target").get<std::string>();
      for (const json& l : pj.at("labels"))
        p.labels.push_back({l.at("class_id").get<int>(), l.at("class_name").get<std::string>()});
      p.sa_dim = pj.at("sa_dim").get<long>();
      p.warnings = pj.at("warnings").get<std::vector<std::string>>();
      for (const json& mj : pj.at("methods")) {
        MethodResult m;
        m.method = parse_method(mj.at("method").get<std::string>());
        m.mean_accuracy = mj.at("mean_accuracy").get<double>();
        m.std_accuracy = mj.at("std_accuracy").get<double>();
        m.accuracies = mj.at("accuracies").get<std::vector<double>>();
        m.confusion = mj.at("confusion").get<std::vector<std::vector<long>>>();
        m.chosen_d = mj.at("chosen_d").get<long>();
        m.chosen_c = mj.at("chosen_c").get<std::vector<double>>();
        m.wall_time_s = mj.at("wall_time_s").get<double>();
        p.methods.push_back(std::move(m));
      }
      if (pj.contains("hdh_raw_features")) {
        const json& raw = pj.at("hdh_raw_features");
        const json& al = pj.at("hdh_aligned");
        p.hdh = HdhSummary{raw.at("mean").get<double>(),          raw.at("std").get<double>(),
                           raw.at("values").get<std::vector<double>>(), al.at("mean").get<double>(),
                           al.at("std").get<double>(),            al.at("values").get<std::vector<double>>()};
      }
      r.pairs.push_back(std::move(p));
    }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::string report_to_csv(const ExperimentReport& report) {
  std::string out =
      "source,target,method,repeats,mean_accuracy,std_accuracy,chosen_d,chosen_c,hdh_raw_features,hdh_aligned,"
      "wall_time_s\n";
  for (const auto& p : report.pairs) {
    for (const auto& m : p.methods) {
      out += p.source + "," + p.target + "," + to_string(m.method) + "," + std::to_string(m.accuracies.size()) + ",";
      out += num(m.mean_accuracy) + "," + num(m.std_accuracy) + ",";
      out += (m.chosen_d > 0 ? std::to_string(m.chosen_d) : std::string()) + ",";
      out += (m.chosen_c.empty() ? std::string() : num(modal(m.chosen_c))) + ",";
      out += (p.hdh ? num(p.hdh->raw_mean) : std::string()) + ",";
      out += (p.hdh ? num(p.hdh->aligned_mean) : std::string()) + ",";
      out += num(m.wall_time_s) + "\n";
    }
  }
  return out;
}

void emit_report(const ExperimentReport& report, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = format == ReportFormat::json ? report_to_json(report) : report_to_csv(report);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report to " + path.string());
  out << text;
  if (!out.flush()) throw IoError("failed writing report to " + path.string());
}

}  // namespace diag
