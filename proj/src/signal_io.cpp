#include "diag/signal_io.hpp"

#include "byte_io.hpp"
#include "diag/error.hpp"

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace diag {

namespace fs = std::filesystem;
using nlohmann::json;

RecordFormat parse_record_format(const std::string& text) {
  if (text == "csv") return RecordFormat::csv;
  if (text == "raw_f64_le") return RecordFormat::raw_f64_le;
  throw ConfigError("unknown record format '" + text + "' (expected csv or raw_f64_le)");
}

std::string to_string(RecordFormat format) {
  return format == RecordFormat::csv ? "csv" : "raw_f64_le";
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_numeric(std::string_view s) {
  if (s.empty()) return false;
  const char c = s.front();
  return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
}

std::vector<double> parse_csv(const std::string& text, const fs::path& path) {
  std::vector<double> values;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool first_content = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    if (first_content) {
      first_content = false;
      if (!starts_numeric(line)) continue;  // header
    }
    std::string_view token = line;
    if (token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw ParseError("'" + path.string() + "': malformed value '" + std::string(line) +
                       "' at line " + std::to_string(line_no));
    }
    values.push_back(value);
  }
  return values;
}

std::vector<double> parse_raw(const std::string& bytes, const fs::path& path) {
  if (bytes.size() % 8 != 0) {
    throw ParseError("'" + path.string() + "': truncated float64 at byte offset " +
                     std::to_string(bytes.size() - bytes.size() % 8) + " (file size " +
                     std::to_string(bytes.size()) + ")");
  }
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = detail::get_f64(bytes.data() + 8 * i);
  return values;
}

template <typename T>
T require_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

RawRecord load_record(const fs::path& path, RecordFormat format, double sampling_rate_hz) {
  if (!(sampling_rate_hz > 0.0)) throw ConfigError("sampling rate must be positive");
  if (!fs::exists(path)) throw IoError("no such file '" + path.string() + "'");
  const std::string content = read_file(path);
  if (content.empty()) throw EmptyInputError("'" + path.string() + "' is empty");

  RawRecord record;
  record.sampling_rate_hz = sampling_rate_hz;
  record.channel_id = path.filename().string();
  record.samples = format == RecordFormat::csv ? parse_csv(content, path) : parse_raw(content, path);
  if (record.samples.empty()) throw EmptyInputError("'" + path.string() + "' holds no samples");
  return record;
}

std::vector<std::vector<double>> segment(const RawRecord& record, std::size_t segment_len,
                                         std::size_t segment_count, std::size_t hop) {
  if (segment_len == 0 || segment_count == 0)
    throw ConfigError("segment_len and segment_count must be positive");
  if (hop == 0) hop = segment_len;
  const std::size_t required = (segment_count - 1) * hop + segment_len;
  if (required > record.samples.size()) {
    throw LengthError("segmenting needs " + std::to_string(required) + " samples but only " +
                      std::to_string(record.samples.size()) + " are available");
  }
  std::vector<std::vector<double>> out;
  out.reserve(segment_count);
  for (std::size_t s = 0; s < segment_count; ++s) {
    const auto first = record.samples.begin() + static_cast<std::ptrdiff_t>(s * hop);
    out.emplace_back(first, first + static_cast<std::ptrdiff_t>(segment_len));
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& json_text, fs::path base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("manifest: top level must be an object");

  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  m.name = require_field<std::string>(doc, "name", "manifest");
  if (doc.contains("sampling_rate_hz")) m.sampling_rate_hz = doc["sampling_rate_hz"].get<double>();
  if (!(m.sampling_rate_hz > 0.0)) throw ConfigError("manifest: sampling_rate_hz must be positive");

  std::set<int> ids;
  std::set<std::string> names;
  for (const auto& l : require_field<json>(doc, "labels", "manifest")) {
    FaultLabel label{require_field<int>(l, "id", "manifest label"),
                     require_field<std::string>(l, "name", "manifest label")};
    if (label.class_id < 0) throw ConfigError("manifest: label ids must be non-negative");
    if (!ids.insert(label.class_id).second || !names.insert(label.class_name).second)
      throw ConfigError("manifest: duplicate label '" + label.class_name + "'");
    m.labels.push_back(std::move(label));
  }
  if (m.labels.empty()) throw ConfigError("manifest: no labels declared");

  std::size_t index = 0;
  for (const auto& e : require_field<json>(doc, "entries", "manifest")) {
    const std::string where = "manifest entry " + std::to_string(index++);
    ManifestEntry entry;
    entry.path = require_field<std::string>(e, "path", where);
    entry.format = parse_record_format(require_field<std::string>(e, "format", where));
    entry.label_id = require_field<int>(e, "label_id", where);
    const auto len = require_field<long long>(e, "segment_len", where);
    const auto count = require_field<long long>(e, "segment_count", where);
    if (len <= 0 || count <= 0) throw ConfigError(where + ": segment_len and segment_count must be positive");
    entry.segment_len = static_cast<std::size_t>(len);
    entry.segment_count = static_cast<std::size_t>(count);
    if (e.contains("hop")) entry.hop = e["hop"].get<std::size_t>();
    if (!ids.contains(entry.label_id))
      throw ConfigError(where + ": label_id " + std::to_string(entry.label_id) + " is not declared");
    m.entries.push_back(std::move(entry));
  }
  if (m.entries.empty()) throw ConfigError("manifest: no entries");
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such manifest '" + path.string() + "'");
  return parse_manifest(read_file(path), path.parent_path());
}

std::string manifest_to_json(const DatasetManifest& m) {
  json doc;
  doc["name"] = m.name;
  doc["sampling_rate_hz"] = m.sampling_rate_hz;
  doc["labels"] = json::array();
  for (const auto& l : m.labels) doc["labels"].push_back({{"id", l.class_id}, {"name", l.class_name}});
  doc["entries"] = json::array();
  for (const auto& e : m.entries) {
    json j{{"path", e.path},
           {"format", to_string(e.format)},
           {"label_id", e.label_id},
           {"segment_len", e.segment_len},
           {"segment_count", e.segment_count}};
    if (e.hop != 0) j["hop"] = e.hop;
    doc["entries"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << manifest_to_json(manifest);
}

Dataset build_dataset(const DatasetManifest& manifest) {
  const std::size_t n_entries = manifest.entries.size();
  std::vector<std::vector<std::vector<double>>> per_entry(n_entries);
  std::vector<std::string> failures(n_entries);
  std::vector<std::string> failure_kinds(n_entries);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n_entries; ++i) {
    const auto& entry = manifest.entries[i];
    const fs::path path = fs::path(entry.path).is_absolute() ? fs::path(entry.path) : manifest.base_dir / entry.path;
    try {
      const RawRecord record = load_record(path, entry.format, manifest.sampling_rate_hz);
      per_entry[i] = segment(record, entry.segment_len, entry.segment_count, entry.hop);
    } catch (const Error& e) {
      failure_kinds[i] = e.kind();
      failures[i] = std::string(e.what());
      if (failures[i].find(path.string()) == std::string::npos)
        failures[i] = "'" + path.string() + "': " + failures[i];
    }
  }
  for (std::size_t i = 0; i < n_entries; ++i) {
    if (!failures[i].empty()) throw_error(failure_kinds[i], "dataset '" + manifest.name + "': " + failures[i]);
  }

  Dataset ds;
  ds.name = manifest.name;
  ds.label_set = manifest.labels;
  ds.sampling_rate_hz = manifest.sampling_rate_hz;
  for (std::size_t i = 0; i < n_entries; ++i) {
    for (auto& seg : per_entry[i]) {
      ds.segments.push_back(std::move(seg));
      ds.labels.push_back(manifest.entries[i].label_id);
    }
  }
  return ds;
}

void write_record_raw(const fs::path& path, std::span<const double> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (double x : samples) detail::put_f64(out, x);
}

void write_record_csv(const fs::path& path, std::span<const double> samples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  char buf[64];
  for (double x : samples) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    out.write(buf, ptr - buf);
    out.put('\n');
  }
}

}  // namespace diag
