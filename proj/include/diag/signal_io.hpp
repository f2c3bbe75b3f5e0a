#pragma once

#include "diag/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace diag {

enum class RecordFormat { csv, raw_f64_le };

RecordFormat parse_record_format(const std::string& text);
std::string to_string(RecordFormat format);

/// One channel of raw vibration samples.
struct RawRecord {
  std::vector<double> samples;
  double sampling_rate_hz = 0.0;
  std::string channel_id;
};

struct ManifestEntry {
  std::string path;
  RecordFormat format = RecordFormat::csv;
  int label_id = 0;
  std::size_t segment_len = 0;
  std::size_t segment_count = 0;
  /// Window hop; 0 means segment_len (non-overlapping).
  std::size_t hop = 0;
};

struct DatasetManifest {
  std::string name;
  LabelSet labels;
  std::vector<ManifestEntry> entries;
  double sampling_rate_hz = 12000.0;
  /// Directory relative entry paths are resolved against.
  std::filesystem::path base_dir;
};

/// Reads every reading of a file in order. CSV: one value per line, an
/// optional non-numeric header line is skipped. raw_f64_le: consecutive
/// little-endian doubles.
RawRecord load_record(const std::filesystem::path& path, RecordFormat format,
                      double sampling_rate_hz = 12000.0);

/// `segment_count` consecutive windows of `segment_len` samples from the
/// start of the record. `hop` = 0 gives non-overlapping windows; leftover
/// samples are dropped.
std::vector<std::vector<double>> segment(const RawRecord& record, std::size_t segment_len,
                                         std::size_t segment_count, std::size_t hop = 0);

DatasetManifest parse_manifest(const std::string& json_text, std::filesystem::path base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const DatasetManifest& manifest);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Segments of every entry in manifest order, each tagged with its entry label.
Dataset build_dataset(const DatasetManifest& manifest);

void write_record_raw(const std::filesystem::path& path, std::span<const double> samples);
void write_record_csv(const std::filesystem::path& path, std::span<const double> samples);

}  // namespace diag
