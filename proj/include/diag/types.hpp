#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace diag {

/// Row-major dense matrix; one sample per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct FaultLabel {
  int class_id = 0;
  std::string class_name;

  bool operator==(const FaultLabel&) const = default;
};

using LabelSet = std::vector<FaultLabel>;

/// Fixed-length signal segments, each tagged with a class id from `label_set`.
struct Dataset {
  std::string name;
  LabelSet label_set;
  std::vector<std::vector<double>> segments;
  std::vector<int> labels;
  double sampling_rate_hz = 0.0;

  std::size_t size() const { return segments.size(); }
};

struct SpectrumMeta {
  std::size_t segment_len = 0;
  std::size_t fft_len = 0;
  double sampling_rate_hz = 0.0;

  bool operator==(const SpectrumMeta&) const = default;
};

/// n x D matrix of feature rows. Target-domain matrices may carry labels for
/// scoring, but the adaptation path only ever sees `rows`.
struct FeatureMatrix {
  RowMatrix rows;
  std::optional<std::vector<int>> labels;
  LabelSet label_set;
  SpectrumMeta meta;

  Eigen::Index n() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }
};

}  // namespace diag
