#pragma once

#include "diag/subspace.hpp"
#include "diag/svm.hpp"
#include "diag/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace diag {

/// For every target column the k most similar source rows vote; a tie between
/// classes goes to the tied class holding the single most similar neighbour.
std::vector<int> knn_predict(const SimilarityMatrix& sim, std::span<const int> source_labels, int k = 1);

/// 1-NN by Euclidean distance in the raw feature space.
std::vector<int> baseline1_nn(const RowMatrix& source, std::span<const int> source_labels, const RowMatrix& target);

struct JointPcaResult {
  std::vector<int> predictions;
  Eigen::Index d = 0;
};

/// 1-NN after projecting both domains onto one PCA subspace fitted on their
/// union, keeping the smallest d that reaches `variance_fraction`.
JointPcaResult baseline2_joint_pca_nn(const RowMatrix& source, std::span<const int> source_labels,
                                      const RowMatrix& target, double variance_fraction = 0.9);

struct SvmResult {
  std::vector<int> predictions;
  double c = 0.0;
  double cv_accuracy = 0.0;
  TrainedSVM model;
};

/// Linear SVM on raw features (Gram-matrix kernel) with cross-validated C.
SvmResult svm_na(const RowMatrix& source, std::span<const int> source_labels, const RowMatrix& target,
                 const CVConfig& config);

/// Cross-validates C on `train_kernel`, retrains on all rows and predicts the
/// columns of `cross_kernel`.
SvmResult svm_with_kernel(const RowMatrix& train_kernel, std::span<const int> labels, const RowMatrix& cross_kernel,
                          const CVConfig& config);

/// "sample_index,predicted_class_id" rows.
void write_predictions_csv(const std::filesystem::path& path, std::span<const int> predictions);

}  // namespace diag
