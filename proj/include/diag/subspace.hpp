#pragma once

#include "diag/types.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace diag {

/// D x d orthonormal PCA basis of one domain, with the centering offset the
/// domain's rows are shifted by before projection.
struct Subspace {
  RowMatrix basis;
  Vector eigenvalues;
  Vector mean;

  Eigen::Index ambient_dim() const { return basis.rows(); }
  Eigen::Index dim() const { return basis.cols(); }
};

/// Full principal decomposition of a domain: every direction with an
/// eigenvalue above the rank tolerance, in non-increasing eigenvalue order.
struct PcaModel {
  RowMatrix vectors;  // D x rank
  Vector eigenvalues;  // rank
  Vector mean;         // D
  Eigen::Index n_samples = 0;

  Eigen::Index rank() const { return eigenvalues.size(); }
};

/// Covariance is X_c^T X_c / (n - 1). Each returned column has its
/// largest-magnitude entry positive.
PcaModel pca_decompose(const RowMatrix& features);

/// Leading d directions of `model`. Throws ConfigError for d outside
/// [1, min(n - 1, D)] and RankError if the data supports fewer than d.
Subspace truncate(const PcaModel& model, Eigen::Index d);

Subspace pca_fit(const RowMatrix& features, Eigen::Index d);
inline Subspace pca_fit(const FeatureMatrix& features, Eigen::Index d) { return pca_fit(features.rows, d); }

struct FixedDim {
  Eigen::Index d = 30;
};
struct VarianceFraction {
  double fraction = 0.9;
};
using DimPolicy = std::variant<FixedDim, VarianceFraction>;

std::string describe(const DimPolicy& policy);

/// Smallest d reaching `fraction` of the total variance of one spectrum.
Eigen::Index dim_for_variance(const Vector& eigenvalues, double fraction);

/// fixed(d): min(d, |S|, |T|). variance(f): smallest d at which both
/// domains' cumulative eigenvalue fractions reach f.
Eigen::Index select_dim(const Vector& eigvals_source, const Vector& eigvals_target, const DimPolicy& policy);

/// ||Z_S - Z_T||_F^2
double subspace_divergence(const Subspace& source, const Subspace& target);

/// Closed-form minimiser of ||Z_S M - Z_T||_F^2, i.e. M = Z_S^T Z_T.
struct AlignmentMatrix {
  Eigen::MatrixXd m;
};
AlignmentMatrix align(const Subspace& source, const Subspace& target);

/// ||Z_S M - Z_T||_F^2 for an arbitrary d x d matrix M.
double alignment_residual(const Subspace& source, const Subspace& target, const Eigen::MatrixXd& m);

/// Source rows centred by the source mean and mapped through Z_S M.
RowMatrix project_source_aligned(const RowMatrix& source_rows, const Subspace& source, const AlignmentMatrix& m);
/// Target rows centred by the target mean and mapped through Z_T.
RowMatrix project_target(const RowMatrix& target_rows, const Subspace& target);

/// n_S x n_T similarity; entry (i, j) compares source row i with target row j.
struct SimilarityMatrix {
  RowMatrix values;
};

/// X_S Z_S M Z_T^T X_T^T on domain-centred rows.
SimilarityMatrix similarity(const RowMatrix& source_rows, const RowMatrix& target_rows, const Subspace& source,
                            const Subspace& target, const AlignmentMatrix& m);

struct SourceKernel {
  RowMatrix values;      // (K + K^T) / 2
  double max_asymmetry;  // max |K - K^T| before symmetrisation
};

/// Training kernel X_S Z_S M Z_T^T X_S^T, symmetrised.
SourceKernel source_kernel(const RowMatrix& source_rows, const Subspace& source, const Subspace& target,
                           const AlignmentMatrix& m);

/// Test kernel X_S Z_S M Z_T^T X_T^T; identical to `similarity`.
RowMatrix cross_kernel(const RowMatrix& source_rows, const RowMatrix& target_rows, const Subspace& source,
                       const Subspace& target, const AlignmentMatrix& m);

// Subspace file: one JSON header line {"format", "D", "d", "eigenvalues",
// "mean"} followed by D*d little-endian float64 basis values, row-major.
void save_subspace(const std::filesystem::path& path, const Subspace& subspace);
Subspace load_subspace(const std::filesystem::path& path);

}  // namespace diag
