#pragma once

#include "diag/subspace.hpp"
#include "diag/types.hpp"

#include <cstdint>
#include <vector>

namespace diag {

/// Proxy H-delta-H divergence from one train/test split.
struct DivergenceEstimate {
  double value = 0.0;  // 2 (1 - 2 err), clamped to [0, 2]
  double classifier_test_error = 0.0;
  int n_train = 0;
  int n_test = 0;
  std::uint64_t rng_seed = 0;
};

/// Source rows get pseudo-label 0, target rows 1; a linear-kernel SVM (C = 1)
/// is trained on a stratified random split and scored on the remainder.
DivergenceEstimate estimate_hdh(const RowMatrix& source, const RowMatrix& target, double split_fraction = 0.5,
                                std::uint64_t rng_seed = 0);

/// Same estimate after mapping source rows through Z_S M and target rows through Z_T.
DivergenceEstimate estimate_hdh_in_subspaces(const RowMatrix& source, const RowMatrix& target, const Subspace& zs,
                                             const Subspace& zt, const AlignmentMatrix& m, double split_fraction = 0.5,
                                             std::uint64_t rng_seed = 0);

struct RepeatedDivergence {
  double mean = 0.0;
  double std = 0.0;  // population std across seeds
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
};

/// `repeats` independent splits with seeds derived from `base_seed`.
RepeatedDivergence estimate_hdh_repeated(const RowMatrix& source, const RowMatrix& target, int repeats = 10,
                                         std::uint64_t base_seed = 0, double split_fraction = 0.5);

}  // namespace diag
