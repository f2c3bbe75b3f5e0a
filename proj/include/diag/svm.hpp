#pragma once

#include "diag/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace diag {

struct SolverOptions {
  double tol = 1e-3;
  long max_iterations = 10'000'000;
};

/// Dual solution of one soft-margin binary problem
///   max  sum(a) - 1/2 a^T Q a,  Q_ij = y_i y_j K_ij,  0 <= a <= C,  y^T a = 0.
struct BinarySolution {
  std::vector<double> alpha;
  double rho = 0.0;  // decision: sum_i a_i y_i K(i, x) - rho
  double dual_objective = 0.0;
  double kkt_gap = 0.0;  // max violating-pair gap at termination
  long iterations = 0;
};

/// SMO with second-order working-set selection. `y` holds +1 / -1. Throws
/// ConvergenceError when the iteration cap is hit.
BinarySolution solve_binary(const RowMatrix& kernel, std::span<const double> y, double C,
                            const SolverOptions& options = {});

/// Largest violating-pair gap m(a) - M(a) for a feasible `alpha`; the solver
/// stops once this drops below its tolerance.
double kkt_gap(const RowMatrix& kernel, std::span<const double> y, std::span<const double> alpha, double C);

double dual_objective(const RowMatrix& kernel, std::span<const double> y, std::span<const double> alpha);

struct BinaryModel {
  int positive_class = 0;
  int negative_class = 0;
  /// y_i * alpha_i for every training index (zero outside this class pair).
  std::vector<double> coef;
  /// alpha_i for every training index.
  std::vector<double> alpha;
  double bias = 0.0;
  double dual_objective = 0.0;
  double kkt_gap = 0.0;
  long iterations = 0;
};

struct TrainedSVM {
  std::vector<int> classes;  // ascending
  std::vector<BinaryModel> problems;  // one-vs-one, (classes[a], classes[b]) with a < b
  double C = 1.0;
  double tol = 1e-3;
  std::size_t n_train = 0;
  std::uint64_t kernel_fingerprint = 0;
};

std::uint64_t fingerprint(const RowMatrix& kernel);

/// One-vs-one multiclass training on a precomputed symmetric kernel.
TrainedSVM svm_train(const RowMatrix& kernel, std::span<const int> labels, double C,
                     const SolverOptions& options = {});

/// Decision values of every binary problem: problems x n_test.
RowMatrix svm_decision_values(const TrainedSVM& model, const RowMatrix& cross);

/// `cross` is n_train x n_test. Majority vote over the binary problems; ties go
/// to the class with the largest summed |decision| among its won votes.
std::vector<int> svm_predict(const TrainedSVM& model, const RowMatrix& cross);

struct CVConfig {
  std::vector<double> c_grid{1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4};
  int folds = 5;
  std::uint64_t rng_seed = 0;
  SolverOptions solver{};
};

struct CVResult {
  double best_c = 0.0;
  double best_accuracy = 0.0;
  std::vector<double> c_values;     // ascending
  std::vector<double> accuracies;   // mean fold accuracy per C
};

/// Stratified fold id per sample; deterministic in `seed`.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

/// Grid search over C by stratified k-fold accuracy; ties go to the smaller C.
CVResult cross_validate_c(const RowMatrix& kernel, std::span<const int> labels, const CVConfig& config);

// Model file: JSON header line, then for each binary problem n_train
// little-endian float64 dual coefficients (y_i * alpha_i).
void save_model(const std::filesystem::path& path, const TrainedSVM& model);
TrainedSVM load_model(const std::filesystem::path& path);

}  // namespace diag
