#include "diag/divergence.hpp"

#include "diag/error.hpp"
#include "diag/kernels.hpp"
#include "diag/seeding.hpp"
#include "diag/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace diag {

DivergenceEstimate estimate_hdh(const RowMatrix& source, const RowMatrix& target, double split_fraction,
                                std::uint64_t rng_seed) {
  if (source.rows() < 2 || target.rows() < 2)
    throw InsufficientDataError("hdh: each domain needs at least 2 samples (got " + std::to_string(source.rows()) +
                                " and " + std::to_string(target.rows()) + ")");
  if (source.cols() != target.cols()) throw ConfigError("hdh: feature dimensions differ");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("hdh: split fraction must lie in (0, 1)");

  std::mt19937_64 rng(rng_seed);
  std::vector<Eigen::Index> train_rows, test_rows;
  std::vector<int> train_labels, test_labels;
  const RowMatrix* domains[2] = {&source, &target};
  for (int label = 0; label < 2; ++label) {
    const Eigen::Index n = domains[label]->rows();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<Eigen::Index>(std::llround(split_fraction * static_cast<double>(n)));
    n_train = std::clamp<Eigen::Index>(n_train, 1, n - 1);
    const Eigen::Index offset = label == 0 ? 0 : source.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
      const Eigen::Index row = offset + idx[static_cast<std::size_t>(k)];
      if (k < n_train) {
        train_rows.push_back(row);
        train_labels.push_back(label);
      } else {
        test_rows.push_back(row);
        test_labels.push_back(label);
      }
    }
  }

  auto gather = [&](const std::vector<Eigen::Index>& rows) {
    RowMatrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Eigen::Index r = rows[i];
      out.row(static_cast<Eigen::Index>(i)) = r < source.rows() ? source.row(r) : target.row(r - source.rows());
    }
    return out;
  };
  const RowMatrix train = gather(train_rows);
  const RowMatrix test = gather(test_rows);

  const TrainedSVM model = svm_train(kernels::parallel::inner_products(train, train), train_labels, 1.0);
  const std::vector<int> pred = svm_predict(model, kernels::parallel::inner_products(train, test));
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != test_labels[i];

  DivergenceEstimate est;
  est.classifier_test_error = static_cast<double>(wrong) / static_cast<double>(pred.size());
  est.value = std::clamp(2.0 * (1.0 - 2.0 * est.classifier_test_error), 0.0, 2.0);
  est.n_train = static_cast<int>(train_rows.size());
  est.n_test = static_cast<int>(test_rows.size());
  est.rng_seed = rng_seed;
  return est;
}

DivergenceEstimate estimate_hdh_in_subspaces(const RowMatrix& source, const RowMatrix& target, const Subspace& zs,
                                             const Subspace& zt, const AlignmentMatrix& m, double split_fraction,
                                             std::uint64_t rng_seed) {
  if (zs.ambient_dim() != zt.ambient_dim() || zs.dim() != zt.dim())
    throw ConfigError("hdh: source and target subspaces have different shapes");
  return estimate_hdh(project_source_aligned(source, zs, m), project_target(target, zt), split_fraction, rng_seed);
}

RepeatedDivergence estimate_hdh_repeated(const RowMatrix& source, const RowMatrix& target, int repeats,
                                         std::uint64_t base_seed, double split_fraction) {
  if (repeats < 1) throw ConfigError("hdh: repeats must be positive");
  RepeatedDivergence out;
  out.values.assign(static_cast<std::size_t>(repeats), 0.0);
  out.seeds.resize(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r)
    out.seeds[static_cast<std::size_t>(r)] = derive_seed(base_seed, {static_cast<std::uint64_t>(r)});

  std::vector<std::string> failures(static_cast<std::size_t>(repeats));
  std::vector<std::string> kinds(static_cast<std::size_t>(repeats));
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < repeats; ++r) {
    try {
      out.values[static_cast<std::size_t>(r)] =
          estimate_hdh(source, target, split_fraction, out.seeds[static_cast<std::size_t>(r)]).value;
    } catch (const Error& e) {
      kinds[static_cast<std::size_t>(r)] = e.kind();
      failures[static_cast<std::size_t>(r)] = e.what();
    }
  }
  for (std::size_t r = 0; r < failures.size(); ++r)
    if (!failures[r].empty()) throw_error(kinds[r], failures[r]);

  const double n = static_cast<double>(repeats);
  out.mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : out.values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / n);
  return out;
}

}  // namespace diag
