#include "diag/classifiers.hpp"

#include "diag/error.hpp"
#include "diag/kernels.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

namespace diag {

namespace {

std::vector<int> nearest_by_distance(const RowMatrix& source, std::span<const int> labels, const RowMatrix& target) {
  if (source.rows() == 0) throw EmptyInputError("nearest neighbour: empty source domain");
  if (static_cast<Eigen::Index>(labels.size()) != source.rows())
    throw ConfigError("nearest neighbour: label count does not match source rows");
  if (source.cols() != target.cols())
    throw ConfigError("nearest neighbour: feature dimensions differ (" + std::to_string(source.cols()) + " vs " +
                      std::to_string(target.cols()) + ")");
  const RowMatrix dist = kernels::parallel::squared_distances(target, source);
  std::vector<int> out(static_cast<std::size_t>(target.rows()));
  for (Eigen::Index t = 0; t < dist.rows(); ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index s = 1; s < dist.cols(); ++s)
      if (dist(t, s) < dist(t, best)) best = s;
    out[static_cast<std::size_t>(t)] = labels[static_cast<std::size_t>(best)];
  }
  return out;
}

}  // namespace

std::vector<int> knn_predict(const SimilarityMatrix& sim, std::span<const int> source_labels, int k) {
  const Eigen::Index n_s = sim.values.rows();
  if (static_cast<Eigen::Index>(source_labels.size()) != n_s)
    throw ConfigError("knn_predict: label count does not match similarity rows");
  if (k < 1 || k > n_s) throw ConfigError("knn_predict: k = " + std::to_string(k) + " outside [1, " + std::to_string(n_s) + "]");

  std::vector<int> out(static_cast<std::size_t>(sim.values.cols()));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_s));
  for (Eigen::Index t = 0; t < sim.values.cols(); ++t) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double va = sim.values(a, t), vb = sim.values(b, t);
      return va > vb || (va == vb && a < b);
    });
    // class -> (votes, rank of its best neighbour)
    std::map<int, std::pair<int, int>> tally;
    for (int r = 0; r < k; ++r) {
      const int label = source_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];
      auto [it, inserted] = tally.try_emplace(label, 0, r);
      ++it->second.first;
    }
    int best_label = tally.begin()->first;
    std::pair<int, int> best = tally.begin()->second;
    for (const auto& [label, stat] : tally) {
      if (stat.first > best.first || (stat.first == best.first && stat.second < best.second)) {
        best = stat;
        best_label = label;
      }
    }
    out[static_cast<std::size_t>(t)] = best_label;
  }
  return out;
}

std::vector<int> baseline1_nn(const RowMatrix& source, std::span<const int> source_labels, const RowMatrix& target) {
  return nearest_by_distance(source, source_labels, target);
}

JointPcaResult baseline2_joint_pca_nn(const RowMatrix& source, std::span<const int> source_labels,
                                      const RowMatrix& target, double variance_fraction) {
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw ConfigError("baseline2: variance fraction must lie in (0, 1]");
  if (source.rows() == 0) throw EmptyInputError("baseline2: empty source domain");
  if (source.cols() != target.cols()) throw ConfigError("baseline2: feature dimensions differ");

  RowMatrix joint(source.rows() + target.rows(), source.cols());
  joint << source, target;
  const PcaModel model = pca_decompose(joint);
  if (model.rank() == 0) throw RankError("baseline2: joint data has rank 0");
  const Eigen::Index d = dim_for_variance(model.eigenvalues, variance_fraction);
  const Subspace z = truncate(model, d);
  const RowMatrix ps = kernels::parallel::centered_projection(source, z.mean, z.basis);
  const RowMatrix pt = kernels::parallel::centered_projection(target, z.mean, z.basis);
  return JointPcaResult{nearest_by_distance(ps, source_labels, pt), d};
}

SvmResult svm_with_kernel(const RowMatrix& train_kernel, std::span<const int> labels, const RowMatrix& cross_kernel,
                          const CVConfig& config) {
  const CVResult cv = cross_validate_c(train_kernel, labels, config);
  SvmResult result;
  result.c = cv.best_c;
  result.cv_accuracy = cv.best_accuracy;
  result.model = svm_train(train_kernel, labels, cv.best_c, config.solver);
  result.predictions = svm_predict(result.model, cross_kernel);
  return result;
}

SvmResult svm_na(const RowMatrix& source, std::span<const int> source_labels, const RowMatrix& target,
                 const CVConfig& config) {
  if (source.cols() != target.cols()) throw ConfigError("svm_na: feature dimensions differ");
  const RowMatrix gram = kernels::parallel::inner_products(source, source);
  const RowMatrix cross = kernels::parallel::inner_products(source, target);
  return svm_with_kernel(gram, source_labels, cross, config);
}

void write_predictions_csv(const std::filesystem::path& path, std::span<const int> predictions) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "sample_index,predicted_class_id\n";
  for (std::size_t i = 0; i < predictions.size(); ++i) out << i << ',' << predictions[i] << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace diag
