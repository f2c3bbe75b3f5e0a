#include "diag/classifiers.hpp"
#include "diag/error.hpp"
#include "diag/kernels.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace diag;

namespace {

SimilarityMatrix column(std::initializer_list<double> values) {
  SimilarityMatrix s;
  s.values.resize(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) s.values(i++, 0) = v;
  return s;
}

}  // namespace

TEST_CASE("knn voting") {
  CHECK(knn_predict(column({0.9, 0.1, 0.5}), std::vector<int>{0, 1, 2}, 1) == std::vector<int>{0});
  CHECK(knn_predict(column({0.9, 0.8, 0.7, 0.1}), std::vector<int>{0, 0, 1, 1}, 3) == std::vector<int>{0});
  // 1-1 tie among the top two: the single most similar neighbour decides.
  CHECK(knn_predict(column({0.2, 0.95, 0.9, 0.1}), std::vector<int>{0, 1, 0, 1}, 2) == std::vector<int>{1});
  CHECK_THROWS_AS(knn_predict(column({0.1, 0.2}), std::vector<int>{0, 1}, 3), ConfigError);
  CHECK_THROWS_AS(knn_predict(column({0.1, 0.2}), std::vector<int>{0, 1}, 0), ConfigError);
}

TEST_CASE("1-nn equals column argmax") {
  std::mt19937_64 rng(151);
  SimilarityMatrix s{testutil::random_matrix(20, 10, rng)};
  std::vector<int> labels(20);
  for (int i = 0; i < 20; ++i) labels[static_cast<std::size_t>(i)] = i % 4;
  const auto pred = knn_predict(s, labels, 1);
  for (Eigen::Index t = 0; t < 10; ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < 20; ++i)
      if (s.values(i, t) > s.values(best, t)) best = i;
    CHECK(pred[static_cast<std::size_t>(t)] == labels[static_cast<std::size_t>(best)]);
  }
}

TEST_CASE("baseline 1 equals the brute-force distance argmin") {
  std::mt19937_64 rng(157);
  const RowMatrix xs = testutil::random_matrix(25, 6, rng), xt = testutil::random_matrix(9, 6, rng);
  std::vector<int> labels(25);
  for (int i = 0; i < 25; ++i) labels[static_cast<std::size_t>(i)] = i % 5;
  const auto pred = baseline1_nn(xs, labels, xt);
  for (Eigen::Index t = 0; t < 9; ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < 25; ++i)
      if ((xs.row(i) - xt.row(t)).squaredNorm() < (xs.row(best) - xt.row(t)).squaredNorm()) best = i;
    CHECK(pred[static_cast<std::size_t>(t)] == labels[static_cast<std::size_t>(best)]);
  }
  CHECK(baseline1_nn(xs.topRows(1), std::vector<int>{3}, xt) == std::vector<int>(9, 3));
  CHECK_THROWS(baseline1_nn(RowMatrix(0, 6), std::vector<int>{}, xt));
}

TEST_CASE("baseline 2 with full variance equals baseline 1") {
  std::mt19937_64 rng(163);
  const RowMatrix xs = testutil::random_matrix(12, 5, rng), xt = testutil::random_matrix(8, 5, rng);
  std::vector<int> labels(12);
  for (int i = 0; i < 12; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
  const JointPcaResult r = baseline2_joint_pca_nn(xs, labels, xt, 1.0);
  CHECK(r.d == 5);
  CHECK(r.predictions == baseline1_nn(xs, labels, xt));
  CHECK_THROWS_AS(baseline2_joint_pca_nn(xs, labels, xt, 0.0), ConfigError);
}

TEST_CASE("baseline 2 on two clusters") {
  std::mt19937_64 rng(167);
  std::normal_distribution<double> g(0.0, 0.1);
  RowMatrix xs(10, 4), xt(6, 4);
  std::vector<int> labels(10);
  for (int i = 0; i < 10; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 2;
    for (int j = 0; j < 4; ++j) xs(i, j) = (i % 2 ? 5.0 : -5.0) + g(rng);
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) xt(i, j) = (i % 2 ? 5.0 : -5.0) + g(rng);
  const JointPcaResult r = baseline2_joint_pca_nn(xs, labels, xt, 0.9);
  CHECK(r.d == 1);
  CHECK(r.predictions == std::vector<int>{0, 1, 0, 1, 0, 1});
}

TEST_CASE("svm without adaptation uses the raw Gram matrix") {
  std::mt19937_64 rng(173);
  std::normal_distribution<double> g(0.0, 0.3);
  RowMatrix xs(20, 3);
  std::vector<int> labels(20);
  for (int i = 0; i < 20; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 2;
    for (int j = 0; j < 3; ++j) xs(i, j) = (i % 2 ? 2.0 : -2.0) + g(rng);
  }
  CVConfig cv;
  const SvmResult r = svm_na(xs, labels, xs, cv);
  CHECK(r.predictions == labels);
  const SvmResult k = svm_with_kernel(kernels::serial::inner_products(xs, xs), labels,
                                      kernels::serial::inner_products(xs, xs), cv);
  CHECK(k.predictions == r.predictions);
  CHECK(k.c == r.c);
}

TEST_CASE("prediction csv") {
  const auto dir = testutil::scratch("pred_csv");
  write_predictions_csv(dir / "p.csv", std::vector<int>{2, 0, 1});
  std::ifstream in(dir / "p.csv");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all == "sample_index,predicted_class_id\n0,2\n1,0\n2,1\n");
}
