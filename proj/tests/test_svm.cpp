#include "diag/classifiers.hpp"
#include "diag/error.hpp"
#include "diag/kernels.hpp"
#include "diag/svm.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <numeric>

using namespace diag;

namespace {

RowMatrix gram(const RowMatrix& x) { return kernels::serial::inner_products(x, x); }

std::vector<double> flat(const RowMatrix& k) { return {k.data(), k.data() + k.size()}; }

// Two Gaussian blobs in 2-D, labels +1 / -1.
void blobs(std::mt19937_64& rng, int n, double sep, RowMatrix& x, std::vector<double>& y) {
  std::normal_distribution<double> g;
  x.resize(n, 2);
  y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double s = i % 2 ? 1.0 : -1.0;
    x(i, 0) = s * sep + g(rng);
    x(i, 1) = s * sep + g(rng);
    y[static_cast<std::size_t>(i)] = s;
  }
}

}  // namespace

TEST_CASE("binary dual matches the QP oracle and satisfies KKT") {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(4, 12);
  for (int trial = 0; trial < 20; ++trial) {
    RowMatrix x;
    std::vector<double> y;
    blobs(rng, size(rng), trial % 3 == 0 ? 0.3 : 1.5, x, y);
    const double C = trial % 2 ? 0.5 : 10.0;
    const RowMatrix k = gram(x);
    const BinarySolution sol = solve_binary(k, y, C);
    const auto want = oracle::svm_dual_optimum(flat(k), y, C);
    CHECK(std::abs(sol.dual_objective - want.objective) <= 1e-4);
    CHECK(sol.kkt_gap <= 1e-3);
    CHECK(kkt_gap(k, y, sol.alpha, C) <= 1e-3);
    double balance = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(sol.alpha[i] >= 0.0);
      CHECK(sol.alpha[i] <= C);
      balance += sol.alpha[i] * y[i];
    }
    CHECK(std::abs(balance) < 1e-9);
  }
}

TEST_CASE("predictions agree with the oracle's separating function") {
  std::mt19937_64 rng(103);
  RowMatrix x;
  std::vector<double> y;
  blobs(rng, 10, 1.5, x, y);
  const double C = 1.0;
  const auto want = oracle::svm_dual_optimum(flat(gram(x)), y, C);
  // Oracle bias from free support vectors.
  double b = 0.0;
  int free = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (want.alpha[i] > 1e-6 && want.alpha[i] < C - 1e-6) {
      double s = 0.0;
      for (std::size_t j = 0; j < y.size(); ++j) s += want.alpha[j] * y[j] * x.row(j).dot(x.row(i));
      b += y[i] - s;
      ++free;
    }
  }
  REQUIRE(free > 0);
  b /= free;

  std::vector<int> labels(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) labels[i] = y[i] > 0 ? 0 : 1;  // class 0 is the positive side
  const TrainedSVM model = svm_train(gram(x), labels, C);
  RowMatrix grid(25, 2);
  for (int i = 0; i < 25; ++i) grid.row(i) << -3.0 + 1.5 * (i % 5), -3.0 + 1.5 * (i / 5);
  const std::vector<int> pred = svm_predict(model, kernels::serial::inner_products(x, grid));
  for (int t = 0; t < 25; ++t) {
    double f = b;
    for (std::size_t j = 0; j < y.size(); ++j) f += want.alpha[j] * y[j] * x.row(j).dot(grid.row(t));
    if (std::abs(f) < 1e-2) continue;  // too close to the boundary to call
    CHECK(pred[static_cast<std::size_t>(t)] == (f > 0 ? 0 : 1));
  }
}

TEST_CASE("separable data: perfect training accuracy and hard-margin limit") {
  std::mt19937_64 rng(107);
  RowMatrix x;
  std::vector<double> y;
  blobs(rng, 12, 4.0, x, y);
  std::vector<int> labels(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) labels[i] = y[i] > 0 ? 3 : 7;
  const TrainedSVM model = svm_train(gram(x), labels, 1e6);
  CHECK(svm_predict(model, gram(x)) == labels);
  const RowMatrix dec = svm_decision_values(model, gram(x));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(dec(0, static_cast<Eigen::Index>(i)) * (labels[i] == 3 ? 1 : -1) >= 1.0 - 1e-3);
}

TEST_CASE("conflicting duplicates train under a small C") {
  RowMatrix x(4, 1);
  x << 1, 1, -1, 2;
  const std::vector<int> labels{0, 1, 1, 0};
  const TrainedSVM model = svm_train(gram(x), labels, 0.01);
  for (double a : model.problems[0].alpha) CHECK(a <= 0.01 + 1e-15);
}

TEST_CASE("svm_train preconditions") {
  RowMatrix k = RowMatrix::Identity(3, 3);
  CHECK_THROWS_AS(svm_train(k, std::vector<int>{1, 1, 1}, 1.0), DegenerateInputError);
  k(0, 1) = 0.5;
  CHECK_THROWS_AS(svm_train(k, std::vector<int>{0, 1, 1}, 1.0), PreconditionError);
}

TEST_CASE("iteration cap raises a convergence error") {
  std::mt19937_64 rng(109);
  RowMatrix x;
  std::vector<double> y;
  blobs(rng, 12, 0.2, x, y);
  SolverOptions opts;
  opts.max_iterations = 1;
  CHECK_THROWS_AS(solve_binary(gram(x), y, 100.0, opts), ConvergenceError);
}

TEST_CASE("multiclass voting, memorisation and zero columns") {
  std::mt19937_64 rng(113);
  std::normal_distribution<double> g(0.0, 0.2);
  RowMatrix x(12, 3);
  std::vector<int> labels(12);
  for (int i = 0; i < 12; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 3;
    for (int j = 0; j < 3; ++j) x(i, j) = (j == i % 3 ? 3.0 : 0.0) + g(rng);
  }
  const TrainedSVM model = svm_train(gram(x), labels, 10.0);
  CHECK(model.problems.size() == 3);
  CHECK(svm_predict(model, gram(x)) == labels);
  const RowMatrix zero = RowMatrix::Zero(12, 2);
  const auto a = svm_predict(model, zero), b = svm_predict(model, zero);
  CHECK(a == b);
  CHECK(a[0] == a[1]);
  CHECK_THROWS_AS(svm_predict(model, RowMatrix::Zero(5, 2)), ConfigError);
}

TEST_CASE("permuting the training rows leaves predictions unchanged") {
  std::mt19937_64 rng(127);
  const RowMatrix x = testutil::random_matrix(15, 4, rng), t = testutil::random_matrix(6, 4, rng);
  std::vector<int> labels(15);
  for (int i = 0; i < 15; ++i) labels[static_cast<std::size_t>(i)] = (x(i, 0) > 0) + (x(i, 1) > 0);
  std::vector<Eigen::Index> perm(15);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  RowMatrix xp(15, 4);
  std::vector<int> lp(15);
  for (std::size_t i = 0; i < 15; ++i) {
    xp.row(static_cast<Eigen::Index>(i)) = x.row(perm[i]);
    lp[i] = labels[static_cast<std::size_t>(perm[i])];
  }
  const auto p1 = svm_predict(svm_train(gram(x), labels, 1.0), kernels::serial::inner_products(x, t));
  const auto p2 = svm_predict(svm_train(gram(xp), lp, 1.0), kernels::serial::inner_products(xp, t));
  CHECK(p1 == p2);
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 rng(131);
  const RowMatrix x = testutil::random_matrix(20, 5, rng);
  std::vector<int> labels(20);
  for (int i = 0; i < 20; ++i) labels[static_cast<std::size_t>(i)] = i % 4;
  const TrainedSVM a = svm_train(gram(x), labels, 2.0), b = svm_train(gram(x), labels, 2.0);
  for (std::size_t p = 0; p < a.problems.size(); ++p) {
    CHECK(a.problems[p].alpha == b.problems[p].alpha);
    CHECK(a.problems[p].bias == b.problems[p].bias);
  }
  CHECK(a.kernel_fingerprint == b.kernel_fingerprint);
}

TEST_CASE("stratified folds") {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 7; ++i) labels.push_back(c);
  const auto folds = stratified_folds(labels, 5, 42);
  for (int c = 0; c < 3; ++c) {
    std::vector<int> per(5, 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) ++per[static_cast<std::size_t>(folds[i])];
    CHECK(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()) <= 1);
  }
  CHECK(stratified_folds(labels, 5, 42) == folds);
  CHECK_THROWS_AS(stratified_folds(labels, 8, 42), ConfigError);
  CHECK_THROWS_AS(stratified_folds(labels, 1, 42), ConfigError);
}

TEST_CASE("cross-validated C: singleton grid, ties and separable data") {
  std::mt19937_64 rng(137);
  RowMatrix x;
  std::vector<double> y;
  blobs(rng, 30, 5.0, x, y);
  std::vector<int> labels(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) labels[i] = y[i] > 0;
  CVConfig cv;
  cv.c_grid = {0.37};
  CHECK(cross_validate_c(gram(x), labels, cv).best_c == 0.37);

  cv.c_grid = {1e4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3};
  const CVResult r = cross_validate_c(gram(x), labels, cv);
  CHECK(r.best_accuracy == 1.0);
  // Every grid point separates these blobs, so the tie rule picks the smallest C.
  CHECK(r.best_c == 1e-3);
  CHECK(std::is_sorted(r.c_values.begin(), r.c_values.end()));

  // Verify the reported best accuracy by direct evaluation of each fold.
  const auto folds = stratified_folds(labels, cv.folds, cv.rng_seed);
  double total = 0.0;
  for (int f = 0; f < cv.folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < labels.size(); ++i) (folds[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
    RowMatrix xtr(static_cast<Eigen::Index>(tr.size()), 2), xte(static_cast<Eigen::Index>(te.size()), 2);
    std::vector<int> ltr, lte;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      xtr.row(static_cast<Eigen::Index>(i)) = x.row(tr[i]);
      ltr.push_back(labels[static_cast<std::size_t>(tr[i])]);
    }
    for (std::size_t i = 0; i < te.size(); ++i) {
      xte.row(static_cast<Eigen::Index>(i)) = x.row(te[i]);
      lte.push_back(labels[static_cast<std::size_t>(te[i])]);
    }
    const auto pred = svm_predict(svm_train(gram(xtr), ltr, r.best_c), kernels::serial::inner_products(xtr, xte));
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == lte[i];
    total += static_cast<double>(ok) / static_cast<double>(pred.size());
  }
  CHECK(total / cv.folds == doctest::Approx(r.best_accuracy));
}

TEST_CASE("model file round trip") {
  const auto dir = testutil::scratch("svm_model");
  std::mt19937_64 rng(139);
  const RowMatrix x = testutil::random_matrix(12, 3, rng);
  std::vector<int> labels(12);
  for (int i = 0; i < 12; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
  const TrainedSVM model = svm_train(gram(x), labels, 1.0);
  save_model(dir / "m", model);
  const TrainedSVM back = load_model(dir / "m");
  CHECK(back.classes == model.classes);
  CHECK(back.C == model.C);
  CHECK(back.kernel_fingerprint == model.kernel_fingerprint);
  const RowMatrix t = testutil::random_matrix(4, 3, rng);
  CHECK(svm_predict(back, kernels::serial::inner_products(x, t)) ==
        svm_predict(model, kernels::serial::inner_products(x, t)));
}
