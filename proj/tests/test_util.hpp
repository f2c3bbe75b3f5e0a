#pragma once

#include "diag/types.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("diag_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline diag::RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  diag::RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

// D x d matrix with orthonormal columns.
inline diag::RowMatrix random_orthonormal(Eigen::Index D, Eigen::Index d, std::mt19937_64& rng) {
  const Eigen::MatrixXd a = random_matrix(D, d, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(D, d));
}

}  // namespace testutil
