#include "diag/kernels.hpp"

#include "diag/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace diag::kernels {

namespace {

void require_same_cols(const RowMatrix& a, const RowMatrix& b, const char* what) {
  if (a.cols() != b.cols()) {
    throw ConfigError(std::string(what) + ": column mismatch (" + std::to_string(a.cols()) +
                      " vs " + std::to_string(b.cols()) + ")");
  }
}

void require_projection_shapes(const RowMatrix& a, const Vector& mean, const RowMatrix& basis) {
  if (a.cols() != mean.size() || a.cols() != basis.rows()) {
    throw ConfigError("centered_projection: feature dimension " + std::to_string(a.cols()) +
                      " does not match mean/basis dimension " + std::to_string(basis.rows()));
  }
}

inline double dot_row(const double* x, const double* y, Eigen::Index len) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < len; ++k) acc += x[k] * y[k];
  return acc;
}

inline double sqdist_row(const double* x, const double* y, Eigen::Index len) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < len; ++k) {
    const double t = x[k] - y[k];
    acc += t * t;
  }
  return acc;
}

inline void project_row(const double* x, const Vector& mean, const RowMatrix& basis, double* out) {
  const Eigen::Index D = basis.rows();
  const Eigen::Index d = basis.cols();
  for (Eigen::Index k = 0; k < d; ++k) out[k] = 0.0;
  for (Eigen::Index j = 0; j < D; ++j) {
    const double c = x[j] - mean[j];
    const double* zrow = basis.data() + j * d;
    for (Eigen::Index k = 0; k < d; ++k) out[k] += c * zrow[k];
  }
}

}  // namespace

namespace serial {

RowMatrix inner_products(const RowMatrix& a, const RowMatrix& b) {
  require_same_cols(a, b, "inner_products");
  RowMatrix out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      out(i, j) = dot_row(a.row(i).data(), b.row(j).data(), a.cols());
  return out;
}

RowMatrix squared_distances(const RowMatrix& a, const RowMatrix& b) {
  require_same_cols(a, b, "squared_distances");
  RowMatrix out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      out(i, j) = sqdist_row(a.row(i).data(), b.row(j).data(), a.cols());
  return out;
}

RowMatrix centered_projection(const RowMatrix& a, const Vector& mean, const RowMatrix& basis) {
  require_projection_shapes(a, mean, basis);
  RowMatrix out(a.rows(), basis.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    project_row(a.row(i).data(), mean, basis, out.row(i).data());
  return out;
}

}  // namespace serial

namespace parallel {

RowMatrix inner_products(const RowMatrix& a, const RowMatrix& b) {
  require_same_cols(a, b, "inner_products");
  RowMatrix out(a.rows(), b.rows());
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = b.rows();
#pragma omp parallel for collapse(2) schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = dot_row(a.row(i).data(), b.row(j).data(), a.cols());
  return out;
}

RowMatrix squared_distances(const RowMatrix& a, const RowMatrix& b) {
  require_same_cols(a, b, "squared_distances");
  RowMatrix out(a.rows(), b.rows());
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = b.rows();
#pragma omp parallel for collapse(2) schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      out(i, j) = sqdist_row(a.row(i).data(), b.row(j).data(), a.cols());
  return out;
}

RowMatrix centered_projection(const RowMatrix& a, const Vector& mean, const RowMatrix& basis) {
  require_projection_shapes(a, mean, basis);
  RowMatrix out(a.rows(), basis.cols());
  const Eigen::Index rows = a.rows();
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < rows; ++i)
    project_row(a.row(i).data(), mean, basis, out.row(i).data());
  return out;
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace diag::kernels
