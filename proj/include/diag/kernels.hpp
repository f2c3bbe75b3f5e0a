#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// reference the tests compare against, `parallel` is the OpenMP version used
// by the pipeline. Both accumulate in the same order, so results agree
// bit-for-bit.

#include "diag/types.hpp"

namespace diag::kernels {

namespace serial {

/// out(i, j) = <a.row(i), b.row(j)>
RowMatrix inner_products(const RowMatrix& a, const RowMatrix& b);

/// out(i, j) = ||a.row(i) - b.row(j)||^2
RowMatrix squared_distances(const RowMatrix& a, const RowMatrix& b);

/// out = (a - 1 * mean^T) * basis, with basis D x d.
RowMatrix centered_projection(const RowMatrix& a, const Vector& mean, const RowMatrix& basis);

}  // namespace serial

namespace parallel {

RowMatrix inner_products(const RowMatrix& a, const RowMatrix& b);
RowMatrix squared_distances(const RowMatrix& a, const RowMatrix& b);
RowMatrix centered_projection(const RowMatrix& a, const Vector& mean, const RowMatrix& basis);

}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace diag::kernels
