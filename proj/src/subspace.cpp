#include "diag/subspace.hpp"

#include "byte_io.hpp"
#include "diag/error.hpp"
#include "diag/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace diag {

namespace {

void fix_sign(RowMatrix& vectors) {
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < vectors.rows(); ++j)
      if (std::abs(vectors(j, k)) > std::abs(vectors(best, k))) best = j;
    if (vectors(best, k) < 0.0) vectors.col(k) *= -1.0;
  }
}

// Modified Gram-Schmidt pass; removes the loss of orthogonality the Gram
// route suffers on small eigenvalues without moving well-conditioned columns.
void reorthonormalize(RowMatrix& vectors) {
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double proj = vectors.col(j).dot(vectors.col(k));
      vectors.col(k) -= proj * vectors.col(j);
    }
    vectors.col(k).normalize();
  }
}

void require_same_shape(const Subspace& s, const Subspace& t, const char* op) {
  if (s.ambient_dim() != t.ambient_dim() || s.dim() != t.dim()) {
    throw ConfigError(std::string(op) + ": subspace shapes differ (" + std::to_string(s.ambient_dim()) + "x" +
                      std::to_string(s.dim()) + " vs " + std::to_string(t.ambient_dim()) + "x" +
                      std::to_string(t.dim()) + ")");
  }
}

void require_rows_match(const RowMatrix& rows, const Subspace& s, const char* op) {
  if (rows.cols() != s.ambient_dim()) {
    throw ConfigError(std::string(op) + ": feature dimension " + std::to_string(rows.cols()) +
                      " does not match subspace dimension " + std::to_string(s.ambient_dim()));
  }
}

}  // namespace

PcaModel pca_decompose(const RowMatrix& features) {
  const Eigen::Index n = features.rows();
  const Eigen::Index D = features.cols();
  if (n < 2) throw InsufficientDataError("pca: need at least 2 samples, got " + std::to_string(n));
  if (D < 1) throw ConfigError("pca: zero-dimensional features");

  PcaModel model;
  model.n_samples = n;
  model.mean = features.colwise().mean().transpose();
  const RowMatrix centered = features.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(n - 1);

  Vector values;
  RowMatrix vectors;
  if (D <= n) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw RankError("pca: eigendecomposition failed");
    values = eig.eigenvalues().reverse();
    vectors = eig.eigenvectors().rowwise().reverse();
  } else {
    // Dual route: eigenvectors of the n x n Gram matrix lifted back to R^D.
    const Eigen::MatrixXd gram = kernels::parallel::inner_products(centered, centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw RankError("pca: eigendecomposition failed");
    values = eig.eigenvalues().reverse();
    vectors = RowMatrix::Zero(D, 0);
    const Eigen::MatrixXd u = eig.eigenvectors().rowwise().reverse();
    Eigen::Index keep = 0;
    const double top = std::max(values.size() > 0 ? values[0] : 0.0, 0.0);
    const double tol = top * 1e-12 * static_cast<double>(std::max(n, D));
    while (keep < values.size() && values[keep] > tol && values[keep] > 0.0) ++keep;
    vectors = centered.transpose() * u.leftCols(keep);
    for (Eigen::Index k = 0; k < keep; ++k) vectors.col(k) /= std::sqrt(denom * values[k]);
  }

  const double top = std::max(values.size() > 0 ? values[0] : 0.0, 0.0);
  const double tol = top * 1e-12 * static_cast<double>(std::max(n, D));
  Eigen::Index rank = 0;
  while (rank < values.size() && rank < vectors.cols() && values[rank] > tol && values[rank] > 0.0) ++rank;

  model.eigenvalues = values.head(rank);
  model.vectors = vectors.leftCols(rank);
  reorthonormalize(model.vectors);
  fix_sign(model.vectors);
  return model;
}

Subspace truncate(const PcaModel& model, Eigen::Index d) {
  const Eigen::Index D = model.mean.size();
  const Eigen::Index limit = std::min(model.n_samples - 1, D);
  if (d < 1 || d > limit)
    throw ConfigError("pca: d = " + std::to_string(d) + " outside [1, " + std::to_string(limit) + "]");
  if (d > model.rank())
    throw RankError("pca: data has rank " + std::to_string(model.rank()) + ", cannot extract d = " +
                    std::to_string(d) + " components");
  return Subspace{model.vectors.leftCols(d), model.eigenvalues.head(d), model.mean};
}

Subspace pca_fit(const RowMatrix& features, Eigen::Index d) {
  if (features.rows() < 2)
    throw InsufficientDataError("pca: need at least 2 samples, got " + std::to_string(features.rows()));
  const Eigen::Index limit = std::min(features.rows() - 1, features.cols());
  if (d < 1 || d > limit)
    throw ConfigError("pca: d = " + std::to_string(d) + " outside [1, " + std::to_string(std::max<Eigen::Index>(limit, 0)) + "]");
  return truncate(pca_decompose(features), d);
}

std::string describe(const DimPolicy& policy) {
  if (const auto* f = std::get_if<FixedDim>(&policy)) return "fixed(" + std::to_string(f->d) + ")";
  std::ostringstream ss;
  ss << "variance(" << std::get<VarianceFraction>(policy).fraction << ")";
  return ss.str();
}

Eigen::Index dim_for_variance(const Vector& eigenvalues, double fraction) {
  if (eigenvalues.size() == 0) throw ConfigError("select_dim: empty spectrum");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("select_dim: fraction must lie in (0, 1]");
  const double total = eigenvalues.sum();
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues.size(); ++k) {
    cumulative += eigenvalues[k];
    if (cumulative >= fraction * total * (1.0 - 1e-12)) return k + 1;
  }
  return eigenvalues.size();
}

Eigen::Index select_dim(const Vector& eigvals_source, const Vector& eigvals_target, const DimPolicy& policy) {
  if (eigvals_source.size() == 0 || eigvals_target.size() == 0) throw ConfigError("select_dim: empty spectrum");
  const Eigen::Index common = std::min(eigvals_source.size(), eigvals_target.size());
  if (const auto* f = std::get_if<FixedDim>(&policy)) {
    if (f->d < 1) throw ConfigError("select_dim: fixed d must be positive");
    return std::min(f->d, common);
  }
  const double fraction = std::get<VarianceFraction>(policy).fraction;
  const Eigen::Index d = std::max(dim_for_variance(eigvals_source, fraction), dim_for_variance(eigvals_target, fraction));
  return std::min(d, common);
}

double subspace_divergence(const Subspace& source, const Subspace& target) {
  require_same_shape(source, target, "subspace_divergence");
  return (source.basis - target.basis).squaredNorm();
}

AlignmentMatrix align(const Subspace& source, const Subspace& target) {
  require_same_shape(source, target, "align");
  return AlignmentMatrix{source.basis.transpose() * target.basis};
}

double alignment_residual(const Subspace& source, const Subspace& target, const Eigen::MatrixXd& m) {
  require_same_shape(source, target, "alignment_residual");
  if (m.rows() != source.dim() || m.cols() != target.dim()) throw ConfigError("alignment_residual: M has wrong shape");
  return (source.basis * m - target.basis).squaredNorm();
}

RowMatrix project_source_aligned(const RowMatrix& source_rows, const Subspace& source, const AlignmentMatrix& m) {
  require_rows_match(source_rows, source, "project_source_aligned");
  if (m.m.rows() != source.dim()) throw ConfigError("project_source_aligned: M does not match subspace dimension");
  return kernels::parallel::centered_projection(source_rows, source.mean, source.basis) * m.m;
}

RowMatrix project_target(const RowMatrix& target_rows, const Subspace& target) {
  require_rows_match(target_rows, target, "project_target");
  return kernels::parallel::centered_projection(target_rows, target.mean, target.basis);
}

SimilarityMatrix similarity(const RowMatrix& source_rows, const RowMatrix& target_rows, const Subspace& source,
                            const Subspace& target, const AlignmentMatrix& m) {
  require_same_shape(source, target, "similarity");
  const RowMatrix ps = project_source_aligned(source_rows, source, m);
  const RowMatrix pt = project_target(target_rows, target);
  return SimilarityMatrix{kernels::parallel::inner_products(ps, pt)};
}

SourceKernel source_kernel(const RowMatrix& source_rows, const Subspace& source, const Subspace& target,
                           const AlignmentMatrix& m) {
  require_same_shape(source, target, "source_kernel");
  require_rows_match(source_rows, source, "source_kernel");
  const RowMatrix left = project_source_aligned(source_rows, source, m);
  // Right factor: the same source rows centred by their own mean, seen through Z_T.
  const RowMatrix right = kernels::parallel::centered_projection(source_rows, source.mean, target.basis);
  const RowMatrix k = kernels::parallel::inner_products(left, right);
  SourceKernel out;
  out.max_asymmetry = (k - k.transpose()).cwiseAbs().maxCoeff();
  out.values = (k + k.transpose()) * 0.5;
  return out;
}

RowMatrix cross_kernel(const RowMatrix& source_rows, const RowMatrix& target_rows, const Subspace& source,
                       const Subspace& target, const AlignmentMatrix& m) {
  return similarity(source_rows, target_rows, source, target, m).values;
}

void save_subspace(const std::filesystem::path& path, const Subspace& subspace) {
  nlohmann::json header;
  header["format"] = "diag-subspace-v1";
  header["D"] = subspace.ambient_dim();
  header["d"] = subspace.dim();
  header["eigenvalues"] = std::vector<double>(subspace.eigenvalues.data(), subspace.eigenvalues.data() + subspace.eigenvalues.size());
  header["mean"] = std::vector<double>(subspace.mean.data(), subspace.mean.data() + subspace.mean.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << header.dump() << '\n';
  for (Eigen::Index i = 0; i < subspace.basis.rows(); ++i)
    for (Eigen::Index j = 0; j < subspace.basis.cols(); ++j) detail::put_f64(out, subspace.basis(i, j));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Subspace load_subspace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + path.string() + "': bad subspace header: " + e.what());
  }
  if (header.value("format", "") != "diag-subspace-v1") throw ParseError("'" + path.string() + "': unknown subspace format");
  const auto D = header.at("D").get<Eigen::Index>();
  const auto d = header.at("d").get<Eigen::Index>();
  const auto eig = header.at("eigenvalues").get<std::vector<double>>();
  const auto mean = header.at("mean").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(eig.size()) != d || static_cast<Eigen::Index>(mean.size()) != D)
    throw ParseError("'" + path.string() + "': header sizes inconsistent");

  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string payload = std::move(ss).str();
  if (static_cast<Eigen::Index>(payload.size()) != 8 * D * d)
    throw ParseError("'" + path.string() + "': expected " + std::to_string(8 * D * d) + " payload bytes, found " +
                     std::to_string(payload.size()));
  Subspace s;
  s.basis.resize(D, d);
  const char* p = payload.data();
  for (Eigen::Index i = 0; i < D; ++i)
    for (Eigen::Index j = 0; j < d; ++j, p += 8) s.basis(i, j) = detail::get_f64(p);
  s.eigenvalues = Eigen::Map<const Vector>(eig.data(), d);
  s.mean = Eigen::Map<const Vector>(mean.data(), D);
  return s;
}

}  // namespace diag
