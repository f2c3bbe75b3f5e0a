#include "diag/spectrum.hpp"

#include "byte_io.hpp"
#include "diag/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>

namespace diag {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// FFTW planning is not thread-safe; execution on fresh aligned buffers is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [len, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t n) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(n); it != plans_.end()) return it->second;
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    plans_.emplace(n, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

std::size_t resolve_fft_len(std::size_t length, std::size_t fft_len) {
  if (length == 0) throw EmptyInputError("fft_amplitudes: empty segment");
  if (fft_len == 0) return default_fft_len(length);
  if (!is_power_of_two(fft_len))
    throw ConfigError("fft_len " + std::to_string(fft_len) + " is not a power of two");
  if (fft_len < length)
    throw ConfigError("fft_len " + std::to_string(fft_len) + " is shorter than the segment (" +
                      std::to_string(length) + ")");
  return fft_len;
}

void check_segments(const Dataset& dataset) {
  if (dataset.segments.empty()) throw EmptyInputError("featurize: no segments");
  if (dataset.labels.size() != dataset.segments.size())
    throw PreconditionError("featurize: label count does not match segment count");
  const std::size_t len = dataset.segments.front().size();
  for (std::size_t i = 0; i < dataset.segments.size(); ++i) {
    if (dataset.segments[i].size() != len) {
      throw PreconditionError("featurize: segment " + std::to_string(i) + " has length " +
                              std::to_string(dataset.segments[i].size()) + ", expected " +
                              std::to_string(len));
    }
  }
}

std::vector<double> feature_row(const std::vector<double>& seg, std::size_t fft_len, std::size_t row) {
  try {
    return z_normalize(fft_amplitudes(seg, fft_len));
  } catch (const DegenerateInputError& e) {
    throw DegenerateInputError("featurize: row " + std::to_string(row) + ": " + e.what());
  }
}

FeatureMatrix make_matrix(const Dataset& dataset, std::size_t fft_len) {
  FeatureMatrix fm;
  fm.rows.resize(static_cast<Eigen::Index>(dataset.segments.size()),
                 static_cast<Eigen::Index>(fft_len / 2 + 1));
  fm.labels = dataset.labels;
  fm.label_set = dataset.label_set;
  fm.meta = SpectrumMeta{dataset.segments.front().size(), fft_len, dataset.sampling_rate_hz};
  return fm;
}

}  // namespace

std::size_t default_fft_len(std::size_t length) {
  std::size_t n = 1;
  while (n < length) n <<= 1;
  return n;
}

std::vector<double> fft_amplitudes(std::span<const double> segment, std::size_t fft_len) {
  const std::size_t n = resolve_fft_len(segment.size(), fft_len);
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n / 2 + 1));
  std::copy(segment.begin(), segment.end(), in.get());
  std::fill(in.get() + segment.size(), in.get() + n, 0.0);
  fftw_execute_dft_r2c(plan_cache().get(n), in.get(), out.get());

  const double scale = 1.0 / static_cast<double>(segment.size());
  std::vector<double> amplitudes(n / 2 + 1);
  for (std::size_t k = 0; k < amplitudes.size(); ++k)
    amplitudes[k] = std::hypot(out.get()[k][0], out.get()[k][1]) * scale;
  return amplitudes;
}

std::vector<double> z_normalize(std::span<const double> v) {
  if (v.size() < 2) throw DegenerateInputError("z_normalize: need at least 2 elements");
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd >= 1e-15)) throw DegenerateInputError("z_normalize: constant vector (std < 1e-15)");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  return out;
}

FeatureMatrix featurize(const Dataset& dataset, std::size_t fft_len) {
  check_segments(dataset);
  fft_len = resolve_fft_len(dataset.segments.front().size(), fft_len);
  FeatureMatrix fm = make_matrix(dataset, fft_len);

  const auto n = static_cast<std::ptrdiff_t>(dataset.segments.size());
  std::vector<std::string> failures(dataset.segments.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto row = feature_row(dataset.segments[i], fft_len, static_cast<std::size_t>(i));
      fm.rows.row(i) = Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(row.size()));
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  }
  for (const auto& f : failures)
    if (!f.empty()) throw DegenerateInputError(f);
  return fm;
}

FeatureMatrix featurize_serial(const Dataset& dataset, std::size_t fft_len) {
  check_segments(dataset);
  fft_len = resolve_fft_len(dataset.segments.front().size(), fft_len);
  FeatureMatrix fm = make_matrix(dataset, fft_len);
  for (std::size_t i = 0; i < dataset.segments.size(); ++i) {
    const auto row = feature_row(dataset.segments[i], fft_len, i);
    fm.rows.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Vector>(row.data(), static_cast<Eigen::Index>(row.size()));
  }
  return fm;
}

namespace {
constexpr char kCacheMagic[8] = {'D', 'I', 'A', 'G', 'F', 'M', '0', '1'};
}

void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(kCacheMagic, sizeof kCacheMagic);
  detail::put_u64(out, static_cast<std::uint64_t>(features.dim()));
  detail::put_u64(out, static_cast<std::uint64_t>(features.n()));
  out.put(features.labels ? 1 : 0);
  for (Eigen::Index i = 0; i < features.n(); ++i)
    for (Eigen::Index j = 0; j < features.dim(); ++j) detail::put_f64(out, features.rows(i, j));
  if (features.labels)
    for (int id : *features.labels) detail::put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(id)));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

FeatureMatrix read_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = std::move(ss).str();
  constexpr std::size_t header = 8 + 8 + 8 + 1;
  if (bytes.size() < header || bytes.compare(0, 8, kCacheMagic, 8) != 0)
    throw ParseError("'" + path.string() + "': not a feature cache file");
  const std::uint64_t dim = detail::get_u64(bytes.data() + 8);
  const std::uint64_t n = detail::get_u64(bytes.data() + 16);
  const bool has_labels = bytes[24] != 0;
  const std::uint64_t expected = header + 8 * n * dim + (has_labels ? 8 * n : 0);
  if (bytes.size() != expected)
    throw ParseError("'" + path.string() + "': expected " + std::to_string(expected) + " bytes, found " +
                     std::to_string(bytes.size()));

  FeatureMatrix fm;
  fm.rows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const char* p = bytes.data() + header;
  for (Eigen::Index i = 0; i < fm.rows.rows(); ++i)
    for (Eigen::Index j = 0; j < fm.rows.cols(); ++j, p += 8) fm.rows(i, j) = detail::get_f64(p);
  if (has_labels) {
    std::vector<int> labels(n);
    for (auto& id : labels) {
      id = static_cast<int>(static_cast<std::int64_t>(detail::get_u64(p)));
      p += 8;
    }
    fm.labels = std::move(labels);
  }
  fm.meta.fft_len = dim > 0 ? 2 * (dim - 1) : 0;
  return fm;
}

}  // namespace diag
