#pragma once

#include "diag/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace diag {

/// Smallest power of two >= length.
std::size_t default_fft_len(std::size_t length);

/// One-sided amplitude spectrum: the segment is zero-padded to `fft_len`
/// (0 selects the default) and out[k] = |X[k]| / L for k = 0..fft_len/2.
std::vector<double> fft_amplitudes(std::span<const double> segment, std::size_t fft_len = 0);

/// (v - mean) / std with the population standard deviation. Throws
/// DegenerateInputError for constant vectors.
std::vector<double> z_normalize(std::span<const double> v);

/// Row i = z_normalize(fft_amplitudes(segment i)). Rows are computed in parallel.
FeatureMatrix featurize(const Dataset& dataset, std::size_t fft_len = 0);

/// Single-threaded reference for `featurize`.
FeatureMatrix featurize_serial(const Dataset& dataset, std::size_t fft_len = 0);

// Binary cache: "DIAGFM01", u64 D, u64 n, u8 has_labels, n*D little-endian
// float64 row-major, then n little-endian int64 label ids when present.
void write_feature_cache(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix read_feature_cache(const std::filesystem::path& path);

}  // namespace diag
