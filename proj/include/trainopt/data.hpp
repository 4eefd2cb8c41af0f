#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trainopt/problems.hpp"

namespace trainopt {

struct Dataset {
  Matrix features;  // N x p
  std::vector<int> labels;
  std::string name;
  std::string provenance;  // "synthetic(seed=...)" or "file(<path>)"

  std::size_t num_samples() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t num_features() const { return static_cast<std::size_t>(features.cols()); }
  int num_classes() const;
};

/// H = Q diag(lambda) Q^T with lambda_i = kappa^(i/(d-1)) (log-spaced, so the
/// smallest eigenvalue is exactly 1 and the largest exactly kappa), Q a
/// random orthogonal matrix, w* standard normal, and xi_n standard normal
/// scaled by `noise_scale` then re-centred to sum to zero.
QuadraticSpec gen_quadratic(std::size_t d, double condition_number, std::size_t num_samples,
                            std::uint64_t seed, double noise_scale = 1.0);

/// K Gaussian clusters with unit covariance. Cluster centres are standard
/// normal directions multiplied by `separation`; labels cycle through the
/// classes so every class is present.
Dataset gen_logistic(std::size_t num_samples, std::size_t num_features, int num_classes,
                     double separation, std::uint64_t seed);

/// "label idx:val idx:val ..." with 1-based indices. Labels are remapped to
/// [0, K) by sorted numeric value.
Dataset load_libsvm(const std::filesystem::path& path);

/// Writes the dense matrix sparsely (zeros omitted) in LIBSVM format using
/// the integer labels as-is.
void write_libsvm(const Dataset& ds, const std::filesystem::path& path);

/// Header row required. `label_column` is 0-based. Labels are remapped by
/// sorted value when every label parses as a number, otherwise by order of
/// first appearance.
Dataset load_csv(const std::filesystem::path& path, std::size_t label_column);

/// Per-column zero mean and unit population variance; constant columns
/// become zero.
Dataset standardize(const Dataset& ds);

}  // namespace trainopt
