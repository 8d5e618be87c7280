#pragma once

// Shared generators and helpers for the unit tests. Property tests draw
// their instances from a seeded Rng so failures reproduce.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "dfml/dfml.hpp"

namespace dfml::test {

inline Matrix random_matrix(Rng& rng, Index d, Index k, double stddev = 1.0) {
  return Matrix::random_normal(d, k, stddev, rng);
}

inline Vector random_vector(Rng& rng, Index d, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::VectorXd v(d);
  for (Index i = 0; i < d; ++i) v(i) = dist(rng);
  return Vector(std::move(v));
}

inline Index random_index(Rng& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline double random_uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double relative_error(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-300);
  return std::abs(got - want) / scale;
}

/// Largest singular value via a dense SVD; an oracle independent of power iteration.
inline double svd_norm(const Matrix& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.values());
  return svd.singularValues()(0);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("dfml_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dfml::test
