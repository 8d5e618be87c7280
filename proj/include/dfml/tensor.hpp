#pragma once

// Dense vectors and matrices plus the matrix norms the bounds are written in.
//
// Storage is Eigen (column major), so column access is the cheap path. The
// wrappers add the invariants the rest of the library relies on: no empty
// shapes and finite entries at construction.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <system_error>

#include "dfml/error.hpp"
#include "dfml/random.hpp"

namespace dfml {

using Index = Eigen::Index;

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  // from_chars rejects a leading '+'.
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParseError("not a number: '" + std::string(text) + "'");
  return value;
}

class Vector {
 public:
  explicit Vector(Index dim) : values_(Eigen::VectorXd::Zero(checked_dim(dim))) {}

  Vector(std::initializer_list<double> entries) : values_(static_cast<Index>(entries.size())) {
    checked_dim(values_.size());
    Index i = 0;
    for (double e : entries) values_(i++) = e;
    check_finite();
  }

  explicit Vector(Eigen::VectorXd values) : values_(std::move(values)) {
    checked_dim(values_.size());
    check_finite();
  }

  Index dim() const { return values_.size(); }
  double operator[](Index i) const { return values_(i); }
  double& operator[](Index i) { return values_(i); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  double norm() const { return values_.norm(); }

  friend bool operator==(const Vector& a, const Vector& b) {
    return a.dim() == b.dim() && a.values_ == b.values_;
  }

 private:
  static Index checked_dim(Index dim) {
    if (dim <= 0) throw InvalidArgument("vector dimension must be positive");
    return dim;
  }
  void check_finite() const {
    if (!values_.allFinite()) throw InvalidArgument("vector entries must be finite");
  }

  Eigen::VectorXd values_;
};

/// A d x k real matrix. Columns are contiguous.
class Matrix {
 public:
  Matrix(Index rows, Index cols) {
    check_shape(rows, cols);
    values_ = Eigen::MatrixXd::Zero(rows, cols);
  }

  explicit Matrix(Eigen::MatrixXd values) : values_(std::move(values)) {
    check_shape(values_.rows(), values_.cols());
    if (!values_.allFinite()) throw InvalidArgument("matrix entries must be finite");
  }

  /// Row-major literal, e.g. from_rows({{3, 0}, {4, 0}}).
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const Index d = static_cast<Index>(rows.size());
    const Index k = d > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
    check_shape(d, k);
    Eigen::MatrixXd m(d, k);
    Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != k) throw DimensionMismatch("ragged matrix literal");
      Index j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return Matrix(std::move(m));
  }

  static Matrix from_columns(std::span<const Vector> columns) {
    if (columns.empty()) throw InvalidArgument("matrix needs at least one column");
    const Index d = columns.front().dim();
    Eigen::MatrixXd m(d, static_cast<Index>(columns.size()));
    for (Index j = 0; j < m.cols(); ++j) {
      const Vector& c = columns[static_cast<std::size_t>(j)];
      if (c.dim() != d) throw DimensionMismatch("columns differ in length");
      m.col(j) = c.values();
    }
    return Matrix(std::move(m));
  }

  static Matrix identity(Index n) { return Matrix(Eigen::MatrixXd::Identity(n, n)); }

  /// Independent N(0, stddev^2) entries.
  static Matrix random_normal(Index rows, Index cols, double stddev, Rng& rng) {
    Matrix m(rows, cols);
    if (stddev == 0.0) return m;
    std::normal_distribution<double> dist(0.0, stddev);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m.values_(i, j) = dist(rng);
    return m;
  }

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }

  double operator()(Index i, Index j) const { return values_(i, j); }
  double& operator()(Index i, Index j) { return values_(i, j); }

  Vector column(Index j) const {
    if (j < 0 || j >= cols()) throw IndexOutOfRange("column " + std::to_string(j));
    return Vector(Eigen::VectorXd(values_.col(j)));
  }

  double column_norm(Index j) const { return values_.col(j).norm(); }

  const Eigen::MatrixXd& values() const { return values_; }
  /// Raw mutable access for in-place updates (the trainer). Finiteness is
  /// then the caller's responsibility.
  Eigen::MatrixXd& values() { return values_; }

  bool all_finite() const { return values_.allFinite(); }

  Matrix scaled(double c) const { return Matrix(Eigen::MatrixXd(c * values_)); }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a.values_ == b.values_;
  }

 private:
  static void check_shape(Index rows, Index cols) {
    if (rows <= 0 || cols <= 0) throw InvalidArgument("matrix shape must be positive");
  }

  Eigen::MatrixXd values_;
};

// ---------------------------------------------------------------------------
// Norms. A column-wise view: ||A||_{2,s} takes the Euclidean norm of every
// column, then the s-norm of the resulting k-vector.

inline Eigen::VectorXd column_norms(const Matrix& a) { return a.values().colwise().norm().transpose(); }

/// Sum of column Euclidean norms.
inline double norm_2_1(const Matrix& a) { return column_norms(a).sum(); }

/// Largest column Euclidean norm.
inline double norm_2_inf(const Matrix& a) { return column_norms(a).maxCoeff(); }

inline double norm_fro(const Matrix& a) { return a.values().norm(); }

struct PowerIterationOptions {
  double tol = 1e-9;
  int max_iters = 10'000;
  std::uint64_t seed = 0x5eed;
};

/// Spectral norm by power iteration on the smaller Gram matrix (A^t A when
/// k <= d, A A^t otherwise), applied implicitly. Converged when the Rayleigh
/// quotient changes by less than tol relative between iterations.
inline double norm_op(const Matrix& a, const PowerIterationOptions& opts = {}) {
  require(opts.tol > 0.0, "power iteration tolerance must be positive");
  require(opts.max_iters > 0, "power iteration needs at least one iteration");
  // Iterate on A / max|a_ij| so that huge entries cannot overflow the Gram products.
  const double scale = a.values().cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  const Eigen::MatrixXd m = a.values() / scale;
  const bool gram_on_cols = m.cols() <= m.rows();
  const Index n = gram_on_cols ? m.cols() : m.rows();

  Rng rng(opts.seed);
  std::normal_distribution<double> dist;
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = dist(rng);
  v.normalize();

  auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    if (gram_on_cols) return m.transpose() * (m * x);
    return m * (m.transpose() * x);
  };

  double lambda = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd w = apply(v);
    const double next = v.dot(w);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    if (it > 0 && std::abs(next - lambda) <= opts.tol * std::abs(next)) {
      return scale * std::sqrt(std::max(next, 0.0));
    }
    lambda = next;
    v = w / wn;
  }
  throw NonConvergence("power iteration did not reach relative tolerance " + format_double(opts.tol) +
                       " in " + std::to_string(opts.max_iters) + " iterations");
}

/// ||A A^t||_F, computed through the k x k Gram matrix when k < d (the two
/// Frobenius norms are equal).
inline double gram_fro(const Matrix& a) {
  const Eigen::MatrixXd& m = a.values();
  if (m.cols() < m.rows()) return (m.transpose() * m).norm();
  return (m * m.transpose()).norm();
}

// ---------------------------------------------------------------------------
// Text format: "d k" on the first line, then d rows of k numbers.

inline void write_matrix(std::ostream& os, const Matrix& a) {
  os << a.rows() << ' ' << a.cols() << '\n';
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(a(i, j));
    }
    os << '\n';
  }
}

inline Matrix read_matrix(std::istream& is) {
  long long d = 0, k = 0;
  if (!(is >> d >> k)) throw ParseError("matrix header must be 'd k'");
  if (d <= 0 || k <= 0) throw ParseError("matrix shape must be positive");
  Eigen::MatrixXd m(d, k);
  std::string token;
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < k; ++j) {
      if (!(is >> token))
        throw ParseError("matrix ended early at row " + std::to_string(i) + ", column " + std::to_string(j));
      m(i, j) = parse_double(token);
    }
  }
  if (is >> token) throw ParseError("trailing data after matrix");
  if (!m.allFinite()) throw ParseError("matrix entries must be finite");
  return Matrix(std::move(m));
}

inline std::string to_text(const Matrix& a) {
  std::ostringstream os;
  write_matrix(os, a);
  return os.str();
}

}  // namespace dfml
