#pragma once

// Single-layer embeddings x -> phi(A^t x) and the k-normalized squared
// distance they induce.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "dfml/error.hpp"
#include "dfml/random.hpp"
#include "dfml/tensor.hpp"

namespace dfml {

enum class Activation { Identity, Sigmoid, ReLU };

/// Coordinatewise non-linearity.
///
/// `value` is the raw map used for training (sigmoid is 1/(1+e^-t)).
/// `centered` adds `shift()` so that the map vanishes at 0, which is the form
/// the bounds assume; since distances only see differences of phi values the
/// two give identical distances.
class Nonlinearity {
 public:
  constexpr Nonlinearity() = default;
  constexpr explicit Nonlinearity(Activation kind) : kind_(kind) {}

  static constexpr Nonlinearity identity() { return Nonlinearity(Activation::Identity); }
  static constexpr Nonlinearity sigmoid() { return Nonlinearity(Activation::Sigmoid); }
  static constexpr Nonlinearity relu() { return Nonlinearity(Activation::ReLU); }

  static Nonlinearity from_name(std::string_view name) {
    if (name == "identity") return identity();
    if (name == "sigmoid") return sigmoid();
    if (name == "relu") return relu();
    throw InvalidArgument("unknown nonlinearity '" + std::string(name) + "' (identity|sigmoid|relu)");
  }

  constexpr Activation kind() const { return kind_; }

  std::string name() const {
    switch (kind_) {
      case Activation::Identity: return "identity";
      case Activation::Sigmoid: return "sigmoid";
      case Activation::ReLU: return "relu";
    }
    return "?";
  }

  constexpr double lipschitz_constant() const { return kind_ == Activation::Sigmoid ? 0.25 : 1.0; }
  constexpr double shift() const { return kind_ == Activation::Sigmoid ? -0.5 : 0.0; }

  double value(double t) const {
    switch (kind_) {
      case Activation::Identity: return t;
      case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-t));
      case Activation::ReLU: return t > 0.0 ? t : 0.0;
    }
    return t;
  }

  double centered(double t) const { return value(t) + shift(); }

  /// ReLU'(0) is taken to be 0.
  double derivative(double t) const {
    switch (kind_) {
      case Activation::Identity: return 1.0;
      case Activation::Sigmoid: {
        const double s = value(t);
        return s * (1.0 - s);
      }
      case Activation::ReLU: return t > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
  }

  template <typename Derived>
  Eigen::MatrixXd apply(const Eigen::MatrixBase<Derived>& z) const {
    switch (kind_) {
      case Activation::Identity: return z;
      case Activation::Sigmoid: return (1.0 + (-z.array()).exp()).inverse().matrix();
      case Activation::ReLU: return z.array().max(0.0).matrix();
    }
    return z;
  }

  template <typename Derived>
  Eigen::MatrixXd apply_derivative(const Eigen::MatrixBase<Derived>& z) const {
    switch (kind_) {
      case Activation::Identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
      case Activation::Sigmoid: {
        Eigen::ArrayXXd s = (1.0 + (-z.array()).exp()).inverse();
        return (s * (1.0 - s)).matrix();
      }
      case Activation::ReLU: return (z.array() > 0.0).template cast<double>().matrix();
    }
    return z;
  }

  friend constexpr bool operator==(Nonlinearity a, Nonlinearity b) { return a.kind_ == b.kind_; }

 private:
  Activation kind_ = Activation::Identity;
};

/// The parameters of f*(x) = phi(A^t x): a d x k matrix and a non-linearity.
struct EmbeddingMatrix {
  Matrix a;
  Nonlinearity phi;

  Index input_dim() const { return a.rows(); }
  Index embed_dim() const { return a.cols(); }
};

namespace detail {
inline void check_input(const EmbeddingMatrix& e, const Vector& x) {
  if (x.dim() != e.input_dim())
    throw DimensionMismatch("input has dimension " + std::to_string(x.dim()) + ", embedding expects " +
                            std::to_string(e.input_dim()));
}
}  // namespace detail

inline Vector embed(const EmbeddingMatrix& e, const Vector& x) {
  detail::check_input(e, x);
  Eigen::VectorXd z = e.a.values().transpose() * x.values();
  return Vector(Eigen::VectorXd(e.phi.apply(z)));
}

/// embed() with phi shifted so that phi(0) = 0. Differences, and hence
/// distances, match embed().
inline Vector embed_centered(const EmbeddingMatrix& e, const Vector& x) {
  Eigen::VectorXd v = embed(e, x).values();
  v.array() += e.phi.shift();
  return Vector(std::move(v));
}

/// (1/k) ||u - v||^2.
inline double zeta_k(const Vector& u, const Vector& v) {
  if (u.dim() != v.dim()) throw DimensionMismatch("zeta_k operands differ in dimension");
  return (u.values() - v.values()).squaredNorm() / static_cast<double>(u.dim());
}

/// Per-coordinate squared differences r_j = (phi(<A_j,x>) - phi(<A_j,x'>))^2.
/// Their mean is rho(e, x, x').
inline Vector rho_decomposed(const EmbeddingMatrix& e, const Vector& x, const Vector& x_prime) {
  detail::check_input(e, x);
  detail::check_input(e, x_prime);
  Eigen::VectorXd diff = e.phi.apply(e.a.values().transpose() * x.values()) -
                         e.phi.apply(e.a.values().transpose() * x_prime.values());
  return Vector(Eigen::VectorXd(diff.array().square()));
}

/// Normalized squared distance after embedding.
inline double rho(const EmbeddingMatrix& e, const Vector& x, const Vector& x_prime) {
  return zeta_k(embed(e, x), embed(e, x_prime));
}

/// Embeds every row of `rows` (n x d); returns the n x k matrix of phi values.
template <typename Derived>
Eigen::MatrixXd embed_rows(const EmbeddingMatrix& e, const Eigen::MatrixBase<Derived>& rows) {
  if (rows.cols() != e.input_dim()) throw DimensionMismatch("feature rows do not match embedding input dimension");
  return e.phi.apply(rows * e.a.values());
}

/// Gradient of rho(e, x, x') with respect to A. Column j is
/// (2/k) (phi(u) - phi(u')) (phi'(u) x - phi'(u') x') with u = <A_j, x>.
inline Matrix rho_gradient(const EmbeddingMatrix& e, const Vector& x, const Vector& x_prime) {
  detail::check_input(e, x);
  detail::check_input(e, x_prime);
  const Eigen::MatrixXd& a = e.a.values();
  const Eigen::VectorXd u = a.transpose() * x.values();
  const Eigen::VectorXd up = a.transpose() * x_prime.values();
  const double k = static_cast<double>(a.cols());
  Eigen::ArrayXd diff = e.phi.apply(u).array() - e.phi.apply(up).array();
  Eigen::ArrayXd cx = (2.0 / k) * diff * e.phi.apply_derivative(u).array();
  Eigen::ArrayXd cxp = (2.0 / k) * diff * e.phi.apply_derivative(up).array();
  Eigen::MatrixXd g = x.values() * cx.matrix().transpose() - x_prime.values() * cxp.matrix().transpose();
  return Matrix(std::move(g));
}

/// Weighted sum over pairs of rho gradients: sum_i w_i * d rho(x_i, x'_i) / dA.
/// `x` and `x_prime` hold one pair per row.
template <typename DX, typename DXP>
Eigen::MatrixXd weighted_rho_gradient(const EmbeddingMatrix& e, const Eigen::MatrixBase<DX>& x,
                                      const Eigen::MatrixBase<DXP>& x_prime, const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd z = x * e.a.values();
  const Eigen::MatrixXd zp = x_prime * e.a.values();
  const double k = static_cast<double>(e.embed_dim());
  Eigen::ArrayXXd diff = e.phi.apply(z).array() - e.phi.apply(zp).array();
  diff.colwise() *= (2.0 / k) * weights.array();
  Eigen::MatrixXd gx = (diff * e.phi.apply_derivative(z).array()).matrix();
  Eigen::MatrixXd gxp = (diff * e.phi.apply_derivative(zp).array()).matrix();
  return x.transpose() * gx - x_prime.transpose() * gxp;
}

// ---------------------------------------------------------------------------
// Random coordinate projections.

/// Column indices (0-based) i_1..i_l, repetitions allowed.
struct ProjectionIndexSet {
  std::vector<Index> indices;

  Index size() const { return static_cast<Index>(indices.size()); }

  static ProjectionIndexSet identity(Index k) {
    ProjectionIndexSet p;
    for (Index j = 0; j < k; ++j) p.indices.push_back(j);
    return p;
  }

  /// l independent uniform draws from {0..k-1}.
  static ProjectionIndexSet sample(Index k, Index l, Rng& rng) {
    if (k <= 0 || l <= 0) throw InvalidArgument("projection needs k >= 1 and l >= 1");
    std::uniform_int_distribution<Index> pick(0, k - 1);
    ProjectionIndexSet p;
    p.indices.reserve(static_cast<std::size_t>(l));
    for (Index i = 0; i < l; ++i) p.indices.push_back(pick(rng));
    return p;
  }
};

/// Restriction of A to the columns listed in `pi`, same non-linearity.
inline EmbeddingMatrix project_columns(const EmbeddingMatrix& e, const ProjectionIndexSet& pi) {
  if (pi.indices.empty()) throw InvalidArgument("projection index set is empty");
  Eigen::MatrixXd out(e.input_dim(), pi.size());
  for (Index c = 0; c < pi.size(); ++c) {
    const Index j = pi.indices[static_cast<std::size_t>(c)];
    if (j < 0 || j >= e.embed_dim())
      throw IndexOutOfRange("projection index " + std::to_string(j) + " outside [0, " +
                            std::to_string(e.embed_dim()) + ")");
    out.col(c) = e.a.values().col(j);
  }
  return EmbeddingMatrix{Matrix(std::move(out)), e.phi};
}

struct LipschitzCheck {
  double lhs;
  double rhs;
};

/// Both sides of |zeta_k(x,x') - zeta_k(y,y')| <= (8 g / k)(||x-y|| + ||x'-y'||),
/// g being the largest of the four Euclidean norms.
inline LipschitzCheck lipschitz_bound_zeta(const Vector& x, const Vector& x_prime, const Vector& y,
                                           const Vector& y_prime) {
  const Index k = x.dim();
  if (x_prime.dim() != k || y.dim() != k || y_prime.dim() != k)
    throw DimensionMismatch("lipschitz check needs four vectors of equal dimension");
  const double gamma = std::max({x.norm(), x_prime.norm(), y.norm(), y_prime.norm()});
  const double lhs = std::abs(zeta_k(x, x_prime) - zeta_k(y, y_prime));
  const double rhs = 8.0 * gamma / static_cast<double>(k) *
                     ((x.values() - y.values()).norm() + (x_prime.values() - y_prime.values()).norm());
  return {lhs, rhs};
}

}  // namespace dfml
