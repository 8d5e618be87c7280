#pragma once

// Empirical Rademacher complexity of the distance class
//   F_k(G) = { (rho_A(x_i, x'_i))_{i<=n} : A in G }
// over the column-norm ball G_a^k and the sparse set J_{a,a'}^k, plus an
// exhaustive oracle for tiny instances and the random coordinate
// projection experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "dfml/dataset.hpp"
#include "dfml/embedding.hpp"
#include "dfml/error.hpp"
#include "dfml/random.hpp"
#include "dfml/tensor.hpp"

namespace dfml {

struct ConstraintSet {
  enum class Kind { BoundedAmplification, SparsePair };

  Kind kind = Kind::BoundedAmplification;
  double a = 1.0;        // column-norm radius, or the ||.||_{2,1} radius
  double a_prime = 0.0;  // spectral radius, SparsePair only
  Index d = 1;
  Index k = 1;

  /// { A : ||A||_{2,inf} <= a }
  static ConstraintSet bounded_amplification(double a, Index d, Index k) {
    ConstraintSet cs{Kind::BoundedAmplification, a, 0.0, d, k};
    cs.validate();
    return cs;
  }

  /// { A : ||A||_{2,1} <= a, ||A||_op <= a' }
  static ConstraintSet sparse_pair(double a, double a_prime, Index d, Index k) {
    ConstraintSet cs{Kind::SparsePair, a, a_prime, d, k};
    cs.validate();
    return cs;
  }

  void validate() const {
    require(d >= 1 && k >= 1, "constraint set shape must be positive");
    require(a >= 0.0, "constraint radius a must be nonnegative");
    if (kind == Kind::SparsePair) require(a_prime >= 0.0, "spectral radius a' must be nonnegative");
  }

  bool contains(const Matrix& m, double tol = 1e-9) const {
    if (kind == Kind::BoundedAmplification) return norm_2_inf(m) <= a + tol;
    return norm_2_1(m) <= a + tol && norm_op(m) <= a_prime + tol;
  }
};

namespace detail {
inline constexpr PowerIterationOptions kTightPowerIteration{1e-13, 200'000, 0x5eed};
}

/// Maps A into the set. BoundedAmplification: exact Euclidean projection
/// (each column longer than a is rescaled to length a). SparsePair: global
/// rescaling to meet the (2,1) radius, then again to meet the spectral
/// radius; feasible but not the nearest point.
inline Matrix project_onto(const ConstraintSet& cs, const Matrix& m) {
  if (m.rows() != cs.d || m.cols() != cs.k) throw DimensionMismatch("matrix shape does not match constraint set");
  Eigen::MatrixXd out = m.values();
  if (cs.kind == ConstraintSet::Kind::BoundedAmplification) {
    for (Index j = 0; j < out.cols(); ++j) {
      const double nrm = out.col(j).norm();
      if (nrm > cs.a) out.col(j) *= nrm > 0.0 ? cs.a / nrm : 0.0;
    }
    return Matrix(std::move(out));
  }
  const double s21 = out.colwise().norm().sum();
  if (s21 > cs.a) out *= cs.a / s21;
  const double op = norm_op(Matrix(out), detail::kTightPowerIteration);
  if (op > cs.a_prime) out *= cs.a_prime / op;
  return Matrix(std::move(out));
}

struct RademacherOptions {
  Index num_sign_draws = 100;
  int restarts = 8;
  int inner_steps = 300;
  double step_size = 0.0;  // 0 selects 0.1 * a / sqrt(d)
  std::uint64_t seed = 0;
};

struct RademacherEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  Index num_sign_draws = 0;
  int restarts_per_draw = 0;
  int inner_steps = 0;
  bool is_lower_estimate = true;  // the inner sup is approached from below
};

/// sum_i w_i rho_A(x_i, x'_i); the Rademacher objective with w = eps / n.
inline double signed_distance_sum(const EmbeddingMatrix& e, const FeatureRows& x, const FeatureRows& xp,
                                  const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd p = e.phi.apply(x * e.a.values()) - e.phi.apply(xp * e.a.values());
  return weights.dot(p.rowwise().squaredNorm()) / static_cast<double>(e.embed_dim());
}

/// Monte-Carlo estimate of (1/n) E_eps sup_{A in cs} sum_i eps_i rho_A(x_i, x'_i).
///
/// Each sign draw owns generators derived from (seed, draw index), so the
/// same seed replays the same sign vectors regardless of k. The inner sup
/// is approached by projected gradient ascent with per-column normalized
/// steps and a linearly decaying step size; the best value over restarts is
/// kept, which makes every draw a lower estimate.
inline RademacherEstimate estimate_rademacher(const ConstraintSet& cs, const PairDataset& ds, Nonlinearity phi,
                                              const RademacherOptions& opts = {}) {
  cs.validate();
  if (ds.size() == 0) throw EmptyDataset("Rademacher estimate of an empty dataset");
  if (ds.dim() != cs.d) throw DimensionMismatch("pair features do not match constraint set dimension");
  require(opts.num_sign_draws >= 1 && opts.restarts >= 1 && opts.inner_steps >= 0, "Rademacher options must be positive");

  const Index n = ds.size();
  const FeatureRows x = ds.left_rows();
  const FeatureRows xp = ds.right_rows();
  const double step0 = opts.step_size > 0.0 ? opts.step_size : 0.1 * cs.a / std::sqrt(static_cast<double>(cs.d));
  const double radius = cs.kind == ConstraintSet::Kind::BoundedAmplification ? cs.a : std::min(cs.a, cs.a_prime);

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(opts.num_sign_draws));
  for (Index draw = 0; draw < opts.num_sign_draws; ++draw) {
    Rng sign_rng = make_rng(opts.seed, {static_cast<std::uint64_t>(draw), 0});
    std::bernoulli_distribution coin(0.5);
    Eigen::VectorXd w(n);
    for (Index i = 0; i < n; ++i) w(i) = (coin(sign_rng) ? 1.0 : -1.0) / static_cast<double>(n);

    double best = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < opts.restarts; ++r) {
      Rng init_rng = make_rng(opts.seed, {static_cast<std::uint64_t>(draw), 1, static_cast<std::uint64_t>(r)});
      EmbeddingMatrix e{
          project_onto(cs, Matrix::random_normal(cs.d, cs.k, radius / std::sqrt(static_cast<double>(cs.d)), init_rng)),
          phi};
      best = std::max(best, signed_distance_sum(e, x, xp, w));
      for (int t = 0; t < opts.inner_steps; ++t) {
        Eigen::MatrixXd g = weighted_rho_gradient(e, x, xp, w);
        const double step = step0 * (1.0 - 0.9 * static_cast<double>(t) / std::max(1, opts.inner_steps));
        for (Index j = 0; j < g.cols(); ++j) {
          const double gn = g.col(j).norm();
          if (gn > 0.0) e.a.values().col(j) += (step / gn) * g.col(j);
        }
        e.a = project_onto(cs, e.a);
        best = std::max(best, signed_distance_sum(e, x, xp, w));
      }
    }
    values.push_back(best);
  }

  RademacherEstimate est;
  const double m = static_cast<double>(values.size());
  est.mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - est.mean) * (v - est.mean);
    est.std_error = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
  }
  est.num_sign_draws = opts.num_sign_draws;
  est.restarts_per_draw = opts.restarts;
  est.inner_steps = opts.inner_steps;
  return est;
}

/// Exact expectation over all 2^n sign vectors with the inner sup taken over
/// a uniform grid of the constraint set (grid_resolution points per
/// coordinate on [-a, a]). Test oracle for tiny instances: n <= 12 and at
/// most 10^7 grid matrices.
inline double brute_force_rademacher(const ConstraintSet& cs, const PairDataset& ds, Nonlinearity phi,
                                     int grid_resolution) {
  cs.validate();
  const Index n = ds.size();
  if (n > 12) throw InstanceTooLarge("brute force needs n <= 12, got " + std::to_string(n));
  if (ds.dim() != cs.d) throw DimensionMismatch("pair features do not match constraint set dimension");
  require(grid_resolution >= 2, "grid resolution must be at least 2");
  if (cs.a == 0.0 || (cs.kind == ConstraintSet::Kind::SparsePair && cs.a_prime == 0.0)) return 0.0;

  const FeatureRows x = ds.left_rows();
  const FeatureRows xp = ds.right_rows();
  constexpr double kMaxGrid = 1e7;

  // All sign vectors as columns of S (n x 2^n). Distance vectors f_A are
  // streamed through a buffer; each flush folds max over rows of F S into
  // the running per-pattern maximum.
  const Index patterns = Index{1} << n;
  Eigen::MatrixXd signs(n, patterns);
  for (Index s = 0; s < patterns; ++s)
    for (Index i = 0; i < n; ++i) signs(i, s) = ((s >> i) & 1) ? 1.0 : -1.0;
  Eigen::RowVectorXd best = Eigen::RowVectorXd::Constant(patterns, -std::numeric_limits<double>::infinity());
  constexpr Index kChunk = 1024;
  Eigen::MatrixXd chunk(kChunk, n);
  Index filled = 0;
  long feasible = 0;
  auto flush = [&] {
    if (filled == 0) return;
    best = best.cwiseMax((chunk.topRows(filled) * signs).colwise().maxCoeff());
    filled = 0;
  };
  auto consume = [&](const Eigen::VectorXd& f) {
    chunk.row(filled++) = f.transpose();
    ++feasible;
    if (filled == kChunk) flush();
  };

  if (cs.kind == ConstraintSet::Kind::BoundedAmplification) {
    // Candidate columns: grid points of [-a, a]^d inside the radius-a ball.
    // Each contributes r_i = (phi(<c,x_i>) - phi(<c,x'_i>))^2 to every pair.
    const double cells = std::pow(static_cast<double>(grid_resolution), static_cast<double>(cs.d));
    if (cells > kMaxGrid) throw InstanceTooLarge("column grid too large");
    std::vector<Eigen::VectorXd> column_terms;
    const double h = 2.0 * cs.a / (grid_resolution - 1);
    for (long cell = 0; cell < static_cast<long>(cells); ++cell) {
      Eigen::VectorXd c(cs.d);
      long rest = cell;
      for (Index t = 0; t < cs.d; ++t) {
        c(t) = -cs.a + h * static_cast<double>(rest % grid_resolution);
        rest /= grid_resolution;
      }
      if (c.norm() > cs.a * (1.0 + 1e-12)) continue;
      Eigen::VectorXd r = (phi.apply(x * c) - phi.apply(xp * c)).array().square().matrix();
      column_terms.push_back(std::move(r));
    }
    const double total = std::pow(static_cast<double>(column_terms.size()), static_cast<double>(cs.k));
    if (total > kMaxGrid) throw InstanceTooLarge("joint grid has " + format_double(total) + " matrices");
    const auto m = static_cast<long>(column_terms.size());
    Eigen::VectorXd f(n);
    for (long combo = 0; combo < static_cast<long>(total); ++combo) {
      long rest = combo;
      f.setZero();
      for (Index j = 0; j < cs.k; ++j) {
        f += column_terms[static_cast<std::size_t>(rest % m)];
        rest /= m;
      }
      consume(f / static_cast<double>(cs.k));
    }
  } else {
    const Index entries = cs.d * cs.k;
    const double total = std::pow(static_cast<double>(grid_resolution), static_cast<double>(entries));
    if (total > kMaxGrid) throw InstanceTooLarge("joint grid has " + format_double(total) + " matrices");
    const double lim = std::min(cs.a, cs.a_prime);
    const double h = 2.0 * lim / (grid_resolution - 1);
    Eigen::MatrixXd a(cs.d, cs.k);
    for (long cell = 0; cell < static_cast<long>(total); ++cell) {
      long rest = cell;
      for (Index t = 0; t < entries; ++t) {
        a(t % cs.d, t / cs.d) = -lim + h * static_cast<double>(rest % grid_resolution);
        rest /= grid_resolution;
      }
      if (a.colwise().norm().sum() > cs.a * (1.0 + 1e-12)) continue;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
      if (svd.singularValues()(0) > cs.a_prime * (1.0 + 1e-12)) continue;
      const Eigen::MatrixXd p = phi.apply(x * a) - phi.apply(xp * a);
      consume(p.rowwise().squaredNorm() / static_cast<double>(cs.k));
    }
  }
  flush();
  if (feasible == 0) throw InvalidArgument("grid contains no feasible matrix; raise grid_resolution");
  return best.mean() / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Random coordinate projection

/// A d x k matrix whose columns are independent uniform directions scaled
/// to norm exactly a, so ||A||_{2,inf} = a.
inline Matrix random_boundary_matrix(Index d, Index k, double a, Rng& rng) {
  require(a >= 0.0, "radius must be nonnegative");
  Eigen::MatrixXd m = Matrix::random_normal(d, k, 1.0, rng).values();
  for (Index j = 0; j < k; ++j) m.col(j) *= a / m.col(j).norm();
  return Matrix(std::move(m));
}

struct DimReductionReport {
  Index k = 0;
  Index l = 0;
  Index n = 0;
  Index num_projections = 0;
  double a = 0.0;
  double b = 0.0;
  double phi_lip = 0.0;
  double t0 = 0.0;
  double min_error = 0.0;
  double mean_error = 0.0;
  double fraction_exceeding = 0.0;
  double bernstein_rhs = 0.0;
};

/// Samples `num_projections` index sets pi of size l (with replacement) and
/// measures e(pi) = max_i |rho_A(x_i, x'_i) - rho_{A pi}(x_i, x'_i)| against
/// t0 = (a b L)^2 sqrt(log 4n) / sqrt(l), a = ||A||_{2,inf}. With
/// `include_identity` (only when l == k) the identity ordering is the first
/// projection.
inline DimReductionReport verify_dimension_reduction(const EmbeddingMatrix& e, const PairDataset& ds, Index l,
                                                     Index num_projections, std::uint64_t seed,
                                                     bool include_identity = false) {
  const Index k = e.embed_dim();
  if (l < 1 || l > k)
    throw InvalidProjectionSize("l = " + std::to_string(l) + " must lie in [1, " + std::to_string(k) + "]");
  require(num_projections >= 1, "need at least one projection");
  if (ds.dim() != e.input_dim()) throw DimensionMismatch("pair features do not match embedding input dimension");

  DimReductionReport rep;
  rep.k = k;
  rep.l = l;
  rep.n = ds.size();
  rep.num_projections = num_projections;
  rep.a = norm_2_inf(e.a);
  rep.b = ds.b();
  rep.phi_lip = e.phi.lipschitz_constant();
  const double scale = rep.a * rep.b * rep.phi_lip;
  const double n = static_cast<double>(rep.n);
  rep.t0 = scale * scale * std::sqrt(std::log(4.0 * n)) / std::sqrt(static_cast<double>(l));
  rep.bernstein_rhs =
      scale > 0.0 ? 2.0 * n * std::exp(-static_cast<double>(l) * rep.t0 * rep.t0 / std::pow(scale, 4.0)) : 0.0;

  const FeatureRows x = ds.left_rows();
  const FeatureRows xp = ds.right_rows();
  auto distances = [&](const EmbeddingMatrix& m) -> Eigen::VectorXd {
    const Eigen::MatrixXd p = embed_rows(m, x) - embed_rows(m, xp);
    return p.rowwise().squaredNorm() / static_cast<double>(m.embed_dim());
  };
  const Eigen::VectorXd full = distances(e);

  Rng rng = make_rng(seed, {0x70726f6a});
  double sum = 0.0;
  Index exceeding = 0;
  rep.min_error = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < num_projections; ++t) {
    const ProjectionIndexSet pi = (include_identity && t == 0 && l == k) ? ProjectionIndexSet::identity(k)
                                                                         : ProjectionIndexSet::sample(k, l, rng);
    const double err = (full - distances(project_columns(e, pi))).cwiseAbs().maxCoeff();
    rep.min_error = std::min(rep.min_error, err);
    sum += err;
    if (err > rep.t0) ++exceeding;
  }
  rep.mean_error = sum / static_cast<double>(num_projections);
  rep.fraction_exceeding = static_cast<double>(exceeding) / static_cast<double>(num_projections);
  return rep;
}

inline constexpr const char* kRademacherCsvHeader = "k,a,n,estimate,std_error,draws,restarts";
inline constexpr const char* kDimReductionCsvHeader =
    "k,a,n,l,t0,min_error,mean_error,fraction_exceeding,bernstein_rhs";

}  // namespace dfml
