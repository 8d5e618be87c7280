#pragma once

// Generalization-bound formulas as computable functions of matrix norms,
// the feature bound b, the sample count n and the Lipschitz constant of phi.
//
// Bounds hold up to absolute constants and logarithmic factors, so the
// absolute constant (default 1) and the optional log factor are explicit
// inputs and are echoed in every report.

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "dfml/error.hpp"
#include "dfml/tensor.hpp"

namespace dfml {

struct NormProfile {
  double norm_2_1 = 0.0;
  double norm_2_inf = 0.0;
  double norm_op = 0.0;
  double norm_fro = 0.0;
  Index k = 1;
  Index d = 1;
};

inline NormProfile measure_norms(const Matrix& a, const PowerIterationOptions& opts = {}) {
  return {norm_2_1(a), norm_2_inf(a), norm_op(a, opts), norm_fro(a), a.cols(), a.rows()};
}

/// Checks the norm inequalities every real matrix satisfies, to 1e-9.
inline bool is_consistent(const NormProfile& p) {
  const double k = static_cast<double>(p.k);
  constexpr double slack = 1e-9;
  return p.norm_op <= std::sqrt(k) * p.norm_2_inf + slack && p.norm_2_1 <= k * p.norm_2_inf + slack &&
         p.norm_op <= p.norm_fro + slack;
}

struct BoundContext {
  double b = 1.0;
  Index n = 1;
  double phi_lip = 1.0;
  bool log_factor_enabled = false;
  double absolute_constant = 1.0;

  void validate() const {
    require(b >= 0.0, "feature bound b must be nonnegative");
    require(n >= 1, "sample count n must be at least 1");
    require(phi_lip > 0.0, "Lipschitz constant must be positive");
    require(absolute_constant > 0.0, "absolute constant must be positive");
  }
};

/// C (1/n + ||A||_{2,1} ||A||_op b^2 L^2 / (k sqrt n)), the second term
/// optionally times log(e + sqrt(n) b ||A||_op L^2 / sqrt(k)).
inline double sparse_bound(const NormProfile& np, const BoundContext& ctx) {
  ctx.validate();
  const double n = static_cast<double>(ctx.n);
  const double k = static_cast<double>(np.k);
  const double l2 = ctx.phi_lip * ctx.phi_lip;
  double second = np.norm_2_1 * np.norm_op * ctx.b * ctx.b * l2 / (k * std::sqrt(n));
  if (ctx.log_factor_enabled)
    second *= std::log(std::numbers::e + std::sqrt(n) * ctx.b * np.norm_op * l2 / std::sqrt(k));
  return ctx.absolute_constant * (1.0 / n + second);
}

/// C (1/n + ||A||_{2,inf}^2 b^2 L^2 / sqrt n). No k anywhere.
inline double amplification_bound(const NormProfile& np, const BoundContext& ctx) {
  ctx.validate();
  const double n = static_cast<double>(ctx.n);
  const double a = np.norm_2_inf;
  return ctx.absolute_constant * (1.0 / n + a * a * ctx.b * ctx.b * ctx.phi_lip * ctx.phi_lip / std::sqrt(n));
}

/// The bounded-amplification bound obtained through the sparse one:
/// C (1/n + ||A||_{2,inf}^2 b^2 sqrt(k) L^2 / sqrt n).
inline double corollary_bound(const NormProfile& np, const BoundContext& ctx) {
  ctx.validate();
  const double n = static_cast<double>(ctx.n);
  const double a = np.norm_2_inf;
  return ctx.absolute_constant *
         (1.0 / n + a * a * ctx.b * ctx.b * std::sqrt(static_cast<double>(np.k)) * ctx.phi_lip * ctx.phi_lip /
                        std::sqrt(n));
}

/// Linear-embedding bound b^2 ||A A^t||_F / (k sqrt n).
inline double linear_bound(const Matrix& a, const BoundContext& ctx) {
  ctx.validate();
  return ctx.b * ctx.b * gram_fro(a) / (static_cast<double>(a.cols()) * std::sqrt(static_cast<double>(ctx.n)));
}

struct BoundReport {
  double sparse_bound = 0.0;
  double amplification_bound = 0.0;
  double corollary_bound = 0.0;
  double linear_bound = 0.0;
  NormProfile norms;
  BoundContext context;
};

inline BoundReport evaluate_bounds(const Matrix& a, const BoundContext& ctx, const PowerIterationOptions& opts = {}) {
  BoundReport r;
  r.norms = measure_norms(a, opts);
  r.context = ctx;
  r.sparse_bound = sparse_bound(r.norms, ctx);
  r.amplification_bound = amplification_bound(r.norms, ctx);
  r.corollary_bound = corollary_bound(r.norms, ctx);
  r.linear_bound = linear_bound(a, ctx);
  return r;
}

inline constexpr const char* kBoundCsvHeader =
    "k,norm_2_1,norm_2_inf,norm_op,sparse_bound,amplification_bound,corollary_bound,linear_bound";

inline void write_bound_row(std::ostream& os, const BoundReport& r) {
  os << r.norms.k << ',' << format_double(r.norms.norm_2_1) << ',' << format_double(r.norms.norm_2_inf) << ','
     << format_double(r.norms.norm_op) << ',' << format_double(r.sparse_bound) << ','
     << format_double(r.amplification_bound) << ',' << format_double(r.corollary_bound) << ','
     << format_double(r.linear_bound) << '\n';
}

}  // namespace dfml
