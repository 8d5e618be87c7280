#pragma once

// Pair losses as functions of the embedded distance, and the risks built
// from them.

#include <algorithm>
#include <string>
#include <type_traits>
#include <variant>

#include "dfml/dataset.hpp"
#include "dfml/embedding.hpp"
#include "dfml/error.hpp"

namespace dfml {

/// Clipped margin loss: penalizes same-class distances above S and
/// different-class distances below D with slope lambda, capped at 1.
struct MarginLossParams {
  double s = 0.0;
  double d = 1.0;
  double lambda = 1.0;

  void validate() const {
    require(s >= 0.0 && d >= 0.0, "margins S and D must be nonnegative");
    require(s < d, "margin S must be below D");
    require(lambda > 0.0, "margin slope lambda must be positive");
  }
};

/// weight * ReLU(rho) for same-class pairs, ReLU(D - rho) otherwise. Unclipped.
struct WeightedLossParams {
  double d = 0.5;
  double same_class_weight = 9.0;

  void validate() const {
    require(d > 0.0, "weighted loss margin D must be positive");
    require(same_class_weight > 0.0, "same-class weight must be positive");
  }
};

using Loss = std::variant<MarginLossParams, WeightedLossParams>;

inline double relu(double t) { return t > 0.0 ? t : 0.0; }

inline double margin_loss(const MarginLossParams& p, double rho_val, int y) {
  const double raw = y == 1 ? p.lambda * relu(rho_val - p.s) : p.lambda * relu(p.d - rho_val);
  return std::min(1.0, raw);
}

inline double weighted_loss(const WeightedLossParams& p, double rho_val, int y) {
  return y == 1 ? p.same_class_weight * relu(rho_val) : relu(p.d - rho_val);
}

/// Derivative of weighted_loss in rho. Indicators are strict, so the kinks
/// at rho = 0 and rho = D get derivative 0.
inline double weighted_loss_slope(const WeightedLossParams& p, double rho_val, int y) {
  if (y == 1) return rho_val > 0.0 ? p.same_class_weight : 0.0;
  return p.d - rho_val > 0.0 ? -1.0 : 0.0;
}

inline double evaluate_loss(const Loss& loss, double rho_val, int y) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, MarginLossParams>)
          return margin_loss(p, rho_val, y);
        else
          return weighted_loss(p, rho_val, y);
      },
      loss);
}

inline void validate_loss(const Loss& loss) {
  std::visit([](const auto& p) { p.validate(); }, loss);
}

/// Builds a loss from its config name ("margin" or "weighted").
inline Loss make_loss(const std::string& name, double s, double d, double lambda, double same_class_weight) {
  Loss loss;
  if (name == "margin")
    loss = MarginLossParams{s, d, lambda};
  else if (name == "weighted")
    loss = WeightedLossParams{d, same_class_weight};
  else
    throw InvalidArgument("unknown loss '" + name + "' (margin|weighted)");
  validate_loss(loss);
  return loss;
}

/// Mean per-pair loss.
inline double empirical_risk(const EmbeddingMatrix& e, const PairDataset& ds, const Loss& loss) {
  if (ds.size() == 0) throw EmptyDataset("empirical risk of an empty dataset");
  if (ds.dim() != e.input_dim()) throw DimensionMismatch("pair features do not match embedding input dimension");
  double total = 0.0;
  for (const LabeledPair& p : ds.pairs()) total += evaluate_loss(loss, rho(e, p.x, p.x_prime), p.y);
  return total / static_cast<double>(ds.size());
}

/// All-ordered-pairs risk over a label-per-feature dataset, normalized by
/// n(n-1). A pair (i, j) has y = 1 iff labels i and j agree.
inline double ustat_risk(const EmbeddingMatrix& e, const FeatureDataset& features, const Loss& loss) {
  const Index n = features.size();
  if (n < 2) throw TooFewFeatures("U-statistic risk needs at least two features");
  const Eigen::MatrixXd emb = embed_rows(e, features.features());
  const double k = static_cast<double>(e.embed_dim());
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double r = (emb.row(i) - emb.row(j)).squaredNorm() / k;
      total += evaluate_loss(loss, r, features.label(i) == features.label(j) ? 1 : 0);
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

/// Test risk minus train risk.
inline double generalization_gap(const EmbeddingMatrix& e, const PairDataset& train, const PairDataset& test,
                                 const Loss& loss) {
  return empirical_risk(e, test, loss) - empirical_risk(e, train, loss);
}

}  // namespace dfml
