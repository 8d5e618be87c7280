#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dfml/error.hpp"
#include "dfml/tensor.hpp"

namespace dfml {

using FeatureRows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Labeled feature vectors, one per row, with the feature-norm bound b.
///
/// b is the exact maximum row norm when the dataset is built from rows;
/// subsets produced by `split` keep their parent's b.
class FeatureDataset {
 public:
  FeatureDataset(FeatureRows features, std::vector<int> labels)
      : features_(std::move(features)), labels_(std::move(labels)) {
    validate();
    b_ = max_row_norm();
  }

  FeatureDataset(FeatureRows features, std::vector<int> labels, double b)
      : features_(std::move(features)), labels_(std::move(labels)), b_(b) {
    validate();
    if (b_ + 1e-12 * std::max(1.0, b_) < max_row_norm())
      throw InvalidArgument("feature bound b is smaller than a stored feature norm");
  }

  Index size() const { return features_.rows(); }
  Index dim() const { return features_.cols(); }
  double b() const { return b_; }

  const FeatureRows& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  int label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }
  Vector feature(Index i) const { return Vector(Eigen::VectorXd(features_.row(i).transpose())); }

  int num_classes() const { return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end()) + 1; }

  /// Rows `idx` in order, carrying this dataset's b.
  FeatureDataset subset(const std::vector<Index>& idx) const {
    FeatureRows rows(static_cast<Index>(idx.size()), dim());
    std::vector<int> labels;
    labels.reserve(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      rows.row(static_cast<Index>(r)) = features_.row(idx[r]);
      labels.push_back(labels_[static_cast<std::size_t>(idx[r])]);
    }
    return FeatureDataset(std::move(rows), std::move(labels), b_);
  }

 private:
  void validate() const {
    if (features_.rows() <= 0) throw EmptyDataset("feature dataset has no rows");
    if (features_.cols() <= 0) throw InvalidArgument("feature dimension must be positive");
    if (static_cast<Index>(labels_.size()) != features_.rows())
      throw CountMismatch("feature and label counts differ");
    if (!features_.allFinite()) throw InvalidArgument("feature entries must be finite");
    for (int l : labels_)
      if (l < 0) throw InvalidArgument("labels must be nonnegative");
  }
  double max_row_norm() const { return features_.rowwise().norm().maxCoeff(); }

  FeatureRows features_;
  std::vector<int> labels_;
  double b_ = 0.0;
};

/// ((x, x'), y) with y = 1 when both come from the same class.
struct LabeledPair {
  Vector x;
  Vector x_prime;
  int y;
};

/// A list of labeled pairs plus the feature bound b.
class PairDataset {
 public:
  PairDataset(std::vector<LabeledPair> pairs, double b) : pairs_(std::move(pairs)), b_(b) {
    if (pairs_.empty()) throw EmptyDataset("pair dataset has no pairs");
    const Index d = pairs_.front().x.dim();
    double max_norm = 0.0;
    for (const LabeledPair& p : pairs_) {
      if (p.x.dim() != d || p.x_prime.dim() != d) throw DimensionMismatch("pair features differ in dimension");
      if (p.y != 0 && p.y != 1) throw InvalidArgument("pair label must be 0 or 1");
      max_norm = std::max({max_norm, p.x.norm(), p.x_prime.norm()});
    }
    if (b_ + 1e-12 * std::max(1.0, b_) < max_norm)
      throw InvalidArgument("feature bound b is smaller than a stored feature norm");
  }

  /// b computed as the exact maximum feature norm.
  static PairDataset with_exact_bound(std::vector<LabeledPair> pairs) {
    double b = 0.0;
    for (const LabeledPair& p : pairs) b = std::max({b, p.x.norm(), p.x_prime.norm()});
    return PairDataset(std::move(pairs), b);
  }

  Index size() const { return static_cast<Index>(pairs_.size()); }
  Index dim() const { return pairs_.front().x.dim(); }
  double b() const { return b_; }
  const std::vector<LabeledPair>& pairs() const { return pairs_; }
  const LabeledPair& operator[](Index i) const { return pairs_[static_cast<std::size_t>(i)]; }

  /// Left and right features stacked as n x d row matrices.
  FeatureRows left_rows() const { return stack(&LabeledPair::x); }
  FeatureRows right_rows() const { return stack(&LabeledPair::x_prime); }

 private:
  FeatureRows stack(Vector LabeledPair::*side) const {
    FeatureRows rows(size(), dim());
    for (Index i = 0; i < size(); ++i) rows.row(i) = (pairs_[static_cast<std::size_t>(i)].*side).values().transpose();
    return rows;
  }

  std::vector<LabeledPair> pairs_;
  double b_;
};

/// A pair given by row indices into a FeatureDataset.
struct IndexPair {
  Index first;
  Index second;
  int y;
};

}  // namespace dfml
