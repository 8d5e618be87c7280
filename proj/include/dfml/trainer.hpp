#pragma once

// Plain SGD on the 9-weighted pair loss with hand-derived gradients.
//
// A step takes the next Bx features of the epoch order (S1) and an
// independent random batch of By features (S2), forms all Bx * By cross
// pairs and descends along their mean loss gradient, plus the subgradient
// of (c/d) ||A||_{2,inf}^2 when c > 0.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "dfml/bounds.hpp"
#include "dfml/data.hpp"
#include "dfml/dataset.hpp"
#include "dfml/embedding.hpp"
#include "dfml/error.hpp"
#include "dfml/losses.hpp"
#include "dfml/random.hpp"

namespace dfml {

struct TrainConfig {
  Index k = 10;
  Nonlinearity nonlinearity = Nonlinearity::sigmoid();
  double learning_rate = 0.05;
  int epochs = 180;
  Index batch_x = 500;
  Index batch_y = 500;
  double reg_coeff = 0.0;
  WeightedLossParams loss{};
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  Index eval_pairs = 50'000;
  // Multiplies the step by k. Each column's gradient carries a 1/k factor
  // from the normalization of rho, so this keeps per-column dynamics
  // independent of k.
  bool scale_lr_by_k = false;

  void validate() const {
    require(k >= 1, "k must be positive");
    require(learning_rate >= 0.0, "learning rate must be nonnegative");
    require(epochs >= 1, "epochs must be positive");
    require(batch_x >= 1 && batch_y >= 1, "batch sizes must be positive");
    require(reg_coeff >= 0.0, "regularization coefficient must be nonnegative");
    require(init_scale >= 0.0, "init scale must be nonnegative");
    require(eval_pairs >= 1, "eval_pairs must be positive");
    loss.validate();
  }
};

/// Entries i.i.d. N(0, (init_scale / sqrt d)^2), seeded from cfg.seed.
inline EmbeddingMatrix init_matrix(const TrainConfig& cfg, Index d) {
  require(d >= 1, "input dimension must be positive");
  Rng rng = make_rng(cfg.seed, {0x696e6974});
  const double stddev = cfg.init_scale / std::sqrt(static_cast<double>(d));
  return EmbeddingMatrix{Matrix::random_normal(d, cfg.k, stddev, rng), cfg.nonlinearity};
}

/// Exact gradient of weighted_loss(rho(E, x, x'), y) with respect to A.
inline Matrix loss_gradient(const EmbeddingMatrix& e, const LabeledPair& pair, const WeightedLossParams& p) {
  const double r = rho(e, pair.x, pair.x_prime);
  const double slope = weighted_loss_slope(p, r, pair.y);
  if (slope == 0.0) return Matrix(e.input_dim(), e.embed_dim());
  return rho_gradient(e, pair.x, pair.x_prime).scaled(slope);
}

/// Subgradient of (reg_coeff / d) ||A||_{2,inf}^2: only the largest column
/// (lowest index on ties) is nonzero, equal to (2 reg_coeff / d) A_j.
inline Matrix reg_gradient(const EmbeddingMatrix& e, double reg_coeff, Index d) {
  require(reg_coeff >= 0.0, "regularization coefficient must be nonnegative");
  require(d >= 1, "d must be positive");
  Matrix g(e.input_dim(), e.embed_dim());
  if (reg_coeff == 0.0) return g;
  Index best = 0;
  column_norms(e.a).maxCoeff(&best);  // first maximum
  g.values().col(best) = (2.0 * reg_coeff / static_cast<double>(d)) * e.a.values().col(best);
  return g;
}

struct BatchGradient {
  Eigen::MatrixXd grad;  // mean over all cross pairs
  double loss = 0.0;     // mean loss over all cross pairs
};

/// Mean loss and gradient over the Bx * By cross pairs (left_i, right_j).
///
/// With P = phi(X A), rho_ij = (|P1_i|^2 + |P2_j|^2 - 2 P1_i . P2_j) / k and
/// outer slopes C_ij, the gradient is X1^t G1 + X2^t G2 where
///   G1 = (2/k) phi'(Z1) * (P1 * rowsum(C) - C P2)
///   G2 = (2/k) phi'(Z2) * (P2 * colsum(C) - C^t P1).
template <typename D1, typename D2>
BatchGradient batch_gradient(const EmbeddingMatrix& e, const Eigen::MatrixBase<D1>& left,
                             const std::vector<int>& left_labels, const Eigen::MatrixBase<D2>& right,
                             const std::vector<int>& right_labels, const WeightedLossParams& p) {
  const Eigen::MatrixXd& a = e.a.values();
  const double k = static_cast<double>(a.cols());
  const Index bx = left.rows(), by = right.rows();
  const Eigen::MatrixXd z1 = left * a;
  const Eigen::MatrixXd z2 = right * a;
  const Eigen::MatrixXd p1 = e.phi.apply(z1);
  const Eigen::MatrixXd p2 = e.phi.apply(z2);
  const Eigen::VectorXd sq1 = p1.rowwise().squaredNorm();
  const Eigen::VectorXd sq2 = p2.rowwise().squaredNorm();
  const Eigen::MatrixXd cross = p1 * p2.transpose();

  Eigen::MatrixXd c(bx, by);
  double total = 0.0;
  const double inv_pairs = 1.0 / (static_cast<double>(bx) * static_cast<double>(by));
  for (Index j = 0; j < by; ++j) {
    for (Index i = 0; i < bx; ++i) {
      const double r = std::max(0.0, (sq1(i) + sq2(j) - 2.0 * cross(i, j)) / k);
      const int y = left_labels[static_cast<std::size_t>(i)] == right_labels[static_cast<std::size_t>(j)] ? 1 : 0;
      total += weighted_loss(p, r, y);
      c(i, j) = weighted_loss_slope(p, r, y) * inv_pairs;
    }
  }
  const Eigen::VectorXd row_sum = c.rowwise().sum();
  const Eigen::VectorXd col_sum = c.colwise().sum().transpose();
  Eigen::MatrixXd g1 = p1.array().colwise() * row_sum.array();
  g1 -= c * p2;
  g1 = (2.0 / k) * (g1.array() * e.phi.apply_derivative(z1).array()).matrix();
  Eigen::MatrixXd g2 = p2.array().colwise() * col_sum.array();
  g2 -= c.transpose() * p1;
  g2 = (2.0 / k) * (g2.array() * e.phi.apply_derivative(z2).array()).matrix();

  BatchGradient out;
  out.grad = left.transpose() * g1 + right.transpose() * g2;
  out.loss = total * inv_pairs;
  return out;
}

/// Draws S1 batches by walking a per-epoch permutation and S2 batches
/// independently. The order is re-permuted whenever S1 exhausts the data.
class PairBatchSampler {
 public:
  struct Batch {
    std::vector<Index> left;   // S1
    std::vector<Index> right;  // S2
    int epoch = 0;
    bool ends_epoch = false;
  };

  PairBatchSampler(Index n, Index batch_x, Index batch_y, std::uint64_t seed)
      : n_(n), bx_(batch_x), by_(batch_y), rng_(seed), order_(static_cast<std::size_t>(n)) {
    if (n < 1) throw EmptyDataset("pair sampler needs at least one feature");
    require(batch_x >= 1 && batch_y >= 1, "batch sizes must be positive");
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  Batch next() {
    Batch b;
    b.epoch = epoch_;
    const Index take = std::min(bx_, n_ - cursor_);
    b.left.assign(order_.begin() + cursor_, order_.begin() + cursor_ + take);
    cursor_ += take;
    b.right = draw_right();
    if (cursor_ == n_) {
      b.ends_epoch = true;
      cursor_ = 0;
      ++epoch_;
      std::shuffle(order_.begin(), order_.end(), rng_);
    }
    return b;
  }

  int epoch() const { return epoch_; }

 private:
  // Without replacement when the batch fits, otherwise with replacement.
  std::vector<Index> draw_right() {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(by_));
    if (by_ <= n_) {
      scratch_.resize(static_cast<std::size_t>(n_));
      std::iota(scratch_.begin(), scratch_.end(), 0);
      for (Index t = 0; t < by_; ++t) {
        std::uniform_int_distribution<Index> pick(t, n_ - 1);
        std::swap(scratch_[static_cast<std::size_t>(t)], scratch_[static_cast<std::size_t>(pick(rng_))]);
        out.push_back(scratch_[static_cast<std::size_t>(t)]);
      }
    } else {
      std::uniform_int_distribution<Index> pick(0, n_ - 1);
      for (Index t = 0; t < by_; ++t) out.push_back(pick(rng_));
    }
    return out;
  }

  Index n_, bx_, by_;
  Rng rng_;
  std::vector<Index> order_;
  std::vector<Index> scratch_;
  Index cursor_ = 0;
  int epoch_ = 0;
};

/// Materializes the next batch as labeled cross pairs (left-major order).
inline std::vector<LabeledPair> sample_pair_batch(const FeatureDataset& ds, PairBatchSampler& sampler) {
  const PairBatchSampler::Batch b = sampler.next();
  std::vector<LabeledPair> out;
  out.reserve(b.left.size() * b.right.size());
  for (Index i : b.left)
    for (Index j : b.right) out.push_back({ds.feature(i), ds.feature(j), ds.label(i) == ds.label(j) ? 1 : 0});
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation on fixed pair sets

struct PairEvaluation {
  double loss = 0.0;
  double same_class_mean = 0.0;  // mean of ReLU(rho) over y = 1 pairs
  double diff_class_mean = 0.0;  // mean of ReLU(D - rho) over y = 0 pairs
};

inline PairEvaluation evaluate_pairs(const EmbeddingMatrix& e, const FeatureDataset& ds,
                                     const std::vector<IndexPair>& pairs, const WeightedLossParams& p) {
  if (pairs.empty()) throw EmptyDataset("no evaluation pairs");
  const Eigen::MatrixXd emb = embed_rows(e, ds.features());
  const double k = static_cast<double>(e.embed_dim());
  double total = 0.0, same = 0.0, diff = 0.0;
  Index n_same = 0, n_diff = 0;
  for (const IndexPair& q : pairs) {
    const double r = (emb.row(q.first) - emb.row(q.second)).squaredNorm() / k;
    total += weighted_loss(p, r, q.y);
    if (q.y == 1) {
      same += relu(r);
      ++n_same;
    } else {
      diff += relu(p.d - r);
      ++n_diff;
    }
  }
  PairEvaluation out;
  out.loss = total / static_cast<double>(pairs.size());
  out.same_class_mean = n_same ? same / static_cast<double>(n_same) : 0.0;
  out.diff_class_mean = n_diff ? diff / static_cast<double>(n_diff) : 0.0;
  return out;
}

/// `count` random pairs, or every ordered pair when there are no more than `count`.
inline std::vector<IndexPair> evaluation_pairs(const FeatureDataset& ds, Index count, std::uint64_t seed) {
  const Index n = ds.size();
  if (n * n <= count) {
    std::vector<IndexPair> all;
    all.reserve(static_cast<std::size_t>(n * n));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) all.push_back({i, j, ds.label(i) == ds.label(j) ? 1 : 0});
    return all;
  }
  Rng rng(seed);
  return sample_index_pairs(ds, count, rng);
}

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  NormProfile norms;
  double seconds = 0.0;
};

/// One record per evaluated epoch; epoch 0 is the initial matrix.
struct TrainTrace {
  std::vector<EpochRecord> records;
};

inline constexpr const char* kTraceCsvHeader = "epoch,train_loss,test_loss,norm_2_1,norm_2_inf,norm_op,norm_fro,seconds";

inline void write_trace_csv(std::ostream& os, const TrainTrace& trace) {
  os << kTraceCsvHeader << '\n';
  for (const EpochRecord& r : trace.records) {
    os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.test_loss) << ','
       << format_double(r.norms.norm_2_1) << ',' << format_double(r.norms.norm_2_inf) << ','
       << format_double(r.norms.norm_op) << ',' << format_double(r.norms.norm_fro) << ','
       << format_double(r.seconds) << '\n';
  }
}

struct TrainResult {
  EmbeddingMatrix embedding;
  TrainTrace trace;
  std::vector<IndexPair> train_eval_pairs;
  std::vector<IndexPair> test_eval_pairs;
};

inline TrainResult train(const TrainConfig& cfg, const FeatureDataset& train_ds, const FeatureDataset& test_ds) {
  cfg.validate();
  if (train_ds.dim() != test_ds.dim()) throw DimensionMismatch("train and test feature dimensions differ");
  const Index d = train_ds.dim();

  TrainResult result{init_matrix(cfg, d), {}, {}, {}};
  EmbeddingMatrix& e = result.embedding;
  result.train_eval_pairs = evaluation_pairs(train_ds, cfg.eval_pairs, derive_seed(cfg.seed, {0x65760001}));
  result.test_eval_pairs = evaluation_pairs(test_ds, cfg.eval_pairs, derive_seed(cfg.seed, {0x65760002}));

  const auto start = std::chrono::steady_clock::now();
  auto record = [&](int epoch) {
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = evaluate_pairs(e, train_ds, result.train_eval_pairs, cfg.loss).loss;
    r.test_loss = evaluate_pairs(e, test_ds, result.test_eval_pairs, cfg.loss).loss;
    r.norms = measure_norms(e.a);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.records.push_back(r);
  };
  record(0);

  PairBatchSampler sampler(train_ds.size(), cfg.batch_x, cfg.batch_y, derive_seed(cfg.seed, {0x73616d70}));
  const FeatureRows& x = train_ds.features();
  FeatureRows left, right;
  std::vector<int> left_labels, right_labels;
  const double step_size = cfg.learning_rate * (cfg.scale_lr_by_k ? static_cast<double>(cfg.k) : 1.0);
  long step = 0;
  while (sampler.epoch() < cfg.epochs) {
    const PairBatchSampler::Batch batch = sampler.next();
    auto gather = [&](const std::vector<Index>& idx, FeatureRows& rows, std::vector<int>& labels) {
      rows.resize(static_cast<Index>(idx.size()), d);
      labels.resize(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        rows.row(static_cast<Index>(r)) = x.row(idx[r]);
        labels[r] = train_ds.label(idx[r]);
      }
    };
    gather(batch.left, left, left_labels);
    gather(batch.right, right, right_labels);

    BatchGradient g = batch_gradient(e, left, left_labels, right, right_labels, cfg.loss);
    if (cfg.reg_coeff > 0.0) g.grad += reg_gradient(e, cfg.reg_coeff, d).values();
    e.a.values() -= step_size * g.grad;
    ++step;
    if (!e.a.all_finite())
      throw NumericalDivergence("non-finite weights at epoch " + std::to_string(batch.epoch + 1) + ", step " +
                                std::to_string(step));
    if (batch.ends_epoch) record(batch.epoch + 1);
  }
  return result;
}

}  // namespace dfml
