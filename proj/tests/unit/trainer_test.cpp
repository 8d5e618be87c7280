#include <set>
#include <sstream>

#include "support.hpp"

namespace dfml {
namespace {

double pair_loss(const EmbeddingMatrix& e, const LabeledPair& p, const WeightedLossParams& w) {
  return weighted_loss(w, rho(e, p.x, p.x_prime), p.y);
}

TEST(InitMatrix, DeterministicAndScaled) {
  TrainConfig cfg;
  cfg.k = 10;
  cfg.seed = 17;
  EXPECT_EQ(init_matrix(cfg, 100).a, init_matrix(cfg, 100).a);
  cfg.init_scale = 0.0;
  EXPECT_EQ(init_matrix(cfg, 100).a, Matrix(100, 10));

  cfg.init_scale = 1.0;
  const Eigen::MatrixXd& a = init_matrix(cfg, 100).a.values();
  const double mean = a.mean();
  const double sd = std::sqrt((a.array() - mean).square().sum() / static_cast<double>(a.size() - 1));
  EXPECT_NEAR(sd, 0.1, 0.02);
}

TEST(LossGradient, TrivialCases) {
  const WeightedLossParams w{0.5, 9};
  Rng rng(1);
  const EmbeddingMatrix e{test::random_matrix(rng, 3, 2), Nonlinearity::sigmoid()};
  const Vector x = test::random_vector(rng, 3);
  EXPECT_EQ(loss_gradient(e, {x, x, 1}, w).values().norm(), 0.0);
  EXPECT_EQ(loss_gradient(e, {x, x, 0}, w).values().norm(), 0.0);

  // Different-class pair already beyond the margin.
  const EmbeddingMatrix far{Matrix::from_rows({{10, 0}, {0, 10}}), Nonlinearity::identity()};
  const LabeledPair apart{Vector{1, 0}, Vector{0, 1}, 0};
  ASSERT_GE(rho(far, apart.x, apart.x_prime), w.d);
  EXPECT_EQ(loss_gradient(far, apart, w).values().norm(), 0.0);
  EXPECT_THROW(loss_gradient(e, {Vector{1, 2}, Vector{1, 2}, 0}, w), DimensionMismatch);
}

// Central differences with step 1e-6, skipping instances near the ReLU kink
// or the rho = D boundary.
TEST(LossGradient, MatchesFiniteDifferences) {
  const WeightedLossParams w{0.5, 9};
  Rng rng(2);
  for (Nonlinearity phi : {Nonlinearity::identity(), Nonlinearity::sigmoid(), Nonlinearity::relu()}) {
    int checked = 0;
    while (checked < 100) {
      const EmbeddingMatrix e{test::random_matrix(rng, 3, 2), phi};
      const LabeledPair p{test::random_vector(rng, 3), test::random_vector(rng, 3), static_cast<int>(rng() % 2)};
      const Eigen::VectorXd z = e.a.values().transpose() * p.x.values();
      const Eigen::VectorXd zp = e.a.values().transpose() * p.x_prime.values();
      if (std::min(z.cwiseAbs().minCoeff(), zp.cwiseAbs().minCoeff()) < 1e-3) continue;
      if (std::abs(rho(e, p.x, p.x_prime) - w.d) < 1e-3) continue;
      const Matrix g = loss_gradient(e, p, w);
      for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 2; ++j) {
          EmbeddingMatrix plus = e, minus = e;
          plus.a(i, j) += 1e-6;
          minus.a(i, j) -= 1e-6;
          const double fd = (pair_loss(plus, p, w) - pair_loss(minus, p, w)) / 2e-6;
          EXPECT_LT(std::abs(g(i, j) - fd), 1e-5 * std::max(1.0, std::abs(fd))) << phi.name();
        }
      }
      ++checked;
    }
  }
}

TEST(RegGradient, KnownValues) {
  Rng rng(3);
  const EmbeddingMatrix e{test::random_matrix(rng, 4, 3), Nonlinearity::identity()};
  EXPECT_EQ(reg_gradient(e, 0.0, 4), Matrix(4, 3));

  const EmbeddingMatrix one{test::random_matrix(rng, 4, 1), Nonlinearity::identity()};
  EXPECT_TRUE(reg_gradient(one, 0.3, 4).values().isApprox(2 * 0.3 / 4 * one.a.values(), 1e-15));

  // Ties go to the lowest index.
  const EmbeddingMatrix tie{Matrix::from_rows({{1, 0}, {0, 1}}), Nonlinearity::identity()};
  const Matrix g = reg_gradient(tie, 1.0, 2);
  EXPECT_EQ(g(0, 0), 1.0);
  EXPECT_EQ(g.column_norm(1), 0.0);
}

TEST(RegGradient, MatchesFiniteDifferencesAwayFromTies) {
  Rng rng(4);
  const double c = 0.7;
  for (int t = 0; t < 50; ++t) {
    const Index d = 4;
    const EmbeddingMatrix e{test::random_matrix(rng, d, 3), Nonlinearity::identity()};
    Eigen::VectorXd norms = column_norms(e.a);
    std::sort(norms.data(), norms.data() + norms.size());
    if (norms(2) - norms(1) < 1e-3) continue;
    auto reg = [&](const EmbeddingMatrix& m) { return c / d * std::pow(norm_2_inf(m.a), 2); };
    const Matrix g = reg_gradient(e, c, d);
    for (Index i = 0; i < d; ++i) {
      for (Index j = 0; j < 3; ++j) {
        EmbeddingMatrix plus = e, minus = e;
        plus.a(i, j) += 1e-6;
        minus.a(i, j) -= 1e-6;
        const double fd = (reg(plus) - reg(minus)) / 2e-6;
        EXPECT_LT(std::abs(g(i, j) - fd), 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(BatchGradient, EqualsMeanOfPerPairGradients) {
  const WeightedLossParams w{0.5, 9};
  Rng rng(5);
  for (Nonlinearity phi : {Nonlinearity::identity(), Nonlinearity::sigmoid(), Nonlinearity::relu()}) {
    const EmbeddingMatrix e{test::random_matrix(rng, 4, 3), phi};
    FeatureRows left(2, 4), right(3, 4);
    for (Index i = 0; i < 2; ++i) left.row(i) = test::random_vector(rng, 4).values().transpose();
    for (Index i = 0; i < 3; ++i) right.row(i) = test::random_vector(rng, 4).values().transpose();
    const std::vector<int> ll{0, 1}, rl{1, 1, 0};

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(4, 3);
    double loss = 0.0;
    for (Index i = 0; i < 2; ++i) {
      for (Index j = 0; j < 3; ++j) {
        const LabeledPair p{Vector(Eigen::VectorXd(left.row(i).transpose())),
                            Vector(Eigen::VectorXd(right.row(j).transpose())), ll[i] == rl[j] ? 1 : 0};
        sum += loss_gradient(e, p, w).values();
        loss += pair_loss(e, p, w);
      }
    }
    const BatchGradient g = batch_gradient(e, left, ll, right, rl, w);
    EXPECT_TRUE(g.grad.isApprox(sum / 6.0, 1e-12)) << phi.name();
    EXPECT_NEAR(g.loss, loss / 6.0, 1e-14);
  }
}

TEST(PairSampler, BatchShapesAndLabels) {
  const FeatureDataset ds = gen_gaussian_clusters(3, 4, 2, 1.0, 0.1, 1);
  PairBatchSampler one(ds.size(), 1, 1, 7);
  EXPECT_EQ(sample_pair_batch(ds, one).size(), 1u);

  PairBatchSampler s(ds.size(), 2, 3, 8);
  const PairBatchSampler::Batch b = s.next();
  ASSERT_EQ(b.left.size(), 2u);
  ASSERT_EQ(b.right.size(), 3u);
  PairBatchSampler replay(ds.size(), 2, 3, 8);
  const std::vector<LabeledPair> pairs = sample_pair_batch(ds, replay);
  ASSERT_EQ(pairs.size(), 6u);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const LabeledPair& p = pairs[i * 3 + j];
      EXPECT_EQ(p.x, ds.feature(b.left[i]));
      EXPECT_EQ(p.x_prime, ds.feature(b.right[j]));
      EXPECT_EQ(p.y, ds.label(b.left[i]) == ds.label(b.right[j]) ? 1 : 0);
    }
  }
  // S2 is drawn without replacement when it fits.
  EXPECT_EQ(std::set<Index>(b.right.begin(), b.right.end()).size(), 3u);
}

TEST(PairSampler, EpochVisitsEveryFeatureOnce) {
  const Index n = 1234;
  PairBatchSampler s(n, 500, 10, 3);
  std::vector<int> count(n, 0);
  std::vector<std::size_t> sizes;
  bool ended = false;
  while (!ended) {
    const auto b = s.next();
    EXPECT_EQ(b.epoch, 0);
    sizes.push_back(b.left.size());
    for (Index i : b.left) ++count[static_cast<std::size_t>(i)];
    ended = b.ends_epoch;
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{500, 500, 234}));
  for (int c : count) EXPECT_EQ(c, 1);
  EXPECT_EQ(s.epoch(), 1);
  EXPECT_EQ(s.next().epoch, 1);
}

TEST(Train, ZeroLearningRateKeepsInitialMatrix) {
  const FeatureDataset ds = gen_gaussian_clusters(2, 20, 5, 1.0, 0.3, 4);
  const auto [tr, te] = split(ds, 0.25, 4);
  TrainConfig cfg;
  cfg.k = 3;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.seed = 9;
  const TrainResult r = train(cfg, tr, te);
  EXPECT_EQ(r.embedding.a, init_matrix(cfg, 5).a);
  ASSERT_EQ(r.trace.records.size(), 4u);
  for (std::size_t i = 0; i < r.trace.records.size(); ++i) EXPECT_EQ(r.trace.records[i].epoch, static_cast<int>(i));
}

TEST(Train, DeterministicForFixedSeed) {
  const FeatureDataset ds = gen_gaussian_clusters(3, 30, 6, 1.0, 0.5, 5);
  const auto [tr, te] = split(ds, 0.2, 5);
  TrainConfig cfg;
  cfg.k = 4;
  cfg.epochs = 5;
  cfg.learning_rate = 1.0;
  cfg.batch_x = 16;
  cfg.batch_y = 20;
  cfg.reg_coeff = 0.5;
  cfg.seed = 21;
  const TrainResult a = train(cfg, tr, te);
  const TrainResult b = train(cfg, tr, te);
  EXPECT_EQ(a.embedding.a, b.embedding.a);
  ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
    EXPECT_EQ(a.trace.records[i].train_loss, b.trace.records[i].train_loss);
    EXPECT_EQ(a.trace.records[i].test_loss, b.trace.records[i].test_loss);
    EXPECT_EQ(a.trace.records[i].norms.norm_op, b.trace.records[i].norms.norm_op);
  }
  cfg.seed = 22;
  EXPECT_FALSE(train(cfg, tr, te).embedding.a == a.embedding.a);
}

TEST(Train, LearnsSeparableTwoClassData) {
  // Two well separated classes in R^5.
  Rng rng(6);
  FeatureRows rows(200, 5);
  std::vector<int> labels;
  for (Index i = 0; i < 200; ++i) {
    const int c = static_cast<int>(i % 2);
    rows.row(i) = 0.1 * test::random_vector(rng, 5).values().transpose();
    rows(i, 0) += c ? 1.0 : -1.0;
    labels.push_back(c);
  }
  const FeatureDataset ds(std::move(rows), labels);
  const auto [tr, te] = split(ds, 0.2, 6);
  TrainConfig cfg;
  cfg.k = 4;
  cfg.nonlinearity = Nonlinearity::identity();
  cfg.epochs = 50;
  cfg.learning_rate = 0.05;
  cfg.batch_x = cfg.batch_y = 32;
  cfg.seed = 3;
  const TrainResult r = train(cfg, tr, te);

  // Baseline: the zero matrix under the same evaluation pairs.
  std::vector<LabeledPair> pairs;
  for (const IndexPair& q : r.train_eval_pairs) pairs.push_back({tr.feature(q.first), tr.feature(q.second), q.y});
  const double baseline = empirical_risk({Matrix(5, 4), cfg.nonlinearity}, PairDataset(pairs, tr.b()), cfg.loss);
  EXPECT_LT(r.trace.records.back().train_loss, 0.2 * baseline);
}

TEST(Train, RegularizerAloneShrinksMaxColumnNorm) {
  // Every pair is (x, x) with y = 1, so only the regularizer moves A.
  FeatureRows rows(1, 3);
  rows << 1, 0, 0;
  const FeatureDataset ds(rows, {0});
  TrainConfig cfg;
  cfg.k = 3;
  cfg.epochs = 40;
  cfg.learning_rate = 0.5;
  cfg.batch_x = cfg.batch_y = 1;
  cfg.reg_coeff = 1.0;
  cfg.seed = 2;
  const TrainResult r = train(cfg, ds, ds);
  for (std::size_t i = 1; i < r.trace.records.size(); ++i)
    EXPECT_LE(r.trace.records[i].norms.norm_2_inf, r.trace.records[i - 1].norms.norm_2_inf);
  EXPECT_LT(r.trace.records.back().norms.norm_2_inf, r.trace.records.front().norms.norm_2_inf);
}

TEST(Train, DivergenceIsReported) {
  // One class: each step multiplies A by (I - c M) with M the mean of
  // (x - x')(x - x')^t, which blows up geometrically for a huge step.
  const FeatureDataset ds = gen_gaussian_clusters(1, 20, 4, 1.0, 1.0, 1);
  TrainConfig cfg;
  cfg.k = 2;
  cfg.nonlinearity = Nonlinearity::identity();
  cfg.epochs = 200;
  cfg.learning_rate = 1e3;
  cfg.batch_x = cfg.batch_y = 20;
  try {
    train(cfg, ds, ds);
    FAIL() << "expected divergence";
  } catch (const NumericalDivergence& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Train, TraceCsvHeader) {
  TrainTrace t;
  t.records.push_back({0, 0.5, 0.25, {}, 0.0});
  std::ostringstream os;
  write_trace_csv(os, t);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "epoch,train_loss,test_loss,norm_2_1,norm_2_inf,norm_op,norm_fro,seconds");
}

TEST(Train, RejectsInvalidConfig) {
  const FeatureDataset ds = gen_gaussian_clusters(2, 5, 3, 1.0, 0.1, 1);
  TrainConfig cfg;
  cfg.k = 0;
  EXPECT_THROW(train(cfg, ds, ds), InvalidArgument);
  cfg = TrainConfig{};
  cfg.reg_coeff = -1;
  EXPECT_THROW(train(cfg, ds, ds), InvalidArgument);
  const FeatureDataset other = gen_gaussian_clusters(2, 5, 4, 1.0, 0.1, 1);
  EXPECT_THROW(train(TrainConfig{}, ds, other), DimensionMismatch);
}

}  // namespace
}  // namespace dfml
