#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "support.hpp"

namespace dfml {
namespace {

void put_be32(std::ofstream& os, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) os.put(static_cast<char>((v >> s) & 0xff));
}

// Hand-built IDX pair: `count` images of 28 x 28 whose pixel (i, j) is
// (i * 7 + j) % 256, labels 0, 1, ...
void write_fixture(const std::string& images, const std::string& labels, std::uint32_t count,
                   std::uint32_t image_magic = 2051, std::uint32_t label_count = 0, std::size_t drop_bytes = 0) {
  {
    std::ofstream os(images, std::ios::binary);
    put_be32(os, image_magic);
    put_be32(os, count);
    put_be32(os, 28);
    put_be32(os, 28);
    const std::size_t total = std::size_t{count} * 784 - drop_bytes;
    for (std::size_t p = 0; p < total; ++p) os.put(static_cast<char>((p / 784 * 7 + p % 784) % 256));
  }
  std::ofstream os(labels, std::ios::binary);
  put_be32(os, 2049);
  const std::uint32_t lc = label_count ? label_count : count;
  put_be32(os, lc);
  for (std::uint32_t i = 0; i < lc; ++i) os.put(static_cast<char>(i % 10));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(MnistIdx, LoadsHandBuiltFixture) {
  const std::string dir = test::temp_dir("idx_fixture");
  write_fixture(dir + "/img", dir + "/lab", 2);
  const FeatureDataset ds = load_mnist_idx(dir + "/img", dir + "/lab");
  ASSERT_EQ(ds.size(), 2);
  ASSERT_EQ(ds.dim(), 784);
  EXPECT_EQ(ds.labels(), (std::vector<int>{0, 1}));
  EXPECT_GE(ds.features().minCoeff(), 0.0);
  EXPECT_LE(ds.features().maxCoeff(), 1.0);
  EXPECT_DOUBLE_EQ(ds.features()(0, 3), 3.0 / 255.0);
  EXPECT_DOUBLE_EQ(ds.features()(1, 0), 7.0 / 255.0);
  EXPECT_DOUBLE_EQ(ds.b(), ds.features().rowwise().norm().maxCoeff());
}

TEST(MnistIdx, RejectsMalformedFiles) {
  const std::string dir = test::temp_dir("idx_bad");
  write_fixture(dir + "/img", dir + "/lab", 2, 2050);
  EXPECT_THROW(load_mnist_idx(dir + "/img", dir + "/lab"), BadMagic);

  write_fixture(dir + "/img", dir + "/lab", 3, 2051, 0, 10);
  EXPECT_THROW(load_mnist_idx(dir + "/img", dir + "/lab"), TruncatedFile);

  write_fixture(dir + "/img", dir + "/lab", 3, 2051, 4);
  EXPECT_THROW(load_mnist_idx(dir + "/img", dir + "/lab"), CountMismatch);

  EXPECT_THROW(load_mnist_idx(dir + "/missing", dir + "/lab"), IoError);
  EXPECT_EQ(BadMagic("x").category(), ErrorCategory::Data);
}

TEST(MnistIdx, LimitKeepsLeadingImagesInFileOrder) {
  const std::string dir = test::temp_dir("idx_limit");
  write_fixture(dir + "/img", dir + "/lab", 12);
  const FeatureDataset all = load_mnist_idx(dir + "/img", dir + "/lab");
  const FeatureDataset few = load_mnist_idx(dir + "/img", dir + "/lab", 5);
  ASSERT_EQ(few.size(), 5);
  EXPECT_EQ(few.features(), all.features().topRows(5));
  EXPECT_EQ(few.labels(), (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_EQ(load_mnist_idx(dir + "/img", dir + "/lab", 100).size(), 12);
}

TEST(MnistIdx, ByteRoundTrip) {
  const std::string dir = test::temp_dir("idx_round");
  write_fixture(dir + "/img", dir + "/lab", 4);
  const FeatureDataset ds = load_mnist_idx(dir + "/img", dir + "/lab");
  write_idx(dir + "/img2", dir + "/lab2", ds, 28, 28);
  EXPECT_EQ(slurp(dir + "/img"), slurp(dir + "/img2"));
  EXPECT_EQ(slurp(dir + "/lab"), slurp(dir + "/lab2"));
  EXPECT_THROW(write_idx(dir + "/x", dir + "/y", ds, 28, 27), DimensionMismatch);
}

TEST(GaussianClusters, Deterministic) {
  const FeatureDataset a = gen_gaussian_clusters(3, 7, 5, 1, 0.5, 9);
  const FeatureDataset b = gen_gaussian_clusters(3, 7, 5, 1, 0.5, 9);
  const FeatureDataset c = gen_gaussian_clusters(3, 7, 5, 1, 0.5, 10);
  EXPECT_EQ(a.features(), b.features());
  EXPECT_EQ(a.labels(), b.labels());
  EXPECT_NE(a.features(), c.features());
}

TEST(GaussianClusters, ZeroNoiseCollapsesClasses) {
  const FeatureDataset ds = gen_gaussian_clusters(4, 6, 3, 2, 0, 1);
  for (Index i = 0; i < ds.size(); ++i)
    for (Index j = 0; j < ds.size(); ++j)
      if (ds.label(i) == ds.label(j)) { EXPECT_EQ(ds.features().row(i), ds.features().row(j)); }
}

TEST(GaussianClusters, BalancedHistogram) {
  const FeatureDataset ds = gen_gaussian_clusters(10, 100, 4, 1, 1, 2);
  ASSERT_EQ(ds.size(), 1000);
  std::map<int, int> hist;
  for (int l : ds.labels()) ++hist[l];
  ASSERT_EQ(hist.size(), 10u);
  for (const auto& [label, count] : hist) EXPECT_EQ(count, 100) << label;
  EXPECT_DOUBLE_EQ(ds.b(), ds.features().rowwise().norm().maxCoeff());
}

TEST(SparseHighdim, UnitNormRowsWithRequestedSupport) {
  const FeatureDataset ds = gen_sparse_highdim(5, 20, 300, 12, 3);
  EXPECT_NEAR(ds.b(), 1.0, 1e-12);
  for (Index i = 0; i < ds.size(); ++i) {
    EXPECT_NEAR(ds.features().row(i).norm(), 1.0, 1e-12);
    EXPECT_EQ((ds.features().row(i).array() != 0.0).count(), 12);
    EXPECT_GE(ds.features().row(i).minCoeff(), 0.0);
  }
}

TEST(SparseHighdim, SingleNonzeroIsOneHot) {
  const FeatureDataset ds = gen_sparse_highdim(4, 10, 40, 1, 4);
  for (Index i = 0; i < ds.size(); ++i) {
    EXPECT_EQ((ds.features().row(i).array() != 0.0).count(), 1);
    EXPECT_DOUBLE_EQ(ds.features().row(i).maxCoeff(), 1.0);
    // The lone coordinate sits in the class block.
    Index j;
    ds.features().row(i).maxCoeff(&j);
    EXPECT_EQ(j / 10, ds.label(i));
  }
  EXPECT_THROW(gen_sparse_highdim(2, 2, 5, 6, 1), InvalidArgument);
}

// d > n: an unregularized linear map memorizes the training pairs.
TEST(SparseHighdim, LinearModelOverfitsWhenDimensionExceedsSampleSize) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const FeatureDataset ds = gen_sparse_highdim(10, 50, 2000, 20, s);
    const auto [train_ds, test_ds] = split(ds, 0.2, s);
    TrainConfig cfg;
    cfg.k = 1;
    cfg.nonlinearity = Nonlinearity::identity();
    cfg.learning_rate = 50;
    cfg.init_scale = 45;
    cfg.epochs = 200;
    cfg.reg_coeff = 0;
    cfg.seed = s;
    const EpochRecord last = train(cfg, train_ds, test_ds).trace.records.back();
    EXPECT_LT(last.train_loss, 0.2 * last.test_loss) << "seed " << s;
  }
}

TEST(Split, SizesAndPartition) {
  const FeatureDataset ds = gen_gaussian_clusters(5, 20, 3, 1, 1, 5);
  const auto [train_ds, test_ds] = split(ds, 0.2, 77);
  EXPECT_EQ(train_ds.size(), 80);
  EXPECT_EQ(test_ds.size(), 20);
  EXPECT_EQ(train_ds.b(), ds.b());
  EXPECT_EQ(test_ds.b(), ds.b());

  // Union equals the original multiset of (label, row).
  auto key = [](const FeatureDataset& d, Index i) {
    std::vector<double> v{static_cast<double>(d.label(i))};
    for (Index j = 0; j < d.dim(); ++j) v.push_back(d.features()(i, j));
    return v;
  };
  std::vector<std::vector<double>> orig, joined;
  for (Index i = 0; i < ds.size(); ++i) orig.push_back(key(ds, i));
  for (Index i = 0; i < train_ds.size(); ++i) joined.push_back(key(train_ds, i));
  for (Index i = 0; i < test_ds.size(); ++i) joined.push_back(key(test_ds, i));
  std::sort(orig.begin(), orig.end());
  std::sort(joined.begin(), joined.end());
  EXPECT_EQ(orig, joined);

  const auto [again_train, again_test] = split(ds, 0.2, 77);
  EXPECT_EQ(again_test.features(), test_ds.features());
  EXPECT_EQ(again_train.labels(), train_ds.labels());

  EXPECT_THROW(split(ds, 0.0, 1), InvalidArgument);
  EXPECT_THROW(split(ds.subset({0}), 0.5, 1), TooFewFeatures);
}

TEST(MakePairs, SameClassFractionNearOneTenth) {
  const FeatureDataset ds = gen_gaussian_clusters(10, 50, 2, 1, 1, 6);
  const PairDataset pairs = make_pairs(ds, 100'000, 8);
  ASSERT_EQ(pairs.size(), 100'000);
  double same = 0;
  for (const LabeledPair& p : pairs.pairs()) same += p.y;
  EXPECT_NEAR(same / 100'000.0, 0.1, 0.01);
  EXPECT_EQ(pairs.b(), ds.b());
}

TEST(MakePairs, SingleAndDeterministic) {
  const FeatureDataset ds = gen_gaussian_clusters(3, 4, 2, 1, 1, 7);
  EXPECT_EQ(make_pairs(ds, 1, 3).size(), 1);
  const PairDataset a = make_pairs(ds, 50, 3), b = make_pairs(ds, 50, 3);
  for (Index i = 0; i < 50; ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].x_prime, b[i].x_prime);
    EXPECT_EQ(a[i].y, b[i].y);
  }
  EXPECT_THROW(make_pairs(ds, 0, 3), InvalidArgument);
}

TEST(DatasetCsv, RoundTripIsExact) {
  const FeatureDataset ds = gen_gaussian_clusters(3, 5, 4, 1, 0.3, 8);
  std::stringstream ss;
  ss << "# comment\n";
  write_dataset_csv(ss, ds);
  const FeatureDataset back = read_dataset_csv(ss);
  EXPECT_EQ(back.features(), ds.features());
  EXPECT_EQ(back.labels(), ds.labels());
}

TEST(DatasetCsv, ParseErrors) {
  for (const char* bad : {"label,x0\n1,2\n3,4,5\n", "label,x0\n-1,2\n", "label,x0\n1.5,2\n", "label,x0\n1,abc\n",
                          "label,x0\n1\n"}) {
    std::istringstream is(bad);
    EXPECT_THROW(read_dataset_csv(is), ParseError) << bad;
  }
  std::istringstream empty("label,x0\n");
  EXPECT_THROW(read_dataset_csv(empty), EmptyDataset);
}

TEST(FeatureDataset, Validation) {
  EXPECT_THROW(FeatureDataset(FeatureRows::Zero(2, 2), {0}), CountMismatch);
  EXPECT_THROW(FeatureDataset(FeatureRows::Ones(1, 2), {0}, 1.0), InvalidArgument);
  EXPECT_NO_THROW(FeatureDataset(FeatureRows::Ones(1, 2), {0}, 2.0));
}

}  // namespace
}  // namespace dfml
