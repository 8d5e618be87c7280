#pragma once

// Dataset ingestion (MNIST IDX), synthetic generators, splitting and pair
// sampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dfml/dataset.hpp"
#include "dfml/error.hpp"
#include "dfml/random.hpp"

namespace dfml {

// ---------------------------------------------------------------------------
// IDX
//
// Big-endian 32-bit header words. Images: magic 0x00000803, count, rows,
// cols, then count*rows*cols unsigned bytes. Labels: magic 0x00000801,
// count, then count unsigned bytes.

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw TruncatedFile(path + ": header ends early");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

inline void write_be32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  os.write(b.data(), 4);
}

inline std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

}  // namespace detail

struct IdxImages {
  std::uint32_t count = 0, rows = 0, cols = 0;
  std::vector<unsigned char> pixels;  // count * rows * cols
};

inline IdxImages read_idx_images(const std::string& path, std::optional<std::uint32_t> limit = std::nullopt) {
  std::ifstream in = detail::open_binary(path);
  const std::uint32_t magic = detail::read_be32(in, path);
  if (magic != kIdxImagesMagic) throw BadMagic(path + ": expected 2051, found " + std::to_string(magic));
  IdxImages img;
  img.count = detail::read_be32(in, path);
  img.rows = detail::read_be32(in, path);
  img.cols = detail::read_be32(in, path);
  const std::uint32_t keep = limit ? std::min(*limit, img.count) : img.count;
  const std::size_t bytes = std::size_t{keep} * img.rows * img.cols;
  img.pixels.resize(bytes);
  if (!in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(bytes)))
    throw TruncatedFile(path + ": fewer pixels than the header declares");
  if (!limit) {
    char extra;
    if (in.read(&extra, 1)) throw ParseError(path + ": trailing bytes after image data");
  }
  img.count = keep;
  return img;
}

inline std::vector<unsigned char> read_idx_labels(const std::string& path,
                                                  std::optional<std::uint32_t> limit = std::nullopt) {
  std::ifstream in = detail::open_binary(path);
  const std::uint32_t magic = detail::read_be32(in, path);
  if (magic != kIdxLabelsMagic) throw BadMagic(path + ": expected 2049, found " + std::to_string(magic));
  const std::uint32_t count = detail::read_be32(in, path);
  const std::uint32_t keep = limit ? std::min(*limit, count) : count;
  std::vector<unsigned char> labels(keep);
  if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(keep)))
    throw TruncatedFile(path + ": fewer labels than the header declares");
  return labels;
}

/// Loads an IDX image/label pair, flattening images row-major and scaling
/// pixels to [0, 1]. `limit` keeps the first `limit` items in file order.
inline FeatureDataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                                     std::optional<std::uint32_t> limit = std::nullopt) {
  // Compare full header counts before truncating.
  {
    std::ifstream a = detail::open_binary(images_path);
    std::ifstream b = detail::open_binary(labels_path);
    const std::uint32_t ma = detail::read_be32(a, images_path);
    if (ma != kIdxImagesMagic) throw BadMagic(images_path + ": expected 2051, found " + std::to_string(ma));
    const std::uint32_t mb = detail::read_be32(b, labels_path);
    if (mb != kIdxLabelsMagic) throw BadMagic(labels_path + ": expected 2049, found " + std::to_string(mb));
    const std::uint32_t ca = detail::read_be32(a, images_path);
    const std::uint32_t cb = detail::read_be32(b, labels_path);
    if (ca != cb)
      throw CountMismatch(std::to_string(ca) + " images but " + std::to_string(cb) + " labels");
  }
  const IdxImages img = read_idx_images(images_path, limit);
  const std::vector<unsigned char> lab = read_idx_labels(labels_path, limit);
  const Index d = static_cast<Index>(img.rows) * img.cols;
  if (img.count == 0) throw EmptyDataset(images_path + ": no images");
  FeatureRows rows(static_cast<Index>(img.count), d);
  for (Index i = 0; i < rows.rows(); ++i)
    for (Index j = 0; j < d; ++j) rows(i, j) = img.pixels[static_cast<std::size_t>(i * d + j)] / 255.0;
  std::vector<int> labels(lab.begin(), lab.end());
  return FeatureDataset(std::move(rows), std::move(labels));
}

/// Writes a dataset whose features lie in [0, 1] as IDX, quantizing to
/// round(255 x). Image shape is rows x cols with rows * cols == d.
inline void write_idx(const std::string& images_path, const std::string& labels_path, const FeatureDataset& ds,
                      std::uint32_t rows, std::uint32_t cols) {
  if (static_cast<Index>(rows) * cols != ds.dim()) throw DimensionMismatch("image shape does not match feature dimension");
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img) throw IoError("cannot write '" + images_path + "'");
  if (!lab) throw IoError("cannot write '" + labels_path + "'");
  const auto n = static_cast<std::uint32_t>(ds.size());
  detail::write_be32(img, kIdxImagesMagic);
  detail::write_be32(img, n);
  detail::write_be32(img, rows);
  detail::write_be32(img, cols);
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index j = 0; j < ds.dim(); ++j) {
      const double v = std::clamp(ds.features()(i, j), 0.0, 1.0);
      img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  detail::write_be32(lab, kIdxLabelsMagic);
  detail::write_be32(lab, n);
  for (int l : ds.labels()) {
    if (l > 255) throw InvalidArgument("IDX labels must fit in a byte");
    lab.put(static_cast<char>(static_cast<unsigned char>(l)));
  }
  if (!img || !lab) throw IoError("write failed for '" + images_path + "'");
}

// ---------------------------------------------------------------------------
// Synthetic generators

/// Class centers with N(0, (center_scale^2)/d) entries; points are center
/// plus N(0, (noise_scale^2)/d) noise. Rows are grouped by class.
inline FeatureDataset gen_gaussian_clusters(int num_classes, int per_class, Index d, double center_scale,
                                            double noise_scale, std::uint64_t seed) {
  require(num_classes > 0 && per_class > 0 && d > 0, "cluster generator sizes must be positive");
  require(center_scale >= 0.0 && noise_scale >= 0.0, "cluster scales must be nonnegative");
  Rng rng = make_rng(seed, {0x6761});
  std::normal_distribution<double> unit;
  const double cs = center_scale / std::sqrt(static_cast<double>(d));
  const double ns = noise_scale / std::sqrt(static_cast<double>(d));
  Eigen::MatrixXd centers(num_classes, d);
  for (Index c = 0; c < num_classes; ++c)
    for (Index j = 0; j < d; ++j) centers(c, j) = cs * unit(rng);
  FeatureRows rows(static_cast<Index>(num_classes) * per_class, d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(rows.rows()));
  Index r = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int p = 0; p < per_class; ++p, ++r) {
      for (Index j = 0; j < d; ++j) rows(r, j) = centers(c, j) + ns * unit(rng);
      labels.push_back(c);
    }
  }
  return FeatureDataset(std::move(rows), std::move(labels));
}

/// Sparse nonnegative unit-norm vectors in high dimension. Every class owns
/// a disjoint block of d / num_classes coordinates; a point puts
/// ceil(nnz/2) of its nonzeros in its class block and the rest anywhere.
/// Nonzero magnitudes are uniform in [0.5, 1.5] before normalization, so b = 1.
inline FeatureDataset gen_sparse_highdim(int num_classes, int per_class, Index d, Index nnz_per_point,
                                         std::uint64_t seed) {
  require(num_classes > 0 && per_class > 0 && d > 0, "sparse generator sizes must be positive");
  require(nnz_per_point >= 1 && nnz_per_point <= d, "nnz_per_point must lie in [1, d]");
  const Index block = std::max<Index>(1, d / num_classes);
  require(static_cast<Index>(num_classes) * block <= d, "too many classes for the dimension");
  Rng rng = make_rng(seed, {0x7370});
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  FeatureRows rows = FeatureRows::Zero(static_cast<Index>(num_classes) * per_class, d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(rows.rows()));
  std::vector<Index> block_idx(static_cast<std::size_t>(block));
  Index r = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int p = 0; p < per_class; ++p, ++r) {
      const Index in_class = std::min<Index>(block, (nnz_per_point + 1) / 2);
      std::iota(block_idx.begin(), block_idx.end(), static_cast<Index>(c) * block);
      // Partial Fisher-Yates: first in_class entries are a uniform sample.
      for (Index t = 0; t < in_class; ++t) {
        std::uniform_int_distribution<Index> pick(t, block - 1);
        std::swap(block_idx[static_cast<std::size_t>(t)], block_idx[static_cast<std::size_t>(pick(rng))]);
        rows(r, block_idx[static_cast<std::size_t>(t)]) = magnitude(rng);
      }
      Index placed = in_class;
      std::uniform_int_distribution<Index> any(0, d - 1);
      while (placed < nnz_per_point) {
        const Index j = any(rng);
        if (rows(r, j) != 0.0) continue;
        rows(r, j) = magnitude(rng);
        ++placed;
      }
      rows.row(r) /= rows.row(r).norm();
      labels.push_back(c);
    }
  }
  return FeatureDataset(std::move(rows), std::move(labels));
}

// ---------------------------------------------------------------------------
// Splitting and pairs

/// Random partition into (train, test); round(n * test_fraction) rows go to
/// test, clamped so both parts are nonempty. Both parts keep the parent b.
inline std::pair<FeatureDataset, FeatureDataset> split(const FeatureDataset& ds, double test_fraction,
                                                       std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, "test fraction must lie in (0, 1)");
  const Index n = ds.size();
  if (n < 2) throw TooFewFeatures("split needs at least two rows");
  Index n_test = static_cast<Index>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<Index>(n_test, 1, n - 1);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = make_rng(seed, {0x73706c});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Index> test(perm.begin(), perm.begin() + n_test);
  std::vector<Index> train(perm.begin() + n_test, perm.end());
  return {ds.subset(train), ds.subset(test)};
}

/// Independent uniform index pairs (with replacement); y = 1 iff labels agree.
inline std::vector<IndexPair> sample_index_pairs(const FeatureDataset& ds, Index num_pairs, Rng& rng) {
  require(num_pairs >= 1, "need at least one pair");
  std::uniform_int_distribution<Index> pick(0, ds.size() - 1);
  std::vector<IndexPair> out;
  out.reserve(static_cast<std::size_t>(num_pairs));
  for (Index t = 0; t < num_pairs; ++t) {
    const Index i = pick(rng);
    const Index j = pick(rng);
    out.push_back({i, j, ds.label(i) == ds.label(j) ? 1 : 0});
  }
  return out;
}

inline PairDataset make_pairs(const FeatureDataset& ds, Index num_pairs, std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x70616972});
  std::vector<LabeledPair> pairs;
  for (const IndexPair& p : sample_index_pairs(ds, num_pairs, rng))
    pairs.push_back({ds.feature(p.first), ds.feature(p.second), p.y});
  return PairDataset(std::move(pairs), ds.b());
}

// ---------------------------------------------------------------------------
// CSV: optional '#' comment lines, a header "label,x0,...", then one row per
// feature vector.

inline void write_dataset_csv(std::ostream& os, const FeatureDataset& ds) {
  os << "label";
  for (Index j = 0; j < ds.dim(); ++j) os << ",x" << j;
  os << '\n';
  for (Index i = 0; i < ds.size(); ++i) {
    os << ds.label(i);
    for (Index j = 0; j < ds.dim(); ++j) os << ',' << format_double(ds.features()(i, j));
    os << '\n';
  }
}

inline FeatureDataset read_dataset_csv(std::istream& is) {
  std::string line;
  std::vector<std::vector<double>> values;
  std::vector<int> labels;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("label", 0) == 0) continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        const double l = parse_double(cell);
        if (l < 0 || l != std::floor(l)) throw ParseError("line " + std::to_string(line_no) + ": bad label");
        labels.push_back(static_cast<int>(l));
        first = false;
      } else {
        row.push_back(parse_double(cell));
      }
    }
    if (first || row.empty()) throw ParseError("line " + std::to_string(line_no) + ": no features");
    if (!values.empty() && row.size() != values.front().size())
      throw ParseError("line " + std::to_string(line_no) + ": ragged row");
    values.push_back(std::move(row));
  }
  if (values.empty()) throw EmptyDataset("CSV holds no rows");
  FeatureRows rows(static_cast<Index>(values.size()), static_cast<Index>(values.front().size()));
  for (Index i = 0; i < rows.rows(); ++i)
    for (Index j = 0; j < rows.cols(); ++j) rows(i, j) = values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return FeatureDataset(std::move(rows), std::move(labels));
}

}  // namespace dfml
