#pragma once

// Reading TrainConfig and dataset descriptions out of a KeyValueConfig.

#include <optional>
#include <string>
#include <utility>

#include "dfml/config.hpp"
#include "dfml/data.hpp"
#include "dfml/trainer.hpp"

namespace dfml {

inline TrainConfig read_train_config(const KeyValueConfig& kv) {
  TrainConfig cfg;
  cfg.k = kv.get_int("k", cfg.k);
  cfg.nonlinearity = Nonlinearity::from_name(kv.get_string("nonlinearity", cfg.nonlinearity.name()));
  cfg.learning_rate = kv.get_double("learning_rate", cfg.learning_rate);
  cfg.epochs = static_cast<int>(kv.get_int("epochs", cfg.epochs));
  cfg.batch_x = kv.get_int("batch_x", cfg.batch_x);
  cfg.batch_y = kv.get_int("batch_y", cfg.batch_y);
  cfg.reg_coeff = kv.get_double("reg_coeff", cfg.reg_coeff);
  const std::string loss = kv.get_string("loss", "weighted");
  if (loss != "weighted")
    throw InvalidArgument("training supports loss=weighted only (the margin loss has no usable gradient)");
  cfg.loss.d = kv.get_double("D", cfg.loss.d);
  cfg.loss.same_class_weight = kv.get_double("same_class_weight", cfg.loss.same_class_weight);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.init_scale = kv.get_double("init_scale", cfg.init_scale);
  cfg.eval_pairs = kv.get_int("eval_pairs", cfg.eval_pairs);
  cfg.scale_lr_by_k = kv.get_bool("scale_lr_by_k", cfg.scale_lr_by_k);
  cfg.validate();
  return cfg;
}

struct DatasetSpec {
  std::string kind = "gaussian";  // gaussian | sparse | mnist | csv
  int classes = 10;
  int per_class = 100;
  Index d = 32;
  double center_scale = 1.0;
  double noise_scale = 0.5;
  Index nnz = 10;
  std::string mnist_images;
  std::string mnist_labels;
  std::optional<std::uint32_t> limit;
  std::string csv_path;
  double test_fraction = 0.2;
  std::uint64_t data_seed = 1;

  void validate() const {
    require(kind == "gaussian" || kind == "sparse" || kind == "mnist" || kind == "csv",
            "dataset must be one of gaussian, sparse, mnist, csv");
    require(classes >= 1 && per_class >= 1, "classes and per_class must be positive");
    require(d >= 1, "d must be positive");
    require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie in (0, 1)");
  }
};

inline DatasetSpec read_dataset_spec(const KeyValueConfig& kv) {
  DatasetSpec s;
  s.kind = kv.get_string("dataset", s.kind);
  s.classes = static_cast<int>(kv.get_int("classes", s.classes));
  s.per_class = static_cast<int>(kv.get_int("per_class", s.per_class));
  s.d = kv.get_int("d", s.d);
  s.center_scale = kv.get_double("center_scale", s.center_scale);
  s.noise_scale = kv.get_double("noise_scale", s.noise_scale);
  s.nnz = kv.get_int("nnz", s.nnz);
  s.mnist_images = kv.get_string("mnist_images", s.mnist_images);
  s.mnist_labels = kv.get_string("mnist_labels", s.mnist_labels);
  if (kv.has("limit")) s.limit = static_cast<std::uint32_t>(kv.get_u64("limit", 0));
  s.csv_path = kv.get_string("csv_path", s.csv_path);
  s.test_fraction = kv.get_double("test_fraction", s.test_fraction);
  s.data_seed = kv.get_u64("data_seed", s.data_seed);
  s.validate();
  return s;
}

inline FeatureDataset load_dataset(const DatasetSpec& s) {
  s.validate();
  if (s.kind == "gaussian")
    return gen_gaussian_clusters(s.classes, s.per_class, s.d, s.center_scale, s.noise_scale, s.data_seed);
  if (s.kind == "sparse") return gen_sparse_highdim(s.classes, s.per_class, s.d, s.nnz, s.data_seed);
  if (s.kind == "mnist") {
    if (s.mnist_images.empty() || s.mnist_labels.empty())
      throw InvalidArgument("dataset=mnist needs mnist_images and mnist_labels");
    return load_mnist_idx(s.mnist_images, s.mnist_labels, s.limit);
  }
  if (s.csv_path.empty()) throw InvalidArgument("dataset=csv needs csv_path");
  std::ifstream in(s.csv_path);
  if (!in) throw IoError("cannot open '" + s.csv_path + "'");
  return read_dataset_csv(in);
}

/// Loads the dataset and splits it into (train, test).
inline std::pair<FeatureDataset, FeatureDataset> load_split(const DatasetSpec& s) {
  return split(load_dataset(s), s.test_fraction, s.data_seed);
}

}  // namespace dfml
