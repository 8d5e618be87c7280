// dfml: command-line driver for sweeps, bounds, Rademacher and
// dimension-reduction studies, dataset generation and single training runs.
//
// Every subcommand reads an optional key=value config (--config) and accepts
// --set key=value overrides; dedicated flags are shorthands for keys and win
// over both. Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "dfml/dfml.hpp"

namespace {

using namespace dfml;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage:
      return kExitUsage;
    case ErrorCategory::Data:
      return kExitData;
    case ErrorCategory::Numerical:
      return kExitNumerical;
  }
  return kExitData;
}

/// Collects --config, --set and per-key flags for one subcommand.
class KeyedCommand {
 public:
  KeyedCommand(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)) {
    app_->add_option("--config", config_path_, "key=value config file");
    app_->add_option("--set", overrides_, "override a config key (key=value); repeatable");
  }

  KeyedCommand& key(const std::string& flag, const std::string& key, const std::string& help) {
    flags_.emplace_back(key, std::make_unique<std::string>());
    app_->add_option(flag, *flags_.back().second, help + " [" + key + "]");
    flag_names_.emplace_back(flag);
    return *this;
  }

  KeyedCommand& switch_key(const std::string& flag, const std::string& key, const std::string& help) {
    switches_.emplace_back(key, std::make_unique<bool>(false));
    app_->add_flag(flag, *switches_.back().second, help + " [" + key + "=true]");
    return *this;
  }

  CLI::App* app() const { return app_; }

  KeyValueConfig build() const {
    KeyValueConfig kv = config_path_.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path_);
    for (const std::string& o : overrides_) {
      const auto eq = o.find('=');
      if (eq == std::string::npos || eq == 0) throw InvalidArgument("--set expects key=value, got '" + o + "'");
      kv.set(o.substr(0, eq), o.substr(eq + 1));
    }
    for (std::size_t i = 0; i < flags_.size(); ++i)
      if (app_->count(flag_names_[i]) > 0) kv.set(flags_[i].first, *flags_[i].second);
    for (const auto& [k, v] : switches_)
      if (*v) kv.set(k, "true");
    return kv;
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::vector<std::string> overrides_;
  std::vector<std::pair<std::string, std::unique_ptr<std::string>>> flags_;
  std::vector<std::string> flag_names_;
  std::vector<std::pair<std::string, std::unique_ptr<bool>>> switches_;
};

void add_dataset_flags(KeyedCommand& c) {
  c.key("--dataset", "dataset", "gaussian | sparse | mnist | csv")
      .key("--classes", "classes", "number of classes")
      .key("--per-class", "per_class", "points per class")
      .key("--d", "d", "feature dimension")
      .key("--nnz", "nnz", "nonzeros per point (sparse)")
      .key("--data-seed", "data_seed", "dataset and split seed")
      .key("--test-fraction", "test_fraction", "held-out fraction")
      .key("--csv-path", "csv_path", "dataset CSV (dataset=csv)")
      .key("--mnist-images", "mnist_images", "IDX image file")
      .key("--mnist-labels", "mnist_labels", "IDX label file")
      .key("--limit", "limit", "keep only the first N MNIST images");
}

/// Opens `path` for writing, or returns std::cout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw IoError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::string hash_without(KeyValueConfig kv, std::initializer_list<const char*> keys) {
  for (const char* k : keys) kv.erase(k);
  return kv.hash_hex();
}

// ---------------------------------------------------------------------------

int run_sweep_cmd(const KeyValueConfig& kv) {
  if (kv.has("seed")) throw InvalidArgument("sweeps derive per-row seeds; set master_seed instead of seed");
  SweepConfig sc;
  sc.base = read_train_config(kv);
  std::vector<Index> ks;
  for (long long k : kv.get_int_list("k_values", {1, 2, 5, 10, 20, 50, 100, 200})) ks.push_back(k);
  sc.k_values = ks;
  sc.repetitions = static_cast<int>(kv.get_int("repetitions", 6));
  sc.master_seed = kv.get_u64("master_seed", 0);
  sc.jobs = static_cast<int>(kv.get_int("jobs", 1));
  sc.log_factor = kv.get_bool("log_factor", false);
  sc.absolute_constant = kv.get_double("absolute_constant", 1.0);
  if (kv.has("phi_lip")) sc.phi_lip = kv.get_double("phi_lip", 1.0);
  const std::string out_dir = kv.get_string("output_dir", "sweep_out");
  const DatasetSpec spec = read_dataset_spec(kv);
  kv.check_all_used();
  sc.validate();

  const auto [train_ds, test_ds] = load_split(spec);
  const SweepResult res = run_sweep(sc, train_ds, test_ds);

  std::filesystem::create_directories(out_dir);
  const std::string hash = hash_without(kv, {"jobs", "output_dir"});
  {
    Output rows(out_dir + "/sweep_rows.csv");
    write_sweep_rows_csv(rows.stream(), res.rows, hash);
  }
  {
    Output agg(out_dir + "/sweep_aggregate.csv");
    write_sweep_aggregate_csv(agg.stream(), res.aggregate, hash);
  }
  for (const SweepRow& r : res.rows)
    if (!r.ok()) std::cerr << "row k=" << r.k << " rep=" << r.repetition << " failed: " << r.message << '\n';
  std::cerr << "wrote " << out_dir << "/sweep_rows.csv and " << out_dir << "/sweep_aggregate.csv\n";
  if (!res.any_failed()) return 0;
  for (const SweepRow& r : res.rows)
    if (r.status == "numerical_error") return kExitNumerical;
  for (const SweepRow& r : res.rows)
    if (r.status == "data_error") return kExitData;
  return kExitUsage;
}

int run_train_cmd(const KeyValueConfig& kv) {
  const TrainConfig tc = read_train_config(kv);
  const DatasetSpec spec = read_dataset_spec(kv);
  const std::string trace_out = kv.get_string("trace_out", "");
  const std::string matrix_out = kv.get_string("matrix_out", "");
  kv.check_all_used();

  const auto [train_ds, test_ds] = load_split(spec);
  const TrainResult res = train(tc, train_ds, test_ds);
  Output trace(trace_out);
  write_config_hash_line(trace.stream(), hash_without(kv, {"trace_out", "matrix_out"}));
  write_trace_csv(trace.stream(), res.trace);
  if (!matrix_out.empty()) {
    Output m(matrix_out);
    write_matrix(m.stream(), res.embedding.a);
  }
  return 0;
}

int run_bounds_cmd(const KeyValueConfig& kv) {
  const std::string path = kv.get_string("matrix", "");
  if (path.empty()) throw InvalidArgument("bounds needs --matrix");
  BoundContext ctx;
  ctx.b = kv.get_double("b", 1.0);
  ctx.n = kv.get_int("n", 1);
  const Nonlinearity phi = Nonlinearity::from_name(kv.get_string("nonlinearity", "identity"));
  ctx.phi_lip = kv.get_double("phi_lip", phi.lipschitz_constant());
  ctx.log_factor_enabled = kv.get_bool("log_factor", false);
  ctx.absolute_constant = kv.get_double("absolute_constant", 1.0);
  const std::string out = kv.get_string("out", "");
  kv.check_all_used();
  ctx.validate();

  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file '" + path + "'");
  const Matrix a = read_matrix(in);
  const BoundReport rep = evaluate_bounds(a, ctx);
  Output o(out);
  write_config_hash_line(o.stream(), hash_without(kv, {"out"}));
  o.stream() << kBoundCsvHeader << '\n';
  write_bound_row(o.stream(), rep);
  return 0;
}

PairDataset read_pairs(const KeyValueConfig& kv, std::uint64_t seed) {
  const Index num_pairs = kv.get_int("pairs", 40);
  const DatasetSpec spec = read_dataset_spec(kv);
  return make_pairs(load_dataset(spec), num_pairs, derive_seed(seed, {0x7061}));
}

int run_rademacher_cmd(const KeyValueConfig& kv) {
  const std::string kind = kv.get_string("constraint", "amplification");
  const double a = kv.get_double("a", 1.0);
  const Index k = kv.get_int("k", 1);
  const Nonlinearity phi = Nonlinearity::from_name(kv.get_string("nonlinearity", "sigmoid"));
  RademacherOptions opts;
  opts.num_sign_draws = kv.get_int("draws", opts.num_sign_draws);
  opts.restarts = static_cast<int>(kv.get_int("restarts", opts.restarts));
  opts.inner_steps = static_cast<int>(kv.get_int("inner_steps", opts.inner_steps));
  opts.step_size = kv.get_double("step_size", opts.step_size);
  opts.seed = kv.get_u64("seed", 0);
  const bool oracle = kv.get_bool("oracle", false);
  const int grid = static_cast<int>(kv.get_int("grid", 41));
  const double a_prime = kv.get_double("a_prime", 1.0);
  const std::string out = kv.get_string("out", "");
  const PairDataset pairs = read_pairs(kv, opts.seed);
  kv.check_all_used();

  ConstraintSet cs;
  if (kind == "amplification")
    cs = ConstraintSet::bounded_amplification(a, pairs.dim(), k);
  else if (kind == "sparse")
    cs = ConstraintSet::sparse_pair(a, a_prime, pairs.dim(), k);
  else
    throw InvalidArgument("constraint must be amplification or sparse");

  const RademacherEstimate est = estimate_rademacher(cs, pairs, phi, opts);
  Output o(out);
  write_config_hash_line(o.stream(), hash_without(kv, {"out"}));
  o.stream() << kRademacherCsvHeader << (oracle ? ",brute_force" : "") << '\n';
  o.stream() << k << ',' << format_double(a) << ',' << pairs.size() << ',' << format_double(est.mean) << ','
             << format_double(est.std_error) << ',' << est.num_sign_draws << ',' << est.restarts_per_draw;
  if (oracle) o.stream() << ',' << format_double(brute_force_rademacher(cs, pairs, phi, grid));
  o.stream() << '\n';
  return 0;
}

int run_dimred_cmd(const KeyValueConfig& kv) {
  const std::uint64_t seed = kv.get_u64("seed", 0);
  const Nonlinearity phi = Nonlinearity::from_name(kv.get_string("nonlinearity", "sigmoid"));
  const std::string matrix_path = kv.get_string("matrix", "");
  const Index k = kv.get_int("k", 256);
  const double a = kv.get_double("a", 1.0);
  const std::vector<long long> ls = kv.get_int_list("l", {4, 16, 64});
  const Index projections = kv.get_int("projections", 200);
  const bool include_identity = kv.get_bool("include_identity", false);
  const std::string out = kv.get_string("out", "");
  const PairDataset pairs = read_pairs(kv, seed);
  kv.check_all_used();

  Matrix m = Matrix::identity(1);
  if (!matrix_path.empty()) {
    std::ifstream in(matrix_path);
    if (!in) throw IoError("cannot open matrix file '" + matrix_path + "'");
    m = read_matrix(in);
  } else {
    Rng rng = make_rng(seed, {0x6d6174});
    m = random_boundary_matrix(pairs.dim(), k, a, rng);
  }
  const EmbeddingMatrix e{m, phi};

  Output o(out);
  write_config_hash_line(o.stream(), hash_without(kv, {"out"}));
  o.stream() << kDimReductionCsvHeader << '\n';
  for (long long l : ls) {
    const DimReductionReport r = verify_dimension_reduction(e, pairs, l, projections, derive_seed(seed, {0x6472, static_cast<std::uint64_t>(l)}), include_identity);
    o.stream() << r.k << ',' << format_double(r.a) << ',' << r.n << ',' << r.l << ',' << format_double(r.t0) << ','
               << format_double(r.min_error) << ',' << format_double(r.mean_error) << ','
               << format_double(r.fraction_exceeding) << ',' << format_double(r.bernstein_rhs) << '\n';
  }
  return 0;
}

int run_datagen_cmd(const KeyValueConfig& kv) {
  const DatasetSpec spec = read_dataset_spec(kv);
  if (spec.kind != "gaussian" && spec.kind != "sparse") throw InvalidArgument("datagen supports gaussian and sparse");
  const std::string csv_out = kv.get_string("csv_out", "");
  const std::string idx_images = kv.get_string("idx_images", "");
  const std::string idx_labels = kv.get_string("idx_labels", "");
  const Index idx_rows = kv.get_int("idx_rows", 1);
  kv.check_all_used();
  if (csv_out.empty() && idx_images.empty()) throw InvalidArgument("datagen needs --csv-out or --idx-images");
  if (idx_images.empty() != idx_labels.empty()) throw InvalidArgument("--idx-images and --idx-labels go together");

  const FeatureDataset ds = load_dataset(spec);
  if (!csv_out.empty()) {
    Output o(csv_out);
    write_config_hash_line(o.stream(), hash_without(kv, {"csv_out", "idx_images", "idx_labels"}));
    write_dataset_csv(o.stream(), ds);
  }
  if (!idx_images.empty()) {
    if (idx_rows < 1 || ds.dim() % idx_rows != 0) throw InvalidArgument("idx_rows must divide d");
    write_idx(idx_images, idx_labels, ds, static_cast<std::uint32_t>(idx_rows),
              static_cast<std::uint32_t>(ds.dim() / idx_rows));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dfml: distance-function metric learning experiments"};
  app.require_subcommand(1);

  KeyedCommand sweep(app, "sweep", "train over a grid of k and write per-row and aggregate CSVs");
  sweep.key("--k-values", "k_values", "comma-separated increasing k grid")
      .key("--repetitions", "repetitions", "runs per k")
      .key("--master-seed", "master_seed", "seed from which row seeds derive")
      .key("--jobs", "jobs", "parallel training runs")
      .key("--out", "output_dir", "output directory")
      .key("--epochs", "epochs", "training epochs")
      .key("--learning-rate", "learning_rate", "SGD step size")
      .key("--reg-coeff", "reg_coeff", "c in (c/d)||A||_{2,inf}^2")
      .key("--nonlinearity", "nonlinearity", "identity | sigmoid | relu")
      .switch_key("--log-factor", "log_factor", "include the log factor in the sparse bound");
  add_dataset_flags(sweep);

  KeyedCommand trainc(app, "train", "single training run; writes the per-epoch trace CSV");
  trainc.key("--k", "k", "embedding dimension")
      .key("--epochs", "epochs", "training epochs")
      .key("--learning-rate", "learning_rate", "SGD step size")
      .key("--reg-coeff", "reg_coeff", "c in (c/d)||A||_{2,inf}^2")
      .key("--nonlinearity", "nonlinearity", "identity | sigmoid | relu")
      .key("--seed", "seed", "training seed")
      .key("--out", "trace_out", "trace CSV path (default stdout)")
      .key("--matrix-out", "matrix_out", "write the learned matrix here");
  add_dataset_flags(trainc);

  KeyedCommand bounds(app, "bounds", "evaluate all bounds for a stored matrix");
  bounds.key("--matrix", "matrix", "matrix text file")
      .key("--b", "b", "feature norm bound")
      .key("--n", "n", "sample count")
      .key("--nonlinearity", "nonlinearity", "identity | sigmoid | relu")
      .key("--phi-lip", "phi_lip", "override the Lipschitz constant")
      .key("--constant", "absolute_constant", "absolute constant C")
      .key("--out", "out", "CSV path (default stdout)")
      .switch_key("--log-factor", "log_factor", "include the log factor in the sparse bound");

  KeyedCommand rad(app, "rademacher", "Monte-Carlo Rademacher estimate over a constraint set");
  rad.key("--constraint", "constraint", "amplification | sparse")
      .key("--a", "a", "radius a")
      .key("--a-prime", "a_prime", "spectral radius (sparse)")
      .key("--k", "k", "embedding dimension")
      .key("--nonlinearity", "nonlinearity", "identity | sigmoid | relu")
      .key("--pairs", "pairs", "number of sampled pairs n")
      .key("--draws", "draws", "sign draws")
      .key("--restarts", "restarts", "ascent restarts per draw")
      .key("--steps", "inner_steps", "ascent steps per restart")
      .key("--seed", "seed", "seed")
      .key("--grid", "grid", "oracle grid resolution")
      .key("--out", "out", "CSV path (default stdout)")
      .switch_key("--oracle", "oracle", "also run the brute-force oracle");
  add_dataset_flags(rad);

  KeyedCommand dimred(app, "dimred", "random coordinate projection study");
  dimred.key("--matrix", "matrix", "matrix file (default: random with column norms a)")
      .key("--k", "k", "columns of the random matrix")
      .key("--a", "a", "column norm of the random matrix")
      .key("--l", "l", "comma-separated projection sizes")
      .key("--projections", "projections", "sampled projections per l")
      .key("--nonlinearity", "nonlinearity", "identity | sigmoid | relu")
      .key("--pairs", "pairs", "number of sampled pairs n")
      .key("--seed", "seed", "seed")
      .key("--out", "out", "CSV path (default stdout)")
      .switch_key("--include-identity", "include_identity", "use the identity ordering as the first projection");
  add_dataset_flags(dimred);

  KeyedCommand datagen(app, "datagen", "write a synthetic dataset as CSV and/or IDX");
  datagen.key("--csv-out", "csv_out", "CSV output path")
      .key("--idx-images", "idx_images", "IDX image output path")
      .key("--idx-labels", "idx_labels", "IDX label output path")
      .key("--idx-rows", "idx_rows", "image rows (cols = d / rows)")
      .key("--center-scale", "center_scale", "class center scale")
      .key("--noise-scale", "noise_scale", "within-class noise scale");
  add_dataset_flags(datagen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (sweep.app()->parsed()) return run_sweep_cmd(sweep.build());
    if (trainc.app()->parsed()) return run_train_cmd(trainc.build());
    if (bounds.app()->parsed()) return run_bounds_cmd(bounds.build());
    if (rad.app()->parsed()) return run_rademacher_cmd(rad.build());
    if (dimred.app()->parsed()) return run_dimred_cmd(dimred.build());
    if (datagen.app()->parsed()) return run_datagen_cmd(datagen.build());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
