#pragma once

// k-sweeps: train one embedding per (k, repetition), measure its norms and
// bounds, then aggregate per k.

#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "dfml/bounds.hpp"
#include "dfml/trainer.hpp"

namespace dfml {

struct SweepConfig {
  std::vector<Index> k_values{1, 2, 5, 10, 20, 50, 100, 200};
  TrainConfig base;  // base.k and base.seed are replaced per row
  int repetitions = 6;
  std::uint64_t master_seed = 0;
  int jobs = 1;
  bool log_factor = false;
  double absolute_constant = 1.0;
  std::optional<double> phi_lip;  // defaults to the nonlinearity's constant

  void validate() const {
    require(!k_values.empty(), "k_values must be nonempty");
    for (std::size_t i = 0; i < k_values.size(); ++i) {
      require(k_values[i] >= 1, "k values must be positive");
      if (i > 0) require(k_values[i] > k_values[i - 1], "k values must be strictly increasing");
    }
    require(repetitions >= 1, "repetitions must be at least 1");
    require(jobs >= 1, "jobs must be at least 1");
    require(absolute_constant > 0.0, "absolute constant must be positive");
    if (phi_lip) require(*phi_lip > 0.0, "phi Lipschitz constant must be positive");
  }
};

inline std::uint64_t sweep_row_seed(std::uint64_t master, Index k, int repetition) {
  return derive_seed(master, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(repetition)});
}

struct SweepRow {
  Index k = 0;
  int repetition = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | usage_error | data_error | numerical_error
  std::string message;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double gap = 0.0;
  double same_class_mean = 0.0;
  double diff_class_mean = 0.0;
  NormProfile norms;
  double sparse_bound = 0.0;
  double amplification_bound = 0.0;
  double corollary_bound = 0.0;
  double linear_bound = 0.0;

  bool ok() const { return status == "ok"; }
};

inline const char* status_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage:
      return "usage_error";
    case ErrorCategory::Data:
      return "data_error";
    case ErrorCategory::Numerical:
      return "numerical_error";
  }
  return "error";
}

inline SweepRow run_sweep_point(const SweepConfig& cfg, Index k, int repetition, const FeatureDataset& train_ds,
                                const FeatureDataset& test_ds) {
  SweepRow row;
  row.k = k;
  row.repetition = repetition;
  row.seed = sweep_row_seed(cfg.master_seed, k, repetition);
  TrainConfig tc = cfg.base;
  tc.k = k;
  tc.seed = row.seed;
  try {
    const TrainResult res = train(tc, train_ds, test_ds);
    const EpochRecord& last = res.trace.records.back();
    row.train_loss = last.train_loss;
    row.test_loss = last.test_loss;
    row.gap = row.test_loss - row.train_loss;
    const PairEvaluation ev = evaluate_pairs(res.embedding, test_ds, res.test_eval_pairs, tc.loss);
    row.same_class_mean = ev.same_class_mean;
    row.diff_class_mean = ev.diff_class_mean;

    BoundContext ctx;
    ctx.b = train_ds.b();
    ctx.n = train_ds.size();
    ctx.phi_lip = cfg.phi_lip.value_or(tc.nonlinearity.lipschitz_constant());
    ctx.log_factor_enabled = cfg.log_factor;
    ctx.absolute_constant = cfg.absolute_constant;
    const BoundReport br = evaluate_bounds(res.embedding.a, ctx);
    row.norms = br.norms;
    row.sparse_bound = br.sparse_bound;
    row.amplification_bound = br.amplification_bound;
    row.corollary_bound = br.corollary_bound;
    row.linear_bound = br.linear_bound;
  } catch (const Error& e) {
    row.status = status_for(e.category());
    row.message = e.what();
  }
  return row;
}

struct SweepAggregate {
  struct Stat {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
  };
  Index k = 0;
  int num_ok = 0;
  int num_failed = 0;
  std::map<std::string, Stat> stats;
};

/// Metric names in the order they appear in the aggregate CSV.
inline const std::vector<std::string>& sweep_metric_names() {
  static const std::vector<std::string> names{
      "train_loss",         "test_loss",           "gap",           "same_class_mean",
      "diff_class_mean",    "norm_2_1",            "norm_2_inf",    "norm_op",
      "norm_fro",           "norm_2_1_over_k",     "norm_op_over_sqrt_k", "sparse_bound",
      "amplification_bound", "corollary_bound",     "linear_bound"};
  return names;
}

inline double sweep_metric(const SweepRow& r, const std::string& name) {
  const double k = static_cast<double>(r.k);
  if (name == "train_loss") return r.train_loss;
  if (name == "test_loss") return r.test_loss;
  if (name == "gap") return r.gap;
  if (name == "same_class_mean") return r.same_class_mean;
  if (name == "diff_class_mean") return r.diff_class_mean;
  if (name == "norm_2_1") return r.norms.norm_2_1;
  if (name == "norm_2_inf") return r.norms.norm_2_inf;
  if (name == "norm_op") return r.norms.norm_op;
  if (name == "norm_fro") return r.norms.norm_fro;
  if (name == "norm_2_1_over_k") return r.norms.norm_2_1 / k;
  if (name == "norm_op_over_sqrt_k") return r.norms.norm_op / std::sqrt(k);
  if (name == "sparse_bound") return r.sparse_bound;
  if (name == "amplification_bound") return r.amplification_bound;
  if (name == "corollary_bound") return r.corollary_bound;
  if (name == "linear_bound") return r.linear_bound;
  throw InvalidArgument("unknown sweep metric '" + name + "'");
}

/// Mean and sample std per k over successful rows.
inline std::vector<SweepAggregate> aggregate_sweep(const std::vector<Index>& k_values, const std::vector<SweepRow>& rows) {
  std::vector<SweepAggregate> out;
  for (Index k : k_values) {
    SweepAggregate agg;
    agg.k = k;
    std::vector<const SweepRow*> good;
    for (const SweepRow& r : rows) {
      if (r.k != k) continue;
      if (r.ok())
        good.push_back(&r);
      else
        ++agg.num_failed;
    }
    agg.num_ok = static_cast<int>(good.size());
    for (const std::string& name : sweep_metric_names()) {
      SweepAggregate::Stat s;
      if (!good.empty()) {
        double sum = 0.0;
        for (const SweepRow* r : good) sum += sweep_metric(*r, name);
        s.mean = sum / static_cast<double>(good.size());
        if (good.size() > 1) {
          double ss = 0.0;
          for (const SweepRow* r : good) {
            const double dv = sweep_metric(*r, name) - s.mean;
            ss += dv * dv;
          }
          s.std = std::sqrt(ss / static_cast<double>(good.size() - 1));
        }
      } else {
        s.mean = s.std = std::nan("");
      }
      agg.stats[name] = s;
    }
    out.push_back(std::move(agg));
  }
  return out;
}

struct SweepResult {
  std::vector<SweepRow> rows;  // k-major, then repetition
  std::vector<SweepAggregate> aggregate;

  bool any_failed() const {
    for (const SweepRow& r : rows)
      if (!r.ok()) return true;
    return false;
  }
};

/// Runs every (k, repetition) point. Rows are stored by index, so output order
/// does not depend on `jobs`.
inline SweepResult run_sweep(const SweepConfig& cfg, const FeatureDataset& train_ds, const FeatureDataset& test_ds) {
  cfg.validate();
  struct Point {
    Index k;
    int rep;
  };
  std::vector<Point> points;
  for (Index k : cfg.k_values)
    for (int r = 0; r < cfg.repetitions; ++r) points.push_back({k, r});

  SweepResult result;
  result.rows.resize(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++)
      result.rows[i] = run_sweep_point(cfg, points[i].k, points[i].rep, train_ds, test_ds);
  };
  const int jobs = std::min<int>(cfg.jobs, static_cast<int>(points.size()));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  result.aggregate = aggregate_sweep(cfg.k_values, result.rows);
  return result;
}

inline constexpr const char* kSweepRowsCsvHeader =
    "k,repetition,seed,status,train_loss,test_loss,gap,same_class_mean,diff_class_mean,norm_2_1,norm_2_inf,norm_op,"
    "norm_fro,sparse_bound,amplification_bound,corollary_bound,linear_bound";

inline void write_config_hash_line(std::ostream& os, const std::string& hash_hex) {
  os << "# config-hash=" << hash_hex << '\n';
}

inline void write_sweep_rows_csv(std::ostream& os, const std::vector<SweepRow>& rows, const std::string& hash_hex) {
  write_config_hash_line(os, hash_hex);
  os << kSweepRowsCsvHeader << '\n';
  for (const SweepRow& r : rows) {
    os << r.k << ',' << r.repetition << ',' << r.seed << ',' << r.status;
    const double vals[] = {r.train_loss,     r.test_loss,          r.gap,           r.same_class_mean,
                           r.diff_class_mean, r.norms.norm_2_1,    r.norms.norm_2_inf, r.norms.norm_op,
                           r.norms.norm_fro,  r.sparse_bound,      r.amplification_bound, r.corollary_bound,
                           r.linear_bound};
    for (double v : vals) os << ',' << (r.ok() ? format_double(v) : std::string());
    os << '\n';
  }
}

inline void write_sweep_aggregate_csv(std::ostream& os, const std::vector<SweepAggregate>& agg,
                                      const std::string& hash_hex) {
  write_config_hash_line(os, hash_hex);
  os << "k,num_ok,num_failed";
  for (const std::string& name : sweep_metric_names()) os << ',' << name << "_mean," << name << "_std";
  os << '\n';
  for (const SweepAggregate& a : agg) {
    os << a.k << ',' << a.num_ok << ',' << a.num_failed;
    for (const std::string& name : sweep_metric_names()) {
      const SweepAggregate::Stat& s = a.stats.at(name);
      os << ',' << (a.num_ok ? format_double(s.mean) : std::string()) << ','
         << (a.num_ok ? format_double(s.std) : std::string());
    }
    os << '\n';
  }
}

}  // namespace dfml
