#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabreg/dataset.hpp"
#include "stabreg/simulations.hpp"
#include "stabreg/stabilized_regression.hpp"

namespace stabreg {

// Mean over environments of the per-environment mean squared residual.
double test_rss(const Eigen::VectorXd& predictions, const MultiEnvDataset& test);
double test_rss(const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& predictor,
                const MultiEnvDataset& test);

enum class RecoveryTarget { mb, sb, nsb };
std::string to_string(RecoveryTarget t);

// ROC of a ranking by descending importance. Tied variables form one linear
// segment. The curve stops at max_fp' = min(max_fp, #negatives) false
// positives; pauc is the area under TP-count vs FP-count over [0, max_fp']
// divided by |truth| * max_fp', and 1 when there are no negatives.
struct RecoveryCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  double pauc = 0.0;
};

// Throws ValidationError when truth is empty.
RecoveryCurve roc_from_ranking(const Eigen::VectorXd& importance,
                               const Subset& truth, int max_fp = 10);

// TPR of the full (untruncated) curve at each false-positive rate in `grid`.
std::vector<double> tpr_at(const Eigen::VectorXd& importance, const Subset& truth,
                           const std::vector<double>& grid);

// 0, 0.1, ..., 1
std::vector<double> default_fpr_grid();

extern const std::vector<std::string> kAllMethods;

struct MethodRecord {
  std::string method;
  std::optional<double> test_rss;            // absent for ranking-only methods
  std::map<std::string, double> pauc;        // by target name
  std::map<std::string, std::vector<double>> tpr;  // on default_fpr_grid()
  std::string data_hash;
  std::string error;  // nonempty on failure
  // Fitted-model summary: scalar settings and the coefficient vector
  // (averaged over selected sets for the SR family, empty for SRdiff).
  std::map<std::string, double> summary;
  std::vector<double> coefs;
};

struct RepRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  std::string data_hash;
  bool mb_equals_sb = false;
  Subset mb, sb, nsb;  // dataset columns
  std::vector<MethodRecord> methods;
};

struct BenchmarkOptions {
  SimDesign design;
  std::vector<std::string> methods = kAllMethods;
  int n_reps = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
  int max_fp = 10;
  // Stabilized-regression settings; SRpred derives from these.
  SRConfig sr;
};

// Settings used for a design when none are supplied: scaled-residual test,
// alpha_stab = alpha_pred = 0.01, exhaustive sets, Lasso screening to 10 when
// the design has more than 15 predictors.
SRConfig benchmark_sr_config(const SimDesign& design);

struct BenchmarkResult {
  BenchmarkOptions options;
  std::vector<RepRecord> reps;
  std::vector<std::string> flagged_methods;  // > 10% failures
};

BenchmarkResult run_benchmark(const BenchmarkOptions& options);

struct PredictionSummary {
  std::string method;
  std::string stratum;  // "mb_eq_sb", "mb_neq_sb", "all"
  int count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct RecoverySummary {
  std::string method;
  std::string target;
  int count = 0;
  double mean_pauc = 0.0;
  std::vector<double> mean_tpr;
};

struct BenchmarkAggregates {
  std::vector<PredictionSummary> prediction;
  std::vector<RecoverySummary> recovery;
};

BenchmarkAggregates aggregate(const BenchmarkResult& result);

// Linear-interpolation quantile (R type 7) of unsorted values.
double quantile(std::vector<double> values, double p);

// FNV-1a over the numeric content and labels of a dataset.
std::string dataset_hash(const MultiEnvDataset& ds, std::uint64_t basis = 0);

std::string stratum_name(bool mb_equals_sb);

}  // namespace stabreg
