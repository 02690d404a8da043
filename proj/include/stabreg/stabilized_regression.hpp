#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stabreg/dataset.hpp"
#include "stabreg/linear_model.hpp"
#include "stabreg/prediction_scores.hpp"
#include "stabreg/stability_tests.hpp"

namespace stabreg {

// `automatic` uses the Chow test for at most three environments and the
// scaled-residual test otherwise.
enum class StabTestChoice { automatic, chow, scaled_residual };
enum class ScreenKind { none, corr, lasso };

std::string to_string(StabTestChoice c);
StabTestChoice stab_test_choice_from_string(const std::string& s);
std::string to_string(ScreenKind k);
ScreenKind screen_kind_from_string(const std::string& s);

struct SRConfig {
  std::optional<double> alpha_stab = 0.05;  // nullopt: no stability filter
  std::optional<double> alpha_pred = 0.01;  // nullopt: no prediction filter
  StabTestChoice stab_test = StabTestChoice::automatic;
  PredKind pred_kind = PredKind::pooled;
  ScreenKind screen = ScreenKind::corr;
  int screen_size = 0;               // 0: floor(min_e n_e / 2)
  std::optional<int> n_sets = 1000;  // nullopt: all subsets
  int max_set_size = 6;
  int b_boot = 100;
  int b_resample = 999;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

// Same settings without the stability filter, scored by the worst
// environment.
SRConfig srpred_variant(SRConfig config);

constexpr int kMaxExhaustiveDim = 15;

struct SetDiagnostics {
  Subset set;  // original column indices
  bool fitted = false;
  std::string error;
  double stab_p = 1.0;   // 1 when the stability filter is off
  double pred_score = 0.0;
  bool stable = false;
  bool optimal = false;
};

struct SRModel {
  SRConfig config;
  int d = 0;
  std::vector<std::string> column_names;
  std::vector<int> screened;           // original columns, ascending
  std::vector<Subset> candidate_sets;  // original column indices
  std::vector<std::size_t> stable;     // positions in candidate_sets
  std::vector<std::size_t> optimal;    // positions in candidate_sets
  std::vector<double> weights;         // aligned with `optimal`
  std::vector<SubsetFit> fits;         // aligned with `optimal`
  std::vector<SetDiagnostics> diagnostics;  // aligned with candidate_sets
  std::optional<BootstrapCutoff> cutoff;
  std::optional<StabTest> stab_test_used;
  bool no_stable_sets = false;
  int failed_sets = 0;
};

// Top-k columns by absolute Pearson correlation with y (ties: lower index),
// returned ascending.
std::vector<int> screen_corr(const MultiEnvDataset& ds, int k);

// First k columns to enter the Lasso path, padded by correlation ranking,
// returned ascending.
std::vector<int> screen_lasso(const MultiEnvDataset& ds, int k,
                              std::uint64_t seed);

// Subsets of {0..dim-1}, ordered by size then lexicographically.
// Exhaustive when n_sets is nullopt (dim <= 15). Otherwise the empty set and
// all singletons, plus uniformly drawn sets of size 2..max_set_size until
// n_sets sets exist or every set of size <= max_set_size is present.
std::vector<Subset> generate_sets(int dim, std::optional<int> n_sets,
                                  int max_set_size, std::uint64_t seed);

SRModel fit_sr(const MultiEnvDataset& ds, const SRConfig& config);

Eigen::VectorXd predict_sr(const SRModel& model, const Eigen::MatrixXd& Xnew);

// Weighted average of the selected fits' coefficients (signed, length d).
Eigen::VectorXd averaged_coefficients(const SRModel& model);

enum class ImportanceKind { weight, coef, perm, srdiff };
std::string to_string(ImportanceKind k);

struct ImportanceVector {
  ImportanceKind kind = ImportanceKind::weight;
  Eigen::VectorXd values;
};

ImportanceVector importance_weight(const SRModel& model);
ImportanceVector importance_coef(const SRModel& model);
ImportanceVector importance_perm(const SRModel& model, const MultiEnvDataset& ds,
                                 int B, std::uint64_t seed);
// srpred minus sr for kind weight or coef.
ImportanceVector importance_srdiff(const SRModel& sr, const SRModel& srpred,
                                   ImportanceKind kind);

}  // namespace stabreg
