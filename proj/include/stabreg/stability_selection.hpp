#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stabreg/dataset.hpp"
#include "stabreg/stabilized_regression.hpp"

namespace stabreg {

// Selection frequencies over half-subsamples for the criteria
//   SR:     v^coef_SR(j) > 0
//   SRdiff: v^coef_SRpred(j) - v^coef_SR(j) > 0.
// Rows cover the variables screened in at least one subsample (p of them),
// ascending by column.
//
// threshold = min(1, (1 + q^2 / p) / 2). When the unclipped value exceeds 1
// no frequency can satisfy the error bound and nothing is selected.
//
// sign_fraction[j]: fraction of runs with a positive averaged coefficient
// among runs selecting j under either criterion, taking the coefficient
// from SR when SR selects j and from SRpred otherwise.
struct SelectionProfile {
  std::vector<int> variables;
  std::vector<std::string> names;
  std::vector<double> pi_sr;
  std::vector<double> pi_srdiff;
  std::vector<std::optional<double>> sign_fraction;
  std::vector<bool> selected_sr;
  std::vector<bool> selected_srdiff;
  double q_sr = 0.0;
  double q_srdiff = 0.0;
  double raw_threshold_sr = 0.0;
  double raw_threshold_srdiff = 0.0;
  double threshold_sr = 1.0;
  double threshold_srdiff = 1.0;
  int p = 0;
  int n_subsamples = 0;
  int failed_subsamples = 0;
};

// Unclipped threshold (1 + q^2 / p) / 2.
double stability_threshold_raw(double q, int p);

// Fits SR and its SRpred variant on n_subsamples half-subsamples. Failed
// subsamples are skipped; more than 20% failures abort the run.
SelectionProfile run_stability_selection(const MultiEnvDataset& ds,
                                         const SRConfig& config, int n_subsamples,
                                         std::uint64_t seed, int jobs = 1);

struct ScatterDocument {
  std::string csv;
  std::string json;
};

// CSV columns: variable,pi_srdiff,pi_sr,sign_fraction,selected_sr,
// selected_srdiff, plus `annotation` when annotations are given.
ScatterDocument emit_selection_scatter(
    const SelectionProfile& profile,
    const std::optional<std::map<std::string, std::string>>& annotations = std::nullopt);

}  // namespace stabreg
