#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stabreg/dataset.hpp"
#include "stabreg/linear_model.hpp"

namespace stabreg {

// Scores are negated losses: larger is better.
//   pooled:  -pooled MSE
//   min_env: -max_e MSE_e
enum class PredKind { pooled, min_env };

std::string to_string(PredKind k);
PredKind pred_kind_from_string(const std::string& s);

struct PredScore {
  Subset subset;
  double score = 0.0;
  PredKind kind = PredKind::pooled;
};

// Scores `fit` on `ds` (in-sample when ds is the training data).
PredScore pred_score(const MultiEnvDataset& ds, const SubsetFit& fit,
                     PredKind kind);

// Score from the losses already stored in a fit; no data pass.
double score_from_fit(const SubsetFit& fit, PredKind kind);

struct BootstrapCutoff {
  Subset best_set;
  double best_score = 0.0;
  std::vector<double> samples;  // sorted ascending
  double alpha_pred = 0.01;
  // ceil(alpha_pred * B)-th order statistic of `samples`.
  double quantile = 0.0;
  // min(quantile, best_score): the cutoff actually applied, so that the best
  // set always passes its own cutoff.
  double c_pred = 0.0;
  int attempts = 0;
};

// Index of the best candidate: maximal score, then smallest size, then
// lexicographically smallest.
std::size_t best_candidate(const std::vector<Subset>& sets,
                           const std::vector<double>& scores);

// Refits the best set on B within-environment bootstrap samples. Samples whose
// refit is singular are redrawn, up to 5B attempts in total.
BootstrapCutoff bootstrap_cutoff(const MultiEnvDataset& ds,
                                 const std::vector<Subset>& stable_sets,
                                 const std::vector<double>& scores,
                                 PredKind kind, int B, double alpha_pred,
                                 std::uint64_t seed, int jobs = 1);

// Convenience overload scoring each stable set on ds first.
BootstrapCutoff bootstrap_cutoff(const MultiEnvDataset& ds,
                                 const std::vector<Subset>& stable_sets,
                                 PredKind kind, int B, double alpha_pred,
                                 std::uint64_t seed, int jobs = 1);

// Positions i with scores[i] >= c_pred.
std::vector<std::size_t> filter_optimal(const std::vector<double>& scores,
                                        double c_pred);

}  // namespace stabreg
