#include "stabreg/prediction_scores.hpp"

#include <algorithm>
#include <cmath>

#include "stabreg/error.hpp"
#include "stabreg/random.hpp"

namespace stabreg {

std::string to_string(PredKind k) {
  return k == PredKind::pooled ? "pooled" : "min_env";
}

PredKind pred_kind_from_string(const std::string& s) {
  if (s == "pooled") return PredKind::pooled;
  if (s == "min_env" || s == "min-env") return PredKind::min_env;
  throw InputError("unknown prediction score kind '" + s + "'");
}

PredScore pred_score(const MultiEnvDataset& ds, const SubsetFit& fit,
                     PredKind kind) {
  PredScore out;
  out.subset = fit.subset;
  out.kind = kind;
  out.score = kind == PredKind::pooled ? -mse_pooled(fit, ds)
                                       : -mse_worst_env(fit, ds);
  return out;
}

double score_from_fit(const SubsetFit& fit, PredKind kind) {
  if (kind == PredKind::pooled) return -fit.pooled_mse;
  double worst = 0.0;
  for (double v : fit.env_mse) {
    if (!std::isnan(v)) worst = std::max(worst, v);
  }
  return -worst;
}

std::size_t best_candidate(const std::vector<Subset>& sets,
                           const std::vector<double>& scores) {
  if (sets.empty() || sets.size() != scores.size()) {
    throw ValidationError("best_candidate needs matching, nonempty inputs");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < sets.size(); ++i) {
    const bool better =
        scores[i] > scores[best] ||
        (scores[i] == scores[best] &&
         (sets[i].size() < sets[best].size() ||
          (sets[i].size() == sets[best].size() && sets[i] < sets[best])));
    if (better) best = i;
  }
  return best;
}

BootstrapCutoff bootstrap_cutoff(const MultiEnvDataset& ds,
                                 const std::vector<Subset>& stable_sets,
                                 const std::vector<double>& scores,
                                 PredKind kind, int B, double alpha_pred,
                                 std::uint64_t seed, int jobs) {
  if (stable_sets.empty()) throw ValidationError("no stable sets to score");
  if (B < 20) throw ValidationError("bootstrap cutoff needs B >= 20");
  if (!(alpha_pred > 0.0 && alpha_pred <= 1.0)) {
    throw ValidationError("alpha_pred must lie in (0, 1]");
  }
  BootstrapCutoff out;
  out.alpha_pred = alpha_pred;
  const std::size_t q = best_candidate(stable_sets, scores);
  out.best_set = stable_sets[q];
  out.best_score = scores[q];

  // Slot b tries seeds (b, 0), (b, 1), ... until a nonsingular refit, so the
  // result does not depend on scheduling. The global budget of 5B attempts is
  // enforced after the fact.
  std::vector<double> samples(static_cast<std::size_t>(B));
  std::vector<int> tries(static_cast<std::size_t>(B), 0);
  parallel_for(static_cast<std::size_t>(B), jobs, [&](std::size_t b) {
    for (int attempt = 0; attempt < 5 * B; ++attempt) {
      ++tries[b];
      const auto boot = bootstrap_within_env(
          ds, derive_seed(seed, {b, static_cast<std::uint64_t>(attempt)}));
      try {
        samples[b] = score_from_fit(fit_ols(boot, out.best_set), kind);
        return;
      } catch (const NumericalError&) {
      }
    }
  });
  for (int t : tries) out.attempts += t;
  if (out.attempts > 5 * B) {
    throw NumericalError("bootstrap refits of the best set failed too often (" +
                         std::to_string(out.attempts) + " attempts for " +
                         std::to_string(B) + " samples)");
  }
  std::sort(samples.begin(), samples.end());
  out.samples = std::move(samples);
  const auto rank = static_cast<std::size_t>(
      std::max(1.0, std::ceil(alpha_pred * static_cast<double>(B) - 1e-9)));
  out.quantile = out.samples[std::min(rank, out.samples.size()) - 1];
  out.c_pred = std::min(out.quantile, out.best_score);
  return out;
}

BootstrapCutoff bootstrap_cutoff(const MultiEnvDataset& ds,
                                 const std::vector<Subset>& stable_sets,
                                 PredKind kind, int B, double alpha_pred,
                                 std::uint64_t seed, int jobs) {
  std::vector<double> scores;
  scores.reserve(stable_sets.size());
  for (const auto& s : stable_sets) {
    scores.push_back(score_from_fit(fit_ols(ds, s), kind));
  }
  return bootstrap_cutoff(ds, stable_sets, scores, kind, B, alpha_pred, seed,
                          jobs);
}

std::vector<std::size_t> filter_optimal(const std::vector<double>& scores,
                                        double c_pred) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= c_pred) keep.push_back(i);
  }
  return keep;
}

}  // namespace stabreg
