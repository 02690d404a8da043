#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stabreg/dataset.hpp"

namespace stabreg {

enum class StabTest { chow, scaled_residual };

std::string to_string(StabTest t);
StabTest stab_test_from_string(const std::string& s);

struct ChowPair {
  int env_a = 0;
  int env_b = 0;
  double f_stat = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;
  double p_value = 1.0;
};

// p_value in [0, 1]. For chow, `pairs` holds one entry per unordered
// environment pair and `statistic` is the largest F. For scaled_residual,
// `statistic` is the observed value and `resampled` the resampled values
// (empty unless a trace was requested).
struct StabilityScore {
  Subset subset;
  double p_value = 1.0;
  StabTest method = StabTest::chow;
  std::vector<ChowPair> pairs;
  double statistic = 0.0;
  std::vector<double> resampled;
};

// Pairwise Chow F-tests combined by Bonferroni: min(1, P * min p).
StabilityScore chow_test(const MultiEnvDataset& ds, const Subset& subset);

// How resampled scaled residuals are drawn.
//   fast:   exact draw of (environment sums, residual norm) from a
//           K-dimensional Gaussian plus an independent chi-square.
//   direct: project an n-dimensional Gaussian onto the residual space.
// Both sample the same distribution.
enum class ResidualRoute { fast, direct };

// Scaled-residual resampling test with statistic
//   T(u) = sum_{e<f} |mean_e(u) - mean_f(u)|,  u = r / ||r||.
// p = (1 + #{b : T*_b >= T}) / (B + 1); p = 1 when r = 0.
StabilityScore scaled_residual_test(const MultiEnvDataset& ds,
                                    const Subset& subset, int n_resamples,
                                    std::uint64_t seed,
                                    ResidualRoute route = ResidualRoute::fast,
                                    bool keep_trace = false);

// Sum over environment pairs of absolute differences of per-env means.
double pairwise_mean_divergence(const std::vector<double>& env_means);

}  // namespace stabreg
