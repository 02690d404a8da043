#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stabreg/dataset.hpp"

namespace stabreg {

// OLS with intercept on the columns in `subset`.
//   residuals = y - intercept - X[:, subset] * coefs on the fitted rows.
//   env_mse[k] is NaN when environment k has no fitted rows.
struct SubsetFit {
  Subset subset;
  double intercept = 0.0;
  Eigen::VectorXd coefs;
  Eigen::VectorXd residuals;
  double pooled_mse = 0.0;
  std::vector<double> env_mse;
};

// Fits on `rows` (default: all rows). Throws UnderdeterminedError when
// |subset| + 1 >= row count and SingularDesignError on rank deficiency.
SubsetFit fit_ols(const MultiEnvDataset& ds, const Subset& subset,
                  std::optional<std::span<const Index>> rows = std::nullopt);

std::vector<SubsetFit> fit_ols_per_env(const MultiEnvDataset& ds,
                                       const Subset& subset);

Eigen::VectorXd predict(const SubsetFit& fit, const Eigen::MatrixXd& Xnew);

double mse_pooled(const SubsetFit& fit, const MultiEnvDataset& ds);
std::vector<double> mse_per_env(const SubsetFit& fit, const MultiEnvDataset& ds);
double mse_worst_env(const SubsetFit& fit, const MultiEnvDataset& ds);

// Minimizer of (1/2n)||y_c - Z b||^2 + lambda ||b||_1 where Z holds the
// predictors standardized on the fitted rows (mean 0, mean square 1) and y_c
// is the centered response. `coefs` and `intercept` are on the original
// scale; columns without variance are listed in dropped_columns and get 0.
struct LassoFit {
  double lambda = 0.0;
  double intercept = 0.0;
  Eigen::VectorXd coefs;
  std::vector<int> active_set;
  std::vector<int> dropped_columns;
};

// Smallest lambda at which every standardized coefficient is zero.
double lasso_lambda_max(const MultiEnvDataset& ds,
                        std::optional<std::span<const Index>> rows = std::nullopt);

// Geometric grid from lambda_max down to ratio * lambda_max. The default
// ratio is 1e-4 when n > d and 1e-2 otherwise.
std::vector<double> lasso_lambda_grid(
    const MultiEnvDataset& ds, int n_lambda = 100,
    std::optional<double> ratio = std::nullopt,
    std::optional<std::span<const Index>> rows = std::nullopt);

// Warm-started coordinate descent along a strictly descending grid.
std::vector<LassoFit> fit_lasso_path(
    const MultiEnvDataset& ds, const std::vector<double>& lambdas,
    std::optional<std::span<const Index>> rows = std::nullopt);

struct LassoCV {
  std::vector<double> lambdas;
  std::vector<double> cv_mse;
  std::size_t best = 0;
  LassoFit fit;
};

// k-fold CV over the default grid. Folds are assigned round-robin inside each
// environment after a seeded shuffle, so every fold sees every environment of
// size >= k. The returned fit is the full-data solution at the CV minimizer.
LassoCV cv_lasso_path(const MultiEnvDataset& ds, int k_folds,
                      std::uint64_t seed);
LassoFit cv_lasso(const MultiEnvDataset& ds, int k_folds = 10,
                  std::uint64_t seed = 0);

Eigen::VectorXd predict(const LassoFit& fit, const Eigen::MatrixXd& Xnew);

// Standardized objective value and largest KKT violation of `fit` on the
// given rows. Exposed for diagnostics and tests.
struct LassoDiagnostics {
  double objective = 0.0;
  double kkt_violation = 0.0;
};
LassoDiagnostics lasso_diagnostics(
    const MultiEnvDataset& ds, const LassoFit& fit,
    std::optional<std::span<const Index>> rows = std::nullopt);

}  // namespace stabreg
