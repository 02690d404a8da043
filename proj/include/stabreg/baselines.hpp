#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabreg/dataset.hpp"

namespace stabreg {

enum class BaselineMethod { ols, lasso, anchor, anchor_lasso, iv, iv_lasso };

std::string to_string(BaselineMethod m);

// importance_j = |coefs_j| * sd(X_j) on the training data.
struct BaselineModel {
  BaselineMethod method = BaselineMethod::ols;
  double intercept = 0.0;
  Eigen::VectorXd coefs;
  double gamma = 1.0;   // anchor family only
  double lambda = 0.0;  // lasso variants only
  Eigen::VectorXd importance;
};

Eigen::VectorXd predict(const BaselineModel& model, const Eigen::MatrixXd& Xnew);

BaselineModel fit_pooled_ols(const MultiEnvDataset& ds);
BaselineModel fit_lasso_baseline(const MultiEnvDataset& ds, std::uint64_t seed,
                                 int k_folds = 10);

// Centered environment-indicator projector P_A (n x n). For tests; the fits
// apply it implicitly.
Eigen::MatrixXd anchor_projector(const MultiEnvDataset& ds);

// (I - (1 - sqrt(gamma)) P_A) applied to X and y: each row moves toward the
// grand mean by (1 - sqrt(gamma)) times its environment's mean offset.
MultiEnvDataset anchor_transform(const MultiEnvDataset& ds, double gamma);

BaselineModel fit_anchor(const MultiEnvDataset& ds, double gamma, bool use_lasso,
                         std::uint64_t seed);

enum class CvCriterion { worst, mean };

// {2^k : k = -2..10}
std::vector<double> default_gamma_grid();

// Leave-one-environment-out choice of gamma. The Lasso variant tunes
// (gamma, lambda) jointly on the same folds, with lambda on the grid of the
// full transformed data.
BaselineModel cv_anchor_gamma(const MultiEnvDataset& ds,
                              const std::vector<double>& gamma_grid,
                              bool use_lasso, std::uint64_t seed,
                              CvCriterion criterion = CvCriterion::worst);

constexpr double kIvGamma = 1000.0;

BaselineModel fit_iv(const MultiEnvDataset& ds, bool use_lasso, std::uint64_t seed);

}  // namespace stabreg
