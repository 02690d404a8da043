#pragma once

// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Parents = std::vector<std::vector<int>>;  // parents[v] lists u with u -> v

// [intercept, coefs] from the normal equations of [1, X].
Eigen::VectorXd ols_normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
double rss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// d-separation by enumerating every simple path of the skeleton.
bool d_separated_paths(const Parents& parents, int a, int b, const std::vector<int>& cond);

std::vector<int> markov_blanket(const Parents& parents, int y);

// Smallest subset S of `candidates` (by size, then lexicographic) with
// j _||_ y | S for every candidate j outside S, using the path oracle.
std::vector<int> smallest_separating_set(const Parents& parents, int y,
                                         const std::vector<int>& candidates);

// FISTA on the standardized lasso objective (1/2n)||r||^2 + lambda ||b||_1.
// Returns [intercept, coefs] on the original scale.
Eigen::VectorXd lasso_fista(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                            int iters = 20000);
// Standardized objective of original-scale coefficients.
double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& coefs, double lambda);

// pAUC by sweeping thresholds over distinct importance values.
double pauc_sweep(const Eigen::VectorXd& importance, const std::vector<int>& truth, int max_fp);

// Covariance of (I - B)^{-1} eps via the nilpotent series sum_k B^k.
Eigen::MatrixXd cov_path_sums(const Eigen::MatrixXd& B, const Eigen::VectorXd& noise_var);

// Kolmogorov-Smirnov distance of a sample from Uniform[0, 1].
double ks_uniform(std::vector<double> sample);

}  // namespace oracle
