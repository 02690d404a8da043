#include "stabreg/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stabreg/error.hpp"
#include "stabreg/linear_model.hpp"

namespace stabreg {

std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::ols: return "OLS";
    case BaselineMethod::lasso: return "Lasso";
    case BaselineMethod::anchor: return "AR";
    case BaselineMethod::anchor_lasso: return "ARLasso";
    case BaselineMethod::iv: return "IV";
    case BaselineMethod::iv_lasso: return "IVLasso";
  }
  return "OLS";
}

Eigen::VectorXd predict(const BaselineModel& model, const Eigen::MatrixXd& Xnew) {
  if (Xnew.cols() != model.coefs.size()) {
    throw ValidationError("prediction matrix column count does not match model");
  }
  Eigen::VectorXd out = Xnew * model.coefs;
  out.array() += model.intercept;
  return out;
}

namespace {

Eigen::VectorXd column_sd(const Eigen::MatrixXd& X) {
  Eigen::VectorXd sd(X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    sd(j) = std::sqrt((X.col(j).array() - X.col(j).mean()).square().mean());
  }
  return sd;
}

BaselineModel from_ols(const MultiEnvDataset& fit_data, const Eigen::VectorXd& sd,
                       BaselineMethod method) {
  Subset all(static_cast<std::size_t>(fit_data.d()));
  std::iota(all.begin(), all.end(), 0);
  const SubsetFit fit = fit_ols(fit_data, all);
  BaselineModel m;
  m.method = method;
  m.intercept = fit.intercept;
  m.coefs = fit.coefs;
  m.importance = m.coefs.cwiseAbs().cwiseProduct(sd);
  return m;
}

BaselineModel from_lasso(const LassoFit& fit, const Eigen::VectorXd& sd,
                         BaselineMethod method) {
  BaselineModel m;
  m.method = method;
  m.intercept = fit.intercept;
  m.coefs = fit.coefs;
  m.lambda = fit.lambda;
  m.importance = m.coefs.cwiseAbs().cwiseProduct(sd);
  return m;
}

double held_out_mse(const MultiEnvDataset& ds, const std::vector<Index>& rows,
                    double intercept, const Eigen::VectorXd& coefs) {
  double sse = 0.0;
  for (Index i : rows) {
    const double r = ds.y()(i) - intercept - ds.X().row(i).dot(coefs);
    sse += r * r;
  }
  return sse / static_cast<double>(rows.size());
}

double aggregate(const std::vector<double>& v, CvCriterion c) {
  if (c == CvCriterion::worst) return *std::max_element(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ValidationError("anchor gamma must be positive and finite");
  }
}

}  // namespace

BaselineModel fit_pooled_ols(const MultiEnvDataset& ds) {
  return from_ols(ds, column_sd(ds.X()), BaselineMethod::ols);
}

BaselineModel fit_lasso_baseline(const MultiEnvDataset& ds, std::uint64_t seed,
                                 int k_folds) {
  return from_lasso(cv_lasso(ds, k_folds, seed), column_sd(ds.X()), BaselineMethod::lasso);
}

std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int k = -2; k <= 10; ++k) g.push_back(std::ldexp(1.0, k));
  return g;
}

Eigen::MatrixXd anchor_projector(const MultiEnvDataset& ds) {
  const Index n = ds.n();
  Eigen::MatrixXd P = Eigen::MatrixXd::Constant(n, n, -1.0 / static_cast<double>(n));
  for (const auto& rows : ds.envs().row_sets) {
    const double w = 1.0 / static_cast<double>(rows.size());
    for (Index a : rows) {
      for (Index b : rows) P(a, b) += w;
    }
  }
  return P;
}

MultiEnvDataset anchor_transform(const MultiEnvDataset& ds, double gamma) {
  check_gamma(gamma);
  const double shrink = 1.0 - std::sqrt(gamma);
  const Eigen::RowVectorXd x_grand = ds.X().colwise().mean();
  const double y_grand = ds.y().mean();
  Eigen::MatrixXd X = ds.X();
  Eigen::VectorXd y = ds.y();
  for (const auto& rows : ds.envs().row_sets) {
    Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(ds.d());
    double y_mean = 0.0;
    for (Index i : rows) {
      x_mean += ds.X().row(i);
      y_mean += ds.y()(i);
    }
    x_mean /= static_cast<double>(rows.size());
    y_mean /= static_cast<double>(rows.size());
    const Eigen::RowVectorXd dx = shrink * (x_mean - x_grand);
    const double dy = shrink * (y_mean - y_grand);
    for (Index i : rows) {
      X.row(i) -= dx;
      y(i) -= dy;
    }
  }
  return ds.with_data(std::move(X), std::move(y));
}

BaselineModel fit_anchor(const MultiEnvDataset& ds, double gamma, bool use_lasso,
                         std::uint64_t seed) {
  check_gamma(gamma);
  if (ds.n_envs() < 2) throw ValidationError("anchor regression needs at least two environments");
  const auto sd = column_sd(ds.X());
  const MultiEnvDataset t = anchor_transform(ds, gamma);
  BaselineModel m = use_lasso
                        ? from_lasso(cv_lasso(t, 10, seed), sd, BaselineMethod::anchor_lasso)
                        : from_ols(t, sd, BaselineMethod::anchor);
  m.gamma = gamma;
  return m;
}

BaselineModel cv_anchor_gamma(const MultiEnvDataset& ds,
                              const std::vector<double>& gamma_grid,
                              bool use_lasso, std::uint64_t seed,
                              CvCriterion criterion) {
  if (gamma_grid.empty()) throw ValidationError("gamma grid is empty");
  for (double g : gamma_grid) check_gamma(g);
  if (ds.n_envs() < 2) throw ValidationError("anchor regression needs at least two environments");
  const int K = ds.n_envs();
  const auto& sets = ds.envs().row_sets;

  // Training rows and dataset for each held-out environment.
  std::vector<MultiEnvDataset> train;
  for (int e = 0; e < K; ++e) {
    std::vector<Index> rows;
    for (int f = 0; f < K; ++f) {
      if (f != e) rows.insert(rows.end(), sets[static_cast<std::size_t>(f)].begin(),
                              sets[static_cast<std::size_t>(f)].end());
    }
    train.push_back(ds.select_rows(rows));
  }

  double best_crit = std::numeric_limits<double>::infinity();
  double best_gamma = gamma_grid.front();
  double best_lambda = 0.0;
  for (double gamma : gamma_grid) {
    if (!use_lasso) {
      std::vector<double> losses;
      for (int e = 0; e < K; ++e) {
        const MultiEnvDataset t = anchor_transform(train[static_cast<std::size_t>(e)], gamma);
        Subset all(static_cast<std::size_t>(ds.d()));
        std::iota(all.begin(), all.end(), 0);
        const SubsetFit fit = fit_ols(t, all);
        losses.push_back(held_out_mse(ds, sets[static_cast<std::size_t>(e)], fit.intercept, fit.coefs));
      }
      const double crit = aggregate(losses, criterion);
      if (crit < best_crit) {
        best_crit = crit;
        best_gamma = gamma;
      }
    } else {
      const auto grid = lasso_lambda_grid(anchor_transform(ds, gamma));
      std::vector<std::vector<double>> losses(grid.size());
      for (int e = 0; e < K; ++e) {
        const MultiEnvDataset t = anchor_transform(train[static_cast<std::size_t>(e)], gamma);
        const auto path = fit_lasso_path(t, grid);
        for (std::size_t l = 0; l < grid.size(); ++l) {
          losses[l].push_back(held_out_mse(ds, sets[static_cast<std::size_t>(e)],
                                           path[l].intercept, path[l].coefs));
        }
      }
      for (std::size_t l = 0; l < grid.size(); ++l) {
        const double crit = aggregate(losses[l], criterion);
        if (crit < best_crit) {
          best_crit = crit;
          best_gamma = gamma;
          best_lambda = grid[l];
        }
      }
    }
  }
  (void)seed;
  const auto sd = column_sd(ds.X());
  const MultiEnvDataset t = anchor_transform(ds, best_gamma);
  BaselineModel m;
  if (!use_lasso) {
    m = from_ols(t, sd, BaselineMethod::anchor);
  } else {
    // Refit along the full grid so warm starts match the tuning runs.
    const auto grid = lasso_lambda_grid(t);
    const auto path = fit_lasso_path(t, grid);
    std::size_t pick = 0;
    for (std::size_t l = 0; l < grid.size(); ++l) {
      if (std::abs(grid[l] - best_lambda) < std::abs(grid[pick] - best_lambda)) pick = l;
    }
    m = from_lasso(path[pick], sd, BaselineMethod::anchor_lasso);
  }
  m.gamma = best_gamma;
  return m;
}

BaselineModel fit_iv(const MultiEnvDataset& ds, bool use_lasso, std::uint64_t seed) {
  BaselineModel m = fit_anchor(ds, kIvGamma, use_lasso, seed);
  m.method = use_lasso ? BaselineMethod::iv_lasso : BaselineMethod::iv;
  return m;
}

}  // namespace stabreg
