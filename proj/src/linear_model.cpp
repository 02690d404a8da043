#include "stabreg/linear_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "stabreg/error.hpp"
#include "stabreg/random.hpp"

namespace stabreg {

namespace {

std::vector<Index> all_rows(const MultiEnvDataset& ds) {
  std::vector<Index> rows(static_cast<std::size_t>(ds.n()));
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

std::vector<Index> resolve_rows(const MultiEnvDataset& ds,
                                std::optional<std::span<const Index>> rows) {
  if (!rows) return all_rows(ds);
  for (Index r : *rows) {
    if (r < 0 || r >= ds.n()) throw ValidationError("row index out of range");
  }
  return {rows->begin(), rows->end()};
}

std::string subset_string(const Subset& s) {
  std::ostringstream out;
  out << '{';
  for (std::size_t k = 0; k < s.size(); ++k) out << (k ? "," : "") << s[k];
  out << '}';
  return out.str();
}

void check_subset(const Subset& subset, Index d) {
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (subset[k] < 0 || subset[k] >= d) {
      throw ValidationError("subset " + subset_string(subset) +
                            " references a column outside [0, " +
                            std::to_string(d) + ")");
    }
    if (k > 0 && subset[k] <= subset[k - 1]) {
      throw ValidationError("subset " + subset_string(subset) +
                            " must be strictly increasing");
    }
  }
}

void fill_losses(const MultiEnvDataset& ds, std::span<const Index> rows,
                 SubsetFit& fit) {
  const auto m = static_cast<Index>(rows.size());
  fit.pooled_mse = fit.residuals.squaredNorm() / static_cast<double>(m);
  std::vector<double> sums(static_cast<std::size_t>(ds.n_envs()), 0.0);
  std::vector<Index> counts(static_cast<std::size_t>(ds.n_envs()), 0);
  for (Index i = 0; i < m; ++i) {
    const auto e = static_cast<std::size_t>(
        ds.env_codes()[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])]);
    sums[e] += fit.residuals(i) * fit.residuals(i);
    ++counts[e];
  }
  fit.env_mse.assign(sums.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t e = 0; e < sums.size(); ++e) {
    if (counts[e] > 0) fit.env_mse[e] = sums[e] / static_cast<double>(counts[e]);
  }
}

// Predictors standardized on a row subset.
struct Standardized {
  Eigen::MatrixXd Z;  // kept columns only
  Eigen::VectorXd yc;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  double y_mean = 0.0;
  std::vector<int> kept;
  std::vector<int> dropped;
};

Standardized standardize(const MultiEnvDataset& ds,
                         std::span<const Index> rows) {
  const auto m = static_cast<Index>(rows.size());
  if (m < 2) throw UnderdeterminedError("lasso needs at least two rows");
  Standardized s;
  Eigen::MatrixXd X(m, ds.d());
  Eigen::VectorXd y(m);
  for (Index i = 0; i < m; ++i) {
    X.row(i) = ds.X().row(rows[static_cast<std::size_t>(i)]);
    y(i) = ds.y()(rows[static_cast<std::size_t>(i)]);
  }
  s.mean = X.colwise().mean().transpose();
  s.scale.resize(ds.d());
  s.y_mean = y.mean();
  s.yc = y.array() - s.y_mean;
  for (Index j = 0; j < ds.d(); ++j) {
    const double sd = std::sqrt(
        (X.col(j).array() - s.mean(j)).square().mean());
    s.scale(j) = sd;
    if (sd <= 1e-12 * std::max(1.0, std::abs(s.mean(j)))) {
      s.dropped.push_back(static_cast<int>(j));
    } else {
      s.kept.push_back(static_cast<int>(j));
    }
  }
  s.Z.resize(m, static_cast<Index>(s.kept.size()));
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    const int j = s.kept[k];
    s.Z.col(static_cast<Index>(k)) =
        (X.col(j).array() - s.mean(j)) / s.scale(j);
  }
  return s;
}

constexpr double kCoordTol = 1e-7;
constexpr int kMaxSweeps = 100000;
constexpr double kSettleTol = 1e-4;

// One coordinate-descent sweep over `coords`; returns the largest change.
double sweep(const Eigen::MatrixXd& Z, Eigen::VectorXd& r, Eigen::VectorXd& b,
             double lambda, const std::vector<Index>& coords) {
  const double n = static_cast<double>(Z.rows());
  double max_change = 0.0;
  for (Index j : coords) {
    const double old = b(j);
    const double rho = Z.col(j).dot(r) / n + old;
    const double updated = rho > lambda    ? rho - lambda
                           : rho < -lambda ? rho + lambda
                                           : 0.0;
    if (updated != old) {
      r.noalias() -= (updated - old) * Z.col(j);
      b(j) = updated;
      max_change = std::max(max_change, std::abs(updated - old));
    }
  }
  return max_change;
}

void solve_cd(const Eigen::MatrixXd& Z, Eigen::VectorXd& r, Eigen::VectorXd& b,
              double lambda) {
  const Index p = Z.cols();
  std::vector<Index> everything(static_cast<std::size_t>(p));
  std::iota(everything.begin(), everything.end(), Index{0});
  for (int outer = 0; outer < kMaxSweeps; ++outer) {
    if (sweep(Z, r, b, lambda, everything) < kCoordTol) return;
    std::vector<Index> active;
    for (Index j = 0; j < p; ++j) {
      if (b(j) != 0.0) active.push_back(j);
    }
    for (int inner = 0; inner < kMaxSweeps; ++inner) {
      if (sweep(Z, r, b, lambda, active) < kCoordTol) break;
    }
  }
  throw NumericalError("lasso coordinate descent did not converge");
}

// Covariance-update variant for n > p: G = Z'Z / n and g = Z'r / n stand in
// for the residual, so a coordinate step costs O(p) instead of O(n).
double sweep_gram(const Eigen::MatrixXd& G, Eigen::VectorXd& g, Eigen::VectorXd& b,
                  double lambda, const std::vector<Index>& coords) {
  double max_change = 0.0;
  for (Index j : coords) {
    const double old = b(j);
    const double rho = g(j) + old;
    const double updated = rho > lambda    ? rho - lambda
                           : rho < -lambda ? rho + lambda
                                           : 0.0;
    if (updated != old) {
      g.noalias() -= (updated - old) * G.col(j);
      b(j) = updated;
      max_change = std::max(max_change, std::abs(updated - old));
    }
  }
  return max_change;
}

double gram_objective(const Eigen::MatrixXd& G, const Eigen::VectorXd& c,
                      const Eigen::VectorXd& x, double lambda) {
  return 0.5 * x.dot(G * x) - c.dot(x) + lambda * x.lpNorm<1>();
}

// Feature-sign search: exact active-set refinement of min 1/2 x'Gx - c'x +
// lambda |x|_1 from a warm start. Returns false (leaving b and g untouched)
// when a reduced system is not positive definite or the iteration cap is hit.
bool feature_sign(const Eigen::MatrixXd& G, const Eigen::VectorXd& c, Eigen::VectorXd& g,
                  Eigen::VectorXd& b, double lambda) {
  const Index p = G.cols();
  const double kkt_tol = 1e-10 * std::max(1.0, lambda);
  Eigen::VectorXd x = b;
  Eigen::VectorXd theta = x.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
  for (int iter = 0; iter < 10 * static_cast<int>(p) + 10; ++iter) {
    const Eigen::VectorXd grad = c - G * x;
    // Inactive coordinates violating |grad_j| <= lambda enter the active set.
    Index enter = -1;
    double worst = lambda + kkt_tol;
    for (Index j = 0; j < p; ++j) {
      if (theta(j) == 0.0 && std::abs(grad(j)) > worst) {
        worst = std::abs(grad(j));
        enter = j;
      }
    }
    bool consistent = true;
    for (Index j = 0; j < p && consistent; ++j) {
      if (theta(j) != 0.0) consistent = std::abs(grad(j) - lambda * theta(j)) <= kkt_tol;
    }
    if (consistent && enter < 0) {
      b = x;
      g = grad;
      return true;
    }
    if (consistent) theta(enter) = grad(enter) > 0.0 ? 1.0 : -1.0;

    std::vector<Index> active;
    for (Index j = 0; j < p; ++j) {
      if (theta(j) != 0.0) active.push_back(j);
    }
    const auto k = static_cast<Index>(active.size());
    Eigen::MatrixXd Gaa(k, k);
    Eigen::VectorXd rhs(k);
    for (Index u = 0; u < k; ++u) {
      const Index ju = active[static_cast<std::size_t>(u)];
      rhs(u) = c(ju) - lambda * theta(ju);
      for (Index v = 0; v < k; ++v) Gaa(u, v) = G(ju, active[static_cast<std::size_t>(v)]);
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(Gaa);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd sol = llt.solve(rhs);
    if (!sol.allFinite()) return false;
    Eigen::VectorXd target = Eigen::VectorXd::Zero(p);
    for (Index u = 0; u < k; ++u) target(active[static_cast<std::size_t>(u)]) = sol(u);

    // Discrete line search over the segment end and every zero crossing.
    Eigen::VectorXd best = target;
    double best_obj = gram_objective(G, c, target, lambda);
    for (Index j : active) {
      if (x(j) != 0.0 && (x(j) > 0.0) != (target(j) > 0.0)) {
        const double t = x(j) / (x(j) - target(j));
        Eigen::VectorXd cand = x + t * (target - x);
        cand(j) = 0.0;
        const double obj = gram_objective(G, c, cand, lambda);
        if (obj < best_obj) {
          best_obj = obj;
          best = cand;
        }
      }
    }
    x = best;
    for (Index j = 0; j < p; ++j) {
      theta(j) = double((x(j) > 0.0) - (x(j) < 0.0));
    }
  }
  return false;
}

void solve_cd_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& c, Eigen::VectorXd& g,
                   Eigen::VectorXd& b, double lambda) {
  const Index p = G.cols();
  std::vector<Index> everything(static_cast<std::size_t>(p));
  std::iota(everything.begin(), everything.end(), Index{0});
  // Coarse coordinate descent settles the signs; feature-sign finishes exactly.
  // Strict coordinate descent remains the fallback.
  bool polished = false;
  for (int outer = 0; outer < kMaxSweeps; ++outer) {
    const double tol = polished ? kCoordTol : kSettleTol;
    if (sweep_gram(G, g, b, lambda, everything) < tol) {
      if (polished) return;
      polished = true;
      if (feature_sign(G, c, g, b, lambda) && sweep_gram(G, g, b, lambda, everything) < kCoordTol) return;
      continue;
    }
    std::vector<Index> active;
    for (Index j = 0; j < p; ++j) {
      if (b(j) != 0.0) active.push_back(j);
    }
    for (int inner = 0; inner < kMaxSweeps; ++inner) {
      if (sweep_gram(G, g, b, lambda, active) < tol) break;
    }
  }
  throw NumericalError("lasso coordinate descent did not converge");
}

LassoFit to_original_scale(const Standardized& s, const Eigen::VectorXd& b,
                           double lambda, Index d) {
  LassoFit fit;
  fit.lambda = lambda;
  fit.coefs = Eigen::VectorXd::Zero(d);
  fit.dropped_columns = s.dropped;
  double shift = 0.0;
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    const int j = s.kept[k];
    const double bk = b(static_cast<Index>(k));
    if (bk == 0.0) continue;
    fit.coefs(j) = bk / s.scale(j);
    shift += fit.coefs(j) * s.mean(j);
    fit.active_set.push_back(j);
  }
  fit.intercept = s.y_mean - shift;
  return fit;
}

double lambda_max_of(const Standardized& s) {
  if (s.Z.cols() == 0) return 0.0;
  return (s.Z.transpose() * s.yc).cwiseAbs().maxCoeff() /
         static_cast<double>(s.Z.rows());
}

}  // namespace

SubsetFit fit_ols(const MultiEnvDataset& ds, const Subset& subset,
                  std::optional<std::span<const Index>> rows_opt) {
  check_subset(subset, ds.d());
  const auto rows = resolve_rows(ds, rows_opt);
  const auto m = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(subset.size());
  if (p + 1 >= m) {
    throw UnderdeterminedError("subset " + subset_string(subset) + " needs " +
                               std::to_string(p + 2) + " rows, got " +
                               std::to_string(m));
  }
  Eigen::MatrixXd Xs(m, p);
  Eigen::VectorXd y(m);
  for (Index i = 0; i < m; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    y(i) = ds.y()(r);
    for (Index k = 0; k < p; ++k) Xs(i, k) = ds.X()(r, subset[static_cast<std::size_t>(k)]);
  }
  SubsetFit fit;
  fit.subset = subset;
  const double y_mean = y.mean();
  if (p == 0) {
    fit.intercept = y_mean;
    fit.coefs.resize(0);
    fit.residuals = y.array() - y_mean;
  } else {
    const Eigen::RowVectorXd x_mean = Xs.colwise().mean();
    Eigen::MatrixXd Xc = Xs.rowwise() - x_mean;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
      throw SingularDesignError("subset " + subset_string(subset) +
                                " has a rank-deficient design (rank " +
                                std::to_string(qr.rank()) + " < " +
                                std::to_string(p) + ")");
    }
    fit.coefs = qr.solve((y.array() - y_mean).matrix());
    fit.intercept = y_mean - x_mean.dot(fit.coefs);
    fit.residuals = y - Xs * fit.coefs;
    fit.residuals.array() -= fit.intercept;
  }
  fill_losses(ds, rows, fit);
  return fit;
}

std::vector<SubsetFit> fit_ols_per_env(const MultiEnvDataset& ds,
                                       const Subset& subset) {
  std::vector<SubsetFit> fits;
  fits.reserve(static_cast<std::size_t>(ds.n_envs()));
  for (const auto& rows : ds.envs().row_sets) {
    fits.push_back(fit_ols(ds, subset, std::span<const Index>(rows)));
  }
  return fits;
}

Eigen::VectorXd predict(const SubsetFit& fit, const Eigen::MatrixXd& Xnew) {
  const int needed = fit.subset.empty() ? 0 : fit.subset.back() + 1;
  if (Xnew.cols() < needed) {
    throw ValidationError("prediction matrix has " +
                          std::to_string(Xnew.cols()) +
                          " columns; the fit needs " + std::to_string(needed));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Constant(Xnew.rows(), fit.intercept);
  for (std::size_t k = 0; k < fit.subset.size(); ++k) {
    out.noalias() += fit.coefs(static_cast<Index>(k)) * Xnew.col(fit.subset[k]);
  }
  return out;
}

double mse_pooled(const SubsetFit& fit, const MultiEnvDataset& ds) {
  return (ds.y() - predict(fit, ds.X())).squaredNorm() /
         static_cast<double>(ds.n());
}

std::vector<double> mse_per_env(const SubsetFit& fit,
                                const MultiEnvDataset& ds) {
  const Eigen::VectorXd r = ds.y() - predict(fit, ds.X());
  std::vector<double> out;
  for (const auto& rows : ds.envs().row_sets) {
    double s = 0.0;
    for (Index i : rows) s += r(i) * r(i);
    out.push_back(s / static_cast<double>(rows.size()));
  }
  return out;
}

double mse_worst_env(const SubsetFit& fit, const MultiEnvDataset& ds) {
  const auto v = mse_per_env(fit, ds);
  return *std::max_element(v.begin(), v.end());
}

double lasso_lambda_max(const MultiEnvDataset& ds,
                        std::optional<std::span<const Index>> rows) {
  const auto r = resolve_rows(ds, rows);
  return lambda_max_of(standardize(ds, r));
}

std::vector<double> lasso_lambda_grid(const MultiEnvDataset& ds, int n_lambda,
                                      std::optional<double> ratio,
                                      std::optional<std::span<const Index>> rows) {
  if (n_lambda < 1) throw ValidationError("lambda grid needs at least one value");
  const auto r = resolve_rows(ds, rows);
  const double top = lasso_lambda_max(ds, std::span<const Index>(r));
  const double lo_ratio =
      ratio.value_or(static_cast<Index>(r.size()) > ds.d() ? 1e-4 : 1e-2);
  if (!(lo_ratio > 0.0 && lo_ratio < 1.0)) {
    throw ValidationError("lambda ratio must lie in (0, 1)");
  }
  std::vector<double> grid;
  if (top <= 0.0) return {0.0};
  for (int k = 0; k < n_lambda; ++k) {
    const double t = n_lambda == 1 ? 0.0 : static_cast<double>(k) / (n_lambda - 1);
    grid.push_back(top * std::pow(lo_ratio, t));
  }
  return grid;
}

std::vector<LassoFit> fit_lasso_path(const MultiEnvDataset& ds,
                                     const std::vector<double>& lambdas,
                                     std::optional<std::span<const Index>> rows) {
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] >= 0.0) || (k > 0 && !(lambdas[k] < lambdas[k - 1]))) {
      throw ValidationError(
          "lasso grid must be nonnegative and strictly descending");
    }
  }
  const auto r = resolve_rows(ds, rows);
  const Standardized s = standardize(ds, r);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(s.Z.cols());
  std::vector<LassoFit> path;
  path.reserve(lambdas.size());
  if (s.Z.rows() > s.Z.cols()) {
    const double n = static_cast<double>(s.Z.rows());
    const Eigen::MatrixXd G = s.Z.transpose() * s.Z / n;
    const Eigen::VectorXd c = s.Z.transpose() * s.yc / n;
    Eigen::VectorXd g = c;
    for (double lambda : lambdas) {
      solve_cd_gram(G, c, g, b, lambda);
      path.push_back(to_original_scale(s, b, lambda, ds.d()));
    }
    return path;
  }
  Eigen::VectorXd resid = s.yc;
  for (double lambda : lambdas) {
    solve_cd(s.Z, resid, b, lambda);
    path.push_back(to_original_scale(s, b, lambda, ds.d()));
  }
  return path;
}

Eigen::VectorXd predict(const LassoFit& fit, const Eigen::MatrixXd& Xnew) {
  if (Xnew.cols() != fit.coefs.size()) {
    throw ValidationError("prediction matrix column count does not match fit");
  }
  Eigen::VectorXd out = Xnew * fit.coefs;
  out.array() += fit.intercept;
  return out;
}

LassoDiagnostics lasso_diagnostics(const MultiEnvDataset& ds,
                                   const LassoFit& fit,
                                   std::optional<std::span<const Index>> rows) {
  const auto r = resolve_rows(ds, rows);
  const Standardized s = standardize(ds, r);
  Eigen::VectorXd b(s.Z.cols());
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    b(static_cast<Index>(k)) = fit.coefs(s.kept[k]) * s.scale(s.kept[k]);
  }
  const double n = static_cast<double>(s.Z.rows());
  const Eigen::VectorXd resid = s.yc - s.Z * b;
  LassoDiagnostics out;
  out.objective = resid.squaredNorm() / (2.0 * n) + fit.lambda * b.lpNorm<1>();
  const Eigen::VectorXd grad = s.Z.transpose() * resid / n;
  for (Index j = 0; j < b.size(); ++j) {
    const double v = b(j) != 0.0
                         ? std::abs(grad(j) - fit.lambda * (b(j) > 0 ? 1.0 : -1.0))
                         : std::max(0.0, std::abs(grad(j)) - fit.lambda);
    out.kkt_violation = std::max(out.kkt_violation, v);
  }
  return out;
}

LassoCV cv_lasso_path(const MultiEnvDataset& ds, int k_folds,
                      std::uint64_t seed) {
  if (k_folds < 2) throw ValidationError("cross-validation needs k >= 2 folds");
  LassoCV cv;
  cv.lambdas = lasso_lambda_grid(ds);
  const auto full_path = fit_lasso_path(ds, cv.lambdas);

  Rng rng = make_rng(seed);
  std::vector<int> fold_of(static_cast<std::size_t>(ds.n()));
  for (const auto& set : ds.envs().row_sets) {
    auto shuffled = set;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t k = 0; k < shuffled.size(); ++k) {
      fold_of[static_cast<std::size_t>(shuffled[k])] =
          static_cast<int>(k % static_cast<std::size_t>(k_folds));
    }
  }
  cv.cv_mse.assign(cv.lambdas.size(), 0.0);
  for (int f = 0; f < k_folds; ++f) {
    std::vector<Index> train;
    std::vector<Index> held;
    for (Index i = 0; i < ds.n(); ++i) {
      (fold_of[static_cast<std::size_t>(i)] == f ? held : train).push_back(i);
    }
    if (held.empty()) continue;
    const auto path = fit_lasso_path(ds, cv.lambdas, std::span<const Index>(train));
    for (std::size_t l = 0; l < path.size(); ++l) {
      double sse = 0.0;
      for (Index i : held) {
        const double pred = path[l].intercept + ds.X().row(i).dot(path[l].coefs);
        sse += (ds.y()(i) - pred) * (ds.y()(i) - pred);
      }
      cv.cv_mse[l] += sse;
    }
  }
  for (double& v : cv.cv_mse) v /= static_cast<double>(ds.n());
  cv.best = static_cast<std::size_t>(
      std::min_element(cv.cv_mse.begin(), cv.cv_mse.end()) - cv.cv_mse.begin());
  cv.fit = full_path[cv.best];
  return cv;
}

LassoFit cv_lasso(const MultiEnvDataset& ds, int k_folds, std::uint64_t seed) {
  return cv_lasso_path(ds, k_folds, seed).fit;
}

}  // namespace stabreg
