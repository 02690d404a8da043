#include "stabreg/stabilized_regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "stabreg/error.hpp"
#include "stabreg/random.hpp"

namespace stabreg {

namespace {

enum Stream : std::uint64_t { kScreen = 1, kSets = 2, kStab = 3, kBoot = 4 };

bool set_less(const Subset& a, const Subset& b) {
  return a.size() != b.size() ? a.size() < b.size() : a < b;
}

}  // namespace

std::string to_string(StabTestChoice c) {
  switch (c) {
    case StabTestChoice::automatic: return "auto";
    case StabTestChoice::chow: return "chow";
    case StabTestChoice::scaled_residual: return "scaled_residual";
  }
  return "auto";
}

StabTestChoice stab_test_choice_from_string(const std::string& s) {
  if (s == "auto") return StabTestChoice::automatic;
  if (s == "chow") return StabTestChoice::chow;
  if (s == "scaled_residual" || s == "scaled-residual") {
    return StabTestChoice::scaled_residual;
  }
  throw InputError("unknown stability test '" + s + "'");
}

std::string to_string(ScreenKind k) {
  switch (k) {
    case ScreenKind::none: return "none";
    case ScreenKind::corr: return "corr";
    case ScreenKind::lasso: return "lasso";
  }
  return "none";
}

ScreenKind screen_kind_from_string(const std::string& s) {
  if (s == "none") return ScreenKind::none;
  if (s == "corr") return ScreenKind::corr;
  if (s == "lasso") return ScreenKind::lasso;
  throw InputError("unknown screening '" + s + "'");
}

std::string to_string(ImportanceKind k) {
  switch (k) {
    case ImportanceKind::weight: return "weight";
    case ImportanceKind::coef: return "coef";
    case ImportanceKind::perm: return "perm";
    case ImportanceKind::srdiff: return "srdiff";
  }
  return "weight";
}

void SRConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError(m); };
  if (alpha_stab && !(*alpha_stab > 0.0 && *alpha_stab < 1.0)) {
    fail("alpha_stab must lie in (0, 1)");
  }
  if (alpha_pred && !(*alpha_pred > 0.0 && *alpha_pred <= 1.0)) {
    fail("alpha_pred must lie in (0, 1]");
  }
  if (screen_size < 0) fail("screen_size must be nonnegative");
  if (n_sets && *n_sets < 1) fail("n_sets must be positive");
  if (max_set_size < 0) fail("max_set_size must be nonnegative");
  if (alpha_pred && b_boot < 20) fail("b_boot must be at least 20");
  if (b_resample < 1) fail("b_resample must be positive");
  if (jobs < 1) fail("jobs must be positive");
}

SRConfig srpred_variant(SRConfig config) {
  config.alpha_stab.reset();
  config.pred_kind = PredKind::min_env;
  return config;
}

std::vector<int> screen_corr(const MultiEnvDataset& ds, int k) {
  const Index d = ds.d();
  const Eigen::VectorXd yc = ds.y().array() - ds.y().mean();
  const double ynorm = yc.norm();
  std::vector<double> score(static_cast<std::size_t>(d), 0.0);
  for (Index j = 0; j < d; ++j) {
    const Eigen::VectorXd xc = ds.X().col(j).array() - ds.X().col(j).mean();
    const double denom = xc.norm() * ynorm;
    score[static_cast<std::size_t>(j)] = denom > 0.0 ? std::abs(xc.dot(yc)) / denom : 0.0;
  }
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(std::clamp<Index>(k, 0, d)));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> screen_lasso(const MultiEnvDataset& ds, int k,
                              std::uint64_t /*seed*/) {
  const Index d = ds.d();
  if (k >= d) {
    std::vector<int> all(static_cast<std::size_t>(d));
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  if (k <= 0) return {};
  const auto path = fit_lasso_path(ds, lasso_lambda_grid(ds));
  std::vector<int> entered;
  std::vector<char> seen(static_cast<std::size_t>(d), 0);
  Eigen::VectorXd sd(d);
  for (Index j = 0; j < d; ++j) {
    sd(j) = std::sqrt((ds.X().col(j).array() - ds.X().col(j).mean()).square().mean());
  }
  for (const auto& fit : path) {
    // Variables entering at the same grid point: larger standardized
    // coefficient first, then lower index.
    std::vector<int> fresh;
    for (int j : fit.active_set) {
      if (!seen[static_cast<std::size_t>(j)]) fresh.push_back(j);
    }
    std::stable_sort(fresh.begin(), fresh.end(), [&](int a, int b) {
      return std::abs(fit.coefs(a)) * sd(a) > std::abs(fit.coefs(b)) * sd(b);
    });
    for (int j : fresh) {
      seen[static_cast<std::size_t>(j)] = 1;
      entered.push_back(j);
    }
    if (static_cast<int>(entered.size()) >= k) break;
  }
  if (static_cast<int>(entered.size()) > k) entered.resize(static_cast<std::size_t>(k));
  if (static_cast<int>(entered.size()) < k) {
    // Full correlation ranking, then pad with unseen columns in rank order.
    const Eigen::VectorXd yc = ds.y().array() - ds.y().mean();
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) {
      const Eigen::VectorXd xc = ds.X().col(j).array() - ds.X().col(j).mean();
      const double denom = xc.norm() * yc.norm();
      score[static_cast<std::size_t>(j)] = denom > 0.0 ? std::abs(xc.dot(yc)) / denom : 0.0;
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    for (int j : order) {
      if (static_cast<int>(entered.size()) >= k) break;
      if (!seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        entered.push_back(j);
      }
    }
  }
  std::sort(entered.begin(), entered.end());
  return entered;
}

std::vector<Subset> generate_sets(int dim, std::optional<int> n_sets,
                                  int max_set_size, std::uint64_t seed) {
  if (dim < 0) throw ValidationError("set dimension must be nonnegative");
  std::vector<Subset> sets;
  if (!n_sets) {
    if (dim > kMaxExhaustiveDim) {
      throw ValidationError("exhaustive enumeration needs at most " +
                            std::to_string(kMaxExhaustiveDim) +
                            " screened variables, got " + std::to_string(dim));
    }
    for (std::uint32_t mask = 0; mask < (1u << dim); ++mask) {
      Subset s;
      for (int j = 0; j < dim; ++j) {
        if (mask & (1u << j)) s.push_back(j);
      }
      sets.push_back(std::move(s));
    }
    std::sort(sets.begin(), sets.end(), set_less);
    return sets;
  }
  const int max_size = std::clamp(max_set_size, 0, dim);
  sets.push_back({});
  for (int j = 0; j < dim && max_size >= 1; ++j) sets.push_back({j});

  // Number of sets of size <= max_size, capped to avoid overflow.
  double universe = 1.0;
  double binom = 1.0;
  for (int s = 1; s <= max_size; ++s) {
    binom = binom * (dim - s + 1) / s;
    universe += binom;
  }
  const auto target = static_cast<std::size_t>(*n_sets);
  if (static_cast<double>(target) >= universe) {
    // Every set of size <= max_size.
    std::vector<int> pos;
    for (int size = 2; size <= max_size; ++size) {
      pos.resize(static_cast<std::size_t>(size));
      std::iota(pos.begin(), pos.end(), 0);
      while (true) {
        sets.emplace_back(pos.begin(), pos.end());
        int i = size - 1;
        while (i >= 0 && pos[static_cast<std::size_t>(i)] == dim - size + i) --i;
        if (i < 0) break;
        ++pos[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < size; ++j) {
          pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
        }
      }
    }
  } else if (max_size >= 2) {
    Rng rng = make_rng(seed);
    std::set<Subset> seen(sets.begin(), sets.end());
    std::uniform_int_distribution<int> size_dist(2, max_size);
    std::vector<int> pool(static_cast<std::size_t>(dim));
    while (sets.size() < target) {
      const int size = size_dist(rng);
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < size; ++i) {
        std::uniform_int_distribution<int> pick(i, dim - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      }
      Subset s(pool.begin(), pool.begin() + size);
      std::sort(s.begin(), s.end());
      if (seen.insert(s).second) sets.push_back(std::move(s));
    }
  }
  std::sort(sets.begin(), sets.end(), set_less);
  return sets;
}

SRModel fit_sr(const MultiEnvDataset& ds, const SRConfig& config) {
  config.validate();
  if (config.alpha_stab && ds.n_envs() < 2) {
    throw ValidationError("the stability filter needs at least two environments");
  }
  SRModel model;
  model.config = config;
  model.d = static_cast<int>(ds.d());
  model.column_names = ds.column_names();

  // Screening.
  Index min_env = ds.n();
  for (Index s : ds.envs().sizes) min_env = std::min(min_env, s);
  const int k = config.screen_size > 0 ? config.screen_size
                                       : static_cast<int>(std::max<Index>(1, min_env / 2));
  switch (config.screen) {
    case ScreenKind::none:
      model.screened.resize(static_cast<std::size_t>(ds.d()));
      std::iota(model.screened.begin(), model.screened.end(), 0);
      break;
    case ScreenKind::corr:
      model.screened = screen_corr(ds, k);
      break;
    case ScreenKind::lasso:
      model.screened = screen_lasso(ds, k, derive_seed(config.seed, {kScreen}));
      break;
  }

  for (auto& s : generate_sets(static_cast<int>(model.screened.size()), config.n_sets,
                               config.max_set_size, derive_seed(config.seed, {kSets}))) {
    Subset mapped;
    for (int p : s) mapped.push_back(model.screened[static_cast<std::size_t>(p)]);
    model.candidate_sets.push_back(std::move(mapped));
  }
  if (model.candidate_sets.empty()) throw ValidationError("no candidate sets");

  if (config.alpha_stab) {
    StabTest t = StabTest::chow;
    if (config.stab_test == StabTestChoice::scaled_residual ||
        (config.stab_test == StabTestChoice::automatic && ds.n_envs() > 3)) {
      t = StabTest::scaled_residual;
    }
    model.stab_test_used = t;
  }

  // Per-set scoring, independent across sets.
  const std::size_t M = model.candidate_sets.size();
  model.diagnostics.resize(M);
  parallel_for(M, config.jobs, [&](std::size_t i) {
    SetDiagnostics& diag = model.diagnostics[i];
    diag.set = model.candidate_sets[i];
    try {
      const SubsetFit fit = fit_ols(ds, diag.set);
      diag.pred_score = score_from_fit(fit, config.pred_kind);
      if (model.stab_test_used) {
        diag.stab_p =
            *model.stab_test_used == StabTest::chow
                ? chow_test(ds, diag.set).p_value
                : scaled_residual_test(ds, diag.set, config.b_resample,
                                       derive_seed(config.seed, {kStab, i}))
                      .p_value;
      }
      diag.fitted = true;
    } catch (const Error& e) {
      diag.fitted = false;
      diag.error = e.what();
    }
  });

  std::vector<std::size_t> fitted;
  for (std::size_t i = 0; i < M; ++i) {
    if (model.diagnostics[i].fitted) {
      fitted.push_back(i);
    } else {
      ++model.failed_sets;
    }
  }
  if (fitted.empty()) throw NumericalError("no candidate set could be fitted");

  for (std::size_t i : fitted) {
    if (!config.alpha_stab || model.diagnostics[i].stab_p >= *config.alpha_stab) {
      model.stable.push_back(i);
    }
  }
  if (model.stable.empty()) {
    model.no_stable_sets = true;
    std::vector<Subset> sets;
    std::vector<double> ps;
    for (std::size_t i : fitted) {
      sets.push_back(model.candidate_sets[i]);
      ps.push_back(model.diagnostics[i].stab_p);
    }
    model.stable.push_back(fitted[best_candidate(sets, ps)]);
  }
  for (std::size_t i : model.stable) model.diagnostics[i].stable = true;

  std::vector<Subset> stable_sets;
  std::vector<double> stable_scores;
  for (std::size_t i : model.stable) {
    stable_sets.push_back(model.candidate_sets[i]);
    stable_scores.push_back(model.diagnostics[i].pred_score);
  }
  if (config.alpha_pred) {
    model.cutoff = bootstrap_cutoff(ds, stable_sets, stable_scores, config.pred_kind,
                                    config.b_boot, *config.alpha_pred,
                                    derive_seed(config.seed, {kBoot}), config.jobs);
    for (std::size_t pos : filter_optimal(stable_scores, model.cutoff->c_pred)) {
      model.optimal.push_back(model.stable[pos]);
    }
  } else {
    model.optimal = model.stable;
  }
  const double w = 1.0 / static_cast<double>(model.optimal.size());
  for (std::size_t i : model.optimal) {
    model.diagnostics[i].optimal = true;
    model.weights.push_back(w);
    model.fits.push_back(fit_ols(ds, model.candidate_sets[i]));
  }
  return model;
}

Eigen::VectorXd predict_sr(const SRModel& model, const Eigen::MatrixXd& Xnew) {
  if (Xnew.cols() != model.d) {
    throw ValidationError("prediction matrix has " + std::to_string(Xnew.cols()) +
                          " columns; the model was fitted on " + std::to_string(model.d));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(Xnew.rows());
  for (std::size_t k = 0; k < model.fits.size(); ++k) {
    out.noalias() += model.weights[k] * predict(model.fits[k], Xnew);
  }
  return out;
}

Eigen::VectorXd averaged_coefficients(const SRModel& model) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(model.d);
  for (std::size_t k = 0; k < model.fits.size(); ++k) {
    const auto& fit = model.fits[k];
    for (std::size_t a = 0; a < fit.subset.size(); ++a) {
      v(fit.subset[a]) += model.weights[k] * fit.coefs(static_cast<Index>(a));
    }
  }
  return v;
}

ImportanceVector importance_weight(const SRModel& model) {
  ImportanceVector out{ImportanceKind::weight, Eigen::VectorXd::Zero(model.d)};
  for (std::size_t k = 0; k < model.fits.size(); ++k) {
    for (int j : model.fits[k].subset) out.values(j) += model.weights[k];
  }
  return out;
}

ImportanceVector importance_coef(const SRModel& model) {
  ImportanceVector out{ImportanceKind::coef, Eigen::VectorXd::Zero(model.d)};
  for (std::size_t k = 0; k < model.fits.size(); ++k) {
    const auto& fit = model.fits[k];
    for (std::size_t a = 0; a < fit.subset.size(); ++a) {
      out.values(fit.subset[a]) += model.weights[k] * std::abs(fit.coefs(static_cast<Index>(a)));
    }
  }
  return out;
}

ImportanceVector importance_perm(const SRModel& model, const MultiEnvDataset& ds,
                                 int B, std::uint64_t seed) {
  if (B < 1) throw ValidationError("permutation importance needs B >= 1");
  if (ds.d() != model.d) throw ValidationError("dataset does not match the model");
  ImportanceVector out{ImportanceKind::perm, Eigen::VectorXd::Zero(model.d)};
  const double rss = (ds.y() - predict_sr(model, ds.X())).squaredNorm();
  const double denom = std::max(rss, std::numeric_limits<double>::min());
  const auto used = importance_weight(model).values;
  for (int j = 0; j < model.d; ++j) {
    if (used(j) == 0.0) continue;
    Eigen::MatrixXd Xp = ds.X();
    std::vector<Index> perm(static_cast<std::size_t>(ds.n()));
    double acc = 0.0;
    for (int b = 0; b < B; ++b) {
      std::iota(perm.begin(), perm.end(), Index{0});
      Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(j),
                                            static_cast<std::uint64_t>(b)}));
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Index i = 0; i < ds.n(); ++i) Xp(i, j) = ds.X()(perm[static_cast<std::size_t>(i)], j);
      const double rss_b = (ds.y() - predict_sr(model, Xp)).squaredNorm();
      acc += (rss_b - rss) / denom;
    }
    out.values(j) = acc / B;
  }
  return out;
}

ImportanceVector importance_srdiff(const SRModel& sr, const SRModel& srpred,
                                   ImportanceKind kind) {
  if (sr.d != srpred.d) throw ValidationError("models differ in dimension");
  ImportanceVector out{ImportanceKind::srdiff, Eigen::VectorXd()};
  if (kind == ImportanceKind::weight) {
    out.values = importance_weight(srpred).values - importance_weight(sr).values;
  } else if (kind == ImportanceKind::coef) {
    out.values = importance_coef(srpred).values - importance_coef(sr).values;
  } else {
    throw ValidationError("srdiff importance is defined for weight or coef only");
  }
  return out;
}

}  // namespace stabreg
