#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "stabreg/error.hpp"
#include "stabreg/random.hpp"
#include "stabreg/simulations.hpp"
#include "stabreg/stabilized_regression.hpp"

using namespace stabreg;

namespace {

MultiEnvDataset sparse_data(std::uint64_t seed, int n_envs, int n_e, int d,
                            const std::vector<std::pair<int, double>>& support, double noise_sd) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g;
  const int n = n_envs * n_e;
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  std::vector<std::string> env;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) X(i, j) = g(rng);
    double v = 0.3;
    for (auto [j, b] : support) v += b * X(i, j);
    y(i) = v + noise_sd * g(rng);
    env.push_back("e" + std::to_string(i / n_e));
  }
  return MultiEnvDataset(X, y, env);
}

SRConfig exhaustive_config() {
  SRConfig c;
  c.screen = ScreenKind::none;
  c.n_sets.reset();
  c.stab_test = StabTestChoice::chow;
  return c;
}

// Every subset is selected, each with its own coefficients.
SRModel random_model(std::uint64_t seed, const MultiEnvDataset& ds) {
  SRConfig c = exhaustive_config();
  c.alpha_stab.reset();
  c.alpha_pred.reset();
  c.seed = seed;
  return fit_sr(ds, c);
}

}  // namespace

TEST_CASE("screen_corr") {
  const auto ds = sparse_data(1, 2, 50, 6, {}, 1.0);
  const MultiEnvDataset copy3 = ds.with_data(ds.X(), ds.X().col(3));
  CHECK(screen_corr(copy3, 1) == std::vector<int>{3});
  CHECK(screen_corr(ds, 6) == std::vector<int>{0, 1, 2, 3, 4, 5});
  CHECK(screen_corr(ds, 10).size() == 6);

  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = sparse_data(10 + s, 2, 30, 8, {{1, 0.5}, {4, -0.4}}, 1.0);
    std::vector<std::pair<double, int>> ranked;
    for (int j = 0; j < 8; ++j) {
      const double c = std::abs(
          (r.X().col(j).array() - r.X().col(j).mean()).matrix().dot((r.y().array() - r.y().mean()).matrix()) /
          std::sqrt((r.X().col(j).array() - r.X().col(j).mean()).square().sum() *
                    (r.y().array() - r.y().mean()).square().sum()));
      ranked.emplace_back(-c, j);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<int> expect;
    for (int k = 0; k < 3; ++k) expect.push_back(ranked[static_cast<std::size_t>(k)].second);
    std::sort(expect.begin(), expect.end());
    CHECK(screen_corr(r, 3) == expect);
  }
}

TEST_CASE("screen_lasso keeps a strong sparse signal") {
  int hits = 0;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const auto ds = sparse_data(200 + s, 2, 100, 20, {{2, 1.0}, {7, -1.0}, {15, 0.8}}, 1.0);
    const auto kept = screen_lasso(ds, 5, s);
    CHECK(kept.size() == 5);
    const std::vector<int> truth{2, 7, 15};
    hits += std::includes(kept.begin(), kept.end(), truth.begin(), truth.end());
  }
  CHECK(hits >= 38);
  const auto ds = sparse_data(3, 2, 20, 4, {{0, 1.0}}, 1.0);
  CHECK(screen_lasso(ds, 4, 0) == std::vector<int>{0, 1, 2, 3});
  CHECK(screen_lasso(ds, 9, 0).size() == 4);
}

TEST_CASE("screen_lasso entry order on an orthonormal design follows |X'y|") {
  // Columns of an 8 x 8 Hadamard matrix are orthogonal with equal norm, so the
  // lasso path enters variables in order of decreasing |x_j' y|.
  Eigen::MatrixXd H(8, 8);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) H(i, j) = (__builtin_popcount(static_cast<unsigned>(i & j)) % 2) ? -1.0 : 1.0;
  }
  const Eigen::MatrixXd X = H.middleCols(1, 6);
  Eigen::VectorXd y = 0.9 * X.col(0) - 2.0 * X.col(2) + 0.4 * X.col(3) + 1.4 * X.col(5);
  y += 0.05 * H.col(7);
  const MultiEnvDataset ds(X, y, {"a", "a", "a", "a", "b", "b", "b", "b"});
  // |x'y| ranks columns 2, 5, 0, 3, then the two zero columns.
  CHECK(screen_lasso(ds, 1, 0) == std::vector<int>{2});
  CHECK(screen_lasso(ds, 2, 0) == std::vector<int>{2, 5});
  CHECK(screen_lasso(ds, 3, 0) == std::vector<int>{0, 2, 5});
  CHECK(screen_lasso(ds, 4, 0) == std::vector<int>{0, 2, 3, 5});
}

TEST_CASE("generate_sets") {
  const auto all3 = generate_sets(3, std::nullopt, 6, 0);
  CHECK(all3 == std::vector<Subset>{{}, {0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}});
  CHECK_THROWS_AS(generate_sets(16, std::nullopt, 6, 0), ValidationError);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto sets = generate_sets(25, 300, 4, s);
    CHECK(sets.size() == 300);
    CHECK(std::set<Subset>(sets.begin(), sets.end()).size() == sets.size());
    CHECK(sets[0].empty());
    for (int j = 0; j < 25; ++j) CHECK(std::find(sets.begin(), sets.end(), Subset{j}) != sets.end());
    for (const auto& S : sets) {
      CHECK(S.size() <= 4);
      CHECK(std::is_sorted(S.begin(), S.end()));
    }
  }
  // Universe smaller than n_sets: every set of size <= 2 out of 5.
  CHECK(generate_sets(5, 1000, 2, 0).size() == 1 + 5 + 10);
  CHECK(generate_sets(5, 7, 3, 4) == generate_sets(5, 7, 3, 4));
}

TEST_CASE("stabilized regression on the two-variable toy model") {
  int good = 0;
  const int seeds = 40;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const auto sim = gen_toy(1, {-2.0, 2.0}, {-10.0, 10.0}, 2000, s);
    SRConfig c = exhaustive_config();
    c.seed = s;
    const auto m = fit_sr(sim.train, c);
    std::set<Subset> stable;
    for (std::size_t i : m.stable) stable.insert(m.candidate_sets[i]);
    const bool ok = stable.count({}) && stable.count({0}) && !stable.count({1}) && !stable.count({0, 1});
    std::vector<Subset> optimal;
    for (std::size_t i : m.optimal) optimal.push_back(m.candidate_sets[i]);
    const Eigen::VectorXd b = averaged_coefficients(m);
    good += ok && optimal == std::vector<Subset>{{0}} && std::abs(b(0) - 1.0) <= 0.05 &&
            std::abs(b(1)) <= 0.05;
  }
  CHECK(good >= 0.95 * seeds);
}

TEST_CASE("without either filter every candidate set gets the same weight") {
  const auto ds = sparse_data(4, 3, 40, 4, {{0, 1.0}}, 1.0);
  SRConfig c = exhaustive_config();
  c.alpha_stab.reset();
  c.alpha_pred.reset();
  const auto m = fit_sr(ds, c);
  CHECK(m.optimal.size() == 16);
  for (double w : m.weights) CHECK(w == doctest::Approx(1.0 / 16));
  CHECK_FALSE(m.cutoff.has_value());
  CHECK_FALSE(m.stab_test_used.has_value());
}

TEST_CASE("predict_sr and averaged coefficients match explicit sums") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto ds = sparse_data(40 + s, 3, 30, 4, {{0, 1.0}, {2, 0.3}}, 1.0);
    const auto m = random_model(s, ds);
    REQUIRE(m.optimal.size() >= 2);
    const auto Xnew = sparse_data(90 + s, 1, 7, 4, {}, 1.0).X();
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(7);
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd abs_coef = Eigen::VectorXd::Zero(4);
    const double w = 1.0 / static_cast<double>(m.optimal.size());
    for (std::size_t i : m.optimal) {
      const Subset& S = m.candidate_sets[i];
      Eigen::MatrixXd XS(ds.n(), static_cast<Index>(S.size()));
      Eigen::MatrixXd XnS(7, static_cast<Index>(S.size()));
      for (std::size_t a = 0; a < S.size(); ++a) {
        XS.col(static_cast<Index>(a)) = ds.X().col(S[a]);
        XnS.col(static_cast<Index>(a)) = Xnew.col(S[a]);
      }
      const Eigen::VectorXd b = oracle::ols_normal_equations(XS, ds.y());
      pred += w * ((XnS * b.tail(static_cast<Index>(S.size()))).array() + b(0)).matrix();
      for (std::size_t a = 0; a < S.size(); ++a) {
        coef(S[a]) += w * b(static_cast<Index>(a) + 1);
        abs_coef(S[a]) += w * std::abs(b(static_cast<Index>(a) + 1));
        weight(S[a]) += w;
      }
    }
    CHECK((predict_sr(m, Xnew) - pred).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((averaged_coefficients(m) - coef).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((importance_weight(m).values - weight).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((importance_coef(m).values - abs_coef).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("importance edge cases") {
  const auto ds = sparse_data(7, 2, 60, 5, {{1, 2.0}}, 0.1);
  SRConfig c;
  c.screen = ScreenKind::corr;
  c.screen_size = 2;
  c.n_sets.reset();
  c.alpha_stab.reset();
  c.alpha_pred.reset();
  const auto m = fit_sr(ds, c);
  for (int j = 0; j < 5; ++j) {
    if (std::find(m.screened.begin(), m.screened.end(), j) == m.screened.end()) {
      CHECK(importance_weight(m).values(j) == 0.0);
      CHECK(importance_coef(m).values(j) == 0.0);
    }
  }

  // A single optimal set: its prediction, weight 1 on its members.
  SRConfig one = exhaustive_config();
  one.alpha_stab.reset();
  one.alpha_pred = 1.0;  // cutoff at the best score keeps only the best set
  const auto ds1 = sparse_data(8, 2, 200, 2, {{0, 3.0}}, 0.01);
  const auto m1 = fit_sr(ds1, one);
  REQUIRE(m1.optimal.size() == 1);
  const auto fit = fit_ols(ds1, m1.candidate_sets[m1.optimal[0]]);
  CHECK((predict_sr(m1, ds1.X()) - predict(fit, ds1.X())).cwiseAbs().maxCoeff() <= 1e-12);
  for (int j : fit.subset) CHECK(importance_weight(m1).values(j) == doctest::Approx(1.0));

  // Two identical fits with weight 1/2 each average to either one.
  SRModel twin = m1;
  twin.fits.push_back(twin.fits[0]);
  twin.weights = {0.5, 0.5};
  CHECK((predict_sr(twin, ds1.X()) - predict_sr(m1, ds1.X())).cwiseAbs().maxCoeff() <= 1e-12);
  const double c0 = twin.fits[0].coefs(0);
  CHECK(importance_coef(twin).values(twin.fits[0].subset[0]) == doctest::Approx(std::abs(c0)));

  CHECK_THROWS_AS(predict_sr(m1, Eigen::MatrixXd::Zero(3, 5)), ValidationError);
}

TEST_CASE("permutation importance") {
  Rng rng = make_rng(12);
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(500, 3);
  for (Index i = 0; i < 500; ++i) {
    for (Index j = 0; j < 3; ++j) X(i, j) = g(rng);
  }
  std::vector<std::string> env(500, "a");
  std::fill(env.begin() + 250, env.end(), "b");
  Eigen::VectorXd y = 2.0 * X.col(1);
  y += 1e-3 * Eigen::VectorXd::NullaryExpr(500, [&](Index) { return g(rng); });
  const MultiEnvDataset ds(X, y, env);
  SRConfig c = exhaustive_config();
  c.alpha_stab.reset();
  c.alpha_pred = 0.01;
  const auto m = fit_sr(ds, c);
  const auto imp = importance_perm(m, ds, 5, 3);
  CHECK(imp.values(1) > 10.0);
  const auto weight = importance_weight(m).values;
  for (int j = 0; j < 3; ++j) {
    if (weight(j) == 0.0) CHECK(imp.values(j) == 0.0);
  }
  CHECK(importance_perm(m, ds, 5, 3).values == imp.values);
  CHECK_THROWS_AS(importance_perm(m, ds, 0, 3), ValidationError);
}

TEST_CASE("srdiff importance") {
  const auto ds = sparse_data(2, 2, 50, 3, {{0, 1.0}}, 1.0);
  const auto m = random_model(1, ds);
  CHECK(importance_srdiff(m, m, ImportanceKind::weight).values.isZero());
  CHECK(importance_srdiff(m, m, ImportanceKind::coef).values.isZero());
  CHECK_THROWS_AS(importance_srdiff(m, m, ImportanceKind::perm), ValidationError);

  SRModel only_pred = m;
  only_pred.fits = {fit_ols(ds, {2})};
  only_pred.weights = {1.0};
  SRModel none = m;
  none.fits = {fit_ols(ds, {})};
  none.weights = {1.0};
  CHECK(importance_srdiff(none, only_pred, ImportanceKind::weight).values(2) > 0.0);

  int ok = 0;
  const int seeds = 20;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const auto sim = gen_toy(1, {-2.0, 2.0}, {-10.0, 10.0}, 2000, 500 + s);
    SRConfig c = exhaustive_config();
    c.seed = s;
    const auto sr = fit_sr(sim.train, c);
    const auto pred = fit_sr(sim.train, srpred_variant(c));
    const auto diff = importance_srdiff(sr, pred, ImportanceKind::weight).values;
    ok += diff(1) > 0.0 && std::abs(diff(0)) <= 0.05;
  }
  CHECK(ok >= 0.9 * seeds);
}

TEST_CASE("fit_sr bookkeeping") {
  const auto ds = sparse_data(30, 4, 40, 5, {{0, 1.0}, {3, -1.0}}, 1.0);
  SRConfig c;
  c.b_resample = 99;
  c.b_boot = 30;
  c.seed = 5;
  const auto m = fit_sr(ds, c);
  CHECK(m.stab_test_used == StabTest::scaled_residual);  // four environments
  CHECK(m.diagnostics.size() == m.candidate_sets.size());
  CHECK(m.weights.size() == m.optimal.size());
  double total = 0.0;
  for (double w : m.weights) total += w;
  CHECK(total == doctest::Approx(1.0));
  for (std::size_t i : m.optimal) {
    CHECK(std::find(m.stable.begin(), m.stable.end(), i) != m.stable.end());
    CHECK(m.diagnostics[i].optimal);
  }
  for (std::size_t i : m.stable) CHECK(m.diagnostics[i].stab_p >= 0.05);

  c.jobs = 3;
  const auto par = fit_sr(ds, c);
  CHECK(par.optimal == m.optimal);
  CHECK(predict_sr(par, ds.X()) == predict_sr(m, ds.X()));

  const auto pv = srpred_variant(c);
  CHECK_FALSE(pv.alpha_stab.has_value());
  CHECK(pv.pred_kind == PredKind::min_env);
}

TEST_CASE("fit_sr falls back to the most stable set when none pass") {
  // Strong environment-specific intercepts make every set unstable.
  Rng rng = make_rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(200, 2);
  Eigen::VectorXd y(200);
  std::vector<std::string> env;
  for (int i = 0; i < 200; ++i) {
    X(i, 0) = g(rng);
    X(i, 1) = g(rng);
    y(i) = X(i, 0) + (i < 100 ? 5.0 : -5.0) + 0.1 * g(rng);
    env.push_back(i < 100 ? "a" : "b");
  }
  SRConfig c = exhaustive_config();
  const auto m = fit_sr(MultiEnvDataset(X, y, env), c);
  CHECK(m.no_stable_sets);
  CHECK(m.stable.size() == 1);
  CHECK(m.optimal.size() == 1);
}

TEST_CASE("fit_sr validation") {
  const auto ds = sparse_data(1, 1, 30, 2, {}, 1.0);
  CHECK_THROWS_AS(fit_sr(ds, SRConfig{}), ValidationError);
  SRConfig bad;
  bad.alpha_stab = 1.5;
  CHECK_THROWS_AS(fit_sr(sparse_data(1, 2, 30, 2, {}, 1.0), bad), ValidationError);
  bad = SRConfig{};
  bad.b_boot = 5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK(stab_test_choice_from_string(to_string(StabTestChoice::automatic)) == StabTestChoice::automatic);
  CHECK(screen_kind_from_string(to_string(ScreenKind::lasso)) == ScreenKind::lasso);
  CHECK_THROWS_AS(screen_kind_from_string("top"), InputError);
}
