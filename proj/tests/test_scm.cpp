#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "stabreg/error.hpp"
#include "stabreg/random.hpp"
#include "stabreg/scm.hpp"
#include "stabreg/simulations.hpp"

using namespace stabreg;

namespace {

oracle::Parents parents_of(const LinearSCM& scm, bool with_interventions = false) {
  const int n = scm.n_nodes();
  oracle::Parents p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (scm.B(i, j) != 0.0) p[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  if (with_interventions) {
    for (int t : scm.targets) {
      p.emplace_back();
      p[static_cast<std::size_t>(t)].push_back(static_cast<int>(p.size()) - 1);
    }
  }
  return p;
}

std::vector<Eigen::VectorXd> shifts_pm(double c) {
  return {Eigen::VectorXd::Constant(1, -c), Eigen::VectorXd::Constant(1, c)};
}

Eigen::MatrixXd empirical_cov(const MultiEnvDataset& ds) {
  Eigen::MatrixXd A(ds.n(), ds.d() + 1);
  A.col(0) = ds.y();
  A.rightCols(ds.d()) = ds.X();
  const Eigen::MatrixXd C = A.rowwise() - A.colwise().mean();
  return C.transpose() * C / static_cast<double>(ds.n());
}

}  // namespace

TEST_CASE("d-separation hand cases") {
  Dag chain(3);
  chain.add_edge(0, 1);
  chain.add_edge(1, 2);
  CHECK(d_separated(chain, 0, 2, {1}));
  CHECK_FALSE(d_separated(chain, 0, 2, {}));

  Dag collider(3);
  collider.add_edge(0, 1);
  collider.add_edge(2, 1);
  CHECK(d_separated(collider, 0, 2, {}));
  CHECK_FALSE(d_separated(collider, 0, 2, {1}));

  Dag desc(4);  // conditioning on a descendant of the collider opens it
  desc.add_edge(0, 1);
  desc.add_edge(2, 1);
  desc.add_edge(1, 3);
  CHECK_FALSE(d_separated(desc, 0, 2, {3}));

  CHECK_THROWS_AS(d_separated(chain, 0, 0, {}), ValidationError);
  CHECK_THROWS_AS(d_separated(chain, 0, 2, {0}), ValidationError);
}

TEST_CASE("d-separation agrees with path enumeration on random DAGs") {
  Rng rng = make_rng(17);
  for (int rep = 0; rep < 500; ++rep) {
    const int n = std::uniform_int_distribution<int>(3, 8)(rng);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Dag g(n);
    oracle::Parents p(static_cast<std::size_t>(n));
    std::bernoulli_distribution edge(0.35);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (edge(rng)) {
          g.add_edge(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]);
          p[static_cast<std::size_t>(order[static_cast<std::size_t>(b)])].push_back(order[static_cast<std::size_t>(a)]);
        }
      }
    }
    std::uniform_int_distribution<int> node(0, n - 1);
    const int a = node(rng);
    int b = node(rng);
    while (b == a) b = node(rng);
    NodeSet cond;
    std::bernoulli_distribution take(0.3);
    for (int v = 0; v < n; ++v) {
      if (v != a && v != b && take(rng)) cond.push_back(v);
    }
    CHECK(d_separated(g, a, b, cond) == oracle::d_separated_paths(p, a, b, cond));
  }
}

TEST_CASE("toy model stability and blankets") {
  const auto scm = toy_scm(1);
  CHECK(intervention_stable(scm, {}));
  CHECK(intervention_stable(scm, {1}));
  CHECK_FALSE(intervention_stable(scm, {2}));
  CHECK_FALSE(intervention_stable(scm, {1, 2}));

  const auto t1 = blankets(scm);
  CHECK(t1.pa == NodeSet{1});
  CHECK(t1.mb == NodeSet{1, 2});
  CHECK(t1.sb == NodeSet{1});
  CHECK(t1.nsb == NodeSet{2});

  const auto t2 = blankets(toy_scm(2));
  CHECK(t2.mb == NodeSet{1, 2, 3});
  CHECK(t2.sb == NodeSet{1, 3});
  CHECK(t2.nsb == NodeSet{2});
  CHECK(stable_blanket_definitional(toy_scm(2)) == NodeSet{1, 3});
  CHECK(to_columns({1, 3}) == Subset{0, 2});
}

TEST_CASE("blankets agree with graph oracles on random SCMs") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    RandomScmOptions opt;
    opt.d = 2 + static_cast<int>(s % 6);
    opt.n_targets = 1 + static_cast<int>(s % 3) % opt.d;
    const auto scm = random_scm(opt, s);
    const auto t = blankets(scm);
    const auto p = parents_of(scm);
    CHECK(t.mb == oracle::markov_blanket(p, 0));
    CHECK(std::includes(t.mb.begin(), t.mb.end(), t.sb.begin(), t.sb.end()));
    CHECK(std::includes(t.sb.begin(), t.sb.end(), t.pa.begin(), t.pa.end()));
    NodeSet nsb;
    std::set_difference(t.mb.begin(), t.mb.end(), t.sb.begin(), t.sb.end(), std::back_inserter(nsb));
    CHECK(t.nsb == nsb);
    CHECK(stable_blanket_definitional(scm) == t.sb);
    CHECK(oracle::smallest_separating_set(p, 0, t.n_int) == t.sb);
  }
}

TEST_CASE("intervention stability agrees with the path oracle") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    RandomScmOptions opt;
    opt.d = 5;
    opt.n_targets = 2;
    const auto scm = random_scm(opt, 1000 + s);
    const auto p = parents_of(scm, true);
    for (std::uint32_t mask = 0; mask < 32; ++mask) {
      NodeSet S;
      for (int j = 0; j < 5; ++j) {
        if (mask & (1u << j)) S.push_back(j + 1);
      }
      bool expect = true;
      for (std::size_t k = 0; k < scm.targets.size(); ++k) {
        expect = expect && oracle::d_separated_paths(p, scm.n_nodes() + static_cast<int>(k), 0, S);
      }
      CHECK(intervention_stable(scm, S) == expect);
    }
  }
}

TEST_CASE("population covariance") {
  LinearSCM empty;
  empty.B = Eigen::MatrixXd::Zero(3, 3);
  empty.noise_var = Eigen::Vector3d(1.0, 2.0, 0.5);
  empty.noise_mean = Eigen::VectorXd::Zero(3);
  CHECK(population_cov(empty, Eigen::VectorXd(0)).cov.isApprox(Eigen::Matrix3d(empty.noise_var.asDiagonal())));

  // Chain X1 -> X2 -> Y with weights a, b.
  const double a = 0.7;
  const double b = -1.3;
  LinearSCM chain = empty;
  chain.B(2, 1) = a;
  chain.B(0, 2) = b;
  const Eigen::VectorXd v = chain.noise_var;
  const auto C = population_cov(chain, Eigen::VectorXd(0)).cov;
  const double var2 = a * a * v(1) + v(2);
  CHECK(C(1, 1) == doctest::Approx(v(1)));
  CHECK(C(2, 2) == doctest::Approx(var2));
  CHECK(C(0, 0) == doctest::Approx(b * b * var2 + v(0)));
  CHECK(C(0, 2) == doctest::Approx(b * var2));
  CHECK(C(0, 1) == doctest::Approx(a * b * v(1)));

  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto scm = random_scm(RandomScmOptions{}, 50 + s);
    CHECK((population_cov(scm, Eigen::VectorXd::Zero(2)).cov -
           oracle::cov_path_sums(scm.B, scm.noise_var))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
  }

  const auto scm = random_scm(RandomScmOptions{}, 77);
  Eigen::VectorXd shift(2);
  shift << 1.5, -0.5;
  const auto pop = population_cov(scm, shift);
  const auto ds = sample_data(scm, {shift}, 1000000, 3);
  const auto emp = empirical_cov(ds);
  for (int i = 0; i < scm.n_nodes(); ++i) {
    for (int j = 0; j < scm.n_nodes(); ++j) {
      CHECK(std::abs(emp(i, j) - pop.cov(i, j)) <= 0.01 * std::sqrt(pop.cov(i, i) * pop.cov(j, j)));
    }
  }
}

TEST_CASE("toy model moments") {
  const auto scm = toy_scm(1);
  const auto ds = sample_data(scm, {Eigen::VectorXd::Constant(1, 2.0)}, 100000, 5);
  const auto emp = empirical_cov(ds);
  const auto pop = population_cov(scm, Eigen::VectorXd::Constant(1, 2.0));
  CHECK(pop.cov(0, 0) == doctest::Approx(2.0));
  CHECK(emp(0, 0) == doctest::Approx(2.0).epsilon(0.02));
  CHECK(emp(2, 0) == doctest::Approx(pop.cov(2, 0)).epsilon(0.02));
  CHECK(ds.X().col(1).mean() == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("toy model OLS matches the closed form") {
  const auto scm = toy_scm(1);
  for (double c : {0.0, 1.0, 2.0}) {
    const Eigen::Vector2d expect((1 + c * c) / (2 + c * c), 1 / (2 + c * c));
    const auto direct = population_ols_direct(scm, shifts_pm(c));
    const auto closed = population_ols_lemma1(scm, mixture_noise_covariance(scm, shifts_pm(c)));
    CHECK((direct - expect).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((closed - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
  for (double sigma : {1.0, 10.0, 100.0}) {
    const auto beta = population_ols_lemma1(scm, sigma);
    CHECK(beta(1) == doctest::Approx(1.0 / (2.0 + sigma * sigma)).epsilon(1e-12));
  }
  const auto rows = strong_intervention_limit_check(scm, {1.0, 10.0, 100.0});
  CHECK(rows[0].max_outside_sb > rows[1].max_outside_sb);
  CHECK(rows[1].max_outside_sb > rows[2].max_outside_sb);
  CHECK(rows[2].beta(0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("closed-form OLS agrees with moment-based OLS on random SCMs") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    RandomScmOptions opt;
    opt.d = 2 + static_cast<int>(s % 8);
    opt.n_targets = 1;
    const auto scm = random_scm(opt, 300 + s);
    const auto direct = population_ols_direct(scm);
    const auto closed = population_ols_lemma1(scm);
    CHECK((direct - closed).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, direct.cwiseAbs().maxCoeff()));
    const std::vector<Eigen::VectorXd> sh{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 2.0),
                                          Eigen::VectorXd::Constant(1, 0.5)};
    const auto dm = population_ols_direct(scm, sh);
    const auto lm = population_ols_lemma1(scm, mixture_noise_covariance(scm, sh));
    CHECK((dm - lm).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, dm.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("stable sets have environment-invariant population regressions") {
  for (std::uint64_t s = 0; s < 40; ++s) {
    RandomScmOptions opt;
    opt.d = 4 + static_cast<int>(s % 3);
    opt.n_targets = 2;
    const auto scm = random_scm(opt, 600 + s);
    const Eigen::Vector2d e1(2.0, -1.0);
    const Eigen::Vector2d e2(-3.0, 4.0);
    const int d = scm.d();
    for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
      NodeSet S;
      for (int j = 0; j < d; ++j) {
        if (mask & (1u << j)) S.push_back(j + 1);
      }
      if (!intervention_stable(scm, S)) continue;
      const auto r1 = population_regression(scm, e1, S);
      const auto r2 = population_regression(scm, e2, S);
      CHECK(std::abs(r1.intercept - r2.intercept) <= 1e-9);
      if (!S.empty()) CHECK((r1.coefs - r2.coefs).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
}

TEST_CASE("sample_data labels and determinism") {
  const auto scm = toy_scm(2);
  const auto ds = sample_data(scm, shifts_pm(1.0), 10, 4, "train");
  CHECK(ds.env_labels() == std::vector<std::string>{"train_0", "train_1"});
  CHECK(ds.column_names() == std::vector<std::string>{"X1", "X2", "X3"});
  CHECK(sample_data(scm, shifts_pm(1.0), 10, 4, "train").X() == ds.X());
  CHECK_THROWS_AS(sample_data(scm, {}, 10, 4), ValidationError);
}

TEST_CASE("SCM validation") {
  LinearSCM cyc = toy_scm(1);
  cyc.B(1, 2) = 1.0;  // X2 -> X1 closes Y -> X2 -> X1 -> Y
  CHECK_THROWS_AS(cyc.validate(), ValidationError);
  LinearSCM bad = toy_scm(1);
  bad.noise_var(1) = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = toy_scm(1);
  bad.targets = {0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
