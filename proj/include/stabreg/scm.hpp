#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabreg/dataset.hpp"

namespace stabreg {

// Sorted list of node indices.
using NodeSet = std::vector<int>;

// Linear SCM over nodes 0..d: node 0 is the response, nodes 1..d predictors.
//   value = B * value + eps,  eps ~ N(noise_mean + shift, diag(noise_var))
// B(i, j) != 0 means an edge j -> i. Environment shifts act on the noise
// means of `targets` (never node 0), one shift component per target.
struct LinearSCM {
  Eigen::MatrixXd B;
  Eigen::VectorXd noise_var;
  Eigen::VectorXd noise_mean;
  NodeSet targets;

  int n_nodes() const { return static_cast<int>(B.rows()); }
  int d() const { return n_nodes() - 1; }

  // Throws ValidationError on shape mismatch, cycles, nonpositive variances,
  // or a target outside 1..d.
  void validate() const;

  // Noise mean vector with `shift` added on the targets.
  Eigen::VectorXd shifted_mean(const Eigen::VectorXd& shift) const;
};

class Dag {
 public:
  explicit Dag(int n_nodes = 0);
  int size() const { return static_cast<int>(parents_.size()); }
  int add_node();
  void add_edge(int from, int to);
  const std::vector<int>& parents(int v) const { return parents_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& children(int v) const { return children_[static_cast<std::size_t>(v)]; }
  std::vector<int> topological_order() const;  // throws on a cycle
  // Descendants of v, v included.
  std::vector<char> descendants(int v) const;

 private:
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<int>> children_;
};

// Graph of B. With `with_interventions`, node d+1+k is a source pointing at
// targets[k].
Dag graph_of(const LinearSCM& scm, bool with_interventions = false);

// Bayes-ball reachability. a, b must be distinct and outside `cond`.
bool d_separated(const Dag& g, int a, int b, const NodeSet& cond);

// Every intervention node is d-separated from the response given S (predictor
// node indices).
bool intervention_stable(const LinearSCM& scm, const NodeSet& S);

struct BlanketTruth {
  NodeSet pa;
  NodeSet ch;
  NodeSet mb;
  NodeSet sb;
  NodeSet nsb;
  NodeSet n_int;
};

// Graphical characterization: parents, children inside N^int and their other
// parents.
BlanketTruth blankets(const LinearSCM& scm);

// Smallest S within N^int separating the response from the rest of N^int,
// by exhaustive search (ties: lexicographic). Intended for d <= 12.
NodeSet stable_blanket_definitional(const LinearSCM& scm);

// Node indices j in 1..d mapped to dataset columns j - 1.
Subset to_columns(const NodeSet& nodes);

struct Moments {
  Eigen::MatrixXd cov;
  Eigen::VectorXd mean;
};

// Moments of all nodes in one environment.
Moments population_cov(const LinearSCM& scm, const Eigen::VectorXd& shift);

// Equal-weight mixture over environments: mean of covariances plus the
// covariance of the environment means.
Moments population_mixture(const LinearSCM& scm,
                           const std::vector<Eigen::VectorXd>& shifts);

// Population OLS of Y on all predictors, Cov(X)^{-1} Cov(X, Y), under the
// mixture of `shifts` (no shift when empty).
Eigen::VectorXd population_ols_direct(const LinearSCM& scm,
                                      const std::vector<Eigen::VectorXd>& shifts = {});

// Predictor noise covariance (d x d) of the mixture: diag(noise_var) plus
// the dispersion of the target shifts.
Eigen::MatrixXd mixture_noise_covariance(const LinearSCM& scm,
                                         const std::vector<Eigen::VectorXd>& shifts);

// Closed-form OLS in terms of B and the predictor noise covariance D:
//   beta = b_pa + ((I - B_X)' - b_pa b_ch') D^{-1} b_ch * v0 / (1 + v0 b_ch' D^{-1} b_ch)
Eigen::VectorXd population_ols_lemma1(const LinearSCM& scm,
                                      const Eigen::MatrixXd& predictor_noise_cov);
// D = diag(noise_var) of the predictors.
Eigen::VectorXd population_ols_lemma1(const LinearSCM& scm);
// D with intervention variance sigma^2 added on every target.
Eigen::VectorXd population_ols_lemma1(const LinearSCM& scm, double sigma);

// Population regression of Y on X^S (predictor node indices) in a single
// environment.
struct PopulationRegression {
  double intercept = 0.0;
  Eigen::VectorXd coefs;
};
PopulationRegression population_regression(const LinearSCM& scm,
                                           const Eigen::VectorXd& shift,
                                           const NodeSet& S);

struct LimitRow {
  double sigma = 0.0;
  Eigen::VectorXd beta;
  double max_outside_sb = 0.0;
};

// Closed-form OLS with intervention variance sigma^2 on targets, per sigma.
std::vector<LimitRow> strong_intervention_limit_check(
    const LinearSCM& scm, const std::vector<double>& sigmas);

// Per environment, n_per_env rows of (I - B)^{-1} eps with the given shift.
// Column 0 becomes y; node j becomes column "X<j>". Environment k is
// labelled "<prefix>_<k>".
MultiEnvDataset sample_data(const LinearSCM& scm,
                            const std::vector<Eigen::VectorXd>& env_shifts,
                            int n_per_env, std::uint64_t seed,
                            const std::string& label_prefix = "env");

}  // namespace stabreg
