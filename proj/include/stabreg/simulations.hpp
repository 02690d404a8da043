#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabreg/dataset.hpp"
#include "stabreg/scm.hpp"

namespace stabreg {

enum class SimKind { sim1, sim2, toy };

std::string to_string(SimKind k);
SimKind sim_kind_from_string(const std::string& s);

// Where the response sits in the sim2 causal order.
enum class ResponsePosition { random, source };

struct SimDesign {
  SimKind kind = SimKind::sim1;
  int d = 11;  // variables including the response
  int n_per_env = 250;
  int n_train_env = 5;
  int n_test_env = 10;
  double train_shift_lo = -1.0;
  double train_shift_hi = 1.0;
  double test_shift_lo = -10.0;
  double test_shift_hi = 10.0;
  double noise_var = 0.25;
  double weight_lo = 0.5;  // |weight| ~ U(weight_lo, weight_hi), random sign
  double weight_hi = 1.5;

  // sim1
  int n_intervened = 4;
  int max_parents = 4;

  // sim2; edge_prob <= 0 means 2 / (d - 1)
  double edge_prob = 0.0;
  double child_intervention_prob = 0.9;
  ResponsePosition response_position = ResponsePosition::random;

  // toy
  int toy_case = 1;
  std::vector<double> toy_train_shifts{-2.0, 2.0};
  std::vector<double> toy_test_shifts{-10.0, 10.0};

  static SimDesign sim1();
  static SimDesign sim2(int d = 201);
  static SimDesign toy(int toy_case);

  void validate() const;
};

struct SimData {
  MultiEnvDataset train;
  MultiEnvDataset test;
  BlanketTruth truth;
  LinearSCM scm;
  std::vector<Eigen::VectorXd> train_shifts;
  std::vector<Eigen::VectorXd> test_shifts;
};

// Graph and weights only; no data drawn.
LinearSCM sample_sim1_scm(const SimDesign& design, std::uint64_t seed);
LinearSCM sample_sim2_scm(const SimDesign& design, std::uint64_t seed);
LinearSCM toy_scm(int toy_case);

SimData gen_sim1(const SimDesign& design, std::uint64_t seed);
SimData gen_sim2(const SimDesign& design, std::uint64_t seed);
SimData gen_toy(int toy_case, const std::vector<double>& train_shifts,
                const std::vector<double>& test_shifts, int n_per_env,
                std::uint64_t seed);
// Dispatch on design.kind.
SimData generate(const SimDesign& design, std::uint64_t seed);

// Random acyclic SCM for oracle checks: `d` predictors, each earlier variable
// in a random causal order is a parent with probability `edge_prob`, weights
// with |w| ~ U(weight_lo, weight_hi) and random sign, noise variances
// ~ U(var_lo, var_hi), and `n_targets` distinct random intervention targets.
struct RandomScmOptions {
  int d = 6;
  double edge_prob = 0.4;
  double weight_lo = 0.5;
  double weight_hi = 1.5;
  double var_lo = 0.25;
  double var_hi = 2.0;
  int n_targets = 2;
};
LinearSCM random_scm(const RandomScmOptions& opt, std::uint64_t seed);

}  // namespace stabreg
