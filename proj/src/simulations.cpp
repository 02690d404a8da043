#include "stabreg/simulations.hpp"

#include <algorithm>
#include <numeric>

#include "stabreg/error.hpp"
#include "stabreg/random.hpp"

namespace stabreg {

std::string to_string(SimKind k) {
  switch (k) {
    case SimKind::sim1: return "sim1";
    case SimKind::sim2: return "sim2";
    case SimKind::toy: return "toy";
  }
  return "sim1";
}

SimKind sim_kind_from_string(const std::string& s) {
  if (s == "sim1") return SimKind::sim1;
  if (s == "sim2") return SimKind::sim2;
  if (s == "toy") return SimKind::toy;
  throw InputError("unknown design '" + s + "' (expected sim1, sim2 or toy)");
}

SimDesign SimDesign::sim1() { return SimDesign{}; }

SimDesign SimDesign::sim2(int d) {
  SimDesign s;
  s.kind = SimKind::sim2;
  s.d = d;
  s.n_per_env = 100;
  return s;
}

SimDesign SimDesign::toy(int toy_case) {
  SimDesign s;
  s.kind = SimKind::toy;
  s.toy_case = toy_case;
  s.d = toy_case == 1 ? 3 : 4;
  s.n_per_env = 2000;
  s.n_train_env = 2;
  s.n_test_env = 2;
  s.noise_var = 1.0;
  return s;
}

void SimDesign::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError(m); };
  if (d < 2) fail("design needs at least one predictor");
  if (n_per_env < 2) fail("n_per_env must be at least 2");
  if (n_train_env < 1 || n_test_env < 1) fail("environment counts must be positive");
  if (!(train_shift_lo <= train_shift_hi) || !(test_shift_lo <= test_shift_hi)) {
    fail("shift ranges must be ordered");
  }
  if (!(noise_var > 0.0)) fail("noise_var must be positive");
  if (!(0.0 <= weight_lo && weight_lo <= weight_hi)) fail("weight range must be ordered");
  if (kind == SimKind::sim1 && (n_intervened < 0 || n_intervened > d - 1)) {
    fail("n_intervened out of range");
  }
  if (max_parents < 0) fail("max_parents must be nonnegative");
  if (edge_prob > 1.0) fail("edge_prob must lie in [0, 1]");
  if (!(0.0 <= child_intervention_prob && child_intervention_prob <= 1.0)) {
    fail("child_intervention_prob must lie in [0, 1]");
  }
  if (toy_case != 1 && toy_case != 2) fail("toy case must be 1 or 2");
}

namespace {

double draw_weight(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  const double w = mag(rng);
  return sign(rng) ? w : -w;
}

// Relabels a DAG over causal positions so that `response_pos` becomes node 0
// and the remaining positions get node ids 1..D-1 in random order.
std::vector<int> node_ids(int D, int response_pos, Rng& rng) {
  std::vector<int> others(static_cast<std::size_t>(D - 1));
  std::iota(others.begin(), others.end(), 1);
  std::shuffle(others.begin(), others.end(), rng);
  std::vector<int> id(static_cast<std::size_t>(D));
  std::size_t next = 0;
  for (int pos = 0; pos < D; ++pos) {
    id[static_cast<std::size_t>(pos)] = pos == response_pos ? 0 : others[next++];
  }
  return id;
}

LinearSCM empty_scm(int D, double noise_var) {
  LinearSCM scm;
  scm.B = Eigen::MatrixXd::Zero(D, D);
  scm.noise_var = Eigen::VectorXd::Constant(D, noise_var);
  scm.noise_mean = Eigen::VectorXd::Zero(D);
  return scm;
}

std::vector<Eigen::VectorXd> draw_shifts(std::size_t n_targets, int n_env,
                                         double lo, double hi,
                                         std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Eigen::VectorXd> shifts;
  for (int e = 0; e < n_env; ++e) {
    Eigen::VectorXd s(static_cast<Index>(n_targets));
    for (auto& v : s) v = lo == hi ? lo : u(rng);
    shifts.push_back(std::move(s));
  }
  return shifts;
}

SimData assemble(const SimDesign& design, LinearSCM scm, std::uint64_t seed) {
  scm.validate();
  const auto m = scm.targets.size();
  auto train_shifts = draw_shifts(m, design.n_train_env, design.train_shift_lo,
                                  design.train_shift_hi, derive_seed(seed, {1}));
  auto test_shifts = draw_shifts(m, design.n_test_env, design.test_shift_lo,
                                 design.test_shift_hi, derive_seed(seed, {2}));
  auto train = sample_data(scm, train_shifts, design.n_per_env, derive_seed(seed, {3}), "train");
  auto test = sample_data(scm, test_shifts, design.n_per_env, derive_seed(seed, {4}), "test");
  BlanketTruth truth = blankets(scm);
  return SimData{std::move(train), std::move(test), std::move(truth),
                 std::move(scm), std::move(train_shifts), std::move(test_shifts)};
}

}  // namespace

LinearSCM sample_sim1_scm(const SimDesign& design, std::uint64_t seed) {
  design.validate();
  Rng rng = make_rng(derive_seed(seed, {0}));
  const int D = design.d;
  std::uniform_int_distribution<int> pick_y(0, D - 1);
  const int response_pos = pick_y(rng);
  const auto id = node_ids(D, response_pos, rng);
  LinearSCM scm = empty_scm(D, design.noise_var);
  std::uniform_int_distribution<int> n_par(0, design.max_parents);
  for (int pos = 1; pos < D; ++pos) {
    const int k = std::min(n_par(rng), pos);
    std::vector<int> earlier(static_cast<std::size_t>(pos));
    std::iota(earlier.begin(), earlier.end(), 0);
    std::shuffle(earlier.begin(), earlier.end(), rng);
    for (int c = 0; c < k; ++c) {
      const int parent = earlier[static_cast<std::size_t>(c)];
      scm.B(id[static_cast<std::size_t>(pos)], id[static_cast<std::size_t>(parent)]) =
          draw_weight(rng, design.weight_lo, design.weight_hi);
    }
  }
  std::vector<int> candidates(static_cast<std::size_t>(D - 1));
  std::iota(candidates.begin(), candidates.end(), 1);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  scm.targets.assign(candidates.begin(), candidates.begin() + design.n_intervened);
  std::sort(scm.targets.begin(), scm.targets.end());
  return scm;
}

LinearSCM sample_sim2_scm(const SimDesign& design, std::uint64_t seed) {
  design.validate();
  Rng rng = make_rng(derive_seed(seed, {0}));
  const int D = design.d;
  const double p = design.edge_prob > 0.0 ? design.edge_prob : 2.0 / (D - 1);
  int response_pos = 0;
  if (design.response_position == ResponsePosition::random) {
    std::uniform_int_distribution<int> pick_y(0, D - 1);
    response_pos = pick_y(rng);
  }
  const auto id = node_ids(D, response_pos, rng);
  LinearSCM scm = empty_scm(D, design.noise_var);
  // Geometric skipping over the D(D-1)/2 ordered pairs keeps this O(edges).
  std::geometric_distribution<long long> skip(p);
  const long long total = static_cast<long long>(D) * (D - 1) / 2;
  long long idx = p >= 1.0 ? 0 : skip(rng);
  int child = 1;
  long long row_start = 0;  // index of pair (0, child)
  while (idx < total) {
    while (idx >= row_start + child) {
      row_start += child;
      ++child;
    }
    const int parent = static_cast<int>(idx - row_start);
    scm.B(id[static_cast<std::size_t>(child)], id[static_cast<std::size_t>(parent)]) =
        draw_weight(rng, design.weight_lo, design.weight_hi);
    idx += 1 + (p >= 1.0 ? 0 : skip(rng));
  }
  std::bernoulli_distribution intervene(design.child_intervention_prob);
  for (int v = 1; v < D; ++v) {
    if (scm.B(v, 0) != 0.0 && intervene(rng)) scm.targets.push_back(v);
  }
  return scm;
}

LinearSCM toy_scm(int toy_case) {
  if (toy_case != 1 && toy_case != 2) throw ValidationError("toy case must be 1 or 2");
  const int D = toy_case == 1 ? 3 : 4;
  LinearSCM scm = empty_scm(D, 1.0);
  scm.B(0, 1) = 1.0;  // Y := X1 + e
  scm.B(2, 0) = 1.0;  // X2 := Y + I + e
  if (toy_case == 2) scm.B(3, 0) = 1.0;  // X3 := Y + e
  scm.targets = {2};
  return scm;
}

SimData gen_sim1(const SimDesign& design, std::uint64_t seed) {
  return assemble(design, sample_sim1_scm(design, seed), seed);
}

SimData gen_sim2(const SimDesign& design, std::uint64_t seed) {
  return assemble(design, sample_sim2_scm(design, seed), seed);
}

SimData gen_toy(int toy_case, const std::vector<double>& train_shifts,
                const std::vector<double>& test_shifts, int n_per_env,
                std::uint64_t seed) {
  LinearSCM scm = toy_scm(toy_case);
  auto wrap = [](const std::vector<double>& v) {
    std::vector<Eigen::VectorXd> out;
    for (double c : v) out.push_back(Eigen::VectorXd::Constant(1, c));
    return out;
  };
  auto tr = wrap(train_shifts);
  auto te = wrap(test_shifts);
  auto train = sample_data(scm, tr, n_per_env, derive_seed(seed, {3}), "train");
  auto test = sample_data(scm, te, n_per_env, derive_seed(seed, {4}), "test");
  BlanketTruth truth = blankets(scm);
  return SimData{std::move(train), std::move(test), std::move(truth),
                 std::move(scm), std::move(tr), std::move(te)};
}

SimData generate(const SimDesign& design, std::uint64_t seed) {
  switch (design.kind) {
    case SimKind::sim1: return gen_sim1(design, seed);
    case SimKind::sim2: return gen_sim2(design, seed);
    case SimKind::toy:
      design.validate();
      return gen_toy(design.toy_case, design.toy_train_shifts,
                     design.toy_test_shifts, design.n_per_env, seed);
  }
  throw ValidationError("unknown design kind");
}

LinearSCM random_scm(const RandomScmOptions& opt, std::uint64_t seed) {
  if (opt.d < 1 || opt.n_targets < 0 || opt.n_targets > opt.d) {
    throw ValidationError("invalid random SCM options");
  }
  Rng rng = make_rng(seed);
  const int D = opt.d + 1;
  std::uniform_int_distribution<int> pick_y(0, D - 1);
  const int response_pos = pick_y(rng);
  const auto id = node_ids(D, response_pos, rng);
  LinearSCM scm = empty_scm(D, 1.0);
  std::uniform_real_distribution<double> var(opt.var_lo, opt.var_hi);
  for (int v = 0; v < D; ++v) scm.noise_var(v) = var(rng);
  std::bernoulli_distribution edge(opt.edge_prob);
  for (int pos = 1; pos < D; ++pos) {
    for (int parent = 0; parent < pos; ++parent) {
      if (edge(rng)) {
        scm.B(id[static_cast<std::size_t>(pos)], id[static_cast<std::size_t>(parent)]) =
            draw_weight(rng, opt.weight_lo, opt.weight_hi);
      }
    }
  }
  std::vector<int> candidates(static_cast<std::size_t>(opt.d));
  std::iota(candidates.begin(), candidates.end(), 1);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  scm.targets.assign(candidates.begin(), candidates.begin() + opt.n_targets);
  std::sort(scm.targets.begin(), scm.targets.end());
  return scm;
}

}  // namespace stabreg
