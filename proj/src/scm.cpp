#include "stabreg/scm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>

#include "stabreg/error.hpp"
#include "stabreg/random.hpp"

namespace stabreg {

// ---------------------------------------------------------------- Dag

Dag::Dag(int n_nodes)
    : parents_(static_cast<std::size_t>(n_nodes)),
      children_(static_cast<std::size_t>(n_nodes)) {}

int Dag::add_node() {
  parents_.emplace_back();
  children_.emplace_back();
  return size() - 1;
}

void Dag::add_edge(int from, int to) {
  if (from < 0 || to < 0 || from >= size() || to >= size() || from == to) {
    throw ValidationError("invalid edge " + std::to_string(from) + " -> " +
                          std::to_string(to));
  }
  auto& pa = parents_[static_cast<std::size_t>(to)];
  if (std::find(pa.begin(), pa.end(), from) != pa.end()) return;
  pa.push_back(from);
  std::sort(pa.begin(), pa.end());
  auto& ch = children_[static_cast<std::size_t>(from)];
  ch.push_back(to);
  std::sort(ch.begin(), ch.end());
}

std::vector<int> Dag::topological_order() const {
  std::vector<int> indeg(static_cast<std::size_t>(size()));
  for (int v = 0; v < size(); ++v) indeg[static_cast<std::size_t>(v)] = static_cast<int>(parents(v).size());
  std::deque<int> ready;
  for (int v = 0; v < size(); ++v) {
    if (indeg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
  }
  std::vector<int> order;
  while (!ready.empty()) {
    const int v = ready.front();
    ready.pop_front();
    order.push_back(v);
    for (int c : children(v)) {
      if (--indeg[static_cast<std::size_t>(c)] == 0) ready.push_back(c);
    }
  }
  if (static_cast<int>(order.size()) != size()) {
    throw ValidationError("graph contains a directed cycle");
  }
  return order;
}

std::vector<char> Dag::descendants(int v) const {
  std::vector<char> seen(static_cast<std::size_t>(size()), 0);
  std::vector<int> stack{v};
  seen[static_cast<std::size_t>(v)] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int c : children(u)) {
      if (!seen[static_cast<std::size_t>(c)]) {
        seen[static_cast<std::size_t>(c)] = 1;
        stack.push_back(c);
      }
    }
  }
  return seen;
}

// ---------------------------------------------------------------- SCM

void LinearSCM::validate() const {
  const int n = n_nodes();
  if (n < 1 || B.cols() != n || noise_var.size() != n || noise_mean.size() != n) {
    throw ValidationError("SCM matrices have inconsistent shapes");
  }
  if (!B.allFinite() || !noise_mean.allFinite()) {
    throw ValidationError("SCM contains non-finite values");
  }
  for (int i = 0; i < n; ++i) {
    if (!(noise_var(i) > 0.0) || !std::isfinite(noise_var(i))) {
      throw ValidationError("noise variances must be positive");
    }
    if (B(i, i) != 0.0) throw ValidationError("SCM has a self-loop");
  }
  for (int t : targets) {
    if (t < 1 || t >= n) {
      throw ValidationError("intervention target " + std::to_string(t) +
                            " is not a predictor node");
    }
  }
  graph_of(*this).topological_order();
}

Eigen::VectorXd LinearSCM::shifted_mean(const Eigen::VectorXd& shift) const {
  if (shift.size() != static_cast<Index>(targets.size())) {
    throw ValidationError("shift has " + std::to_string(shift.size()) +
                          " components for " + std::to_string(targets.size()) +
                          " targets");
  }
  Eigen::VectorXd m = noise_mean;
  for (std::size_t k = 0; k < targets.size(); ++k) m(targets[k]) += shift(static_cast<Index>(k));
  return m;
}

Dag graph_of(const LinearSCM& scm, bool with_interventions) {
  Dag g(scm.n_nodes());
  for (int i = 0; i < scm.n_nodes(); ++i) {
    for (int j = 0; j < scm.n_nodes(); ++j) {
      if (scm.B(i, j) != 0.0) g.add_edge(j, i);
    }
  }
  if (with_interventions) {
    for (int t : scm.targets) g.add_edge(g.add_node(), t);
  }
  return g;
}

bool d_separated(const Dag& g, int a, int b, const NodeSet& cond) {
  const auto n = static_cast<std::size_t>(g.size());
  if (a < 0 || b < 0 || a >= g.size() || b >= g.size()) {
    throw ValidationError("d-separation query references an unknown node");
  }
  std::vector<char> in_cond(n, 0);
  for (int c : cond) {
    if (c < 0 || c >= g.size()) throw ValidationError("unknown conditioning node");
    in_cond[static_cast<std::size_t>(c)] = 1;
  }
  if (a == b || in_cond[static_cast<std::size_t>(a)] || in_cond[static_cast<std::size_t>(b)]) {
    throw ValidationError("d-separation arguments must be distinct and disjoint");
  }
  // Conditioning nodes and their ancestors.
  std::vector<char> anc(n, 0);
  std::vector<int> stack(cond.begin(), cond.end());
  for (int c : cond) anc[static_cast<std::size_t>(c)] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int p : g.parents(v)) {
      if (!anc[static_cast<std::size_t>(p)]) {
        anc[static_cast<std::size_t>(p)] = 1;
        stack.push_back(p);
      }
    }
  }
  // State: node * 2 + (0 = arrived from a child, 1 = arrived from a parent).
  std::vector<char> visited(2 * n, 0);
  std::vector<int> queue{2 * a};
  visited[static_cast<std::size_t>(2 * a)] = 1;
  auto push = [&](int v, int dir) {
    const auto s = static_cast<std::size_t>(2 * v + dir);
    if (!visited[s]) {
      visited[s] = 1;
      queue.push_back(2 * v + dir);
    }
  };
  while (!queue.empty()) {
    const int s = queue.back();
    queue.pop_back();
    const int v = s / 2;
    const bool from_parent = s % 2 == 1;
    const bool observed = in_cond[static_cast<std::size_t>(v)];
    if (v == b) return false;
    if (!from_parent) {
      if (!observed) {
        for (int p : g.parents(v)) push(p, 0);
        for (int c : g.children(v)) push(c, 1);
      }
    } else {
      if (!observed) {
        for (int c : g.children(v)) push(c, 1);
      }
      if (anc[static_cast<std::size_t>(v)]) {
        for (int p : g.parents(v)) push(p, 0);
      }
    }
  }
  return true;
}

bool intervention_stable(const LinearSCM& scm, const NodeSet& S) {
  const Dag g = graph_of(scm, true);
  for (std::size_t k = 0; k < scm.targets.size(); ++k) {
    const int node = scm.n_nodes() + static_cast<int>(k);
    if (!d_separated(g, node, 0, S)) return false;
  }
  return true;
}

namespace {

NodeSet sorted_unique(NodeSet v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

NodeSet set_minus(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

BlanketTruth blankets(const LinearSCM& scm) {
  const Dag g = graph_of(scm);
  BlanketTruth t;
  t.pa = g.parents(0);
  t.ch = g.children(0);
  NodeSet mb = t.pa;
  for (int c : t.ch) {
    mb.push_back(c);
    for (int p : g.parents(c)) {
      if (p != 0) mb.push_back(p);
    }
  }
  t.mb = sorted_unique(mb);

  std::vector<char> removed(static_cast<std::size_t>(scm.n_nodes()), 0);
  for (int c : t.ch) {
    if (std::binary_search(scm.targets.begin(), scm.targets.end(), c) ||
        std::find(scm.targets.begin(), scm.targets.end(), c) != scm.targets.end()) {
      const auto de = g.descendants(c);
      for (std::size_t v = 0; v < de.size(); ++v) {
        if (de[v]) removed[v] = 1;
      }
    }
  }
  for (int j = 1; j < scm.n_nodes(); ++j) {
    if (!removed[static_cast<std::size_t>(j)]) t.n_int.push_back(j);
  }
  auto in_nint = [&](int v) { return v != 0 && !removed[static_cast<std::size_t>(v)]; };
  NodeSet sb = t.pa;
  for (int c : t.ch) {
    if (!in_nint(c)) continue;
    sb.push_back(c);
    for (int p : g.parents(c)) {
      if (in_nint(p)) sb.push_back(p);
    }
  }
  t.sb = sorted_unique(sb);
  t.nsb = set_minus(t.mb, t.sb);
  return t;
}

NodeSet stable_blanket_definitional(const LinearSCM& scm) {
  const Dag g = graph_of(scm);
  const NodeSet universe = blankets(scm).n_int;
  const int m = static_cast<int>(universe.size());
  if (m > 20) throw ValidationError("definitional search limited to 20 nodes");
  for (int size = 0; size <= m; ++size) {
    // Lexicographic combinations of `size` positions.
    std::vector<int> pos(static_cast<std::size_t>(size));
    std::iota(pos.begin(), pos.end(), 0);
    while (true) {
      NodeSet S;
      std::vector<char> chosen(static_cast<std::size_t>(m), 0);
      for (int p : pos) {
        S.push_back(universe[static_cast<std::size_t>(p)]);
        chosen[static_cast<std::size_t>(p)] = 1;
      }
      bool ok = true;
      for (int k = 0; k < m && ok; ++k) {
        if (!chosen[static_cast<std::size_t>(k)]) {
          ok = d_separated(g, universe[static_cast<std::size_t>(k)], 0, S);
        }
      }
      if (ok) return S;
      int i = size - 1;
      while (i >= 0 && pos[static_cast<std::size_t>(i)] == m - size + i) --i;
      if (i < 0) break;
      ++pos[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < size; ++j) {
        pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
  }
  return universe;
}

Subset to_columns(const NodeSet& nodes) {
  Subset out;
  for (int v : nodes) {
    if (v >= 1) out.push_back(v - 1);
  }
  return out;
}

// ------------------------------------------------------- population moments

namespace {

Eigen::MatrixXd total_effects(const LinearSCM& scm) {
  const int n = scm.n_nodes();
  return (Eigen::MatrixXd::Identity(n, n) - scm.B).partialPivLu().inverse();
}

Eigen::VectorXd ols_from_moments(const Eigen::MatrixXd& cov) {
  const Index d = cov.rows() - 1;
  const Eigen::MatrixXd sxx = cov.bottomRightCorner(d, d);
  const Eigen::VectorXd sxy = cov.block(1, 0, d, 1);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sxx);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
    throw SingularDesignError("population predictor covariance is singular");
  }
  return ldlt.solve(sxy);
}

}  // namespace

Moments population_cov(const LinearSCM& scm, const Eigen::VectorXd& shift) {
  const Eigen::MatrixXd M = total_effects(scm);
  Moments m;
  m.cov = M * scm.noise_var.asDiagonal() * M.transpose();
  m.mean = M * scm.shifted_mean(shift);
  return m;
}

Moments population_mixture(const LinearSCM& scm,
                           const std::vector<Eigen::VectorXd>& shifts) {
  if (shifts.empty()) {
    return population_cov(scm, Eigen::VectorXd::Zero(static_cast<Index>(scm.targets.size())));
  }
  const int n = scm.n_nodes();
  Moments mix;
  mix.cov = Eigen::MatrixXd::Zero(n, n);
  mix.mean = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::VectorXd> means;
  for (const auto& s : shifts) {
    const Moments m = population_cov(scm, s);
    mix.cov += m.cov;
    mix.mean += m.mean;
    means.push_back(m.mean);
  }
  const double K = static_cast<double>(shifts.size());
  mix.cov /= K;
  mix.mean /= K;
  for (const auto& mu : means) {
    const Eigen::VectorXd dev = mu - mix.mean;
    mix.cov += dev * dev.transpose() / K;
  }
  return mix;
}

Eigen::VectorXd population_ols_direct(const LinearSCM& scm,
                                      const std::vector<Eigen::VectorXd>& shifts) {
  return ols_from_moments(population_mixture(scm, shifts).cov);
}

Eigen::MatrixXd mixture_noise_covariance(const LinearSCM& scm,
                                         const std::vector<Eigen::VectorXd>& shifts) {
  const int d = scm.d();
  Eigen::MatrixXd D = scm.noise_var.tail(d).asDiagonal();
  if (shifts.empty()) return D;
  const double K = static_cast<double>(shifts.size());
  Eigen::VectorXd center = Eigen::VectorXd::Zero(d);
  for (const auto& s : shifts) center += scm.shifted_mean(s).tail(d);
  center /= K;
  for (const auto& s : shifts) {
    const Eigen::VectorXd dev = scm.shifted_mean(s).tail(d) - center;
    D += dev * dev.transpose() / K;
  }
  return D;
}

Eigen::VectorXd population_ols_lemma1(const LinearSCM& scm,
                                      const Eigen::MatrixXd& D) {
  const int d = scm.d();
  if (D.rows() != d || D.cols() != d) {
    throw ValidationError("predictor noise covariance must be d x d");
  }
  const Eigen::VectorXd b_pa = scm.B.block(0, 1, 1, d).transpose();
  const Eigen::VectorXd b_ch = scm.B.block(1, 0, d, 1);
  const Eigen::MatrixXd B_X = scm.B.bottomRightCorner(d, d);
  const double v0 = scm.noise_var(0);
  Eigen::LLT<Eigen::MatrixXd> llt(D);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("predictor noise covariance is not positive definite");
  }
  const Eigen::VectorXd Dinv_ch = llt.solve(b_ch);
  const double c = b_ch.dot(Dinv_ch);
  const Eigen::MatrixXd M =
      (Eigen::MatrixXd::Identity(d, d) - B_X).transpose() - b_pa * b_ch.transpose();
  return b_pa + M * Dinv_ch * (v0 / (1.0 + v0 * c));
}

Eigen::VectorXd population_ols_lemma1(const LinearSCM& scm) {
  return population_ols_lemma1(scm, mixture_noise_covariance(scm, {}));
}

Eigen::VectorXd population_ols_lemma1(const LinearSCM& scm, double sigma) {
  Eigen::MatrixXd D = mixture_noise_covariance(scm, {});
  for (int t : scm.targets) D(t - 1, t - 1) += sigma * sigma;
  return population_ols_lemma1(scm, D);
}

PopulationRegression population_regression(const LinearSCM& scm,
                                           const Eigen::VectorXd& shift,
                                           const NodeSet& S) {
  const Moments m = population_cov(scm, shift);
  const auto p = static_cast<Index>(S.size());
  Eigen::MatrixXd sxx(p, p);
  Eigen::VectorXd sxy(p);
  Eigen::VectorXd mu(p);
  for (Index a = 0; a < p; ++a) {
    const int va = S[static_cast<std::size_t>(a)];
    sxy(a) = m.cov(va, 0);
    mu(a) = m.mean(va);
    for (Index b = 0; b < p; ++b) sxx(a, b) = m.cov(va, S[static_cast<std::size_t>(b)]);
  }
  PopulationRegression out;
  out.coefs = p == 0 ? Eigen::VectorXd() : Eigen::VectorXd(sxx.ldlt().solve(sxy));
  out.intercept = m.mean(0) - (p == 0 ? 0.0 : mu.dot(out.coefs));
  return out;
}

std::vector<LimitRow> strong_intervention_limit_check(
    const LinearSCM& scm, const std::vector<double>& sigmas) {
  const NodeSet sb = blankets(scm).sb;
  std::vector<LimitRow> rows;
  for (double sigma : sigmas) {
    LimitRow row;
    row.sigma = sigma;
    row.beta = population_ols_lemma1(scm, sigma);
    for (int j = 1; j <= scm.d(); ++j) {
      if (!std::binary_search(sb.begin(), sb.end(), j)) {
        row.max_outside_sb = std::max(row.max_outside_sb, std::abs(row.beta(j - 1)));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

MultiEnvDataset sample_data(const LinearSCM& scm,
                            const std::vector<Eigen::VectorXd>& env_shifts,
                            int n_per_env, std::uint64_t seed,
                            const std::string& label_prefix) {
  scm.validate();
  if (env_shifts.empty()) throw ValidationError("at least one environment is required");
  if (n_per_env < 2) throw ValidationError("each environment needs at least 2 rows");
  const Dag g = graph_of(scm);
  const auto order = g.topological_order();
  const int n_nodes = scm.n_nodes();
  const int d = scm.d();
  const auto K = static_cast<Index>(env_shifts.size());
  const Index n = K * n_per_env;
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  std::vector<int> codes(static_cast<std::size_t>(n));
  std::vector<std::string> labels;
  Eigen::VectorXd sd = scm.noise_var.cwiseSqrt();
  Eigen::VectorXd value(n_nodes);
  for (Index k = 0; k < K; ++k) {
    labels.push_back(label_prefix + "_" + std::to_string(k));
    const Eigen::VectorXd mean = scm.shifted_mean(env_shifts[static_cast<std::size_t>(k)]);
    Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    std::normal_distribution<double> normal;
    for (int r = 0; r < n_per_env; ++r) {
      for (int v : order) {
        double acc = mean(v) + sd(v) * normal(rng);
        for (int p : g.parents(v)) acc += scm.B(v, p) * value(p);
        value(v) = acc;
      }
      const Index row = k * n_per_env + r;
      y(row) = value(0);
      X.row(row) = value.tail(d).transpose();
      codes[static_cast<std::size_t>(row)] = static_cast<int>(k);
    }
  }
  return MultiEnvDataset::from_codes(std::move(X), std::move(y), codes, labels);
}

}  // namespace stabreg
