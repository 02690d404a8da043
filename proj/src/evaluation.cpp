#include "stabreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "stabreg/baselines.hpp"
#include "stabreg/error.hpp"
#include "stabreg/random.hpp"

namespace stabreg {

const std::vector<std::string> kAllMethods = {"SR", "SRpred", "SRdiff", "OLS", "Lasso",
                                              "AR", "ARLasso", "IV", "IVLasso"};

double test_rss(const Eigen::VectorXd& predictions, const MultiEnvDataset& test) {
  if (predictions.size() != test.n()) {
    throw ValidationError("prediction length does not match the test data");
  }
  double total = 0.0;
  for (const auto& rows : test.envs().row_sets) {
    double s = 0.0;
    for (Index i : rows) {
      const double r = test.y()(i) - predictions(i);
      s += r * r;
    }
    total += s / static_cast<double>(rows.size());
  }
  return total / static_cast<double>(test.n_envs());
}

double test_rss(const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& predictor,
                const MultiEnvDataset& test) {
  return test_rss(predictor(test.X()), test);
}

std::string to_string(RecoveryTarget t) {
  switch (t) {
    case RecoveryTarget::mb: return "mb";
    case RecoveryTarget::sb: return "sb";
    case RecoveryTarget::nsb: return "nsb";
  }
  return "mb";
}

namespace {

struct Step {
  int fp = 0;
  int tp = 0;
};

// Cumulative (FP, TP) counts after each tie group of the descending ranking.
std::vector<Step> roc_steps(const Eigen::VectorXd& importance, const Subset& truth,
                            int& positives, int& negatives) {
  const auto d = static_cast<int>(importance.size());
  std::vector<char> is_true(static_cast<std::size_t>(d), 0);
  for (int j : truth) {
    if (j < 0 || j >= d) throw ValidationError("truth index out of range");
    is_true[static_cast<std::size_t>(j)] = 1;
  }
  positives = static_cast<int>(std::count(is_true.begin(), is_true.end(), 1));
  negatives = d - positives;
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return importance(a) > importance(b); });
  std::vector<Step> steps{{0, 0}};
  std::size_t i = 0;
  while (i < order.size()) {
    Step s = steps.back();
    std::size_t j = i;
    while (j < order.size() && importance(order[j]) == importance(order[i])) {
      (is_true[static_cast<std::size_t>(order[j])] ? s.tp : s.fp) += 1;
      ++j;
    }
    steps.push_back(s);
    i = j;
  }
  return steps;
}

}  // namespace

RecoveryCurve roc_from_ranking(const Eigen::VectorXd& importance, const Subset& truth,
                               int max_fp) {
  if (truth.empty()) throw ValidationError("recovery curve needs a nonempty truth set");
  if (max_fp < 1) throw ValidationError("max_fp must be positive");
  int P = 0;
  int N = 0;
  const auto steps = roc_steps(importance, truth, P, N);
  RecoveryCurve curve;
  if (N == 0) {
    curve.fpr = {0.0, 0.0};
    curve.tpr = {0.0, 1.0};
    curve.pauc = 1.0;
    return curve;
  }
  const int limit = std::min(max_fp, N);
  double area = 0.0;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const Step a = steps[k - 1];
    const Step b = steps[k];
    if (a.fp >= limit) break;
    double x1 = b.fp;
    double y1 = b.tp;
    if (b.fp > limit) {
      const double t = static_cast<double>(limit - a.fp) / (b.fp - a.fp);
      x1 = limit;
      y1 = a.tp + t * (b.tp - a.tp);
    }
    area += 0.5 * (x1 - a.fp) * (a.tp + y1);
    curve.fpr.push_back(x1 / N);
    curve.tpr.push_back(y1 / P);
  }
  // Flat tail up to the window edge when every variable was ranked earlier.
  const double last_x = curve.fpr.back() * N;
  if (last_x < limit) {
    area += (limit - last_x) * curve.tpr.back() * P;
    curve.fpr.push_back(static_cast<double>(limit) / N);
    curve.tpr.push_back(curve.tpr.back());
  }
  curve.pauc = area / (static_cast<double>(P) * limit);
  return curve;
}

std::vector<double> default_fpr_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 10; ++k) g.push_back(k / 10.0);
  return g;
}

std::vector<double> tpr_at(const Eigen::VectorXd& importance, const Subset& truth,
                           const std::vector<double>& grid) {
  if (truth.empty()) throw ValidationError("recovery curve needs a nonempty truth set");
  int P = 0;
  int N = 0;
  const auto steps = roc_steps(importance, truth, P, N);
  std::vector<double> out;
  for (double f : grid) {
    if (N == 0) {
      out.push_back(1.0);
      continue;
    }
    const double x = f * N;
    double y = 0.0;
    for (std::size_t k = 1; k < steps.size(); ++k) {
      const Step a = steps[k - 1];
      const Step b = steps[k];
      if (b.fp <= x) {
        y = b.tp;
      } else {
        if (a.fp < x) y = a.tp + (x - a.fp) / (b.fp - a.fp) * (b.tp - a.tp);
        break;
      }
    }
    out.push_back(y / P);
  }
  return out;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ValidationError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string dataset_hash(const MultiEnvDataset& ds, std::uint64_t basis) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ basis;
  auto feed = [&](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  feed(ds.X().data(), static_cast<std::size_t>(ds.X().size()) * sizeof(double));
  feed(ds.y().data(), static_cast<std::size_t>(ds.y().size()) * sizeof(double));
  for (int c : ds.env_codes()) feed(&c, sizeof c);
  for (const auto& l : ds.env_labels()) feed(l.data(), l.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string stratum_name(bool mb_equals_sb) { return mb_equals_sb ? "mb_eq_sb" : "mb_neq_sb"; }

SRConfig benchmark_sr_config(const SimDesign& design) {
  SRConfig c;
  c.alpha_stab = 0.01;
  c.alpha_pred = 0.01;
  c.stab_test = StabTestChoice::scaled_residual;
  c.pred_kind = PredKind::pooled;
  c.n_sets.reset();
  c.b_boot = 100;
  c.b_resample = 999;
  if (design.d - 1 > kMaxExhaustiveDim) {
    c.screen = ScreenKind::lasso;
    c.screen_size = 10;
  } else {
    c.screen = ScreenKind::none;
  }
  return c;
}

namespace {

void record_recovery(MethodRecord& rec, const Eigen::VectorXd& importance,
                     const RepRecord& rep, int max_fp) {
  const std::pair<const char*, const Subset*> targets[] = {
      {"mb", &rep.mb}, {"sb", &rep.sb}, {"nsb", &rep.nsb}};
  for (const auto& [name, truth] : targets) {
    if (truth->empty()) continue;
    rec.pauc[name] = roc_from_ranking(importance, *truth, max_fp).pauc;
    rec.tpr[name] = tpr_at(importance, *truth, default_fpr_grid());
  }
}

void summarize(MethodRecord& rec, const SRModel& m) {
  rec.summary["n_candidate_sets"] = static_cast<double>(m.candidate_sets.size());
  rec.summary["n_stable_sets"] = static_cast<double>(m.stable.size());
  rec.summary["n_optimal_sets"] = static_cast<double>(m.optimal.size());
  rec.summary["no_stable_sets"] = m.no_stable_sets ? 1.0 : 0.0;
  if (m.cutoff) rec.summary["c_pred"] = m.cutoff->c_pred;
  const Eigen::VectorXd c = averaged_coefficients(m);
  rec.coefs.assign(c.data(), c.data() + c.size());
}

void summarize(MethodRecord& rec, const BaselineModel& b) {
  rec.summary["intercept"] = b.intercept;
  if (b.method != BaselineMethod::ols && b.method != BaselineMethod::lasso) {
    rec.summary["gamma"] = b.gamma;
  }
  if (b.method == BaselineMethod::lasso || b.method == BaselineMethod::anchor_lasso ||
      b.method == BaselineMethod::iv_lasso) {
    rec.summary["lambda"] = b.lambda;
  }
  rec.coefs.assign(b.coefs.data(), b.coefs.data() + b.coefs.size());
}

RepRecord run_rep(const BenchmarkOptions& opt, int rep) {
  RepRecord r;
  r.rep = rep;
  r.seed = derive_seed(opt.seed, {static_cast<std::uint64_t>(rep)});
  const SimData data = generate(opt.design, r.seed);
  r.mb = to_columns(data.truth.mb);
  r.sb = to_columns(data.truth.sb);
  r.nsb = to_columns(data.truth.nsb);
  r.mb_equals_sb = r.mb == r.sb;
  r.data_hash = dataset_hash(data.train, 1) + dataset_hash(data.test, 2);

  SRConfig sr_cfg = opt.sr;
  sr_cfg.jobs = 1;
  sr_cfg.seed = derive_seed(r.seed, {100});
  const SRConfig pred_cfg = srpred_variant(sr_cfg);
  std::optional<SRModel> sr_model;
  std::optional<SRModel> pred_model;
  std::string sr_error;
  std::string pred_error;
  auto need = [&](const char* m) {
    return std::find(opt.methods.begin(), opt.methods.end(), m) != opt.methods.end();
  };
  if (need("SR") || need("SRdiff")) {
    try {
      sr_model = fit_sr(data.train, sr_cfg);
    } catch (const Error& e) {
      sr_error = e.what();
    }
  }
  if (need("SRpred") || need("SRdiff")) {
    try {
      pred_model = fit_sr(data.train, pred_cfg);
    } catch (const Error& e) {
      pred_error = e.what();
    }
  }

  for (std::size_t k = 0; k < opt.methods.size(); ++k) {
    const std::string& m = opt.methods[k];
    MethodRecord rec;
    rec.method = m;
    rec.data_hash = dataset_hash(data.train, 1) + dataset_hash(data.test, 2);
    const std::uint64_t mseed = derive_seed(r.seed, {200 + k});
    try {
      if (m == "SR" || m == "SRpred") {
        const auto& model = m == "SR" ? sr_model : pred_model;
        if (!model) throw NumericalError(m == "SR" ? sr_error : pred_error);
        rec.test_rss = test_rss(predict_sr(*model, data.test.X()), data.test);
        record_recovery(rec, importance_coef(*model).values, r, opt.max_fp);
        summarize(rec, *model);
      } else if (m == "SRdiff") {
        if (!sr_model || !pred_model) {
          throw NumericalError(!sr_model ? sr_error : pred_error);
        }
        record_recovery(rec, importance_srdiff(*sr_model, *pred_model, ImportanceKind::coef).values,
                        r, opt.max_fp);
      } else {
        BaselineModel b;
        if (m == "OLS") {
          b = fit_pooled_ols(data.train);
        } else if (m == "Lasso") {
          b = fit_lasso_baseline(data.train, mseed);
        } else if (m == "AR") {
          b = cv_anchor_gamma(data.train, default_gamma_grid(), false, mseed);
        } else if (m == "ARLasso") {
          b = cv_anchor_gamma(data.train, default_gamma_grid(), true, mseed);
        } else if (m == "IV") {
          b = fit_iv(data.train, false, mseed);
        } else if (m == "IVLasso") {
          b = fit_iv(data.train, true, mseed);
        } else {
          throw InputError("unknown method '" + m + "'");
        }
        rec.test_rss = test_rss(predict(b, data.test.X()), data.test);
        record_recovery(rec, b.importance, r, opt.max_fp);
        summarize(rec, b);
      }
    } catch (const InputError&) {
      throw;
    } catch (const Error& e) {
      rec.error = e.what();
      rec.test_rss.reset();
      rec.pauc.clear();
      rec.tpr.clear();
      rec.summary.clear();
      rec.coefs.clear();
    }
    r.methods.push_back(std::move(rec));
  }
  return r;
}

}  // namespace

BenchmarkResult run_benchmark(const BenchmarkOptions& options) {
  if (options.n_reps < 1) throw ValidationError("benchmark needs at least one repetition");
  if (options.jobs < 1) throw ValidationError("jobs must be positive");
  for (const auto& m : options.methods) {
    if (std::find(kAllMethods.begin(), kAllMethods.end(), m) == kAllMethods.end()) {
      throw InputError("unknown method '" + m + "'");
    }
  }
  options.design.validate();
  options.sr.validate();
  BenchmarkResult result;
  result.options = options;
  result.reps.resize(static_cast<std::size_t>(options.n_reps));
  parallel_for(result.reps.size(), options.jobs, [&](std::size_t i) {
    result.reps[i] = run_rep(options, static_cast<int>(i));
  });
  for (std::size_t k = 0; k < options.methods.size(); ++k) {
    int failures = 0;
    for (const auto& r : result.reps) failures += r.methods[k].error.empty() ? 0 : 1;
    if (failures * 10 > options.n_reps) result.flagged_methods.push_back(options.methods[k]);
  }
  return result;
}

BenchmarkAggregates aggregate(const BenchmarkResult& result) {
  BenchmarkAggregates agg;
  const auto& methods = result.options.methods;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    for (const char* stratum : {"mb_eq_sb", "mb_neq_sb", "all"}) {
      std::vector<double> v;
      for (const auto& r : result.reps) {
        const auto& rec = r.methods[k];
        if (!rec.test_rss) continue;
        if (std::string(stratum) != "all" && stratum_name(r.mb_equals_sb) != stratum) continue;
        v.push_back(*rec.test_rss);
      }
      if (v.empty()) continue;
      agg.prediction.push_back({methods[k], stratum, static_cast<int>(v.size()),
                                quantile(v, 0.5), quantile(v, 0.25), quantile(v, 0.75)});
    }
    for (const char* target : {"mb", "sb", "nsb"}) {
      RecoverySummary s;
      s.method = methods[k];
      s.target = target;
      s.mean_tpr.assign(default_fpr_grid().size(), 0.0);
      for (const auto& r : result.reps) {
        const auto& rec = r.methods[k];
        auto it = rec.pauc.find(target);
        if (it == rec.pauc.end()) continue;
        ++s.count;
        s.mean_pauc += it->second;
        const auto& t = rec.tpr.at(target);
        for (std::size_t g = 0; g < t.size(); ++g) s.mean_tpr[g] += t[g];
      }
      if (s.count == 0) continue;
      s.mean_pauc /= s.count;
      for (double& t : s.mean_tpr) t /= s.count;
      agg.recovery.push_back(std::move(s));
    }
  }
  return agg;
}

}  // namespace stabreg
