#include "stabreg/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stabreg/error.hpp"

namespace stabreg {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json names_of(const Subset& cols, const std::vector<std::string>& names) {
  Json out = Json::array();
  for (int c : cols) out.push_back(names.at(static_cast<std::size_t>(c)));
  return out;
}

Json vec(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(number_or_null(v(i)));
  return out;
}

Eigen::VectorXd vec_from(const Json& j) {
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

// Missing or mistyped fields surface as ValidationError rather than the
// library's own exception types.
template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string(what) + ": " + e.what());
  }
}

enum class Kind { object, array, string, number, integer, boolean, number_or_null };

bool has_kind(const Json& v, Kind k) {
  switch (k) {
    case Kind::object: return v.is_object();
    case Kind::array: return v.is_array();
    case Kind::string: return v.is_string();
    case Kind::number: return v.is_number();
    case Kind::integer: return v.is_number_integer();
    case Kind::boolean: return v.is_boolean();
    case Kind::number_or_null: return v.is_number() || v.is_null();
  }
  return false;
}

const Json& field(const Json& j, const std::string& path, const char* key, Kind k) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(path + "." + key + " is missing");
  const Json& v = j.at(key);
  if (!has_kind(v, k)) throw ValidationError(path + "." + key + " has the wrong type");
  return v;
}

void all_of(const Json& arr, const std::string& path, Kind k) {
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!has_kind(arr[i], k)) {
      throw ValidationError(path + "[" + std::to_string(i) + "] has the wrong type");
    }
  }
}

void expect_version(const Json& j, const char* version) {
  const Json& v = field(j, "$", "version", Kind::string);
  if (v.get<std::string>() != version) {
    throw ValidationError("unsupported version '" + v.get<std::string>() + "', expected '" +
                          version + "'");
  }
}

}  // namespace

Json to_json(const SRConfig& c) {
  Json j;
  j["alpha_stab"] = c.alpha_stab ? Json(*c.alpha_stab) : Json("off");
  j["alpha_pred"] = c.alpha_pred ? Json(*c.alpha_pred) : Json("off");
  j["stab_test"] = to_string(c.stab_test);
  j["pred_kind"] = to_string(c.pred_kind);
  j["screen"] = to_string(c.screen);
  j["screen_size"] = c.screen_size;
  j["n_sets"] = c.n_sets ? Json(*c.n_sets) : Json("all");
  j["max_set_size"] = c.max_set_size;
  j["b_boot"] = c.b_boot;
  j["b_resample"] = c.b_resample;
  j["seed"] = c.seed;
  return j;
}

SRConfig sr_config_from_json(const Json& j) {
  return guarded("SR config", [&] {
    SRConfig c;
    auto alpha = [](const Json& v) -> std::optional<double> {
      if (v.is_string()) {
        if (v.get<std::string>() != "off") throw ValidationError("alpha must be a number or \"off\"");
        return std::nullopt;
      }
      return v.get<double>();
    };
    c.alpha_stab = alpha(j.at("alpha_stab"));
    c.alpha_pred = alpha(j.at("alpha_pred"));
    c.stab_test = stab_test_choice_from_string(j.at("stab_test").get<std::string>());
    c.pred_kind = pred_kind_from_string(j.at("pred_kind").get<std::string>());
    c.screen = screen_kind_from_string(j.at("screen").get<std::string>());
    c.screen_size = j.at("screen_size").get<int>();
    const Json& ns = j.at("n_sets");
    if (ns.is_string()) {
      if (ns.get<std::string>() != "all") throw ValidationError("n_sets must be an integer or \"all\"");
      c.n_sets.reset();
    } else {
      c.n_sets = ns.get<int>();
    }
    c.max_set_size = j.at("max_set_size").get<int>();
    c.b_boot = j.at("b_boot").get<int>();
    c.b_resample = j.at("b_resample").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  });
}

Json to_json(const SRModel& m) {
  const auto& names = m.column_names;
  Json j;
  j["version"] = kModelVersion;
  j["config"] = to_json(m.config);
  j["d"] = m.d;
  j["column_names"] = names;
  j["stab_test"] = m.stab_test_used ? Json(to_string(*m.stab_test_used)) : Json(nullptr);
  j["screened"] = names_of(m.screened, names);
  j["n_candidate_sets"] = m.candidate_sets.size();
  j["n_stable_sets"] = m.stable.size();
  j["n_optimal_sets"] = m.optimal.size();
  j["no_stable_sets"] = m.no_stable_sets;
  j["failed_sets"] = m.failed_sets;
  if (m.cutoff) {
    Json c;
    c["best_set"] = names_of(m.cutoff->best_set, names);
    c["best_score"] = number_or_null(m.cutoff->best_score);
    c["alpha_pred"] = m.cutoff->alpha_pred;
    c["quantile"] = number_or_null(m.cutoff->quantile);
    c["c_pred"] = number_or_null(m.cutoff->c_pred);
    c["attempts"] = m.cutoff->attempts;
    j["cutoff"] = std::move(c);
  } else {
    j["cutoff"] = nullptr;
  }
  Json sel = Json::array();
  double intercept = 0.0;
  for (std::size_t k = 0; k < m.optimal.size(); ++k) {
    const SubsetFit& f = m.fits[k];
    Json s;
    s["set"] = names_of(f.subset, names);
    s["weight"] = m.weights[k];
    s["intercept"] = f.intercept;
    s["coefficients"] = vec(f.coefs);
    sel.push_back(std::move(s));
    intercept += m.weights[k] * f.intercept;
  }
  j["selected"] = std::move(sel);
  Json avg;
  avg["intercept"] = intercept;
  avg["coefficients"] = vec(averaged_coefficients(m));
  j["averaged"] = std::move(avg);
  Json diag = Json::array();
  for (const auto& dgn : m.diagnostics) {
    Json e;
    e["set"] = names_of(dgn.set, names);
    e["fitted"] = dgn.fitted;
    e["error"] = dgn.error.empty() ? Json(nullptr) : Json(dgn.error);
    e["stab_p"] = number_or_null(dgn.stab_p);
    e["pred_score"] = number_or_null(dgn.pred_score);
    e["stable"] = dgn.stable;
    e["optimal"] = dgn.optimal;
    diag.push_back(std::move(e));
  }
  j["diagnostics"] = std::move(diag);
  return j;
}

Json to_json(const LinearSCM& scm) {
  Json j;
  j["d"] = scm.d();
  Json B = Json::array();
  for (Index r = 0; r < scm.B.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < scm.B.cols(); ++c) row.push_back(scm.B(r, c));
    B.push_back(std::move(row));
  }
  j["B"] = std::move(B);
  j["noise_var"] = vec(scm.noise_var);
  j["noise_mean"] = vec(scm.noise_mean);
  j["targets"] = scm.targets;
  j["version"] = kScmVersion;
  return j;
}

LinearSCM scm_from_json(const Json& j) {
  validate_scm_json(j);
  return guarded("SCM", [&] {
    LinearSCM scm;
    const int n = j.at("d").get<int>() + 1;
    const Json& B = j.at("B");
    if (static_cast<int>(B.size()) != n) throw ValidationError("B must have d + 1 rows");
    scm.B.resize(n, n);
    for (int r = 0; r < n; ++r) {
      if (static_cast<int>(B[static_cast<std::size_t>(r)].size()) != n) {
        throw ValidationError("B must have d + 1 columns");
      }
      for (int c = 0; c < n; ++c) {
        scm.B(r, c) = B[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
      }
    }
    scm.noise_var = vec_from(j.at("noise_var"));
    scm.noise_mean = j.contains("noise_mean") ? vec_from(j.at("noise_mean"))
                                              : Eigen::VectorXd::Zero(n);
    scm.targets = j.at("targets").get<NodeSet>();
    scm.validate();
    return scm;
  });
}

Json truth_to_json(const BlanketTruth& t, const std::vector<std::string>& names) {
  Json j;
  j["version"] = kTruthVersion;
  j["pa"] = names_of(to_columns(t.pa), names);
  j["ch"] = names_of(to_columns(t.ch), names);
  j["mb"] = names_of(to_columns(t.mb), names);
  j["sb"] = names_of(to_columns(t.sb), names);
  j["nsb"] = names_of(to_columns(t.nsb), names);
  j["n_int"] = names_of(to_columns(t.n_int), names);
  j["mb_equals_sb"] = t.mb == t.sb;
  return j;
}

Json to_json(const SimDesign& d) {
  Json j;
  j["kind"] = to_string(d.kind);
  j["d"] = d.d;
  j["n_per_env"] = d.n_per_env;
  j["n_train_env"] = d.n_train_env;
  j["n_test_env"] = d.n_test_env;
  j["train_shift"] = {d.train_shift_lo, d.train_shift_hi};
  j["test_shift"] = {d.test_shift_lo, d.test_shift_hi};
  j["noise_var"] = d.noise_var;
  j["weight"] = {d.weight_lo, d.weight_hi};
  j["n_intervened"] = d.n_intervened;
  j["max_parents"] = d.max_parents;
  j["edge_prob"] = d.edge_prob;
  j["child_intervention_prob"] = d.child_intervention_prob;
  j["response_position"] =
      d.response_position == ResponsePosition::random ? "random" : "source";
  j["toy_case"] = d.toy_case;
  j["toy_train_shifts"] = d.toy_train_shifts;
  j["toy_test_shifts"] = d.toy_test_shifts;
  return j;
}

SimDesign design_from_json(const Json& j) {
  return guarded("design", [&] {
    SimDesign d;
    d.kind = sim_kind_from_string(j.at("kind").get<std::string>());
    d.d = j.at("d").get<int>();
    d.n_per_env = j.at("n_per_env").get<int>();
    d.n_train_env = j.at("n_train_env").get<int>();
    d.n_test_env = j.at("n_test_env").get<int>();
    d.train_shift_lo = j.at("train_shift").at(0).get<double>();
    d.train_shift_hi = j.at("train_shift").at(1).get<double>();
    d.test_shift_lo = j.at("test_shift").at(0).get<double>();
    d.test_shift_hi = j.at("test_shift").at(1).get<double>();
    d.noise_var = j.at("noise_var").get<double>();
    d.weight_lo = j.at("weight").at(0).get<double>();
    d.weight_hi = j.at("weight").at(1).get<double>();
    d.n_intervened = j.at("n_intervened").get<int>();
    d.max_parents = j.at("max_parents").get<int>();
    d.edge_prob = j.at("edge_prob").get<double>();
    d.child_intervention_prob = j.at("child_intervention_prob").get<double>();
    const auto pos = j.at("response_position").get<std::string>();
    if (pos != "random" && pos != "source") throw ValidationError("unknown response position '" + pos + "'");
    d.response_position = pos == "random" ? ResponsePosition::random : ResponsePosition::source;
    d.toy_case = j.at("toy_case").get<int>();
    d.toy_train_shifts = j.at("toy_train_shifts").get<std::vector<double>>();
    d.toy_test_shifts = j.at("toy_test_shifts").get<std::vector<double>>();
    d.validate();
    return d;
  });
}

Json to_json(const BenchmarkResult& r) {
  Json j;
  j["version"] = kBenchVersion;
  Json opt;
  opt["design"] = to_json(r.options.design);
  opt["methods"] = r.options.methods;
  opt["n_reps"] = r.options.n_reps;
  opt["seed"] = r.options.seed;
  opt["max_fp"] = r.options.max_fp;
  opt["sr"] = to_json(r.options.sr);
  j["options"] = std::move(opt);
  j["fpr_grid"] = default_fpr_grid();
  Json reps = Json::array();
  for (const auto& rep : r.reps) {
    Json e;
    e["rep"] = rep.rep;
    e["seed"] = rep.seed;
    e["data_hash"] = rep.data_hash;
    e["mb_equals_sb"] = rep.mb_equals_sb;
    e["stratum"] = stratum_name(rep.mb_equals_sb);
    e["mb"] = rep.mb;
    e["sb"] = rep.sb;
    e["nsb"] = rep.nsb;
    Json methods = Json::array();
    for (const auto& m : rep.methods) {
      Json mj;
      mj["method"] = m.method;
      mj["test_rss"] = m.test_rss ? number_or_null(*m.test_rss) : Json(nullptr);
      Json pauc = Json::object();
      for (const auto& [k, v] : m.pauc) pauc[k] = v;
      mj["pauc10"] = std::move(pauc);
      Json tpr = Json::object();
      for (const auto& [k, v] : m.tpr) tpr[k] = v;
      mj["tpr"] = std::move(tpr);
      mj["data_hash"] = m.data_hash;
      mj["error"] = m.error.empty() ? Json(nullptr) : Json(m.error);
      Json summary = Json::object();
      for (const auto& [k, v] : m.summary) summary[k] = number_or_null(v);
      mj["summary"] = std::move(summary);
      Json coefs = Json::array();
      for (double c : m.coefs) coefs.push_back(number_or_null(c));
      mj["coefficients"] = std::move(coefs);
      methods.push_back(std::move(mj));
    }
    e["methods"] = std::move(methods);
    reps.push_back(std::move(e));
  }
  j["reps"] = std::move(reps);
  j["flagged_methods"] = r.flagged_methods;
  const BenchmarkAggregates agg = aggregate(r);
  Json pred = Json::array();
  for (const auto& p : agg.prediction) {
    pred.push_back(Json{{"method", p.method}, {"stratum", p.stratum}, {"count", p.count},
                        {"median", p.median}, {"q1", p.q1}, {"q3", p.q3}});
  }
  Json rec = Json::array();
  for (const auto& s : agg.recovery) {
    rec.push_back(Json{{"method", s.method}, {"target", s.target}, {"count", s.count},
                       {"mean_pauc10", s.mean_pauc}, {"mean_tpr", s.mean_tpr}});
  }
  j["aggregates"] = Json{{"prediction", std::move(pred)}, {"recovery", std::move(rec)}};
  return j;
}

BenchmarkResult benchmark_from_json(const Json& j) {
  validate_bench_json(j);
  return guarded("benchmark", [&] {
    BenchmarkResult r;
    const Json& opt = j.at("options");
    r.options.design = design_from_json(opt.at("design"));
    r.options.methods = opt.at("methods").get<std::vector<std::string>>();
    r.options.n_reps = opt.at("n_reps").get<int>();
    r.options.seed = opt.at("seed").get<std::uint64_t>();
    r.options.max_fp = opt.at("max_fp").get<int>();
    r.options.sr = sr_config_from_json(opt.at("sr"));
    for (const Json& e : j.at("reps")) {
      RepRecord rep;
      rep.rep = e.at("rep").get<int>();
      rep.seed = e.at("seed").get<std::uint64_t>();
      rep.data_hash = e.at("data_hash").get<std::string>();
      rep.mb_equals_sb = e.at("mb_equals_sb").get<bool>();
      rep.mb = e.at("mb").get<Subset>();
      rep.sb = e.at("sb").get<Subset>();
      rep.nsb = e.at("nsb").get<Subset>();
      for (const Json& mj : e.at("methods")) {
        MethodRecord m;
        m.method = mj.at("method").get<std::string>();
        if (!mj.at("test_rss").is_null()) m.test_rss = mj.at("test_rss").get<double>();
        for (const auto& [k, v] : mj.at("pauc10").items()) m.pauc[k] = v.get<double>();
        for (const auto& [k, v] : mj.at("tpr").items()) m.tpr[k] = v.get<std::vector<double>>();
        m.data_hash = mj.at("data_hash").get<std::string>();
        if (!mj.at("error").is_null()) m.error = mj.at("error").get<std::string>();
        for (const auto& [k, v] : mj.at("summary").items()) {
          m.summary[k] = v.is_null() ? std::nan("") : v.get<double>();
        }
        for (const Json& c : mj.at("coefficients")) {
          m.coefs.push_back(c.is_null() ? std::nan("") : c.get<double>());
        }
        rep.methods.push_back(std::move(m));
      }
      if (rep.methods.size() != r.options.methods.size()) {
        throw ValidationError("repetition " + std::to_string(rep.rep) +
                              " does not list every method");
      }
      r.reps.push_back(std::move(rep));
    }
    r.flagged_methods = j.at("flagged_methods").get<std::vector<std::string>>();
    return r;
  });
}

void validate_model_json(const Json& j) {
  expect_version(j, kModelVersion);
  sr_config_from_json(field(j, "$", "config", Kind::object));
  field(j, "$", "d", Kind::integer);
  const Json& names = field(j, "$", "column_names", Kind::array);
  all_of(names, "$.column_names", Kind::string);
  all_of(field(j, "$", "screened", Kind::array), "$.screened", Kind::string);
  field(j, "$", "n_candidate_sets", Kind::integer);
  field(j, "$", "n_stable_sets", Kind::integer);
  field(j, "$", "n_optimal_sets", Kind::integer);
  field(j, "$", "no_stable_sets", Kind::boolean);
  field(j, "$", "failed_sets", Kind::integer);
  if (!j.contains("cutoff")) throw ValidationError("$.cutoff is missing");
  if (!j.at("cutoff").is_null()) {
    const Json& c = field(j, "$", "cutoff", Kind::object);
    all_of(field(c, "$.cutoff", "best_set", Kind::array), "$.cutoff.best_set", Kind::string);
    field(c, "$.cutoff", "best_score", Kind::number_or_null);
    field(c, "$.cutoff", "alpha_pred", Kind::number);
    field(c, "$.cutoff", "quantile", Kind::number_or_null);
    field(c, "$.cutoff", "c_pred", Kind::number_or_null);
    field(c, "$.cutoff", "attempts", Kind::integer);
  }
  const Json& sel = field(j, "$", "selected", Kind::array);
  double total = 0.0;
  for (std::size_t k = 0; k < sel.size(); ++k) {
    const std::string p = "$.selected[" + std::to_string(k) + "]";
    const Json& set = field(sel[k], p, "set", Kind::array);
    all_of(set, p + ".set", Kind::string);
    total += field(sel[k], p, "weight", Kind::number).get<double>();
    field(sel[k], p, "intercept", Kind::number);
    const Json& coefs = field(sel[k], p, "coefficients", Kind::array);
    all_of(coefs, p + ".coefficients", Kind::number);
    if (coefs.size() != set.size()) throw ValidationError(p + " coefficient count differs from set size");
  }
  if (!sel.empty() && std::abs(total - 1.0) > 1e-9) throw ValidationError("$.selected weights do not sum to 1");
  if (sel.size() != j.at("n_optimal_sets").get<std::size_t>()) {
    throw ValidationError("$.selected length differs from n_optimal_sets");
  }
  const Json& avg = field(j, "$", "averaged", Kind::object);
  field(avg, "$.averaged", "intercept", Kind::number);
  const Json& ac = field(avg, "$.averaged", "coefficients", Kind::array);
  all_of(ac, "$.averaged.coefficients", Kind::number);
  if (ac.size() != names.size()) throw ValidationError("$.averaged.coefficients length differs from d");
  const Json& diag = field(j, "$", "diagnostics", Kind::array);
  if (diag.size() != j.at("n_candidate_sets").get<std::size_t>()) {
    throw ValidationError("$.diagnostics length differs from n_candidate_sets");
  }
  for (std::size_t k = 0; k < diag.size(); ++k) {
    const std::string p = "$.diagnostics[" + std::to_string(k) + "]";
    all_of(field(diag[k], p, "set", Kind::array), p + ".set", Kind::string);
    field(diag[k], p, "fitted", Kind::boolean);
    if (!diag[k].contains("error")) throw ValidationError(p + ".error is missing");
    field(diag[k], p, "stab_p", Kind::number_or_null);
    field(diag[k], p, "pred_score", Kind::number_or_null);
    field(diag[k], p, "stable", Kind::boolean);
    field(diag[k], p, "optimal", Kind::boolean);
  }
}

void validate_scm_json(const Json& j) {
  expect_version(j, kScmVersion);
  const int d = field(j, "$", "d", Kind::integer).get<int>();
  if (d < 0) throw ValidationError("$.d must be non-negative");
  const Json& B = field(j, "$", "B", Kind::array);
  if (static_cast<int>(B.size()) != d + 1) throw ValidationError("$.B must have d + 1 rows");
  for (std::size_t r = 0; r < B.size(); ++r) {
    const std::string p = "$.B[" + std::to_string(r) + "]";
    if (!B[r].is_array() || static_cast<int>(B[r].size()) != d + 1) {
      throw ValidationError(p + " must be an array of d + 1 numbers");
    }
    all_of(B[r], p, Kind::number);
  }
  const Json& nv = field(j, "$", "noise_var", Kind::array);
  all_of(nv, "$.noise_var", Kind::number);
  if (static_cast<int>(nv.size()) != d + 1) throw ValidationError("$.noise_var must have d + 1 entries");
  const Json& t = field(j, "$", "targets", Kind::array);
  all_of(t, "$.targets", Kind::integer);
}

void validate_truth_json(const Json& j) {
  expect_version(j, kTruthVersion);
  auto set = [&](const char* key) {
    const Json& a = field(j, "$", key, Kind::array);
    all_of(a, std::string("$.") + key, Kind::string);
    return a.get<std::vector<std::string>>();
  };
  const auto pa = set("pa");
  set("ch");
  const auto mb = set("mb");
  const auto sb = set("sb");
  const auto nsb = set("nsb");
  set("n_int");
  field(j, "$", "mb_equals_sb", Kind::boolean);
  auto contains = [](const std::vector<std::string>& outer, const std::vector<std::string>& inner) {
    for (const auto& x : inner) {
      if (std::find(outer.begin(), outer.end(), x) == outer.end()) return false;
    }
    return true;
  };
  if (!contains(sb, pa)) throw ValidationError("truth: pa is not contained in sb");
  if (!contains(mb, sb)) throw ValidationError("truth: sb is not contained in mb");
  if (!contains(mb, nsb) || sb.size() + nsb.size() != mb.size()) {
    throw ValidationError("truth: nsb is not mb minus sb");
  }
}

void validate_bench_json(const Json& j) {
  expect_version(j, kBenchVersion);
  const Json& opt = field(j, "$", "options", Kind::object);
  field(opt, "$.options", "design", Kind::object);
  const Json& methods = field(opt, "$.options", "methods", Kind::array);
  all_of(methods, "$.options.methods", Kind::string);
  field(opt, "$.options", "n_reps", Kind::integer);
  field(opt, "$.options", "seed", Kind::integer);
  field(opt, "$.options", "max_fp", Kind::integer);
  field(opt, "$.options", "sr", Kind::object);
  all_of(field(j, "$", "fpr_grid", Kind::array), "$.fpr_grid", Kind::number);
  const Json& reps = field(j, "$", "reps", Kind::array);
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const std::string p = "$.reps[" + std::to_string(r) + "]";
    field(reps[r], p, "rep", Kind::integer);
    field(reps[r], p, "seed", Kind::integer);
    field(reps[r], p, "data_hash", Kind::string);
    field(reps[r], p, "mb_equals_sb", Kind::boolean);
    field(reps[r], p, "stratum", Kind::string);
    for (const char* key : {"mb", "sb", "nsb"}) {
      all_of(field(reps[r], p, key, Kind::array), p + "." + key, Kind::integer);
    }
    const Json& ms = field(reps[r], p, "methods", Kind::array);
    if (ms.size() != methods.size()) throw ValidationError(p + ".methods does not list every method");
    for (std::size_t k = 0; k < ms.size(); ++k) {
      const std::string q = p + ".methods[" + std::to_string(k) + "]";
      field(ms[k], q, "method", Kind::string);
      field(ms[k], q, "test_rss", Kind::number_or_null);
      field(ms[k], q, "pauc10", Kind::object);
      field(ms[k], q, "tpr", Kind::object);
      field(ms[k], q, "data_hash", Kind::string);
      if (!ms[k].contains("error")) throw ValidationError(q + ".error is missing");
      field(ms[k], q, "summary", Kind::object);
      field(ms[k], q, "coefficients", Kind::array);
    }
  }
  all_of(field(j, "$", "flagged_methods", Kind::array), "$.flagged_methods", Kind::string);
  const Json& agg = field(j, "$", "aggregates", Kind::object);
  field(agg, "$.aggregates", "prediction", Kind::array);
  field(agg, "$.aggregates", "recovery", Kind::array);
}

void validate_thresholds_json(const Json& j) {
  for (const char* key : {"threshold_sr", "threshold_srdiff"}) {
    const double t = field(j, "$", key, Kind::number).get<double>();
    if (!(t > 0.5 && t <= 1.0)) throw ValidationError(std::string("$.") + key + " must lie in (0.5, 1]");
  }
  if (field(j, "$", "n_subsamples", Kind::integer).get<int>() < 20) {
    throw ValidationError("$.n_subsamples must be at least 20");
  }
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (buf.str().empty()) throw InputError("'" + path.string() + "' is empty");
  try {
    return Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace stabreg
