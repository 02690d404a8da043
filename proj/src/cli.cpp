#include "stabreg/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "stabreg/dataset.hpp"
#include "stabreg/error.hpp"
#include "stabreg/evaluation.hpp"
#include "stabreg/random.hpp"
#include "stabreg/serialization.hpp"
#include "stabreg/simulations.hpp"
#include "stabreg/stability_selection.hpp"
#include "stabreg/stabilized_regression.hpp"

namespace stabreg {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> logger() {
  auto log = spdlog::get("stabreg");
  if (!log) {
    log = spdlog::stderr_color_mt("stabreg");
    const char* env = std::getenv("STABREG_LOG");
    auto level = spdlog::level::warn;
    if (env && *env) {
      level = spdlog::level::from_str(env);
      // from_str maps unknown names to off; keep warn instead.
      if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::warn;
    }
    log->set_level(level);
  }
  return log;
}

double parse_number(const std::string& s, const std::string& flag) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError(flag + ": '" + s + "' is not a number");
  }
  return v;
}

std::optional<double> parse_alpha(const std::string& s, const std::string& flag) {
  if (s == "off") return std::nullopt;
  return parse_number(s, flag);
}

// Unset flags keep the values of the base configuration.
struct SrFlags {
  std::string alpha_stab;
  std::string alpha_pred;
  std::string stab_test;
  std::string pred_kind;
  std::string screen;
  std::string n_sets;
  int screen_size = -1;
  int max_set_size = -1;
  int b_boot = -1;
  int b_resample = -1;
};

void add_sr_flags(CLI::App* app, SrFlags& f) {
  app->add_option("--alpha-stab", f.alpha_stab, "Stability test level, or 'off'");
  app->add_option("--alpha-pred", f.alpha_pred, "Prediction cutoff level, or 'off'");
  app->add_option("--stab-test", f.stab_test, "auto, chow or scaled_residual");
  app->add_option("--pred-kind", f.pred_kind, "pooled or min_env");
  app->add_option("--screen", f.screen, "none, corr or lasso");
  app->add_option("--screen-size", f.screen_size, "Variables kept by screening (0: automatic)");
  app->add_option("--n-sets", f.n_sets, "Number of candidate sets, or 'all'");
  app->add_option("--max-set-size", f.max_set_size, "Largest sampled set size");
  app->add_option("--b-boot", f.b_boot, "Bootstrap replicates for the prediction cutoff");
  app->add_option("--b-resample", f.b_resample, "Resamples for the scaled-residual test");
}

SRConfig apply_sr_flags(SRConfig c, const SrFlags& f) {
  if (!f.alpha_stab.empty()) c.alpha_stab = parse_alpha(f.alpha_stab, "--alpha-stab");
  if (!f.alpha_pred.empty()) c.alpha_pred = parse_alpha(f.alpha_pred, "--alpha-pred");
  if (!f.stab_test.empty()) c.stab_test = stab_test_choice_from_string(f.stab_test);
  if (!f.pred_kind.empty()) c.pred_kind = pred_kind_from_string(f.pred_kind);
  if (!f.screen.empty()) c.screen = screen_kind_from_string(f.screen);
  if (!f.n_sets.empty()) {
    if (f.n_sets == "all") {
      c.n_sets.reset();
    } else {
      const double v = parse_number(f.n_sets, "--n-sets");
      if (v != static_cast<double>(static_cast<int>(v))) {
        throw ValidationError("--n-sets must be an integer or 'all'");
      }
      c.n_sets = static_cast<int>(v);
    }
  }
  if (f.screen_size >= 0) c.screen_size = f.screen_size;
  if (f.max_set_size >= 0) c.max_set_size = f.max_set_size;
  if (f.b_boot >= 0) c.b_boot = f.b_boot;
  if (f.b_resample >= 0) c.b_resample = f.b_resample;
  c.validate();
  return c;
}

struct DesignFlags {
  std::string design = "sim1";
  int d = 0;
  int n_per_env = 0;
  int n_train_env = 0;
  int n_test_env = 0;
  int toy_case = 1;
  std::string response_position;
};

void add_design_flags(CLI::App* app, DesignFlags& f) {
  app->add_option("--design", f.design, "sim1, sim2 or toy")->capture_default_str();
  app->add_option("--d", f.d, "Variables including the response (0: design default)");
  app->add_option("--n-per-env", f.n_per_env, "Rows per environment (0: design default)");
  app->add_option("--n-train-env", f.n_train_env, "Training environments (0: design default)");
  app->add_option("--n-test-env", f.n_test_env, "Test environments (0: design default)");
  app->add_option("--toy-case", f.toy_case, "Toy example case (1 or 2)");
  app->add_option("--response-position", f.response_position, "sim2 only: random or source");
}

SimDesign build_design(const DesignFlags& f) {
  SimDesign d;
  const SimKind kind = sim_kind_from_string(f.design);
  if (kind == SimKind::sim1) d = SimDesign::sim1();
  if (kind == SimKind::sim2) d = SimDesign::sim2(f.d > 0 ? f.d : 201);
  if (kind == SimKind::toy) d = SimDesign::toy(f.toy_case);
  if (f.d < 0 || f.n_per_env < 0 || f.n_train_env < 0 || f.n_test_env < 0) {
    throw ValidationError("design sizes must be nonnegative");
  }
  if (f.d > 0) d.d = f.d;
  if (f.n_per_env > 0) d.n_per_env = f.n_per_env;
  if (f.n_train_env > 0) d.n_train_env = f.n_train_env;
  if (f.n_test_env > 0) d.n_test_env = f.n_test_env;
  if (!f.response_position.empty()) {
    if (f.response_position == "random") {
      d.response_position = ResponsePosition::random;
    } else if (f.response_position == "source") {
      d.response_position = ResponsePosition::source;
    } else {
      throw ValidationError("--response-position must be 'random' or 'source'");
    }
  }
  d.validate();
  return d;
}

struct DataFlags {
  std::string path;
  std::string response = "y";
  std::string env = "env";
  std::vector<std::string> predictors;
};

void add_data_flags(CLI::App* app, DataFlags& f) {
  app->add_option("--data", f.path, "Input CSV")->required();
  app->add_option("--response", f.response, "Response column")->capture_default_str();
  app->add_option("--env", f.env, "Environment column")->capture_default_str();
  app->add_option("--predictors", f.predictors, "Predictor columns (default: all others)")
      ->delimiter(',');
}

MultiEnvDataset load(const DataFlags& f) {
  std::optional<std::vector<std::string>> preds;
  if (!f.predictors.empty()) preds = f.predictors;
  return load_csv(f.path, f.response, f.env, preds);
}

void check_jobs(int jobs) {
  if (jobs < 1) throw ValidationError("--jobs must be at least 1");
}

fs::path prepare_out(const std::string& out) {
  fs::path p(out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw InputError("cannot create output directory '" + out + "': " + ec.message());
  return p;
}

// --- fit -------------------------------------------------------------------

struct FitArgs {
  DataFlags data;
  SrFlags sr;
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool with_srpred = false;
  int perm_resamples = 0;
};

int cmd_fit(const FitArgs& a) {
  check_jobs(a.jobs);
  if (a.perm_resamples < 0) throw ValidationError("--perm-resamples must be nonnegative");
  SRConfig cfg = apply_sr_flags(SRConfig{}, a.sr);
  cfg.seed = a.seed;
  cfg.jobs = a.jobs;
  const MultiEnvDataset ds = load(a.data);
  const fs::path out = prepare_out(a.out);
  logger()->info("fit: n = {}, d = {}, environments = {}", ds.n(), ds.d(), ds.n_envs());

  const SRModel sr = fit_sr(ds, cfg);
  write_text(out / "model.json", dump(to_json(sr)));
  std::optional<SRModel> pred;
  if (a.with_srpred) {
    pred = fit_sr(ds, srpred_variant(cfg));
    write_text(out / "srpred_model.json", dump(to_json(*pred)));
  }
  const auto w = importance_weight(sr).values;
  const auto c = importance_coef(sr).values;
  std::optional<Eigen::VectorXd> perm;
  if (a.perm_resamples > 0) {
    perm = importance_perm(sr, ds, a.perm_resamples, derive_seed(a.seed, {7}))
               .values;
  }
  std::optional<Eigen::VectorXd> pc;
  std::optional<Eigen::VectorXd> diff;
  if (pred) {
    pc = importance_coef(*pred).values;
    diff = importance_srdiff(sr, *pred, ImportanceKind::coef).values;
  }
  std::ostringstream csv;
  csv << "variable,weight,coef";
  if (perm) csv << ",perm";
  if (pred) csv << ",srpred_coef,srdiff_coef";
  csv << '\n';
  for (Index j = 0; j < ds.d(); ++j) {
    csv << quote_csv_field(ds.column_names()[static_cast<std::size_t>(j)]) << ','
        << format_double(w(j)) << ',' << format_double(c(j));
    if (perm) csv << ',' << format_double((*perm)(j));
    if (pred) csv << ',' << format_double((*pc)(j)) << ',' << format_double((*diff)(j));
    csv << '\n';
  }
  write_text(out / "importance.csv", csv.str());
  if (sr.no_stable_sets) logger()->warn("no candidate set passed the stability test");
  return kExitOk;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  DesignFlags design;
  int reps = 1;
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
};

std::string rep_dir_name(int rep, int reps) {
  const int width = std::max<int>(3, static_cast<int>(std::to_string(reps - 1).size()));
  std::string s = std::to_string(rep);
  return "rep_" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(s.size(), width), '0') + s;
}

int cmd_simulate(const SimulateArgs& a) {
  check_jobs(a.jobs);
  if (a.reps < 1) throw ValidationError("--reps must be at least 1");
  const SimDesign design = build_design(a.design);
  const fs::path out = prepare_out(a.out);
  write_text(out / "design.json", dump(to_json(design)));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(a.reps));
  parallel_for(errors.size(), a.jobs, [&](std::size_t i) {
    try {
      const int rep = static_cast<int>(i);
      const SimData data = generate(design, derive_seed(a.seed, {i}));
      const fs::path dir = out / rep_dir_name(rep, a.reps);
      fs::create_directories(dir);
      write_csv(data.train, dir / "train.csv");
      write_csv(data.test, dir / "test.csv");
      write_text(dir / "truth.json", dump(truth_to_json(data.truth, data.train.column_names())));
      write_text(dir / "scm.json", dump(to_json(data.scm)));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return kExitOk;
}

// --- benchmark -------------------------------------------------------------

struct BenchmarkArgs {
  DesignFlags design;
  SrFlags sr;
  std::vector<std::string> methods;
  int reps = 10;
  int max_fp = 10;
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
};

int cmd_benchmark(const BenchmarkArgs& a) {
  check_jobs(a.jobs);
  BenchmarkOptions opt;
  opt.design = build_design(a.design);
  if (!a.methods.empty()) opt.methods = a.methods;
  opt.n_reps = a.reps;
  opt.seed = a.seed;
  opt.jobs = a.jobs;
  if (a.max_fp < 1) throw ValidationError("--max-fp must be at least 1");
  opt.max_fp = a.max_fp;
  opt.sr = apply_sr_flags(benchmark_sr_config(opt.design), a.sr);
  const fs::path out = prepare_out(a.out);
  logger()->info("benchmark: {} repetitions, {} methods", opt.n_reps, opt.methods.size());
  const BenchmarkResult result = run_benchmark(opt);
  write_text(out / "benchmark.json", dump(to_json(result)));
  if (!result.flagged_methods.empty()) {
    for (const auto& m : result.flagged_methods) {
      logger()->warn("method {} failed in more than 10% of repetitions", m);
    }
    return kExitPartial;
  }
  return kExitOk;
}

// --- stabsel ---------------------------------------------------------------

struct StabselArgs {
  DataFlags data;
  SrFlags sr;
  int subsamples = 100;
  std::string annotations;
  std::string out;
  std::uint64_t seed = 0;
  int jobs = 1;
};

std::map<std::string, std::string> read_annotations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_record(line);
  if (header.size() != 2 || header[0] != "variable" || header[1] != "annotation") {
    throw InputError("annotation file header must be 'variable,annotation'");
  }
  std::map<std::string, std::string> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto rec = split_csv_record(line);
    if (rec.size() != 2) throw InputError("annotation rows need exactly two fields");
    out[rec[0]] = rec[1];
  }
  return out;
}

int cmd_stabsel(const StabselArgs& a) {
  check_jobs(a.jobs);
  SRConfig cfg = apply_sr_flags(SRConfig{}, a.sr);
  std::optional<std::map<std::string, std::string>> ann;
  if (!a.annotations.empty()) ann = read_annotations(a.annotations);
  const MultiEnvDataset ds = load(a.data);
  const fs::path out = prepare_out(a.out);
  const SelectionProfile prof = run_stability_selection(ds, cfg, a.subsamples, a.seed, a.jobs);
  const ScatterDocument doc = emit_selection_scatter(prof, ann);
  write_text(out / "scatter.csv", doc.csv);
  write_text(out / "thresholds.json", doc.json);
  if (prof.failed_subsamples > 0) {
    logger()->warn("{} of {} subsamples failed", prof.failed_subsamples, prof.n_subsamples);
  }
  return kExitOk;
}

// --- report ----------------------------------------------------------------

struct ReportArgs {
  std::string input;
  std::string out;
};

int cmd_report(const ReportArgs& a) {
  const BenchmarkResult r = benchmark_from_json(read_json(a.input));
  if (r.reps.empty()) throw ValidationError("benchmark contains no repetitions");
  const fs::path out = prepare_out(a.out);
  std::ostringstream pred;
  std::ostringstream rec;
  pred << "method,stratum,rep,test_rss\n";
  rec << "method,target,rep,pauc10\n";
  for (const auto& rep : r.reps) {
    for (const auto& m : rep.methods) {
      if (m.test_rss) {
        pred << quote_csv_field(m.method) << ',' << stratum_name(rep.mb_equals_sb) << ','
             << rep.rep << ',' << format_double(*m.test_rss) << '\n';
      }
      for (const auto& [target, v] : m.pauc) {
        rec << quote_csv_field(m.method) << ',' << target << ',' << rep.rep << ','
            << format_double(v) << '\n';
      }
    }
  }
  const BenchmarkAggregates agg = aggregate(r);
  std::ostringstream sum;
  sum << "table,method,group,count,median,q1,q3,mean_pauc10\n";
  for (const auto& p : agg.prediction) {
    sum << "prediction," << quote_csv_field(p.method) << ',' << p.stratum << ',' << p.count
        << ',' << format_double(p.median) << ',' << format_double(p.q1) << ','
        << format_double(p.q3) << ",\n";
  }
  for (const auto& s : agg.recovery) {
    sum << "recovery," << quote_csv_field(s.method) << ',' << s.target << ',' << s.count
        << ",,,," << format_double(s.mean_pauc) << '\n';
  }
  write_text(out / "prediction.csv", pred.str());
  write_text(out / "recovery.csv", rec.str());
  write_text(out / "summary.csv", sum.str());
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Stabilized regression for multi-environment data"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit stabilized regression to a CSV file");
  add_data_flags(fit_cmd, fit.data);
  add_sr_flags(fit_cmd, fit.sr);
  fit_cmd->add_option("--out", fit.out, "Output directory")->required();
  fit_cmd->add_option("--seed", fit.seed, "Random seed")->capture_default_str();
  fit_cmd->add_option("--jobs", fit.jobs, "Worker threads")->capture_default_str();
  fit_cmd->add_flag("--srpred", fit.with_srpred, "Also fit SRpred and report SRdiff");
  fit_cmd->add_option("--perm-resamples", fit.perm_resamples,
                      "Permutations for permutation importance (0: skip)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Write simulated datasets with their truth");
  add_design_flags(sim_cmd, sim.design);
  sim_cmd->add_option("--reps", sim.reps, "Repetitions")->capture_default_str();
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();
  sim_cmd->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
  sim_cmd->add_option("--jobs", sim.jobs, "Worker threads")->capture_default_str();

  BenchmarkArgs bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Compare methods on simulated data");
  add_design_flags(bench_cmd, bench.design);
  add_sr_flags(bench_cmd, bench.sr);
  bench_cmd->add_option("--methods", bench.methods, "Comma-separated method names")
      ->delimiter(',');
  bench_cmd->add_option("--reps", bench.reps, "Repetitions")->capture_default_str();
  bench_cmd->add_option("--max-fp", bench.max_fp, "False-positive budget for pAUC")
      ->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Output directory")->required();
  bench_cmd->add_option("--seed", bench.seed, "Master seed")->capture_default_str();
  bench_cmd->add_option("--jobs", bench.jobs, "Worker threads")->capture_default_str();

  StabselArgs ss;
  auto* ss_cmd = app.add_subcommand("stabsel", "Stability selection over half-subsamples");
  add_data_flags(ss_cmd, ss.data);
  add_sr_flags(ss_cmd, ss.sr);
  ss_cmd->add_option("--subsamples", ss.subsamples, "Number of half-subsamples")
      ->capture_default_str();
  ss_cmd->add_option("--annotations", ss.annotations, "CSV with columns variable,annotation");
  ss_cmd->add_option("--out", ss.out, "Output directory")->required();
  ss_cmd->add_option("--seed", ss.seed, "Random seed")->capture_default_str();
  ss_cmd->add_option("--jobs", ss.jobs, "Worker threads")->capture_default_str();

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Convert benchmark JSON to tidy CSV tables");
  rep_cmd->add_option("--input", rep.input, "benchmark.json")->required();
  rep_cmd->add_option("--out", rep.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit);
    if (*sim_cmd) return cmd_simulate(sim);
    if (*bench_cmd) return cmd_benchmark(bench);
    if (*ss_cmd) return cmd_stabsel(ss);
    if (*rep_cmd) return cmd_report(rep);
  } catch (const InputError& e) {
    logger()->error("{}", e.what());
    return kExitInvalid;
  } catch (const ValidationError& e) {
    logger()->error("{}", e.what());
    return kExitInvalid;
  } catch (const NumericalError& e) {
    logger()->error("{}", e.what());
    return kExitNumerical;
  } catch (const Error& e) {
    logger()->error("{}", e.what());
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    logger()->error("{}", e.what());
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace stabreg
