#include "stabreg/stability_selection.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "stabreg/error.hpp"
#include "stabreg/random.hpp"

namespace stabreg {

double stability_threshold_raw(double q, int p) {
  if (p < 1) throw ValidationError("threshold needs at least one candidate variable");
  return 0.5 * (1.0 + q * q / static_cast<double>(p));
}

namespace {

struct RunOutcome {
  bool ok = false;
  std::string error;
  std::vector<int> screened;
  Eigen::VectorXd v_sr;
  Eigen::VectorXd v_diff;
  Eigen::VectorXd coef_sr;
  Eigen::VectorXd coef_pred;
};

}  // namespace

SelectionProfile run_stability_selection(const MultiEnvDataset& ds,
                                         const SRConfig& config, int n_subsamples,
                                         std::uint64_t seed, int jobs) {
  if (n_subsamples < 20) throw ValidationError("stability selection needs at least 20 subsamples");
  config.validate();
  for (std::size_t k = 0; k < ds.envs().sizes.size(); ++k) {
    if (ds.envs().sizes[k] < 4) {
      throw ValidationError("environment '" + ds.env_labels()[k] +
                            "' needs at least 4 rows for half-subsampling");
    }
  }
  std::vector<RunOutcome> runs(static_cast<std::size_t>(n_subsamples));
  parallel_for(runs.size(), jobs, [&](std::size_t i) {
    RunOutcome& out = runs[i];
    try {
      const auto sub = subsample_half(ds, derive_seed(seed, {i, 0}));
      SRConfig cfg = config;
      cfg.jobs = 1;
      cfg.seed = derive_seed(seed, {i, 1});
      const SRModel sr = fit_sr(sub, cfg);
      const SRModel pred = fit_sr(sub, srpred_variant(cfg));
      out.screened = sr.screened;
      for (int j : pred.screened) out.screened.push_back(j);
      std::sort(out.screened.begin(), out.screened.end());
      out.screened.erase(std::unique(out.screened.begin(), out.screened.end()),
                         out.screened.end());
      out.v_sr = importance_coef(sr).values;
      out.v_diff = importance_srdiff(sr, pred, ImportanceKind::coef).values;
      out.coef_sr = averaged_coefficients(sr);
      out.coef_pred = averaged_coefficients(pred);
      out.ok = true;
    } catch (const Error& e) {
      out.error = e.what();
    }
  });

  SelectionProfile prof;
  prof.n_subsamples = n_subsamples;
  std::vector<char> in_union(static_cast<std::size_t>(ds.d()), 0);
  for (const auto& r : runs) {
    if (!r.ok) {
      ++prof.failed_subsamples;
      continue;
    }
    for (int j : r.screened) in_union[static_cast<std::size_t>(j)] = 1;
  }
  if (prof.failed_subsamples * 5 > n_subsamples) {
    std::string first;
    for (const auto& r : runs) {
      if (!r.ok) {
        first = r.error;
        break;
      }
    }
    throw NumericalError(std::to_string(prof.failed_subsamples) + " of " +
                         std::to_string(n_subsamples) +
                         " subsamples failed; first error: " + first);
  }
  for (int j = 0; j < ds.d(); ++j) {
    if (in_union[static_cast<std::size_t>(j)]) {
      prof.variables.push_back(j);
      prof.names.push_back(ds.column_names()[static_cast<std::size_t>(j)]);
    }
  }
  prof.p = static_cast<int>(prof.variables.size());
  const int ok_runs = n_subsamples - prof.failed_subsamples;
  const auto V = prof.variables.size();
  std::vector<int> count_sr(V, 0);
  std::vector<int> count_diff(V, 0);
  std::vector<int> count_any(V, 0);
  std::vector<int> count_pos(V, 0);
  double total_sr = 0.0;
  double total_diff = 0.0;
  for (const auto& r : runs) {
    if (!r.ok) continue;
    for (std::size_t k = 0; k < V; ++k) {
      const int j = prof.variables[k];
      const bool sel_sr = r.v_sr(j) > 0.0;
      const bool sel_diff = r.v_diff(j) > 0.0;
      count_sr[k] += sel_sr;
      count_diff[k] += sel_diff;
      total_sr += sel_sr;
      total_diff += sel_diff;
      if (sel_sr || sel_diff) {
        ++count_any[k];
        const double c = sel_sr ? r.coef_sr(j) : r.coef_pred(j);
        count_pos[k] += c > 0.0;
      }
    }
  }
  prof.q_sr = total_sr / ok_runs;
  prof.q_srdiff = total_diff / ok_runs;
  if (prof.p > 0) {
    prof.raw_threshold_sr = stability_threshold_raw(prof.q_sr, prof.p);
    prof.raw_threshold_srdiff = stability_threshold_raw(prof.q_srdiff, prof.p);
  } else {
    prof.raw_threshold_sr = prof.raw_threshold_srdiff = 0.5;
  }
  prof.threshold_sr = std::min(1.0, prof.raw_threshold_sr);
  prof.threshold_srdiff = std::min(1.0, prof.raw_threshold_srdiff);
  for (std::size_t k = 0; k < V; ++k) {
    const double pi_sr = static_cast<double>(count_sr[k]) / ok_runs;
    const double pi_diff = static_cast<double>(count_diff[k]) / ok_runs;
    prof.pi_sr.push_back(pi_sr);
    prof.pi_srdiff.push_back(pi_diff);
    prof.selected_sr.push_back(prof.raw_threshold_sr <= 1.0 && pi_sr >= prof.threshold_sr);
    prof.selected_srdiff.push_back(prof.raw_threshold_srdiff <= 1.0 &&
                                   pi_diff >= prof.threshold_srdiff);
    prof.sign_fraction.push_back(
        count_any[k] > 0 ? std::optional<double>(static_cast<double>(count_pos[k]) / count_any[k])
                         : std::nullopt);
  }
  return prof;
}

ScatterDocument emit_selection_scatter(
    const SelectionProfile& profile,
    const std::optional<std::map<std::string, std::string>>& annotations) {
  std::ostringstream csv;
  csv << "variable,pi_srdiff,pi_sr,sign_fraction,selected_sr,selected_srdiff";
  if (annotations) csv << ",annotation";
  csv << '\n';
  for (std::size_t k = 0; k < profile.variables.size(); ++k) {
    csv << quote_csv_field(profile.names[k]) << ',' << format_double(profile.pi_srdiff[k])
        << ',' << format_double(profile.pi_sr[k]) << ',';
    if (profile.sign_fraction[k]) csv << format_double(*profile.sign_fraction[k]);
    csv << ',' << (profile.selected_sr[k] ? "true" : "false") << ','
        << (profile.selected_srdiff[k] ? "true" : "false");
    if (annotations) {
      auto it = annotations->find(profile.names[k]);
      csv << ',' << quote_csv_field(it == annotations->end() ? "" : it->second);
    }
    csv << '\n';
  }
  nlohmann::ordered_json j;
  j["threshold_sr"] = profile.threshold_sr;
  j["threshold_srdiff"] = profile.threshold_srdiff;
  j["n_subsamples"] = profile.n_subsamples;
  j["p"] = profile.p;
  j["q_sr"] = profile.q_sr;
  j["q_srdiff"] = profile.q_srdiff;
  j["raw_threshold_sr"] = profile.raw_threshold_sr;
  j["raw_threshold_srdiff"] = profile.raw_threshold_srdiff;
  j["failed_subsamples"] = profile.failed_subsamples;
  return {csv.str(), j.dump(2) + "\n"};
}

}  // namespace stabreg
