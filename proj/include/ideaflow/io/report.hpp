#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ideaflow/classical.hpp"
#include "ideaflow/error.hpp"
#include "ideaflow/fit_bayes.hpp"
#include "ideaflow/fit_ml.hpp"
#include "ideaflow/noise_model.hpp"

namespace ideaflow::io {

using json = nlohmann::ordered_json;

// Bumped whenever a field is renamed or removed. Adding fields keeps the version.
inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

// Non-finite doubles become null (JSON has no NaN or infinity).
inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json num_array(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline json model_json(const NoiseModel& m) {
  json j;
  j["structure"] = std::string(to_string(m.structure));
  j["beta"] = num(m.beta);
  j["lambda"] = num(m.lambda);
  if (m.is_drift_diffusion()) {
    j["law"] = m.structure == Structure::Feller ? "feller" : "gaussian";
    j["theta"] = num(m.drift());
    j["sigma"] = num(m.noise_scale());
  } else {
    const auto p = m.stable_params();
    j["law"] = "stable";
    j["theta"] = num(p.rate);
    j["c"] = num(p.scale);
    j["alpha"] = num(p.alpha);
    j["skew"] = num(p.skew);
  }
  return j;
}

inline json model_class_json(const ModelClass& c) {
  json j;
  j["structure"] = std::string(to_string(c.structure));
  j["family"] = std::string(to_string(c.family));
  j["fixed_beta"] = c.fixed_beta ? num(*c.fixed_beta) : json(nullptr);
  j["fixed_lambda"] = c.fixed_lambda ? num(*c.fixed_lambda) : json(nullptr);
  return j;
}

inline json fit_json(const FitResult& f) {
  json j;
  j["model_class"] = model_class_json(f.cls);
  j["model"] = model_json(f.model);
  const auto names = f.cls.parameter_names();
  const auto values = f.cls.natural(f.raw);
  json est = json::object(), se = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    est[names[i]] = num(values[i]);
    se[names[i]] = f.fisher_se ? num((*f.fisher_se)[i]) : json(nullptr);
  }
  j["estimates"] = est;
  j["fisher_se"] = f.fisher_se ? se : json(nullptr);
  j["r"] = num(f.r());
  j["fisher_se_r"] = f.fisher_se_r ? num(*f.fisher_se_r) : json(nullptr);
  j["lambda_raw"] = num(f.lambda_raw());
  j["lambda_clipped"] = num(f.lambda_clipped());
  j["loglik"] = num(f.loglik);
  j["converged"] = f.converged;
  j["n_restarts_used"] = f.n_restarts_used;
  j["evaluations"] = f.evaluations;
  j["restart_neg_loglik"] = num_array(f.restart_values);
  return j;
}

inline json bootstrap_json(const BootstrapResult& b) {
  json j;
  j["replicates"] = b.draws.size();
  json se = json::object();
  for (std::size_t i = 0; i < b.names.size(); ++i) se[b.names[i]] = num(b.se[i]);
  j["se"] = se;
  j["conditional_on_lambda_positive"] = {{"n", b.n_conditional},
                                         {"r_median", num(b.conditional_r_median)},
                                         {"r_se", num(b.conditional_r_se)}};
  j["n_lambda_negative"] = b.n_lambda_negative;
  j["n_redrawn"] = b.n_retries;
  j["columns"] = b.names;
  json rows = json::array();
  for (const auto& r : b.draws) rows.push_back(num_array(r));
  j["draws"] = rows;
  return j;
}

inline json lrt_json(const LrtResult& r) {
  return {{"statistic", num(r.stat)},
          {"p_value", num(r.p_value)},
          {"df", 1},
          {"constrained", fit_json(r.constrained)},
          {"free", fit_json(r.free)}};
}

inline json cv_json(const CrossValidation& cv, const ObservationSet& obs) {
  json j;
  j["split_index"] = cv.split_index;
  j["split_time"] = num(obs[cv.split_index].t);
  json entries = json::array();
  for (const auto& e : cv.entries) {
    entries.push_back({{"model_class", model_class_json(e.cls)},
                       {"train_loglik", num(e.train_loglik)},
                       {"test_loglik", num(e.test_loglik)},
                       {"delta_vs_first", num(e.delta_vs_first)},
                       {"fit", fit_json(e.fit)}});
  }
  j["entries"] = entries;
  return j;
}

inline json ols_json(const OlsFit& f) {
  return {{"theta", num(f.theta_hat)},     {"beta", num(f.beta_hat)},
          {"lambda", num(f.lambda_hat)},   {"r", num(f.r_hat())},
          {"se_log_theta", num(f.se_log_theta)}, {"se_beta", num(f.se_beta)},
          {"se_lambda", num(f.se_lambda)}, {"residual_variance", num(f.residual_variance)},
          {"rho", num(f.rho)},             {"effective_n", num(f.effective_n)},
          {"n", f.n},                      {"merged_windows", f.merged_windows}};
}

inline json percentile_table_json(const std::vector<PercentileRow>& rows) {
  json j = json::object();
  for (const auto& r : rows) {
    json row = json::object();
    for (std::size_t i = 0; i < kPercentileGrid.size(); ++i)
      row["p" + std::to_string(static_cast<int>(kPercentileGrid[i]))] = num(r.values[i]);
    j[r.name] = row;
  }
  return j;
}

inline json mcmc_diagnostics_json(const McmcResult& m) {
  json rhat = json::object();
  for (std::size_t i = 0; i < m.names.size(); ++i) rhat[m.names[i]] = num(m.rhat[i]);
  return {{"chains", m.samples.size()},
          {"kept_per_chain", m.kept()},
          {"acceptance", num_array(m.acceptance)},
          {"split_rhat", rhat},
          {"converged", m.converged},
          {"warning", m.warning ? json(*m.warning) : json(nullptr)}};
}

inline json bayes_json(const BayesResult& b) {
  return {{"anchors", {{"a_scale", num(b.anchors.a_scale)}, {"i_scale", num(b.anchors.i_scale)}, {"g_input", num(b.anchors.g_input)}}},
          {"t_start", num(b.t_start)},
          {"t_end", num(b.t_end)},
          {"a_ratio", num(b.a_ratio)},
          {"posterior_percentiles", percentile_table_json(b.table)},
          {"prior_percentiles", percentile_table_json(b.prior_table)},
          {"diagnostics", mcmc_diagnostics_json(b.posterior.mcmc)}};
}

inline json series_json(const TimeSeries& s) {
  return {{"t", num_array(s.times())}, {"value", num_array(s.values())}};
}

// Top-level envelope shared by every command.
inline json make_report(const std::string& command, std::uint64_t seed, json config) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["tool"] = {{"name", "ideaflow"}, {"version", kToolVersion}};
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = std::move(config);
  j["results"] = json::object();
  j["warnings"] = json::array();
  return j;
}

inline std::string dump_report(const json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

}  // namespace ideaflow::io
