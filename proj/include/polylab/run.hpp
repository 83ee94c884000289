#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "polylab/experiments.hpp"
#include "polylab/report.hpp"

namespace polylab {

inline std::vector<CsvRow> exponent_rows(const ExponentReport& rep) {
  std::vector<CsvRow> rows;
  const ExperimentConfig& c = rep.config;
  auto push = [&](double t, const std::string& name, double v, double se) {
    rows.push_back({t, c.beta, c.alpha, name, v, se, c.n_paths, c.n_fields, c.seed});
  };
  for (const RungResult& r : rep.rungs) {
    push(r.t, "gibbs_sup_mean", r.gibbs_sup_mean, r.gibbs_sup_se);
    push(r.t, "gibbs_sup_min", r.gibbs_sup_min, 0.0);
    push(r.t, "gibbs_sup_max", r.gibbs_sup_max, 0.0);
    push(r.t, "control_sup_mean", r.control_sup_mean, r.control_sup_se);
    push(r.t, "event_a_prob", r.event_a.point,
         0.5 * (r.event_a.hi - r.event_a.lo));
    push(r.t, "pgrow_freq", r.pgrow.point, 0.5 * (r.pgrow.hi - r.pgrow.lo));
    push(r.t, "mean_ess", r.mean_ess, 0.0);
    push(r.t, "zero_support_blocks", double(r.zero_support_blocks), 0.0);
  }
  return rows;
}

inline std::vector<CsvRow> event_a_rows(const EventAReport& rep) {
  std::vector<CsvRow> rows;
  const ExperimentConfig& c = rep.config;
  for (const RungResult& r : rep.rungs) {
    rows.push_back({r.t, c.beta, c.alpha, "event_a_prob", r.event_a.point,
                    0.5 * (r.event_a.hi - r.event_a.lo), c.n_paths, c.n_fields,
                    c.seed});
    rows.push_back({r.t, c.beta, c.alpha, "zero_support_blocks",
                    double(r.zero_support_blocks), 0.0, c.n_paths, c.n_fields,
                    c.seed});
  }
  return rows;
}

inline std::vector<CsvRow> fhat_rows(const FHatReport& rep) {
  std::vector<CsvRow> rows;
  const ExperimentConfig& c = rep.config;
  for (const FHatRung& r : rep.rungs) {
    rows.push_back({r.t, c.beta, c.alpha,
                    "fhat_prob[M=" + std::to_string(r.trunc) + "]",
                    r.probability.point,
                    0.5 * (r.probability.hi - r.probability.lo), 0, c.n_fields,
                    c.seed});
    rows.push_back({r.t, c.beta, c.alpha, "tau_t", r.tau_t, 0.0, 0, c.n_fields,
                    c.seed});
  }
  return rows;
}

struct RunArtifacts {
  std::string experiment;
  std::string csv_text;
  nlohmann::json manifest;
  std::string csv_path;
  std::string manifest_path;
};

// Runs the experiment named by `experiment = exponent | event-a | fhat` in the
// config document, producing the CSV table and a JSON manifest from which the
// run can be reproduced bit-identically.
inline RunArtifacts run_experiment(const ConfigDoc& doc) {
  const ExperimentConfig cfg = config_from_doc(doc);
  const std::string experiment = doc.get("experiment").value_or("exponent");
  const bool need_fit = experiment == "exponent";
  std::vector<std::string> errors = validate_config(cfg, need_fit);
  if (experiment != "exponent" && experiment != "event-a" && experiment != "fhat")
    errors.push_back("unknown experiment: " + experiment);
  if (!errors.empty()) {
    std::string msg = "config validation failed:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }

  RunArtifacts art;
  art.experiment = experiment;
  nlohmann::json extra;
  if (experiment == "exponent") {
    const ExponentReport rep = estimate_wandering_exponent(cfg);
    art.csv_text = csv_to_string(exponent_rows(rep));
    extra["fit_slope"] = rep.fit.slope;
    extra["fit_slope_ci_half"] = rep.fit.slope_ci_half;
    extra["control_slope"] = rep.control_fit.slope;
    extra["control_slope_ci_half"] = rep.control_fit.slope_ci_half;
    extra["control_ok"] = rep.control_ok;
    extra["beta_exceeds_control"] = rep.beta_exceeds_control;
    extra["event_a_nondecreasing"] = rep.event_a_nondecreasing;
    extra["pgrow_nondecreasing"] = rep.pgrow_nondecreasing;
  } else if (experiment == "event-a") {
    const EventAReport rep = event_A_probability(cfg);
    art.csv_text = csv_to_string(event_a_rows(rep));
    extra["nondecreasing"] = rep.nondecreasing;
  } else {
    const FHatReport rep = f_hat_probability(cfg);
    art.csv_text = csv_to_string(fhat_rows(rep));
    extra["d_lo"] = rep.d_lo;
    extra["d_hi"] = rep.d_hi;
    extra["d_estimated"] = rep.d_estimated;
    extra["tau_decreasing"] = rep.tau_decreasing;
    if (rep.smallest_passing_trunc)
      extra["smallest_passing_trunc"] = *rep.smallest_passing_trunc;
  }

  art.manifest["version"] = kPolylabVersion;
  art.manifest["experiment"] = experiment;
  art.manifest["config"] = doc.canonical();
  art.manifest["config_hash"] = config_hash(doc);
  art.manifest["seed"] = cfg.seed;
  art.manifest["results"] = extra;

  const std::string base = cfg.out_path.empty() ? experiment : cfg.out_path;
  art.csv_path = base + ".csv";
  art.manifest_path = base + ".manifest.json";
  return art;
}

// Re-runs the experiment recorded in a manifest; output is bit-identical to
// the original run because everything is derived from the canonical config.
inline RunArtifacts rerun_from_manifest(const nlohmann::json& manifest) {
  const std::string config_text = manifest.at("config").get<std::string>();
  return run_experiment(ConfigDoc::parse(config_text));
}

}  // namespace polylab
