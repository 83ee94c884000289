#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "polylab/experiments.hpp"
#include "polylab/girsanov.hpp"
#include "polylab/run.hpp"

using nlohmann::json;

namespace {

polylab::Path load_path_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open path file: " + path);
  polylab::Path p;
  if (!(in >> p.dt)) throw std::runtime_error("path file: missing dt header");
  double v;
  while (in >> v) p.values.push_back(v);
  if (p.values.size() < 3 || p.values.front() != 0.0)
    throw std::runtime_error("path file: expected b_0 = 0 and >= 3 values");
  return p;
}

void write_or_print(const std::string& out, const std::string& text) {
  if (out.empty())
    std::cout << text;
  else
    polylab::write_text_file(out, text);
}

json probe_to_json(const polylab::ProbeResult& p) {
  return json{{"test", p.name},
              {"statistic", p.statistic},
              {"p_value", p.p_value},
              {"pass", p.pass}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polylab: Monte Carlo laboratory for a 1-D Brownian polymer in a "
               "correlated Gaussian environment"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string kernel_name = "polynomial4";
  std::uint64_t seed = 1;
  std::string out;
  std::string cache_dir;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--out", out, "output file (stdout when omitted)");
  app.add_option("--cache-dir", cache_dir, "field realization cache directory");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "partition function and free energy");
  double sim_beta = 1.0, sim_t = 8.0, sim_dt = 0.01;
  std::size_t sim_paths = 20000, sim_fields = 200;
  double sim_alpha = 0.55;
  sim->add_option("--kernel", kernel_name)->capture_default_str();
  sim->add_option("--beta", sim_beta)->capture_default_str();
  sim->add_option("--t", sim_t)->capture_default_str();
  sim->add_option("--dt", sim_dt)->capture_default_str();
  sim->add_option("--n-paths", sim_paths)->capture_default_str();
  sim->add_option("--n-fields", sim_fields)->capture_default_str();

  // ---- cov ----
  auto* cov = app.add_subcommand("cov", "block covariance matrix and delta solve");
  double cov_t = 16.0, cov_alpha = 0.55, cov_tau = 0.5;
  int cov_trunc = 16;
  std::string cov_path_file;
  cov->add_option("--kernel", kernel_name)->capture_default_str();
  cov->add_option("--t", cov_t)->capture_default_str();
  cov->add_option("--alpha", cov_alpha)->capture_default_str();
  cov->add_option("--trunc", cov_trunc)->capture_default_str();
  cov->add_option("--tau", cov_tau)->capture_default_str();
  cov->add_option("--path-file", cov_path_file,
                  "plain-text path (dt then values); adds v and delta columns");

  // ---- experiment drivers ----
  std::string config_file;
  auto add_config = [&config_file](CLI::App* cmd) {
    cmd->add_option("--config", config_file, "experiment config document");
  };
  auto* exponent = app.add_subcommand("exponent", "wandering exponent fit");
  add_config(exponent);
  auto* event_a = app.add_subcommand("event-a", "P(A_t) estimation");
  add_config(event_a);
  auto* fhat = app.add_subcommand("fhat", "F-hat event probability");
  add_config(fhat);

  // ---- annuli ----
  auto* annuli = app.add_subcommand("annuli", "annuli index families");
  int ann_m = 2, ann_trunc = 10;
  annuli->add_option("--m", ann_m)->capture_default_str();
  annuli->add_option("--trunc", ann_trunc)->capture_default_str();

  // ---- threshold ----
  auto* thresh = app.add_subcommand("threshold", "admissible alpha threshold");
  double th_theta = 1.0;
  bool th_weak = false;
  thresh->add_option("--theta", th_theta)->capture_default_str();
  thresh->add_flag("--weakened", th_weak, "weakened tail hypothesis");

  // ---- phi-bound ----
  auto* phib = app.add_subcommand("phi-bound", "Phi tail-product integral");
  int pb_m = 2;
  long long pb_q0 = 100;
  double pb_kappa = 1.0;
  phib->add_option("--m", pb_m)->capture_default_str();
  phib->add_option("--q0", pb_q0)->capture_default_str();
  phib->add_option("--kappa", pb_kappa)->capture_default_str();

  // ---- verify ----
  auto* verify = app.add_subcommand("verify", "numerical verification reports");
  verify->require_subcommand(1);
  auto* vgirs = verify->add_subcommand("girsanov", "entropic bound check");
  auto* vshift = verify->add_subcommand("shift-law", "shift law-equality check");
  int v_k = 1;
  double v_t = 16.0, v_alpha = 0.55, v_beta = 1.0, v_dt = 0.0;
  int v_trunc = 8;
  std::size_t v_fields = 20, v_paths = 2000, v_replicas = 400;
  for (CLI::App* cmd : {vgirs, vshift}) {
    cmd->add_option("--kernel", kernel_name)->capture_default_str();
    cmd->add_option("--k", v_k)->capture_default_str();
    cmd->add_option("--t", v_t)->capture_default_str();
    cmd->add_option("--alpha", v_alpha)->capture_default_str();
    cmd->add_option("--trunc", v_trunc)->capture_default_str();
  }
  vgirs->add_option("--beta", v_beta)->capture_default_str();
  vgirs->add_option("--dt", v_dt, "0 = ramp-aligned default");
  vgirs->add_option("--n-fields", v_fields)->capture_default_str();
  vgirs->add_option("--n-paths", v_paths)->capture_default_str();
  vshift->add_option("--n-replicas", v_replicas)->capture_default_str();
  vshift->add_option("--dt", v_dt, "0 = t/64");

  // ---- run ----
  auto* run = app.add_subcommand("run", "run an experiment from a config document");
  std::string run_config, run_manifest;
  run->add_option("--config", run_config, "config document");
  run->add_option("--manifest", run_manifest, "rerun a recorded manifest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const polylab::Kernel kernel = polylab::kernel_by_name(kernel_name);
      const polylab::FreeEnergyEstimate fe =
          polylab::free_energy(kernel, sim_beta, sim_t, sim_fields, sim_paths,
                               sim_dt, seed, cache_dir);
      std::vector<polylab::CsvRow> rows;
      rows.push_back({sim_t, sim_beta, sim_alpha, "free_energy", fe.value,
                      fe.std_error, sim_paths, sim_fields, seed});
      rows.push_back({sim_t, sim_beta, sim_alpha, "trivial_bound",
                      0.5 * sim_beta * sim_beta * kernel(0.0), 0.0, sim_paths,
                      sim_fields, seed});
      write_or_print(out, polylab::csv_to_string(rows));
      return 0;
    }
    if (*cov) {
      const polylab::Kernel kernel = polylab::kernel_by_name(kernel_name);
      const polylab::BlockGeometry geom =
          polylab::make_block_geometry(cov_t, cov_alpha, cov_trunc);
      const polylab::BlockMatrix C = polylab::covariance_matrix(kernel, geom);
      std::string text = "quantity,index,value\n";
      text += "lambda,0," + polylab::format_double(C.lambda()) + "\n";
      text += "a_norm_bound,0," +
              polylab::format_double(polylab::operator_weighted_norm(C, cov_tau)) +
              "\n";
      for (int d = 0; d <= 2 * cov_trunc; ++d)
        text += "c_row," + std::to_string(d) + "," +
                polylab::format_double(C.first_row()[std::size_t(d)]) + "\n";
      if (!cov_path_file.empty()) {
        const polylab::Path p = load_path_file(cov_path_file);
        const polylab::WeightedVector v =
            polylab::v_vector(kernel, geom, p, 0, cov_tau);
        const polylab::DeltaSolution sol = polylab::delta_solve(C, v);
        for (int i = -cov_trunc; i <= cov_trunc; ++i)
          text += "v," + std::to_string(i) + "," +
                  polylab::format_double(v.at(i)) + "\n";
        for (int i = -cov_trunc; i <= cov_trunc; ++i)
          text += "delta," + std::to_string(i) + "," +
                  polylab::format_double(sol.delta.at(i)) + "\n";
        text += "residual_norm,0," +
                polylab::format_double(sol.residual_norm) + "\n";
        // empirical gamma of the open question: sum beta |delta_j||j|^tau * t^alpha
        double s = 0.0;
        for (int i = -cov_trunc; i <= cov_trunc; ++i)
          if (i != 0)
            s += std::fabs(sol.delta.at(i)) * std::pow(std::abs(i), cov_tau);
        text += "gamma_estimate,0," +
                polylab::format_double(s * std::pow(cov_t, cov_alpha)) + "\n";
      }
      write_or_print(out, text);
      return 0;
    }
    if (*exponent || *event_a || *fhat || *run) {
      polylab::ConfigDoc doc;
      if (*run && !run_manifest.empty()) {
        std::ifstream in(run_manifest);
        if (!in) throw std::runtime_error("cannot open manifest: " + run_manifest);
        json manifest = json::parse(in);
        doc = polylab::ConfigDoc::parse(manifest.at("config").get<std::string>());
      } else if (!config_file.empty() || (*run && !run_config.empty())) {
        doc = polylab::ConfigDoc::load(*run ? run_config : config_file);
      }
      std::map<std::string, std::string> overrides(doc.entries());
      if (*exponent) overrides["experiment"] = "exponent";
      if (*event_a) overrides["experiment"] = "event-a";
      if (*fhat) overrides["experiment"] = "fhat";
      if (app.count("--seed")) overrides["seed"] = std::to_string(seed);
      if (!out.empty()) overrides["out"] = out;
      if (!cache_dir.empty()) overrides["cache_dir"] = cache_dir;
      std::string text;
      for (const auto& [k, v] : overrides) text += k + " = " + v + "\n";
      const polylab::RunArtifacts art =
          polylab::run_experiment(polylab::ConfigDoc::parse(text));
      polylab::write_text_file(art.csv_path, art.csv_text);
      polylab::write_text_file(art.manifest_path, art.manifest.dump(2) + "\n");
      std::cout << "wrote " << art.csv_path << " and " << art.manifest_path
                << "\n";
      return 0;
    }
    if (*annuli) {
      const polylab::AnnuliFamily fam = polylab::annuli_family(ann_m, ann_trunc);
      json j;
      j["m"] = fam.m;
      j["trunc"] = fam.trunc;
      j["q_seq"] = fam.q_seq;
      j["q_star"] = fam.q_star;
      j["sets"] = fam.sets;
      write_or_print(out, j.dump(2) + "\n");
      return 0;
    }
    if (*thresh) {
      const polylab::ThresholdResult r =
          polylab::threshold_alpha(th_theta, th_weak);
      json j;
      j["theta"] = th_theta;
      j["weakened"] = th_weak;
      j["alpha_max"] = r.alpha_max;
      j["corollary_form"] = r.corollary_form;
      j["superdiffusive_guaranteed"] = r.superdiffusive_guaranteed;
      write_or_print(out, j.dump(2) + "\n");
      return 0;
    }
    if (*phib) {
      const double v = polylab::phi_bound_integral(pb_m, pb_q0, pb_kappa);
      json j;
      j["m"] = pb_m;
      j["q0"] = pb_q0;
      j["kappa"] = pb_kappa;
      j["value"] = v;
      write_or_print(out, j.dump(2) + "\n");
      return 0;
    }
    if (*vgirs) {
      const polylab::Kernel kernel = polylab::kernel_by_name(kernel_name);
      const polylab::BlockGeometry geom =
          polylab::make_block_geometry(v_t, v_alpha, v_trunc);
      const polylab::EntropicBoundReport rep = polylab::verify_entropic_bound(
          kernel, geom, v_k, v_beta, v_fields, v_paths, seed, v_dt);
      json j;
      j["test"] = "entropic_bound";
      j["k"] = rep.k;
      j["t"] = rep.t;
      j["alpha"] = rep.alpha;
      j["beta"] = rep.beta;
      j["log_penalty"] = rep.log_penalty;
      j["support_paths"] = rep.support_paths;
      j["violations"] = rep.violations;
      j["min_log_margin"] = rep.min_log_margin;
      j["inconclusive_fields"] = rep.inconclusive_fields;
      j["conclusive"] = rep.conclusive;
      j["pass"] = rep.ok;
      write_or_print(out, j.dump(2) + "\n");
      return rep.ok || !rep.conclusive ? 0 : 1;
    }
    if (*vshift) {
      const polylab::Kernel kernel = polylab::kernel_by_name(kernel_name);
      const polylab::BlockGeometry geom =
          polylab::make_block_geometry(v_t, v_alpha, v_trunc);
      const double dt = v_dt > 0.0 ? v_dt : v_t / 64.0;
      const polylab::ShiftLawReport rep =
          polylab::verify_shift_law(kernel, geom, dt, v_k, v_replicas, seed);
      json j;
      j["test"] = "shift_law";
      j["k"] = rep.k;
      j["level"] = rep.level;
      j["degenerate"] = rep.degenerate;
      j["pass"] = rep.all_pass;
      j["probes"] = json::array();
      for (const auto& p : rep.probes) j["probes"].push_back(probe_to_json(p));
      write_or_print(out, j.dump(2) + "\n");
      return rep.all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
