// Command-line front end: estimate, effects, hausman, weights, simulate.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdmc/sdmc.hpp"

namespace fs = std::filesystem;
using namespace sdmc;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

struct WeightOptions {
  std::string coords, distances, neighbors;
  std::string metric = "euclidean";
  double exponent = 1.0;
  std::string normalize = "none";
};

void add_weight_options(CLI::App* app, WeightOptions& w) {
  app->add_option("--coords", w.coords, "Coordinates CSV (region_id,x,y)");
  app->add_option("--distances", w.distances, "Distance CSV (region_i,region_j,distance)");
  app->add_option("--neighbors", w.neighbors, "Contiguity pair CSV (region_i,region_j)");
  app->add_option("--metric", w.metric, "Distance metric for coordinates")
      ->check(CLI::IsMember({"euclidean", "haversine"}));
  app->add_option("--exponent", w.exponent, "Distance decay exponent");
  app->add_option("--normalize", w.normalize, "Row normalisation")->check(CLI::IsMember({"none", "row"}));
}

std::vector<std::string> ids_in_order(const io::CsvTable& t, const std::vector<std::string>& columns) {
  std::vector<std::string> ids;
  for (const auto& row : t.rows)
    for (const auto& c : columns) {
      const auto& id = row[t.column(c)];
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  return ids;
}

/// Builds W from whichever source was given; aligned to `region_ids` when
/// they are known.
WeightMatrix load_weights(const WeightOptions& o, const std::optional<std::vector<std::string>>& region_ids) {
  const int sources = !o.coords.empty() + !o.distances.empty() + !o.neighbors.empty();
  if (sources != 1) fail(ErrorKind::ConfigError, "exactly one of --coords, --distances, --neighbors is required");
  WeightMatrix w;
  if (!o.coords.empty()) {
    w = build_inverse_distance(io::read_coordinates(o.coords), o.exponent, metric_from_string(o.metric));
  } else if (!o.distances.empty()) {
    const auto ids = region_ids ? *region_ids : ids_in_order(io::read_csv(o.distances), {"region_i", "region_j"});
    w = build_from_distances(ids, io::read_distances(o.distances), o.exponent);
  } else {
    const auto ids = region_ids ? *region_ids : ids_in_order(io::read_csv(o.neighbors), {"region_i", "region_j"});
    w = build_contiguity(io::read_neighbors(o.neighbors, ids), static_cast<Index>(ids.size()), ids);
  }
  if (region_ids) w = w.aligned_to(*region_ids);
  if (o.normalize == "row") w = row_normalize(w);
  return w;
}

struct PanelOptions {
  std::string panel;
  std::string dependent;
  std::string regressors;
  std::string log;
};

void add_panel_options(CLI::App* app, PanelOptions& p) {
  app->add_option("--panel", p.panel, "Panel CSV (region_id,period,<vars>...)")->required();
  app->add_option("--dep", p.dependent, "Dependent variable (default: first variable column)");
  app->add_option("--vars", p.regressors, "Comma-separated regressors (default: all other columns)");
  app->add_option("--log", p.log, "Comma-separated columns to log-transform on ingestion");
}

RegionPanel load_panel(const PanelOptions& p) {
  io::PanelReadOptions opt;
  opt.dependent = p.dependent;
  opt.regressors = split_list(p.regressors);
  opt.log_variables = split_list(p.log);
  return io::read_panel(p.panel, opt);
}

std::vector<PeriodDummy> parse_dummies(const std::vector<std::string>& specs) {
  std::vector<PeriodDummy> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || s.substr(0, eq) != "period" || eq + 1 == s.size())
      fail(ErrorKind::ConfigError, "dummy must be given as period=<label>, got '" + s + "'");
    const auto label = s.substr(eq + 1);
    out.push_back({"dummy_" + label, label});
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  auto out = io::open_output(path);
  out << text;
}

struct Output {
  std::string out;
  std::string format = "table";
};

void add_output_options(CLI::App* app, Output& o, const std::string& what) {
  app->add_option("--out", o.out, "Write " + what + " JSON to this path");
  app->add_option("--format", o.format, "Standard output format")->check(CLI::IsMember({"json", "table"}));
}

void emit(const Output& o, const Json& json, const std::string& table) {
  if (!o.out.empty()) write_text(o.out, json.dump(2) + "\n");
  std::cout << (o.format == "json" ? json.dump(2) + "\n" : table);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial Durbin panel models with cluster-masked spillovers"};
  app.require_subcommand(1);

  // estimate
  auto* est = app.add_subcommand("estimate", "Fit a spatial panel model");
  PanelOptions est_panel;
  WeightOptions est_w;
  Output est_out;
  std::string model = "sdm", clusters_path, lag_vars, mask = "source";
  std::vector<std::string> dummies;
  bool hausman_flag = false;
  double est_alpha = 0.05;
  std::optional<double> fixed_theta;
  add_panel_options(est, est_panel);
  add_weight_options(est, est_w);
  add_output_options(est, est_out, "fit");
  est->add_option("--model", model, "Model family")->check(CLI::IsMember({"sar", "sem", "sac", "sdm", "sdm-c"}));
  est->add_option("--clusters", clusters_path, "Cluster CSV (region_id,sector_id,member)");
  est->add_option("--lag-vars", lag_vars, "Comma-separated regressors that receive spatial lags (default: all)");
  est->add_option("--mask", mask, "Cluster mask convention")->check(CLI::IsMember({"source", "target", "both"}));
  est->add_option("--dummy", dummies, "Period dummy, e.g. period=2009 (repeatable)");
  est->add_flag("--hausman", hausman_flag, "Also run the FE vs RE Hausman test on the panel regressors");
  est->add_option("--alpha", est_alpha, "Significance level for the Hausman verdict");
  est->add_option("--fixed-theta", fixed_theta, "SAC: hold the error coefficient at this value");

  // effects
  auto* eff = app.add_subcommand("effects", "Direct, indirect and total effects of a fitted model");
  std::string fit_path, mode = "per-cluster";
  Index draws = 1000;
  std::uint64_t seed = 1;
  unsigned threads = default_threads();
  Output eff_out;
  eff->add_option("--fit", fit_path, "Fit JSON written by estimate")->required();
  eff->add_option("--draws", draws, "Simulation draws")->check(CLI::Range(Index{2}, Index{10000000}));
  eff->add_option("--seed", seed, "Random seed");
  eff->add_option("--mode", mode, "Cluster decomposition")->check(CLI::IsMember({"per-cluster", "aggregate"}));
  eff->add_option("--threads", threads, "Worker threads");
  add_output_options(eff, eff_out, "effects");

  // hausman
  auto* hau = app.add_subcommand("hausman", "Hausman test of fixed against random effects");
  PanelOptions hau_panel;
  Output hau_out;
  double alpha = 0.05;
  add_panel_options(hau, hau_panel);
  hau->add_option("--alpha", alpha, "Significance level");
  add_output_options(hau, hau_out, "test");

  // weights
  auto* wts = app.add_subcommand("weights", "Build a spatial weight matrix");
  WeightOptions w_opts;
  std::string w_out, w_format = "csv";
  add_weight_options(wts, w_opts);
  wts->add_option("--out", w_out, "Output path (default: standard output)");
  wts->add_option("--format", w_format, "Output format")->check(CLI::IsMember({"csv", "json", "table"}));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate synthetic panels or run a recovery experiment");
  std::string config_path, sim_dir, sim_model;
  std::optional<Index> sim_n, sim_t, replications;
  std::optional<std::uint64_t> sim_seed;
  std::optional<double> sim_rho;
  std::string fit_model;
  unsigned sim_threads = default_threads();
  sim->add_option("--config", config_path, "JSON config file");
  sim->add_option("--model", sim_model, "Generating family")->check(CLI::IsMember({"sar", "sem", "sac", "sdm", "sdm-c"}));
  sim->add_option("--n", sim_n, "Regions");
  sim->add_option("--t", sim_t, "Periods");
  sim->add_option("--rho", sim_rho, "Spatial parameter");
  sim->add_option("--seed", sim_seed, "Random seed");
  sim->add_option("--out", sim_dir, "Output directory for the CSV bundle");
  sim->add_option("--replications", replications, "Run a recovery experiment instead of writing data");
  sim->add_option("--fit-model", fit_model, "Family to fit in the recovery experiment")
      ->check(CLI::IsMember({"sar", "sem", "sac", "sdm", "sdm-c"}));
  sim->add_option("--threads", sim_threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "sdmc: error[Usage]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*est) {
      const RegionPanel panel = load_panel(est_panel);
      ModelSpec spec;
      spec.family = family_from_string(model);
      spec.mask = mask_convention_from_string(mask);
      spec.dummies = parse_dummies(dummies);
      spec.fixed_theta = fixed_theta;
      if (!lag_vars.empty()) spec.lagged_variables = split_list(lag_vars);
      if (spec.family == Family::sdm_c) {
        if (clusters_path.empty()) fail(ErrorKind::ConfigError, "--model sdm-c requires --clusters");
        spec.clusters = io::read_clusters(clusters_path, panel.region_ids());
      }
      const WeightMatrix w = load_weights(est_w, panel.region_ids());
      const FitResult f = fit(panel, w, spec);
      Json j = to_json(f);
      std::string table = render_fit_table(f);
      if (hausman_flag) {
        const HausmanResult h = hausman_test(panel);
        j["hausman"] = to_json(h, est_alpha);
        table += hausman_verdict(h, est_alpha) + "\n";
        std::cerr << hausman_verdict(h, est_alpha) << '\n';
      }
      emit(est_out, j, table);
    } else if (*eff) {
      std::ifstream in(fit_path);
      if (!in) fail(ErrorKind::IoError, "cannot open '" + fit_path + "'");
      Json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::ParseError, fit_path + ": " + e.what());
      }
      const FitResult f = fit_from_json(j);
      const EffectsTable t = effects_dispersion(f, {draws, seed, effects_mode_from_string(mode), threads});
      emit(eff_out, to_json(t), render_effects_table(t));
    } else if (*hau) {
      const RegionPanel panel = load_panel(hau_panel);
      const HausmanResult h = hausman_test(panel);
      emit(hau_out, to_json(h, alpha), hausman_verdict(h, alpha) + "\n");
    } else if (*wts) {
      const WeightMatrix w = load_weights(w_opts, std::nullopt);
      std::ostringstream text;
      if (w_format == "json") {
        Json j = {{"metric", to_string(w.metric())},
                  {"exponent", w.exponent()},
                  {"normalization", to_string(w.normalization())},
                  {"region_ids", w.region_ids()},
                  {"entries", detail::matrix_json(w.matrix())}};
        text << j.dump(2) << '\n';
      } else {
        io::write_weights(w, text);
      }
      if (w_out.empty()) std::cout << text.str();
      else write_text(w_out, text.str());
    } else if (*sim) {
      DgpConfig cfg;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) fail(ErrorKind::IoError, "cannot open '" + config_path + "'");
        Json j;
        try {
          in >> j;
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorKind::ConfigError, config_path + ": " + e.what());
        }
        cfg = dgp_config_from_json(j);
      }
      if (!sim_model.empty()) cfg.family = family_from_string(sim_model);
      if (sim_n) cfg.n = *sim_n;
      if (sim_t) cfg.t = *sim_t;
      if (sim_rho) cfg.rho = *sim_rho;
      if (sim_seed) cfg.seed = *sim_seed;

      if (replications) {
        RecoveryOptions ro;
        if (!fit_model.empty()) ro.fit_family = family_from_string(fit_model);
        ro.threads = sim_threads;
        const RecoveryReport rep = run_recovery(cfg, *replications, ro);
        Output o{sim_dir.empty() ? "" : (fs::path(sim_dir) / "recovery.json").string(), "table"};
        if (!sim_dir.empty()) fs::create_directories(sim_dir);
        emit(o, to_json(rep), render_recovery(rep));
      } else {
        if (sim_dir.empty()) fail(ErrorKind::ConfigError, "simulate needs --out <directory>");
        fs::create_directories(sim_dir);
        const fs::path dir(sim_dir);
        const SyntheticData data = generate(cfg);
        io::write_panel(data.panel, (dir / "panel.csv").string());
        std::string weight_flag;
        if (!data.coordinates.empty()) {
          io::write_coordinates(data.coordinates, (dir / "coords.csv").string());
          weight_flag = "--coords " + (dir / "coords.csv").string() + " --exponent " + io::detail::format_number(cfg.exponent);
        } else {
          io::write_neighbors(data.neighbors, data.panel.region_ids(), (dir / "neighbors.csv").string());
          weight_flag = "--neighbors " + (dir / "neighbors.csv").string();
        }
        std::string cluster_flag;
        if (!data.clusters.empty()) {
          io::write_clusters(data.clusters, data.panel.region_ids(), (dir / "clusters.csv").string());
          cluster_flag = " --clusters " + (dir / "clusters.csv").string() + " --mask " + to_string(cfg.mask);
        }
        Json truth = to_json(cfg);
        truth["true_parameters"] = true_parameters(cfg);
        write_text((dir / "truth.json").string(), truth.dump(2) + "\n");
        std::cout << "wrote " << dir.string() << "\n"
                  << "sdmc estimate --panel " << (dir / "panel.csv").string() << ' ' << weight_flag
                  << " --normalize " << to_string(cfg.normalization) << " --model " << to_string(cfg.family)
                  << cluster_flag << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << "sdmc: error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return e.kind() == ErrorKind::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "sdmc: error[Internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
