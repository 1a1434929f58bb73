#include "scenario_ddc/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "scenario_ddc/config.hpp"
#include "scenario_ddc/error.hpp"
#include "scenario_ddc/experiments.hpp"
#include "scenario_ddc/io.hpp"
#include "scenario_ddc/scenario.hpp"

namespace scenario_ddc {

namespace {

namespace fs = std::filesystem;
using io::json;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitSolver = 2;
constexpr int kExitInfeasible = 3;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 0;
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("SCENARIO_DDC_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("SCENARIO_DDC_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig cfg = g.config.empty() ? ExperimentConfig{} : load_experiment_config(g.config);
  if (g.seed) cfg.master_seed = *g.seed;
  if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
  cfg.validate();
  return cfg;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string provenance_line(const std::string& command, const ExperimentConfig& cfg) {
  return std::string("scenario-ddc ") + SCENARIO_DDC_VERSION + " command=" + command +
         " master_seed=" + std::to_string(cfg.master_seed) + " time=" + utc_timestamp();
}

// ---------------------------------------------------------------------------

struct BoundArgs {
  std::optional<double> alpha, epsilon;
  int nx = 3, nu = 3;
};

int cmd_bound(const Globals& g, const BoundArgs& a, std::ostream& out) {
  const ExperimentConfig cfg = load_config(g);
  const double alpha = a.alpha.value_or(cfg.scenario.alpha);
  const double epsilon = a.epsilon.value_or(cfg.scenario.epsilon);
  const ScenarioSpec s = make_scenario_spec(alpha, epsilon, a.nx, a.nu);
  std::ostringstream raw3;
  raw3 << std::fixed << std::setprecision(3) << s.raw;
  json j;
  j["alpha"] = alpha;
  j["epsilon"] = epsilon;
  j["nx"] = a.nx;
  j["nu"] = a.nu;
  j["n"] = s.n;
  j["raw"] = s.raw;
  j["N"] = s.N_required;
  j["note"] = "N is the ceiling of the raw bound " + raw3.str() + "; " + std::to_string(s.N_required - 1) +
              " scenarios (the raw value truncated) would fall just short of it";
  out << j.dump() << '\n';
  return kExitOk;
}

struct GenerateArgs {
  std::optional<int> N, M;
  std::optional<double> sigma2, wbar;
  std::string out;
  bool with_ground_truth = false;
};

int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out) {
  const ExperimentConfig cfg = load_config(g);
  const int N = a.N.value_or(cfg.fleet.N);
  RolloutConfig rc;
  rc.M = a.M.value_or(cfg.fleet.M);
  rc.wbar = a.wbar.value_or(cfg.fleet.wbar);
  rc.input_law = cfg.fleet.input_law;
  rc.x0_law = cfg.fleet.x0_law;
  rc.overflow = OverflowPolicy::kTruncate;
  if (N < 1) throw ValidationError("--N must be >= 1");
  const FleetDistribution dist = default_benchmark_fleet(a.sigma2.value_or(cfg.fleet.sigma2), cfg.fleet.truncation);
  const GeneratedDataset gd = generate_dataset(dist, N, rc, cfg.master_seed);

  const fs::path path = a.out.empty() ? fs::path(cfg.output_dir) / "dataset.json" : fs::path(a.out);
  io::write_json_file(path, io::dataset_to_json(io::make_dataset(gd, rc.M)));
  json summary{{"dataset", path.string()}, {"N", N}, {"M", rc.M}, {"wbar", rc.wbar}};
  if (a.with_ground_truth) {
    fs::path truth = path;
    truth.replace_extension(".truth.json");
    io::write_json_file(truth, io::ground_truth_to_json(gd));
    summary["ground_truth"] = truth.string();
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

struct SynthesizeArgs {
  std::string data;
  std::optional<double> wbar, delta;
  std::string out;
  std::string objective;
};

int cmd_synthesize(const Globals& g, const SynthesizeArgs& a, std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = load_config(g);
  const std::string bytes = io::read_text_file(a.data);
  json dj;
  try {
    dj = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ValidationError(a.data + ": " + e.what());
  }
  const io::Dataset ds = io::dataset_from_json(dj);
  const double wbar = a.wbar.value_or(cfg.fleet.wbar);
  if (!(wbar >= 0.0)) throw ValidationError("--wbar must be >= 0");

  sdp::InteriorPointOptions bo;
  bo.feasibility_tol = cfg.solver.feasibility_tol;
  bo.max_iterations = cfg.solver.max_iterations;
  const auto backend = sdp::make_backend(cfg.solver.backend, bo);

  std::vector<DataMatrices> dms;
  std::vector<NoiseModelQMI> qmis;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    const Trajectory& tr = ds.trajectories[i];
    DataMatrices dm = build_data_matrices(tr);
    NoiseModelQMI qmi = noise_model_from_bound(wbar, dm.horizon(), dm.nx());
    SlaterOptions so;
    so.backend = backend.get();
    if (!check_generalized_slater(dm, qmi, so).satisfied) {
      err << "warning: trajectory " << i << " (" << tr.system_id << ") fails the Slater condition; dropped\n";
      continue;
    }
    if (tr.seed) seeds.push_back(*tr.seed);
    dms.push_back(std::move(dm));
    qmis.push_back(std::move(qmi));
  }
  if (dms.empty()) {
    err << "no trajectory satisfies the Slater condition\n";
    out << json{{"status", "infeasible"}, {"scenarios", 0}}.dump() << '\n';
    return kExitInfeasible;
  }

  const LmiProblem prob = assemble_scenario_lmi(dms, qmis, a.delta.value_or(cfg.solver.delta));
  SynthesisOptions opts;
  opts.objective = a.objective.empty() ? cfg.solver.objective : synthesis_objective_from_string(a.objective);
  opts.tol_psd = cfg.solver.tol_psd;
  const SynthesisResult res = solve_feasibility(prob, *backend, opts);

  json summary{{"status", to_string(res.status)},
               {"scenarios", dms.size()},
               {"dropped", ds.trajectories.size() - dms.size()},
               {"message", res.diagnostics.message}};
  if (res.status == SynthesisStatus::kNumericalFailure) {
    out << summary.dump() << '\n';
    return kExitSolver;
  }
  if (res.status == SynthesisStatus::kInfeasible) {
    out << summary.dump() << '\n';
    return kExitInfeasible;
  }
  io::ControllerProvenance prov{io::sha256_hex(bytes), seeds, SCENARIO_DDC_VERSION};
  const fs::path path = a.out.empty() ? fs::path(cfg.output_dir) / "controller.json" : fs::path(a.out);
  io::write_json_file(path, io::controller_to_json(io::controller_from_certificate(*res.certificate, prov)));
  summary["controller"] = path.string();
  summary["K"] = io::matrix_to_json(res.certificate->K);
  out << summary.dump() << '\n';
  return kExitOk;
}

struct ValidateArgs {
  std::string controller;
  std::optional<double> sigma2;
  std::optional<int> n_test;
  std::string out;
};

int cmd_validate(const Globals& g, const ValidateArgs& a, std::ostream& out) {
  const ExperimentConfig cfg = load_config(g);
  const io::ControllerFile c = io::controller_from_json(io::read_json_file(a.controller));
  const FleetDistribution dist = default_benchmark_fleet(a.sigma2.value_or(cfg.fleet.sigma2), cfg.fleet.truncation);
  if (c.nx != dist.nx() || c.nu != dist.nu())
    throw ValidationError("controller dimensions do not match the benchmark fleet");
  const int n_test = a.n_test.value_or(cfg.sweep.n_test);
  if (n_test < 1) throw ValidationError("--n-test must be >= 1");
  const ValidationReport r = estimate_alpha(c.K, c.P, dist, n_test, cfg.master_seed, cfg.solver.tol_psd);
  const json j = io::validation_report_to_json(r);
  if (!a.out.empty()) io::write_json_file(a.out, j);
  out << j.dump() << '\n';
  return kExitOk;
}

int cmd_experiment(const Globals& g, const std::string& which, const std::string& argv_line, std::ostream& out) {
  const ExperimentConfig cfg = load_config(g);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  io::write_text_file(dir / "columns.txt", column_documentation());
  io::write_text_file(dir / (which + ".ini"), render_experiment_config(cfg));

  if (which == "uncertainty-sets-1d") {
    const fs::path sub = dir / "uncertainty_sets_1d";
    fs::create_directories(sub);
    const UncertaintyStudy st = run_uncertainty_sets_1d(cfg, sub);
    json rows = json::array();
    for (const auto& r : st.summary)
      rows.push_back({{"M", r.M},
                      {"centroid_dispersion", r.centroid_dispersion},
                      {"area_mean", r.area_mean},
                      {"true_system_inside_all", r.true_system_inside_all}});
    out << json{{"rasters", st.rasters.size()}, {"summary", (sub / "summary.csv").string()}, {"rows", rows}}.dump()
        << '\n';
    return kExitOk;
  }

  SweepOptions so;
  so.threads = resolve_threads(g.threads);
  so.provenance = provenance_line(argv_line, cfg);
  const bool sigma_n = which == "heatmap-sigma-n";
  so.csv_path = dir / (sigma_n ? "heatmap_sigma_n.csv" : "heatmap_m_n.csv");
  const auto records = sigma_n ? run_heatmap_sigma_N(cfg, so) : run_heatmap_M_N(cfg, so);
  int ok = 0, infeasible = 0, failed = 0;
  for (const auto& r : records) {
    ok += r.status == RecordStatus::kOk;
    infeasible += r.status == RecordStatus::kInfeasible;
    failed += r.status == RecordStatus::kSolverFailure;
  }
  out << json{{"records", records.size()},
              {"ok", ok},
              {"infeasible", infeasible},
              {"solver_failure", failed},
              {"csv", so.csv_path.string()}}
             .dump()
      << '\n';
  return kExitOk;
}

struct AggregateArgs {
  std::string input;
  std::string metric = "spectral";
  std::string out;
};

int cmd_aggregate(const AggregateArgs& a, const std::string& argv_line, std::ostream& out) {
  const auto metric = stability_metric_from_string(a.metric);
  const auto records = read_records_csv(a.input);
  const auto rows = aggregate(records, metric);
  fs::path path = a.out;
  if (path.empty()) {
    path = a.input;
    path.replace_filename(path.stem().string() + "_aggregate.csv");
  }
  const std::string prov = std::string("scenario-ddc ") + SCENARIO_DDC_VERSION + " command=" + argv_line +
                           " time=" + utc_timestamp();
  io::write_text_file(path, format_aggregate_csv(rows, prov));
  out << json{{"groups", rows.size()}, {"csv", path.string()}}.dump() << '\n';
  return kExitOk;
}

std::string join_argv(int argc, char** argv) {
  std::string s;
  for (int i = 1; i < argc; ++i) {
    if (i > 1) s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

int cli_main(int argc, char** argv) { return cli_main(argc, argv, std::cout, std::cerr); }

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scenario-based direct data-driven control of probabilistic linear systems", "scenario-ddc"};
  app.set_version_flag("--version", SCENARIO_DDC_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Experiment configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed (overrides the configuration)");
  app.add_option("--out", g.out_dir, "Output directory (overrides the configuration)");
  app.add_option("--threads", g.threads, "Worker threads (fallback: SCENARIO_DDC_THREADS, then all cores)")
      ->check(CLI::PositiveNumber);

  BoundArgs ba;
  auto* bound = app.add_subcommand("bound", "Number of scenarios needed for a given (alpha, epsilon)");
  bound->add_option("--alpha", ba.alpha, "Violation level in (0, 1)");
  bound->add_option("--epsilon", ba.epsilon, "Confidence parameter in (0, 1)");
  bound->add_option("--nx", ba.nx, "State dimension")->capture_default_str();
  bound->add_option("--nu", ba.nu, "Input dimension")->capture_default_str();

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Sample systems from the benchmark fleet and record one trajectory each");
  gen->add_option("--N", ga.N, "Number of systems");
  gen->add_option("--M", ga.M, "Trajectory length");
  gen->add_option("--sigma2", ga.sigma2, "Fleet variance scale");
  gen->add_option("--wbar", ga.wbar, "Per-step noise energy bound");
  gen->add_option("--out", ga.out, "Dataset file (default <out-dir>/dataset.json)");
  gen->add_flag("--with-ground-truth", ga.with_ground_truth, "Also write the sampled systems next to the dataset");

  SynthesizeArgs sa;
  auto* syn = app.add_subcommand("synthesize", "Compute a controller from a dataset");
  syn->add_option("--data", sa.data, "Dataset file")->required()->check(CLI::ExistingFile);
  syn->add_option("--wbar", sa.wbar, "Per-step noise energy bound");
  syn->add_option("--out", sa.out, "Controller file (default <out-dir>/controller.json)");
  syn->add_option("--delta", sa.delta, "Lower bound on P and b");
  syn->add_option("--objective", sa.objective, "feasibility or max-margin")
      ->check(CLI::IsMember({"feasibility", "max-margin"}));

  ValidateArgs va;
  auto* val = app.add_subcommand("validate", "Estimate the violation probability of a controller");
  val->add_option("--controller", va.controller, "Controller file")->required()->check(CLI::ExistingFile);
  val->add_option("--sigma2", va.sigma2, "Fleet variance scale");
  val->add_option("--n-test", va.n_test, "Number of fresh systems");
  val->add_option("--report", va.out, "Also write the report to this file");

  auto* exp = app.add_subcommand("experiment", "Run an experiment sweep");
  exp->require_subcommand(1);
  std::string which;
  const std::pair<const char*, const char*> sweeps[] = {
      {"heatmap-sigma-n", "Stability and feasibility over fleet variance and number of trajectories"},
      {"heatmap-m-n", "Stability and feasibility over trajectory length and number of trajectories"},
      {"uncertainty-sets-1d", "Data-consistent sets of a scalar system for several trajectory lengths"}};
  for (const auto& [name, help] : sweeps) {
    exp->add_subcommand(name, help)->callback([&which, name = name] { which = name; });
  }
  exp->fallthrough();

  AggregateArgs aa;
  auto* agg = app.add_subcommand("aggregate", "Average raw sweep records per grid point");
  agg->add_option("--input", aa.input, "Raw records CSV")->required()->check(CLI::ExistingFile);
  agg->add_option("--metric", aa.metric, "spectral or quadratic")
      ->check(CLI::IsMember({"spectral", "quadratic"}))
      ->capture_default_str();
  agg->add_option("--out", aa.out, "Aggregated CSV (default <input>_aggregate.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitInvalid;
  }

  const std::string line = join_argv(argc, argv);
  try {
    if (*bound) return cmd_bound(g, ba, out);
    if (*gen) return cmd_generate(g, ga, out);
    if (*syn) return cmd_synthesize(g, sa, out, err);
    if (*val) return cmd_validate(g, va, out);
    if (*exp) return cmd_experiment(g, which, line, out);
    if (*agg) return cmd_aggregate(aa, line, out);
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace scenario_ddc
