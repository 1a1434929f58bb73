#include "scenario_ddc/experiments.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>

#include "scenario_ddc/error.hpp"
#include "scenario_ddc/io.hpp"
#include "scenario_ddc/rng.hpp"

namespace scenario_ddc {

const char* to_string(RecordStatus s) noexcept {
  switch (s) {
    case RecordStatus::kOk: return "ok";
    case RecordStatus::kInfeasible: return "infeasible";
    case RecordStatus::kSolverFailure: return "solver-failure";
  }
  return "unknown";
}

std::uint64_t cell_seed(std::uint64_t master_seed, const CellIndex& idx) noexcept {
  return derive_seed(master_seed, {idx.sigma2_index, idx.N_index, idx.M_index, static_cast<std::uint64_t>(idx.rep)});
}

namespace {

RolloutConfig rollout_config(const FleetSettings& f, int M) {
  RolloutConfig rc;
  rc.M = M;
  rc.wbar = f.wbar;
  rc.input_law = f.input_law;
  rc.x0_law = f.x0_law;
  // Unstable realizations explode over long horizons; keep the valid prefix.
  rc.overflow = OverflowPolicy::kTruncate;
  return rc;
}

// One trajectory that satisfies the Slater condition, re-recorded up to
// `retries` times; nullopt when every attempt fails.
std::optional<DataMatrices> record_with_slater(const SystemSample& sys, const RolloutConfig& rc, std::uint64_t tseed,
                                               int retries, const sdp::SdpBackend& backend) {
  for (int attempt = 0; attempt <= retries; ++attempt) {
    Rollout ro;
    try {
      ro = record_rollout(sys, rc, rollout_stream(tseed, static_cast<std::uint64_t>(attempt)));
    } catch (const SamplingError&) {
      continue;
    }
    DataMatrices dm = build_data_matrices(ro.trajectory);
    const NoiseModelQMI qmi = noise_model_from_bound(rc.wbar, dm.horizon(), dm.nx());
    SlaterOptions so;
    so.backend = &backend;
    if (check_generalized_slater(dm, qmi, so).satisfied) return dm;
  }
  return std::nullopt;
}

}  // namespace

ExperimentRecord run_cell(const ExperimentConfig& cfg, double sigma2, int N, int M, const CellIndex& idx) {
  ExperimentRecord rec;
  rec.sigma2 = sigma2;
  rec.N = N;
  rec.M = M;
  rec.rep = idx.rep;
  rec.seed = cell_seed(cfg.master_seed, idx);
  try {
    if (N < 1 || M < 1) throw ValidationError("run_cell: N and M must be >= 1");
    const FleetDistribution dist = default_benchmark_fleet(sigma2, cfg.fleet.truncation);
    const RolloutConfig rc = rollout_config(cfg.fleet, M);
    sdp::InteriorPointOptions bo;
    bo.feasibility_tol = cfg.solver.feasibility_tol;
    bo.max_iterations = cfg.solver.max_iterations;
    const auto backend = sdp::make_backend(cfg.solver.backend, bo);

    const std::uint64_t training_root = derive_seed(rec.seed, 0);
    std::vector<DataMatrices> dms;
    std::vector<NoiseModelQMI> qmis;
    for (int i = 0; i < N; ++i) {
      const std::uint64_t tseed = trajectory_seed(training_root, static_cast<std::uint64_t>(i));
      Rng sys_rng(system_stream(tseed));
      const SystemSample sys = sample_system(dist, sys_rng);
      if (auto dm = record_with_slater(sys, rc, tseed, cfg.solver.slater_retries, *backend)) {
        qmis.push_back(noise_model_from_bound(rc.wbar, dm->horizon(), dm->nx()));
        dms.push_back(std::move(*dm));
      }
    }
    rec.effective_N = static_cast<int>(dms.size());
    rec.slater_ok = static_cast<double>(dms.size()) / N;
    if (dms.empty()) {
      rec.status = RecordStatus::kInfeasible;
      rec.message = "no trajectory satisfied the Slater condition";
      return rec;
    }

    const LmiProblem prob = assemble_scenario_lmi(dms, qmis, cfg.solver.delta);
    SynthesisOptions so;
    so.objective = cfg.solver.objective;
    so.tol_psd = cfg.solver.tol_psd;
    const auto t0 = std::chrono::steady_clock::now();
    const SynthesisResult res = solve_feasibility(prob, *backend, so);
    const auto t1 = std::chrono::steady_clock::now();
    if (cfg.solver.record_timing) rec.solve_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.message = res.diagnostics.message;

    switch (res.status) {
      case SynthesisStatus::kFeasible: {
        rec.feasible = true;
        rec.status = RecordStatus::kOk;
        const auto& cert = *res.certificate;
        const ValidationReport vr = estimate_alpha(cert.K, cert.P, dist, cfg.sweep.n_test, derive_seed(rec.seed, 1));
        rec.alpha_hat_spectral = vr.alpha_hat_spectral;
        rec.alpha_hat_quadratic = vr.alpha_hat_quadratic;
        break;
      }
      case SynthesisStatus::kInfeasible: rec.status = RecordStatus::kInfeasible; break;
      case SynthesisStatus::kNumericalFailure: rec.status = RecordStatus::kSolverFailure; break;
    }
  } catch (const std::exception& e) {
    rec.feasible = false;
    rec.alpha_hat_spectral.reset();
    rec.alpha_hat_quadratic.reset();
    rec.status = RecordStatus::kSolverFailure;
    rec.message = e.what();
  }
  return rec;
}

std::string format_record(const ExperimentRecord& r) {
  std::string s;
  s += io::format_double(r.sigma2) + ',';
  s += std::to_string(r.N) + ',';
  s += std::to_string(r.M) + ',';
  s += std::to_string(r.rep) + ',';
  s += std::to_string(r.seed) + ',';
  s += io::format_double(r.slater_ok) + ',';
  s += r.feasible ? "1," : "0,";
  if (r.alpha_hat_spectral) s += io::format_double(*r.alpha_hat_spectral);
  s += ',';
  if (r.alpha_hat_quadratic) s += io::format_double(*r.alpha_hat_quadratic);
  s += ',';
  if (r.solve_time_ms) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << *r.solve_time_ms;
    s += os.str();
  }
  s += ',';
  s += to_string(r.status);
  return s;
}

std::optional<ExperimentRecord> parse_record(const std::string& line) {
  std::vector<std::string> f;
  boost::algorithm::split(f, line, boost::is_any_of(","));
  if (f.size() != 11) return std::nullopt;
  try {
    ExperimentRecord r;
    r.sigma2 = std::stod(f[0]);
    r.N = std::stoi(f[1]);
    r.M = std::stoi(f[2]);
    r.rep = std::stoi(f[3]);
    r.seed = std::stoull(f[4]);
    r.slater_ok = std::stod(f[5]);
    if (f[6] != "0" && f[6] != "1") return std::nullopt;
    r.feasible = f[6] == "1";
    if (!f[7].empty()) r.alpha_hat_spectral = std::stod(f[7]);
    if (!f[8].empty()) r.alpha_hat_quadratic = std::stod(f[8]);
    if (!f[9].empty()) r.solve_time_ms = std::stod(f[9]);
    if (f[10] == "ok")
      r.status = RecordStatus::kOk;
    else if (f[10] == "infeasible")
      r.status = RecordStatus::kInfeasible;
    else if (f[10] == "solver-failure")
      r.status = RecordStatus::kSolverFailure;
    else
      return std::nullopt;
    r.effective_N = static_cast<int>(std::lround(r.slater_ok * r.N));
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<ExperimentRecord> run_cells(const ExperimentConfig& cfg, const std::vector<CellTask>& tasks,
                                        const SweepOptions& opt) {
  std::ofstream csv;
  if (!opt.csv_path.empty()) {
    if (opt.csv_path.has_parent_path()) std::filesystem::create_directories(opt.csv_path.parent_path());
    csv.open(opt.csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw ValidationError("cannot open '" + opt.csv_path.string() + "' for writing");
    if (!opt.provenance.empty()) csv << "# " << opt.provenance << '\n';
    csv << kRawRecordHeader << '\n';
    csv.flush();
  }

  const std::size_t n = tasks.size();
  std::vector<std::optional<ExperimentRecord>> done(n);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const auto& t = tasks[i];
      ExperimentRecord r = run_cell(cfg, t.sigma2, t.N, t.M, t.idx);
      {
        std::lock_guard<std::mutex> lock(mu);
        done[i] = std::move(r);
      }
      cv.notify_one();
    }
  };

  const int threads = std::max(1, std::min<int>(opt.threads, static_cast<int>(std::max<std::size_t>(n, 1))));
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int k = 0; k < threads; ++k) pool.emplace_back(worker);

  std::vector<ExperimentRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return done[i].has_value(); });
    out.push_back(*done[i]);
    lock.unlock();
    if (csv.is_open()) {
      csv << format_record(out.back()) << '\n';
      csv.flush();
    }
  }
  for (auto& th : pool) th.join();
  return out;
}

std::vector<ExperimentRecord> run_heatmap_sigma_N(const ExperimentConfig& cfg, const SweepOptions& opt) {
  cfg.validate();
  std::vector<CellTask> tasks;
  for (std::size_t is = 0; is < cfg.sweep.sigma2.size(); ++is)
    for (std::size_t in = 0; in < cfg.sweep.N.size(); ++in)
      for (int rep = 0; rep < cfg.sweep.repetitions; ++rep)
        tasks.push_back({cfg.sweep.sigma2[is], cfg.sweep.N[in], cfg.fleet.M, {is, in, 0, rep}});
  return run_cells(cfg, tasks, opt);
}

std::vector<ExperimentRecord> run_heatmap_M_N(const ExperimentConfig& cfg, const SweepOptions& opt) {
  cfg.validate();
  std::vector<CellTask> tasks;
  for (std::size_t im = 0; im < cfg.sweep.M.size(); ++im)
    for (std::size_t in = 0; in < cfg.sweep.N.size(); ++in)
      for (int rep = 0; rep < cfg.sweep.repetitions; ++rep)
        tasks.push_back({cfg.fleet.sigma2, cfg.sweep.N[in], cfg.sweep.M[im], {0, in, im, rep}});
  return run_cells(cfg, tasks, opt);
}

StabilityMetric stability_metric_from_string(const std::string& s) {
  if (s == "spectral") return StabilityMetric::kSpectral;
  if (s == "quadratic") return StabilityMetric::kQuadratic;
  throw ValidationError("unknown stability metric '" + s + "' (expected spectral or quadratic)");
}

std::vector<AggregateRow> aggregate(const std::vector<ExperimentRecord>& records, StabilityMetric metric) {
  struct Acc {
    AggregateRow row;
    double stab_sum = 0.0;
    int stab_count = 0;
    int feasible = 0;
  };
  std::vector<Acc> acc;
  std::map<std::tuple<double, int, int>, std::size_t> where;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.sigma2, r.N, r.M);
    auto it = where.find(key);
    if (it == where.end()) {
      it = where.emplace(key, acc.size()).first;
      Acc a;
      a.row.sigma2 = r.sigma2;
      a.row.N = r.N;
      a.row.M = r.M;
      acc.push_back(a);
    }
    Acc& a = acc[it->second];
    a.row.reps += 1;
    if (r.feasible) {
      a.feasible += 1;
      const auto& alpha = metric == StabilityMetric::kSpectral ? r.alpha_hat_spectral : r.alpha_hat_quadratic;
      if (alpha) {
        a.stab_sum += 1.0 - *alpha;
        a.stab_count += 1;
      }
    }
  }
  std::vector<AggregateRow> out;
  out.reserve(acc.size());
  for (auto& a : acc) {
    a.row.feas_freq = static_cast<double>(a.feasible) / a.row.reps;
    if (a.stab_count > 0) a.row.stab_freq = a.stab_sum / a.stab_count;
    out.push_back(a.row);
  }
  return out;
}

std::string format_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& provenance) {
  std::string s;
  if (!provenance.empty()) s += "# " + provenance + "\n";
  s += kAggregateHeader;
  s += '\n';
  for (const auto& r : rows) {
    s += io::format_double(r.sigma2) + ',' + std::to_string(r.N) + ',' + std::to_string(r.M) + ',';
    if (r.stab_freq) s += io::format_double(*r.stab_freq);
    s += ',' + io::format_double(r.feas_freq) + ',' + std::to_string(r.reps) + '\n';
  }
  return s;
}

std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& p) {
  std::istringstream in(io::read_text_file(p));
  std::vector<ExperimentRecord> out;
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kRawRecordHeader)
        throw ValidationError(p.string() + ": line " + std::to_string(lineno) + ": expected the header '" +
                              kRawRecordHeader + "'");
      header_seen = true;
      continue;
    }
    auto r = parse_record(line);
    if (!r) throw ValidationError(p.string() + ": line " + std::to_string(lineno) + ": malformed record");
    out.push_back(*r);
  }
  if (!header_seen) throw ValidationError(p.string() + ": no header line");
  return out;
}

UncertaintyStudy run_uncertainty_sets_1d(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const auto& u = cfg.uncertainty;
  SystemSample sys;
  sys.A = MatrixXd::Constant(1, 1, u.a_true);
  sys.B = MatrixXd::Constant(1, 1, u.b_true);
  const RasterWindow window{u.a_min, u.a_max, u.b_min, u.b_max};

  UncertaintyStudy study;
  std::string summary = "M,seeds,centroid_dispersion,area_mean,area_variance,true_system_inside_all\n";
  for (std::size_t li = 0; li < u.lengths.size(); ++li) {
    const int M = u.lengths[li];
    RolloutConfig rc;
    rc.M = M;
    rc.wbar = u.wbar;
    rc.input_law = cfg.fleet.input_law;
    rc.x0_law.kind = X0LawKind::kUniformBox;
    rc.x0_law.magnitude = cfg.fleet.x0_law.magnitude;
    std::vector<ConsistentSetRaster> group;
    bool all_inside = true;
    for (int s = 0; s < u.seeds; ++s) {
      const std::uint64_t seed = derive_seed(cfg.master_seed, {li, static_cast<std::uint64_t>(s)});
      Rng rng(seed);
      const Trajectory tr = simulate_trajectory(sys, rc, rng);
      const DataMatrices dm = build_data_matrices(tr);
      const NoiseModelQMI qmi = noise_model_from_bound(u.wbar, dm.horizon(), 1);
      ConsistentSetRaster r = consistent_set_raster_1d(dm, qmi, window, u.resolution);
      r.seed = seed;
      const auto [ia, ib] = r.nearest_node(u.a_true, u.b_true);
      all_inside = all_inside && r.inside(ia, ib);
      if (!out_dir.empty())
        io::write_raster_csv(out_dir / ("raster_M" + std::to_string(M) + "_seed" + std::to_string(s) + ".csv"), r);
      group.push_back(std::move(r));
    }
    UncertaintySummaryRow row;
    row.M = M;
    row.seeds = u.seeds;
    row.centroid_dispersion = centroid_dispersion(group);
    double mean = 0.0;
    for (const auto& r : group) mean += r.area();
    row.area_mean = mean / static_cast<double>(group.size());
    row.area_variance = area_variance(group);
    row.true_system_inside_all = all_inside;
    summary += std::to_string(M) + ',' + std::to_string(u.seeds) + ',' + io::format_double(row.centroid_dispersion) +
               ',' + io::format_double(row.area_mean) + ',' + io::format_double(row.area_variance) + ',' +
               (all_inside ? "1" : "0") + '\n';
    study.summary.push_back(row);
    for (auto& r : group) study.rasters.push_back(std::move(r));
  }
  if (!out_dir.empty()) io::write_text_file(out_dir / "summary.csv", summary);
  return study;
}

std::string column_documentation() {
  return R"(Raw records (one row per grid cell and repetition)
  sigma2               fleet variance scale
  N                    number of sampled systems (one trajectory each)
  M                    nominal trajectory length; exploding rollouts keep their valid prefix
  rep                  repetition index
  seed                 cell seed; every random draw of the cell derives from it
  slater_ok            fraction of the N trajectories that passed the Slater check
                       within the re-recording budget (effective N = slater_ok * N)
  feasible             1 if a controller was synthesized and verified, else 0
  alpha_hat_spectral   fraction of fresh systems with spectral radius of A+BK >= 1 (empty unless feasible)
  alpha_hat_quadratic  fraction of fresh systems failing P - (A+BK) P (A+BK)^T > 0 (empty unless feasible)
  solve_time_ms        wall-clock synthesis time; empty unless solver.record_timing = true
  status               ok | infeasible | solver-failure

Aggregated table (one row per sigma2, N, M)
  stab_freq            mean of 1 - alpha_hat over feasible repetitions (empty if none were feasible)
  feas_freq            feasible repetitions / reps
  reps                 number of raw records in the group

Uncertainty-set rasters: a,b,inside with inside in {0,1} at every grid node
summary.csv: M, seeds, centroid_dispersion (RMS distance of mask centroids from their mean),
  area_mean, area_variance, true_system_inside_all

Lines starting with '#' carry provenance (tool version, command, seed, time) and are
not part of the data.
)";
}

}  // namespace scenario_ddc
