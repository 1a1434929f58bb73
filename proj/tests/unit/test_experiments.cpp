#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "scenario_ddc/error.hpp"
#include "scenario_ddc/experiments.hpp"
#include "scenario_ddc/io.hpp"

namespace scenario_ddc {
namespace {

namespace fs = std::filesystem;

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.sweep.sigma2 = {1e-4, 0.05};
  cfg.sweep.N = {2, 4};
  cfg.sweep.repetitions = 3;
  cfg.sweep.n_test = 50;
  cfg.fleet.M = 20;
  cfg.master_seed = 123;
  return cfg;
}

std::string strip_comments(const std::string& text) {
  std::string out, line;
  std::istringstream in(text);
  while (std::getline(in, line))
    if (line.rfind("#", 0) != 0) out += line + "\n";
  return out;
}

TEST(CellSeed, DependsOnEveryIndex) {
  std::set<std::uint64_t> seen;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) seen.insert(cell_seed(9, {a, b, c, r}));
  EXPECT_EQ(seen.size(), 81u);
  EXPECT_EQ(cell_seed(9, {1, 2, 0, 1}), cell_seed(9, {1, 2, 0, 1}));
  EXPECT_NE(cell_seed(9, {1, 2, 0, 1}), cell_seed(10, {1, 2, 0, 1}));
}

TEST(RunCell, NearDeterministicFleetIsStabilized) {
  const auto cfg = small_config();
  const auto r = run_cell(cfg, 1e-8, 8, 50, {0, 0, 0, 0});
  EXPECT_EQ(r.status, RecordStatus::kOk) << r.message;
  EXPECT_TRUE(r.feasible);
  EXPECT_EQ(r.slater_ok, 1.0);
  EXPECT_EQ(r.effective_N, 8);
  ASSERT_TRUE(r.alpha_hat_spectral.has_value());
  EXPECT_EQ(*r.alpha_hat_spectral, 0.0);
  EXPECT_EQ(*r.alpha_hat_quadratic, 0.0);
  EXPECT_FALSE(r.solve_time_ms.has_value());
}

TEST(RunCell, VeryWideFleetIsUsuallyInfeasible) {
  const auto cfg = small_config();
  int infeasible = 0;
  for (int rep = 0; rep < 6; ++rep) {
    const auto r = run_cell(cfg, 10.0, 8, 50, {0, 0, 0, rep});
    EXPECT_NE(r.status, RecordStatus::kSolverFailure) << r.message;
    infeasible += r.status == RecordStatus::kInfeasible;
    EXPECT_EQ(r.alpha_hat_spectral.has_value(), r.feasible);
  }
  EXPECT_GE(infeasible, 5);
}

TEST(RunCell, IdenticalInputsGiveIdenticalRecords) {
  const auto cfg = small_config();
  const auto a = run_cell(cfg, 0.01, 4, 30, {1, 1, 0, 2});
  const auto b = run_cell(cfg, 0.01, 4, 30, {1, 1, 0, 2});
  EXPECT_EQ(format_record(a), format_record(b));
  EXPECT_EQ(a.seed, cell_seed(cfg.master_seed, {1, 1, 0, 2}));
}

TEST(RunCell, TimingOnlyWhenRequested) {
  auto cfg = small_config();
  cfg.solver.record_timing = true;
  const auto r = run_cell(cfg, 1e-4, 4, 20, {0, 0, 0, 0});
  EXPECT_TRUE(r.solve_time_ms.has_value());
  EXPECT_GE(*r.solve_time_ms, 0.0);
}

TEST(Records, FormatParseRoundTrip) {
  ExperimentRecord r;
  r.sigma2 = 0.05;
  r.N = 16;
  r.M = 50;
  r.rep = 3;
  r.seed = 18446744073709551615ull;
  r.slater_ok = 0.9375;
  r.feasible = true;
  r.alpha_hat_spectral = 0.015;
  r.alpha_hat_quadratic = 0.02;
  r.status = RecordStatus::kOk;
  const std::string line = format_record(r);
  EXPECT_EQ(line, "0.05,16,50,3,18446744073709551615,0.9375,1,0.015,0.02,,ok");
  const auto back = parse_record(line);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(format_record(*back), line);

  ExperimentRecord f;
  f.sigma2 = 1;
  f.N = 4;
  f.M = 10;
  f.status = RecordStatus::kInfeasible;
  EXPECT_EQ(format_record(f), "1,4,10,0,0,0,0,,,,infeasible");
  EXPECT_FALSE(parse_record("1,2,3").has_value());
  EXPECT_FALSE(parse_record("1,4,10,0,0,0,0,,,,maybe").has_value());
}

TEST(Sweep, RowCountSchemaAndNoNan) {
  const auto cfg = small_config();
  const fs::path dir = fs::temp_directory_path() / "scenario_ddc_unit_sweep";
  fs::remove_all(dir);
  SweepOptions opt;
  opt.threads = 2;
  opt.csv_path = dir / "raw.csv";
  opt.provenance = "test run";
  const auto recs = run_heatmap_sigma_N(cfg, opt);
  EXPECT_EQ(recs.size(), 2u * 2u * 3u);
  const std::string text = io::read_text_file(opt.csv_path);
  EXPECT_EQ(text.rfind("# test run\n" + std::string(kRawRecordHeader) + "\n", 0), 0u);
  EXPECT_EQ(text.find("nan"), std::string::npos);
  EXPECT_EQ(text.find("inf"), std::string::npos);
  const auto parsed = read_records_csv(opt.csv_path);
  ASSERT_EQ(parsed.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(format_record(parsed[i]), format_record(recs[i]));
    EXPECT_EQ(recs[i].alpha_hat_spectral.has_value(), recs[i].feasible);
  }

  auto mcfg = cfg;
  mcfg.sweep.M = {10, 20};
  mcfg.sweep.repetitions = 2;
  EXPECT_EQ(run_heatmap_M_N(mcfg, {}).size(), 2u * 2u * 2u);
}

TEST(Sweep, SerialAndParallelAgree) {
  const auto cfg = small_config();
  const fs::path dir = fs::temp_directory_path() / "scenario_ddc_unit_parallel";
  fs::remove_all(dir);
  SweepOptions serial, parallel;
  serial.threads = 1;
  serial.csv_path = dir / "serial.csv";
  serial.provenance = "serial";
  parallel.threads = 4;
  parallel.csv_path = dir / "parallel.csv";
  parallel.provenance = "parallel";
  (void)run_heatmap_sigma_N(cfg, serial);
  (void)run_heatmap_sigma_N(cfg, parallel);
  EXPECT_EQ(strip_comments(io::read_text_file(serial.csv_path)), strip_comments(io::read_text_file(parallel.csv_path)));
}

TEST(Aggregate, HandComputedGroups) {
  std::vector<ExperimentRecord> recs;
  auto add = [&](double s2, int N, bool feasible, std::optional<double> a_s, std::optional<double> a_q) {
    ExperimentRecord r;
    r.sigma2 = s2;
    r.N = N;
    r.M = 50;
    r.feasible = feasible;
    r.alpha_hat_spectral = a_s;
    r.alpha_hat_quadratic = a_q;
    r.status = feasible ? RecordStatus::kOk : RecordStatus::kInfeasible;
    recs.push_back(r);
  };
  add(0.01, 4, true, 0.1, 0.2);
  add(0.01, 4, true, 0.0, 0.1);
  add(0.01, 4, false, {}, {});
  add(0.05, 4, false, {}, {});
  add(0.01, 8, true, 0.0, 0.0);
  const auto rows = aggregate(recs, StabilityMetric::kSpectral);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].reps, 3);
  EXPECT_NEAR(*rows[0].stab_freq, 0.95, 1e-15);
  EXPECT_NEAR(rows[0].feas_freq, 2.0 / 3.0, 1e-15);
  EXPECT_FALSE(rows[1].stab_freq.has_value());
  EXPECT_EQ(rows[1].feas_freq, 0.0);
  EXPECT_EQ(*rows[2].stab_freq, 1.0);
  EXPECT_NEAR(*aggregate(recs, StabilityMetric::kQuadratic)[0].stab_freq, 0.85, 1e-15);
  const std::string csv = format_aggregate_csv(rows, "");
  EXPECT_EQ(csv, std::string(kAggregateHeader) + "\n0.01,4,50,0.95,0.6666666666666666,3\n0.05,4,50,,0,1\n0.01,8,50,1,1,1\n");
  EXPECT_THROW((void)stability_metric_from_string("lyapunov"), ValidationError);
}

TEST(Uncertainty, FilesAndSummary) {
  ExperimentConfig cfg;
  cfg.uncertainty.resolution = 101;
  const fs::path dir = fs::temp_directory_path() / "scenario_ddc_unit_uncertainty";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto st = run_uncertainty_sets_1d(cfg, dir);
  EXPECT_EQ(st.rasters.size(), 20u);
  ASSERT_EQ(st.summary.size(), 4u);
  int csv = 0;
  for (const auto& e : fs::directory_iterator(dir)) csv += e.path().extension() == ".csv";
  EXPECT_EQ(csv, 21);
  EXPECT_TRUE(fs::exists(dir / "raster_M500_seed4.csv"));
  for (const auto& row : st.summary) EXPECT_TRUE(row.true_system_inside_all) << row.M;
  EXPECT_LT(st.summary.back().centroid_dispersion, st.summary.front().centroid_dispersion);
}

TEST(Documentation, CoversEveryColumn) {
  const std::string doc = column_documentation();
  for (const char* col : {"sigma2", "N", "M", "rep", "seed", "slater_ok", "feasible", "alpha_hat_spectral",
                          "alpha_hat_quadratic", "solve_time_ms", "status", "stab_freq", "feas_freq", "reps"})
    EXPECT_NE(doc.find(col), std::string::npos) << col;
}

}  // namespace
}  // namespace scenario_ddc
