#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scenario_ddc/config.hpp"
#include "scenario_ddc/validation.hpp"

namespace scenario_ddc {

enum class RecordStatus { kOk, kInfeasible, kSolverFailure };

[[nodiscard]] const char* to_string(RecordStatus s) noexcept;

struct ExperimentRecord {
  double sigma2 = 0.0;
  int N = 0;
  int M = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  double slater_ok = 0.0;  // fraction of the N trajectories that entered the LMI
  bool feasible = false;
  std::optional<double> alpha_hat_spectral;
  std::optional<double> alpha_hat_quadratic;
  std::optional<double> solve_time_ms;
  RecordStatus status = RecordStatus::kSolverFailure;
  int effective_N = 0;
  std::string message;  // diagnostics, not written to the CSV
};

inline constexpr const char* kRawRecordHeader =
    "sigma2,N,M,rep,seed,slater_ok,feasible,alpha_hat_spectral,alpha_hat_quadratic,solve_time_ms,status";
inline constexpr const char* kAggregateHeader = "sigma2,N,M,stab_freq,feas_freq,reps";

/// Grid position of a cell; every seed of the cell derives from
/// (master_seed, sigma2_index, N_index, M_index, rep).
struct CellIndex {
  std::size_t sigma2_index = 0;
  std::size_t N_index = 0;
  std::size_t M_index = 0;
  int rep = 0;
};

[[nodiscard]] std::uint64_t cell_seed(std::uint64_t master_seed, const CellIndex& idx) noexcept;

/// generate -> Slater check with re-recording -> scenario LMI -> solve -> alpha estimate.
/// Never throws for numerical trouble; that becomes a solver-failure record.
[[nodiscard]] ExperimentRecord run_cell(const ExperimentConfig& cfg, double sigma2, int N, int M, const CellIndex& idx);

[[nodiscard]] std::string format_record(const ExperimentRecord& r);
[[nodiscard]] std::optional<ExperimentRecord> parse_record(const std::string& line);

struct SweepOptions {
  int threads = 1;
  std::filesystem::path csv_path;  // empty: keep records in memory only
  std::string provenance;          // written as the first line, prefixed by "# "
};

/// sweep.sigma2 x sweep.N at M = fleet.M, `repetitions` records per grid point.
[[nodiscard]] std::vector<ExperimentRecord> run_heatmap_sigma_N(const ExperimentConfig& cfg, const SweepOptions& opt);
/// sweep.M x sweep.N at sigma2 = fleet.sigma2.
[[nodiscard]] std::vector<ExperimentRecord> run_heatmap_M_N(const ExperimentConfig& cfg, const SweepOptions& opt);

struct CellTask {
  double sigma2;
  int N;
  int M;
  CellIndex idx;
};

/// Runs the cells on a bounded pool; rows reach the CSV in task order as soon
/// as every earlier cell has finished.
[[nodiscard]] std::vector<ExperimentRecord> run_cells(const ExperimentConfig& cfg, const std::vector<CellTask>& tasks,
                                                      const SweepOptions& opt);

enum class StabilityMetric { kSpectral, kQuadratic };

[[nodiscard]] StabilityMetric stability_metric_from_string(const std::string& s);

struct AggregateRow {
  double sigma2 = 0.0;
  int N = 0;
  int M = 0;
  std::optional<double> stab_freq;  // mean of 1 - alpha_hat over feasible repetitions
  double feas_freq = 0.0;
  int reps = 0;
};

[[nodiscard]] std::vector<AggregateRow> aggregate(const std::vector<ExperimentRecord>& records,
                                                  StabilityMetric metric = StabilityMetric::kSpectral);
[[nodiscard]] std::string format_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& provenance);
/// Reads a raw-record CSV; '#' lines are skipped. Throws ValidationError on malformed rows.
[[nodiscard]] std::vector<ExperimentRecord> read_records_csv(const std::filesystem::path& p);

struct UncertaintySummaryRow {
  int M = 0;
  int seeds = 0;
  double centroid_dispersion = 0.0;
  double area_mean = 0.0;
  double area_variance = 0.0;
  bool true_system_inside_all = false;
};

struct UncertaintyStudy {
  std::vector<ConsistentSetRaster> rasters;  // ordered by length, then seed
  std::vector<UncertaintySummaryRow> summary;
};

/// Fixed scalar system, uncertainty.seeds noise realizations per length.
/// With a nonempty `out_dir`, writes raster_M<M>_seed<s>.csv files and summary.csv.
[[nodiscard]] UncertaintyStudy run_uncertainty_sets_1d(const ExperimentConfig& cfg,
                                                       const std::filesystem::path& out_dir = {});

/// Plain-text description of the CSV columns, written next to the outputs.
[[nodiscard]] std::string column_documentation();

}  // namespace scenario_ddc
