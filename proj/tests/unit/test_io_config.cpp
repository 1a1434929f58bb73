#include <filesystem>

#include <gtest/gtest.h>

#include "scenario_ddc/config.hpp"
#include "scenario_ddc/error.hpp"
#include "scenario_ddc/io.hpp"
#include "test_support.hpp"

namespace scenario_ddc {
namespace {

namespace fs = std::filesystem;
using io::json;

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("scenario_ddc_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

GeneratedDataset small_dataset() {
  RolloutConfig rc;
  rc.M = 15;
  return generate_dataset(default_benchmark_fleet(0.01), 3, rc, 5);
}

TEST(DatasetJson, RoundTripIsExact) {
  const auto g = small_dataset();
  const json j = io::dataset_to_json(io::make_dataset(g, 15));
  EXPECT_EQ(j["nx"], 3);
  EXPECT_EQ(j["M"], 15);
  EXPECT_EQ(j["trajectories"].size(), 3u);
  EXPECT_EQ(j["trajectories"][0]["states"].size(), 16u);
  EXPECT_FALSE(j.dump().find("truth") != std::string::npos);
  const auto back = io::dataset_from_json(json::parse(j.dump()));
  ASSERT_EQ(back.trajectories.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back.trajectories[i].states, g.trajectories[i].states);
    EXPECT_EQ(back.trajectories[i].inputs, g.trajectories[i].inputs);
    EXPECT_EQ(back.trajectories[i].seed, g.trajectories[i].seed);
    EXPECT_EQ(back.trajectories[i].system_id, g.trajectories[i].system_id);
  }
}

TEST(DatasetJson, RejectsMalformedDocuments) {
  json j = io::dataset_to_json(io::make_dataset(small_dataset(), 15));
  auto broken = j;
  broken.erase("nx");
  EXPECT_THROW((void)io::dataset_from_json(broken), ValidationError);
  broken = j;
  broken["trajectories"][1]["states"][2] = json::array({1.0, 2.0});
  EXPECT_THROW((void)io::dataset_from_json(broken), ValidationError);
  broken = j;
  broken["trajectories"] = json::array();
  EXPECT_THROW((void)io::dataset_from_json(broken), ValidationError);
  broken = j;
  broken["trajectories"][0]["states"][0][0] = "x";
  EXPECT_THROW((void)io::dataset_from_json(broken), ValidationError);
}

TEST(ControllerJson, RoundTripAndSchema) {
  SynthesisCertificate cert;
  cert.P = MatrixXd::Identity(2, 2) * 3;
  cert.L = (MatrixXd(1, 2) << 0.25, -1.5).finished();
  cert.K = cert.L / 3;
  cert.a = 0.7;
  cert.b = 1.0;
  cert.per_scenario_margins = {1e-3, 2e-3};
  const auto c = io::controller_from_certificate(cert, {"abc", {1, 2}, "0.1.0"});
  const json j = io::controller_to_json(c);
  EXPECT_EQ(j["K"].size(), 1u);
  EXPECT_EQ(j["K"][0].size(), 2u);
  EXPECT_EQ(j["provenance"]["dataset_hash"], "abc");
  const auto back = io::controller_from_json(json::parse(j.dump()));
  EXPECT_EQ(back.K, c.K);
  EXPECT_EQ(back.P, c.P);
  EXPECT_EQ(back.per_scenario_margins, c.per_scenario_margins);
  EXPECT_EQ(back.provenance.seeds, c.provenance.seeds);

  auto bad = j;
  bad["b"] = 0.0;
  EXPECT_THROW((void)io::controller_from_json(bad), ValidationError);
  bad = j;
  bad["K"] = json::array({json::array({1.0})});
  EXPECT_THROW((void)io::controller_from_json(bad), ValidationError);
}

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, FormatDoubleRoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(rng.uniform(-1, 1), static_cast<int>(rng.uniform(-60, 60)));
    EXPECT_EQ(std::stod(io::format_double(v)), v);
  }
  EXPECT_EQ(io::format_double(0.5), "0.5");
  EXPECT_EQ(io::format_double(1.0), "1");
}

TEST(Io, RasterCsvHasOneRowPerNode) {
  const fs::path dir = scratch_dir("raster");
  ConsistentSetRaster r;
  r.resolution = 3;
  r.mask = {1, 0, 0, 0, 1, 0, 0, 0, 0};
  io::write_raster_csv(dir / "r.csv", r);
  const std::string text = io::read_text_file(dir / "r.csv");
  EXPECT_EQ(text.rfind("a,b,inside\n", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 10);
}

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig d;
  const auto back = parse_experiment_config(render_experiment_config(d));
  EXPECT_EQ(render_experiment_config(back), render_experiment_config(d));
  EXPECT_EQ(back.sweep.repetitions, 50);
  EXPECT_EQ(back.sweep.n_test, 1000);
  EXPECT_DOUBLE_EQ(back.fleet.wbar, 0.015);
  EXPECT_EQ(back.solver.slater_retries, 5);
}

TEST(Config, ParsesListsAndComments) {
  const auto cfg = parse_experiment_config(R"(
# desk preset
[experiment]
master_seed = 7
[sweep]
sigma2 = [1e-4, 0.01]
N = 4, 8
; another comment
repetitions = 3
[fleet]
truncation = "box"
)");
  EXPECT_EQ(cfg.master_seed, 7u);
  EXPECT_EQ(cfg.sweep.sigma2, (std::vector<double>{1e-4, 0.01}));
  EXPECT_EQ(cfg.sweep.N, (std::vector<int>{4, 8}));
  EXPECT_EQ(cfg.sweep.repetitions, 3);
  EXPECT_EQ(cfg.fleet.truncation, TruncationKind::kBox);
}

TEST(Config, RejectsUnknownAndInvalidEntries) {
  auto message = [](const std::string& text) {
    try {
      (void)parse_experiment_config(text, "t.ini");
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("[sweep]\nreps = 3\n").find("reps"), std::string::npos);
  EXPECT_NE(message("[nonsense]\nx = 1\n").find("nonsense"), std::string::npos);
  EXPECT_NE(message("[sweep]\nrepetitions = 0\n").find("repetitions"), std::string::npos);
  EXPECT_NE(message("[sweep]\nN = []\n").find("N"), std::string::npos);
  EXPECT_NE(message("[sweep]\nsigma2 = [0.1, abc]\n").find("sigma2"), std::string::npos);
  EXPECT_NE(message("[solver]\nobjective = \"fastest\"\n").find("objective"), std::string::npos);
  EXPECT_FALSE(message("[fleet]\nwbar = -1\n").empty());
}

TEST(Config, LoadsFromFile) {
  const fs::path dir = scratch_dir("config");
  io::write_text_file(dir / "c.ini", "[experiment]\nmaster_seed = 99\n");
  EXPECT_EQ(load_experiment_config(dir / "c.ini").master_seed, 99u);
  EXPECT_THROW((void)load_experiment_config(dir / "missing.ini"), ValidationError);
}

}  // namespace
}  // namespace scenario_ddc
