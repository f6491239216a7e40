#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "imlab/error.hpp"
#include "imlab/harness.hpp"
#include "imlab/immersion.hpp"
#include "imlab/io.hpp"

using namespace imlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("imlab_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json base(const std::string& experiment, const std::string& preset) {
  return json{{"imlab_config", 1}, {"experiment", experiment}, {"preset", preset}, {"out", ""}};
}

void expect_bad_config(const json& j) {
  try {
    parse_config(j);
    FAIL() << j.dump();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadConfig) << j.dump();
  }
}

const CheckEntry& entry(const CheckReport& r, const std::string& name) {
  for (const auto& e : r.entries) {
    if (e.name == name) return e;
  }
  throw std::runtime_error("no check " + name);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IMLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ------------------------------------------------------------ config

TEST(Config, Defaults) {
  const ExperimentConfig cfg = parse_config(json{{"imlab_config", 1}});
  EXPECT_EQ(cfg.experiment, "energy");
  EXPECT_EQ(cfg.preset, "flat");
  EXPECT_EQ(cfg.grid, (std::vector<int>{32, 32}));
  EXPECT_EQ(cfg.p, 2.0);
  EXPECT_EQ(cfg.perturbation.frequencies, (std::vector<int>{2, 4, 8}));
}

TEST(Config, RejectsSchemaViolations) {
  expect_bad_config(json{{"experiment", "check"}});
  expect_bad_config(json{{"imlab_config", 2}});
  expect_bad_config(json{{"imlab_config", 1}, {"bogus", 3}});
  expect_bad_config(json{{"imlab_config", 1}, {"preset", "torus"}});
  expect_bad_config(json{{"imlab_config", 1}, {"experiment", "dance"}});
  expect_bad_config(json{{"imlab_config", 1}, {"grid", {3, 8}}});
  expect_bad_config(json{{"imlab_config", 1}, {"p", 0.5}});
  expect_bad_config(json{{"imlab_config", 1}, {"p", "two"}});
  expect_bad_config(json{{"imlab_config", 1}, {"optimizer", {{"max_iters", 0}}}});
  expect_bad_config(json{{"imlab_config", 1}, {"optimizer", {{"speed", 1}}}});
  expect_bad_config(json{{"imlab_config", 1}, {"perturbation", {{"shape", 1}}}});
  expect_bad_config(
      json{{"imlab_config", 1}, {"experiment", "stability-sweep"}, {"perturbation", {{"amplitudes", {0.1, 0.2}}}}});
  expect_bad_config(
      json{{"imlab_config", 1}, {"experiment", "stability-sweep"}, {"perturbation", {{"amplitudes", {0.1, 0.0}}}}});
  expect_bad_config(json{{"imlab_config", 1}, {"experiment", "stability-sweep"}, {"perturbation", {{"amplitudes", json::array()}}}});
}

TEST(Config, JsonRoundTrip) {
  json j = base("minimize", "sphere-cap");
  j["grid"] = {20, 24};
  j["p"] = 3.0;
  j["seed"] = 42;
  j["optimizer"] = {{"max_iters", 77}, {"memory", 5}};
  j["perturbation"] = {{"frequencies", {3}}, {"amplitudes", {0.2, 0.1}}, {"noise", 0.01}};
  const ExperimentConfig a = parse_config(j);
  const ExperimentConfig b = parse_config(config_to_json(a));
  EXPECT_EQ(config_to_json(a), config_to_json(b));
  EXPECT_EQ(b.grid, (std::vector<int>{20, 24}));
  EXPECT_EQ(b.optimizer.max_iters, 77);
  EXPECT_EQ(b.perturbation.noise, 0.01);
  EXPECT_EQ(b.seed, 42u);
}

TEST(Config, TabulatedMetricAndShape) {
  json j = base("energy", "flat");
  j["grid"] = {4, 4};
  json rows = json::array();
  json srows = json::array();
  for (int k = 0; k < 16; ++k) {
    rows.push_back({1.0, 0.0, 0.0, 1.0});
    srows.push_back({0.0, 0.0, 0.0, 0.0});
  }
  j["metric"] = {{"tabulated", rows}};
  j["shape"] = {{"tabulated", srows}};
  const Problem prob = build_problem(parse_config(j));
  EXPECT_LE((prob.metric->eval(prob.grid.point(5)) - Mat::Identity(2, 2)).norm(), 1e-14);
  j["shape"] = {{"tabulated", json::array({{0.0, 0.0, 0.0, 0.0}})}};
  EXPECT_THROW(build_problem(parse_config(j)), Error);
}

// ------------------------------------------------------------ io

TEST(Io, DoubleFormatRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1e-12}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(Io, NodeCsvAndBinaryRoundTrip) {
  const Grid grid({5, 7}, {0.1, -0.3}, {1.0, 2.0});
  std::mt19937_64 rng(4);
  const DiscreteImmersion f = random_immersion(rng, grid, make_chart("euclidean", 3));
  const NodeArray back = parse_node_csv(node_csv(grid, f.values), 2);
  EXPECT_EQ(back, f.values);
  const BinaryField bin = parse_binary(binary_dump(grid, f.values));
  EXPECT_TRUE(bin.grid == grid);
  EXPECT_EQ(bin.values, f.values);
  EXPECT_THROW(parse_binary("IMLAB001xyz"), Error);
  EXPECT_THROW(parse_binary("garbage"), Error);
}

TEST(Io, CsvTableRoundTrip) {
  Table t{{"a", "b"}, {{"1", "2.5"}, {"3", ""}}};
  const Table back = parse_csv(table_csv(t));
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
}

TEST(Io, ObjMesh) {
  const Grid grid({4, 5}, {0.0, 0.0}, {1.0, 1.0});
  const NodeArray v = sample(grid, 3, [](const Vec& x) {
    Vec y(3);
    y << x(0), x(1), 0.0;
    return y;
  });
  const std::string obj = obj_mesh(grid, v);
  std::size_t verts = 0, faces = 0;
  std::istringstream in(obj);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("v ", 0) == 0) ++verts;
    if (line.rfind("f ", 0) == 0) ++faces;
  }
  EXPECT_EQ(verts, 20u);
  EXPECT_EQ(faces, 2u * 3u * 4u);
}

TEST(Io, AtomicWrite) {
  const fs::path dir = scratch("atomic");
  const std::string path = (dir / "x.txt").string();
  write_atomic(path, "one");
  write_atomic(path, "two");
  EXPECT_EQ(read_file(path), "two");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
  EXPECT_EQ(n, 1u);
  // a directory in the way of the target cannot be replaced
  fs::create_directories(dir / "taken");
  EXPECT_THROW(write_atomic((dir / "taken").string(), "z"), Error);
}

// ------------------------------------------------------------ sweeps

TEST(Sweep, ZeroAmplitudeIsFlagged) {
  const ExperimentConfig cfg = parse_config(base("energy", "flat"));
  const Problem prob = build_problem(cfg);
  const DiscreteImmersion f0 = integrate_frame(*prob.metric, prob.shape, prob.grid);
  const std::vector<double> w = wrinkle(prob.grid, {2, 4, 8});
  const SweepRecord r = sweep_record(f0, unit_normal(f0), w, 0.0, *prob.metric, prob.shape, 2.0);
  const double h = prob.grid.max_spacing();
  EXPECT_LE(r.energy, 10.0 * h * h);
  EXPECT_FALSE(r.ratio.has_value());
  const std::string csv = sweep_csv({r});
  const Table t = parse_csv(csv);
  EXPECT_EQ(t.rows[0].back(), "1");
  EXPECT_EQ(t.rows[0][7], "");
}

TEST(Sweep, SphereCapFieldsRoundTrip) {
  const fs::path dir = scratch("sweep_sphere");
  json j = base("stability-sweep", "sphere-cap");
  j["grid"] = {24, 24};
  j["out"] = dir.string();
  j["perturbation"] = {{"amplitudes", {0.05}}};
  const ExperimentConfig cfg = parse_config(j);
  const auto recs = run_stability_sweep(cfg);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_GT(recs[0].energy, 0.0);
  EXPECT_GT(recs[0].distance, 0.0);

  // independent re-evaluation from what was written to disk
  const Table t = parse_csv(read_file((dir / "sweep.csv").string()));
  const Problem prob = build_problem(cfg);
  const BinaryField b0 = parse_binary(read_file((dir / "sweep_f0.bin").string()));
  const BinaryField b1 = parse_binary(read_file((dir / "sweep_0.bin").string()));
  const auto euclid = make_chart("euclidean", 3);
  const DiscreteImmersion f0{b0.grid, b0.values, euclid};
  const DiscreteImmersion f{b1.grid, b1.values, euclid};
  const double energy = total_energy(f, *prob.metric, prob.shape, 2.0).total;
  const double dist = w1p_distance(f, align_rigid(f, f0).aligned, 2.0, *prob.metric);
  const double csv_energy = std::stod(t.rows[0][1]);
  const double csv_dist = std::stod(t.rows[0][4]);
  EXPECT_NEAR(energy, csv_energy, 1e-12 * std::max(1.0, csv_energy));
  EXPECT_NEAR(dist, csv_dist, 1e-12 * std::max(1.0, csv_dist));
  EXPECT_EQ(csv_energy, recs[0].energy);

  const json summary = json::parse(read_file((dir / "sweep.json").string()));
  EXPECT_EQ(summary["records"], 1);
}

TEST(Sweep, CylinderDecadeRatiosBounded) {
  json j = base("stability-sweep", "cylinder");
  j["grid"] = {24, 24};
  j["perturbation"] = {{"amplitudes", {0.1, 0.05, 0.02, 0.01}}};
  const auto recs = run_stability_sweep(parse_config(j));
  ASSERT_EQ(recs.size(), 4u);
  double lo = INFINITY, hi = 0.0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    ASSERT_TRUE(recs[i].ratio.has_value());
    EXPECT_TRUE(std::isfinite(*recs[i].ratio));
    lo = std::min(lo, *recs[i].ratio);
    hi = std::max(hi, *recs[i].ratio);
    if (i > 0) EXPECT_GT(recs[i - 1].epsilon, recs[i].epsilon);
  }
  EXPECT_LE(hi / lo, 10.0);
}

TEST(Sweep, RatioStudyPerFrequency) {
  json j = base("ratio-study", "cylinder");
  j["grid"] = {16, 16};
  j["perturbation"] = {{"frequencies", {2, 4}}, {"amplitudes", {0.05, 0.01}}};
  const RatioStudy rs = run_ratio_study(parse_config(j));
  EXPECT_EQ(rs.records.size(), 4u);
  EXPECT_EQ(rs.summary["families"].size(), 2u);
  double worst = 0.0;
  for (const auto& r : rs.records) worst = std::max(worst, r.ratio.value_or(0.0));
  EXPECT_EQ(rs.summary["empirical_constant"].get<double>(), worst);
  const std::string csv = sweep_csv(rs.records, true);
  EXPECT_EQ(parse_csv(csv).header.front(), "frequency");
}

// ------------------------------------------------------------ check

TEST(Check, DefaultPassesAndCorruptionIsolated) {
  json j = base("check", "flat");
  const CheckReport clean = run_check(parse_config(j));
  for (const auto& e : clean.entries) EXPECT_TRUE(e.pass) << e.name << " " << e.max_violation;
  EXPECT_TRUE(clean.all_passed());

  j["corrupt_shape"] = true;
  const CheckReport bad = run_check(parse_config(j));
  EXPECT_FALSE(bad.all_passed());
  for (const auto& e : bad.entries) EXPECT_EQ(e.pass, e.name != "shape_symmetry") << e.name;
}

TEST(Check, LowExponentSkipsGradient) {
  json j = base("check", "flat");
  j["grid"] = {12, 12};
  j["p"] = 1.5;
  const CheckReport r = run_check(parse_config(j));
  const CheckEntry& g = entry(r, "gradient_check");
  EXPECT_TRUE(g.pass);
  EXPECT_EQ(g.status, "skipped: p<2");
}

TEST(Check, ReportJsonSortedKeys) {
  const fs::path dir = scratch("check_json");
  json j = base("check", "flat");
  j["grid"] = {12, 12};
  j["out"] = dir.string();
  EXPECT_EQ(run_experiment(parse_config(j)), 0);
  const std::string text = read_file((dir / "check.json").string());
  const json report = json::parse(text);
  EXPECT_EQ(text, report.dump(2) + "\n");
  EXPECT_FALSE(report["checks"].empty());
}

// ------------------------------------------------------------ minimize

TEST(MinimizeRun, FlatSeedSeven) {
  const fs::path dir = scratch("flat7");
  json j = base("minimize", "flat");
  j["grid"] = {16, 16};
  j["seed"] = 7;
  j["out"] = dir.string();
  j["perturbation"] = {{"amplitudes", {0.02}}, {"noise", 0.01}};
  j["optimizer"] = {{"max_iters", 2000}};
  const MinimizeSummary s = run_minimize(parse_config(j));
  EXPECT_LE(s.energy.total, 1e-10);

  // the trace re-parses and reproduces the reported terminal energy
  const Table t = parse_csv(read_file((dir / "trace.csv").string()));
  EXPECT_EQ(t.header, (std::vector<std::string>{"iter", "energy", "stretch", "bend", "grad_norm", "step"}));
  ASSERT_FALSE(t.rows.empty());
  const json summary = json::parse(read_file((dir / "minimize.json").string()));
  EXPECT_EQ(std::stod(t.rows.back()[1]), summary["energy"]["total"].get<double>());
  for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_LE(std::stod(t.rows[k][1]), std::stod(t.rows[k - 1][1]));
  const BinaryField term = parse_binary(read_file((dir / "terminal.bin").string()));
  EXPECT_EQ(term.values, s.immersion->values);
}

TEST(MinimizeRun, DirectorFromDoubleLength) {
  json j = base("minimize", "flat");
  j["grid"] = {12, 12};
  j["state"] = "director";
  j["director_scale"] = 2.0;
  j["optimizer"] = {{"max_iters", 2000}};
  const MinimizeSummary s = run_minimize(parse_config(j));
  ASSERT_TRUE(s.director.has_value());
  for (Eigen::Index k = 0; k < s.director->vec.rows(); ++k) {
    EXPECT_NEAR(s.director->vec.row(k).norm(), 1.0, 1e-4);
  }
  EXPECT_LE(s.summary["director_unit_error"].get<double>(), 1e-4);
}

TEST(MinimizeRun, IncompatibleStaysPositive) {
  json j = base("minimize", "sphere-incompatible");
  j["grid"] = {16, 16};
  j["optimizer"] = {{"max_iters", 400}};
  const MinimizeSummary s = run_minimize(parse_config(j));
  EXPECT_GE(s.energy.total, 1e-3);
}

// ------------------------------------------------------------ outputs

TEST(Outputs, ReconstructFiles) {
  const fs::path dir = scratch("recon");
  json j = base("reconstruct", "cylinder");
  j["grid"] = {16, 16};
  j["out"] = dir.string();
  const ReconstructSummary r = run_reconstruct(parse_config(j));
  ASSERT_TRUE(r.closed_form_distance.has_value());
  for (const char* f : {"reconstruct.json", "reconstruct.csv", "reconstruct.bin", "reconstruct.obj"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(parse_node_csv(read_file((dir / "reconstruct.csv").string()), 2), r.f.values);
}

TEST(Outputs, Deterministic) {
  json j = base("stability-sweep", "cylinder");
  j["grid"] = {16, 16};
  j["perturbation"] = {{"amplitudes", {0.1, 0.05, 0.02}}};
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  j["out"] = a.string();
  run_experiment(parse_config(j));
  j["out"] = b.string();
  run_experiment(parse_config(j));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(read_file(e.path().string()), read_file((b / e.path().filename()).string())) << e.path();
  }
  EXPECT_GT(files, 3u);
}

// ------------------------------------------------------------ cli

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  const std::string good = (dir / "good.json").string();
  const std::string corrupt = (dir / "corrupt.json").string();
  const std::string broken = (dir / "broken.json").string();
  std::ofstream(good) << json{{"imlab_config", 1}, {"preset", "flat"}, {"grid", {12, 12}}}.dump();
  std::ofstream(corrupt) << json{{"imlab_config", 1}, {"preset", "flat"}, {"grid", {12, 12}}, {"corrupt_shape", true}}.dump();
  std::ofstream(broken) << "{\"imlab_config\": 1, \"bogus\": true}";
  const std::string out = " --out " + (dir / "o").string();
  EXPECT_EQ(run_cli("check --config " + good + out), 0);
  EXPECT_EQ(run_cli("check --config " + corrupt + out), 2);
  EXPECT_EQ(run_cli("check --config " + broken + out), 1);
  EXPECT_EQ(run_cli("energy --config " + good + out + " --grid 8x9 --p 3"), 0);
  EXPECT_EQ(run_cli("energy --config " + good + out + " --grid 8y9"), 1);
  EXPECT_EQ(run_cli("dance --config " + good + out), 1);
  EXPECT_EQ(run_cli("energy --config " + (dir / "none.json").string() + out), 1);
  const json e = json::parse(read_file((dir / "o" / "energy.json").string()));
  EXPECT_EQ(e["p"].get<double>(), 3.0);
}
