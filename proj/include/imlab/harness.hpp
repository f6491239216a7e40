#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "imlab/energy.hpp"
#include "imlab/optimize.hpp"
#include "imlab/presets.hpp"
#include "imlab/reconstruct.hpp"

namespace imlab {

struct PerturbationSpec {
  std::vector<int> frequencies{2, 4, 8};
  std::vector<double> amplitudes;
  double noise = 0.0;  // amplitude of a smooth seeded random displacement
};

/// Parsed configuration. JSON layout (all keys optional except the schema
/// tag):
///   {"imlab_config": 1, "experiment": "check", "preset": "cylinder",
///    "metric": "sphere" | {"tabulated": [[g00, g01, g10, g11], ...]},
///    "shape": {"tabulated": [[...], ...]} | {"constant": [[..], [..]]},
///    "target": "euclidean", "domain": [[a0, b0], [a1, b1]],
///    "grid": [32, 32], "p": 2,
///    "perturbation": {"frequencies": [2, 4, 8], "amplitudes": [...], "noise": 0},
///    "optimizer": {"max_iters": 500, "grad_tol": 1e-10, "step_tol": 1e-14, "memory": 10},
///    "state": "immersion" | "director", "initial": "closed-form" | "reconstruct" | "plane",
///    "director_scale": 1, "corrupt_shape": false, "write_fields": true, "svg": true,
///    "out": "out", "seed": 0}
struct ExperimentConfig {
  std::string experiment = "energy";
  std::string preset = "flat";
  nlohmann::json metric;  // null: use the preset
  nlohmann::json shape;   // null: use the preset
  std::string target;     // empty: use the preset
  std::optional<Box> domain;
  std::vector<int> grid{32, 32};
  double p = 2.0;
  PerturbationSpec perturbation;
  OptimizeConfig optimizer;
  std::string state = "immersion";
  std::string initial = "closed-form";
  double director_scale = 1.0;
  bool corrupt_shape = false;
  bool write_fields = true;
  bool svg = true;
  std::string out = "out";
  std::uint64_t seed = 0;
};

/// Throws Error(BadConfig) on schema violations.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Concrete inputs resolved from a config.
struct Problem {
  Preset preset;
  Grid grid;
  ChartPtr metric;
  ChartPtr target;
  ShapeField shape;
};
Problem build_problem(const ExperimentConfig& cfg);

/// S plus g^{-1} times a fixed antisymmetric block, so that g S is no longer
/// symmetric.
ShapeField corrupted_shape(const ShapeField& s, const MetricChart& g);

/// Closed-form, reconstructed or planar starting immersion (cfg.initial),
/// before any perturbation.
DiscreteImmersion initial_immersion(const ExperimentConfig& cfg, const Problem& prob);

/// mean_k sin(k pi s0) sin(k pi s1) in normalized coordinates s in [0,1]^d.
std::vector<double> wrinkle(const Grid& grid, const std::vector<int>& frequencies);
/// f + eps * wrinkle * n_f.
DiscreteImmersion wrinkled(const DiscreteImmersion& f, const NormalField& n, const std::vector<double>& w,
                           double eps);
/// Smooth seeded displacement with max-norm about `amplitude`.
NodeArray smooth_noise(const Grid& grid, int components, double amplitude, std::uint64_t seed);

// ------------------------------------------------------------ random corpora

/// Smooth SPD parameter metric with random coefficients.
ChartPtr random_parameter_metric(std::mt19937_64& rng, int dim);
/// Target-chart immersion around the centre of the chart box: a scaled copy
/// of the parameter plane plus a few random smooth modes.
DiscreteImmersion random_immersion(std::mt19937_64& rng, const Grid& grid, const ChartPtr& target,
                                   double amplitude = 0.08);
/// Random g-smooth S (g^{-1} times a random symmetric field).
ShapeField random_shape(std::mt19937_64& rng, const Grid& grid, const MetricChart& g, double amplitude = 1.0);
/// Random director: random foot plus a random smooth vector field; `gain`
/// multiplies wave numbers and amplitudes of the vector part.
DirectorField random_director(std::mt19937_64& rng, const Grid& grid, const ChartPtr& target, double gain);

/// |D xi|^2 assembled from the Sasaki metric on TN in (x, v) coordinates,
/// without going through the connector.
std::vector<double> sasaki_direct(const DirectorField& xi, const MetricChart& g);

/// Largest relative error between the analytic gradient and central
/// differences at `samples` random coordinates; relative error is
/// |a - b| / max(|a|, |b|, floor) with floor = 1e-8 * max|gradient|.
/// The difference quotient sums per-node density changes and is
/// Richardson-extrapolated from steps h and h/2, h = step_scale * max(1, |x|).
struct GradientCheck {
  double max_rel_error = 0.0;
  int samples = 0;
};
GradientCheck check_gradient(const DiscreteImmersion& f, const MetricChart& g, const ShapeField& s, double p,
                             std::mt19937_64& rng, int samples, double step_scale = 1e-6);
GradientCheck check_gradient(const DirectorField& xi, const MetricChart& g, const ShapeField& s, double p,
                             std::mt19937_64& rng, int samples, double step_scale = 1e-6);

// ------------------------------------------------------------ experiments

struct CheckEntry {
  std::string name;
  double max_violation = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  std::string status;  // "pass" | "fail" | "skipped: ..."
};
struct CheckReport {
  std::vector<CheckEntry> entries;
  bool all_passed() const;
};
CheckReport run_check(const ExperimentConfig& cfg);

struct EnergySummary {
  EnergyReport energy;
  nlohmann::json summary;
};
EnergySummary run_energy(const ExperimentConfig& cfg);

struct ReconstructSummary {
  DiscreteImmersion f;
  double pullback_error = 0.0;  // max over nodes, Frobenius
  double shape_error = 0.0;     // max over nodes, Frobenius
  std::optional<double> closed_form_distance;  // max node distance after alignment
  nlohmann::json summary;
};
ReconstructSummary run_reconstruct(const ExperimentConfig& cfg);

struct MinimizeSummary {
  EnergyReport energy;
  OptimizeTrace trace;
  std::optional<DiscreteImmersion> immersion;
  std::optional<DirectorField> director;
  nlohmann::json summary;
};
MinimizeSummary run_minimize(const ExperimentConfig& cfg);

struct SweepRecord {
  int frequency = 0;  // 0 when the full frequency mix is used
  double epsilon = 0.0;
  double energy = 0.0;
  double stretch = 0.0;
  double bend = 0.0;
  double distance = 0.0;         // W^{1,p}(f_eps, aligned f0)
  double normal_distance = 0.0;  // W^{1,p}(n_eps, rotated n0)
  double perturbation_norm = 0.0;  // W^{1,p} norm of eps * w * n0
  std::optional<double> ratio;     // empty when E^{1/p} < 1e-12
};
/// One sweep point: f_eps = f0 + eps w n0, aligned back onto f0.
SweepRecord sweep_record(const DiscreteImmersion& f0, const NormalField& n0, const std::vector<double>& w,
                         double eps, const MetricChart& g, const ShapeField& s, double p);
std::vector<SweepRecord> run_stability_sweep(const ExperimentConfig& cfg);

struct RatioStudy {
  std::vector<SweepRecord> records;
  nlohmann::json summary;
};
RatioStudy run_ratio_study(const ExperimentConfig& cfg);

/// Dispatch on cfg.experiment. Returns the process exit code (0 ok, 2 when
/// a check fails).
int run_experiment(const ExperimentConfig& cfg);

std::string sweep_csv(const std::vector<SweepRecord>& records, bool with_frequency = false);

}  // namespace imlab
