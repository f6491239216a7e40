#include "imlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <numbers>
#include <set>

#include "imlab/error.hpp"
#include "imlab/io.hpp"

namespace imlab {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRatioGuard = 1e-12;

const std::set<std::string>& experiment_names() {
  static const std::set<std::string> names{"energy", "check", "reconstruct", "minimize", "stability-sweep",
                                           "ratio-study"};
  return names;
}

[[noreturn]] void bad(const std::string& msg) {
  throw Error(ErrorCode::BadConfig, msg);
}

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string("config field '") + key + "': " + e.what());
  }
}

Mat mat_from_row(const std::vector<double>& row, int d) {
  if (static_cast<int>(row.size()) != d * d) bad("tabulated block must have d*d entries");
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = row[static_cast<std::size_t>(i * d + j)];
  return m;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out) / name).string();
}

bool writing(const ExperimentConfig& cfg) {
  return !cfg.out.empty();
}

void write_json(const ExperimentConfig& cfg, const std::string& name, const json& j) {
  if (writing(cfg)) write_atomic(out_path(cfg, name), j.dump(2) + "\n");
}

void write_immersion(const ExperimentConfig& cfg, const std::string& stem, const Grid& grid,
                     const NodeArray& values) {
  if (!writing(cfg) || !cfg.write_fields) return;
  write_atomic(out_path(cfg, stem + ".csv"), node_csv(grid, values));
  write_atomic(out_path(cfg, stem + ".bin"), binary_dump(grid, values));
  if (grid.dim() == 2 && values.cols() == 3) write_atomic(out_path(cfg, stem + ".obj"), obj_mesh(grid, values));
}

json grid_json(const Grid& g) {
  json j = json::array();
  for (int a = 0; a < g.dim(); ++a) j.push_back(g.count(a));
  return j;
}

double max_frobenius_gap(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, (a[k] - b[k]).norm());
  return worst;
}

std::vector<Mat> metric_values(const Grid& grid, const MetricChart& g) {
  std::vector<Mat> out;
  out.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) out.push_back(g.eval(grid.point(k)));
  return out;
}

void validate_amplitudes(const std::vector<double>& a) {
  if (a.empty()) bad("sweep needs a non-empty amplitude list");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] > 0.0)) bad("sweep amplitudes must be strictly positive");
    if (i > 0 && !(a[i] < a[i - 1])) bad("sweep amplitudes must be strictly decreasing");
  }
}

}  // namespace

// ------------------------------------------------------------ config

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) bad("config must be a JSON object");
  if (!j.contains("imlab_config") || j["imlab_config"] != 1) bad("config must carry \"imlab_config\": 1");
  static const std::set<std::string> known{
      "imlab_config", "experiment", "preset", "metric",  "shape",         "target",        "domain",
      "grid",         "p",          "perturbation", "optimizer", "state", "initial", "director_scale",
      "corrupt_shape", "write_fields", "svg", "out", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) bad("unknown config field '" + key + "'");
  }
  ExperimentConfig cfg;
  if (j.contains("experiment")) cfg.experiment = get_as<std::string>(j, "experiment");
  if (!experiment_names().count(cfg.experiment)) bad("unknown experiment '" + cfg.experiment + "'");
  if (j.contains("preset")) cfg.preset = get_as<std::string>(j, "preset");
  make_preset(cfg.preset);
  if (j.contains("metric")) cfg.metric = j["metric"];
  if (j.contains("shape")) cfg.shape = j["shape"];
  if (j.contains("target")) cfg.target = get_as<std::string>(j, "target");
  if (j.contains("domain")) {
    const auto d = get_as<std::vector<std::vector<double>>>(j, "domain");
    Box b{Vec(static_cast<Eigen::Index>(d.size())), Vec(static_cast<Eigen::Index>(d.size()))};
    if (d.empty() || d.size() > 2) bad("domain must list 1 or 2 intervals");
    for (std::size_t a = 0; a < d.size(); ++a) {
      if (d[a].size() != 2 || !(d[a][1] > d[a][0])) bad("domain intervals must be [lo, hi] with lo < hi");
      b.lower(static_cast<Eigen::Index>(a)) = d[a][0];
      b.upper(static_cast<Eigen::Index>(a)) = d[a][1];
    }
    cfg.domain = b;
  }
  if (j.contains("grid")) cfg.grid = get_as<std::vector<int>>(j, "grid");
  if (cfg.grid.empty() || cfg.grid.size() > 2) bad("grid must list 1 or 2 node counts");
  for (int n : cfg.grid) {
    if (n < 4) bad("grid node counts must be >= 4");
  }
  if (j.contains("p")) cfg.p = get_as<double>(j, "p");
  if (!(cfg.p >= 1.0)) bad("p must be >= 1");
  if (j.contains("perturbation")) {
    const json& pj = j["perturbation"];
    if (!pj.is_object()) bad("perturbation must be an object");
    for (const auto& [key, value] : pj.items()) {
      if (key != "frequencies" && key != "amplitudes" && key != "noise") bad("unknown perturbation field '" + key + "'");
    }
    if (pj.contains("frequencies")) cfg.perturbation.frequencies = get_as<std::vector<int>>(pj, "frequencies");
    if (pj.contains("amplitudes")) cfg.perturbation.amplitudes = get_as<std::vector<double>>(pj, "amplitudes");
    if (pj.contains("noise")) cfg.perturbation.noise = get_as<double>(pj, "noise");
  }
  if (cfg.perturbation.frequencies.empty()) bad("perturbation frequencies must not be empty");
  for (int k : cfg.perturbation.frequencies) {
    if (k < 1) bad("perturbation frequencies must be positive");
  }
  if (!(cfg.perturbation.noise >= 0.0)) bad("perturbation noise must be >= 0");
  if (j.contains("optimizer")) {
    const json& oj = j["optimizer"];
    if (!oj.is_object()) bad("optimizer must be an object");
    for (const auto& [key, value] : oj.items()) {
      if (key != "max_iters" && key != "grad_tol" && key != "step_tol" && key != "memory") {
        bad("unknown optimizer field '" + key + "'");
      }
    }
    if (oj.contains("max_iters")) cfg.optimizer.max_iters = get_as<int>(oj, "max_iters");
    if (oj.contains("grad_tol")) cfg.optimizer.grad_tol = get_as<double>(oj, "grad_tol");
    if (oj.contains("step_tol")) cfg.optimizer.step_tol = get_as<double>(oj, "step_tol");
    if (oj.contains("memory")) cfg.optimizer.memory = get_as<int>(oj, "memory");
  }
  if (j.contains("state")) cfg.state = get_as<std::string>(j, "state");
  if (cfg.state != "immersion" && cfg.state != "director") bad("state must be 'immersion' or 'director'");
  if (j.contains("initial")) cfg.initial = get_as<std::string>(j, "initial");
  if (cfg.initial != "closed-form" && cfg.initial != "reconstruct" && cfg.initial != "plane") {
    bad("initial must be 'closed-form', 'reconstruct' or 'plane'");
  }
  if (j.contains("director_scale")) cfg.director_scale = get_as<double>(j, "director_scale");
  if (j.contains("corrupt_shape")) cfg.corrupt_shape = get_as<bool>(j, "corrupt_shape");
  if (j.contains("write_fields")) cfg.write_fields = get_as<bool>(j, "write_fields");
  if (j.contains("svg")) cfg.svg = get_as<bool>(j, "svg");
  if (j.contains("out")) cfg.out = get_as<std::string>(j, "out");
  if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j, "seed");
  cfg.optimizer.seed = cfg.seed;
  cfg.optimizer.validate();
  if (cfg.experiment == "stability-sweep" || cfg.experiment == "ratio-study") {
    validate_amplitudes(cfg.perturbation.amplitudes);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    bad("cannot parse " + path + ": " + e.what());
  }
  return parse_config(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["imlab_config"] = 1;
  j["experiment"] = cfg.experiment;
  j["preset"] = cfg.preset;
  if (!cfg.metric.is_null()) j["metric"] = cfg.metric;
  if (!cfg.shape.is_null()) j["shape"] = cfg.shape;
  if (!cfg.target.empty()) j["target"] = cfg.target;
  if (cfg.domain) {
    json d = json::array();
    for (int a = 0; a < cfg.domain->dim(); ++a) d.push_back({cfg.domain->lower(a), cfg.domain->upper(a)});
    j["domain"] = d;
  }
  j["grid"] = cfg.grid;
  j["p"] = cfg.p;
  j["perturbation"] = {{"frequencies", cfg.perturbation.frequencies},
                       {"amplitudes", cfg.perturbation.amplitudes},
                       {"noise", cfg.perturbation.noise}};
  j["optimizer"] = {{"max_iters", cfg.optimizer.max_iters},
                    {"grad_tol", cfg.optimizer.grad_tol},
                    {"step_tol", cfg.optimizer.step_tol},
                    {"memory", cfg.optimizer.memory}};
  j["state"] = cfg.state;
  j["initial"] = cfg.initial;
  j["director_scale"] = cfg.director_scale;
  j["corrupt_shape"] = cfg.corrupt_shape;
  j["write_fields"] = cfg.write_fields;
  j["svg"] = cfg.svg;
  j["out"] = cfg.out;
  j["seed"] = cfg.seed;
  return j;
}

// ------------------------------------------------------------ problem setup

Problem build_problem(const ExperimentConfig& cfg) {
  Preset preset = make_preset(cfg.preset);
  const Box domain = cfg.domain ? *cfg.domain : preset.domain;
  if (domain.dim() != static_cast<int>(cfg.grid.size())) bad("grid and domain dimensions differ");
  Grid grid = Grid::on_box(domain, cfg.grid);
  const int d = grid.dim();

  ChartPtr metric = preset.metric;
  if (cfg.metric.is_string()) {
    metric = make_chart(cfg.metric.get<std::string>(), d);
  } else if (cfg.metric.is_object()) {
    if (cfg.metric.contains("chart")) {
      metric = make_chart(cfg.metric["chart"].get<std::string>(), d);
    } else if (cfg.metric.contains("tabulated")) {
      const auto rows = cfg.metric["tabulated"].get<std::vector<std::vector<double>>>();
      if (rows.size() != grid.size()) bad("tabulated metric needs one block per grid node");
      std::vector<Mat> vals;
      vals.reserve(rows.size());
      for (const auto& r : rows) vals.push_back(mat_from_row(r, d));
      metric = std::make_shared<TabulatedChart>("tabulated", grid, vals);
    } else {
      bad("metric object needs 'chart' or 'tabulated'");
    }
  } else if (!cfg.metric.is_null()) {
    bad("metric must be a chart name or an object");
  }
  if (metric->dim() != d) bad("metric dimension differs from grid");

  ChartPtr target = cfg.target.empty() ? preset.target : make_chart(cfg.target, d + 1);
  if (target->dim() != d + 1) bad("target dimension must be grid dimension + 1");

  ShapeField shape{grid, {}};
  if (cfg.shape.is_null()) {
    if (d != preset.domain.dim()) bad("preset shape operator needs a 2-d grid; supply 'shape'");
    shape = sample_shape(grid, preset.shape);
  } else if (cfg.shape.is_object() && cfg.shape.contains("constant")) {
    const auto rows = cfg.shape["constant"].get<std::vector<std::vector<double>>>();
    std::vector<double> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    const Mat m = mat_from_row(flat, d);
    shape = sample_shape(grid, [m](const Vec&) { return m; });
  } else if (cfg.shape.is_object() && cfg.shape.contains("tabulated")) {
    const auto rows = cfg.shape["tabulated"].get<std::vector<std::vector<double>>>();
    if (rows.size() != grid.size()) bad("tabulated shape needs one block per grid node");
    for (const auto& r : rows) shape.values.push_back(mat_from_row(r, d));
  } else {
    bad("shape must be an object with 'constant' or 'tabulated'");
  }
  return Problem{std::move(preset), std::move(grid), std::move(metric), std::move(target), std::move(shape)};
}

ShapeField corrupted_shape(const ShapeField& s, const MetricChart& g) {
  ShapeField out = s;
  const int d = s.grid.dim();
  if (d < 2) return out;
  Mat skew = Mat::Zero(d, d);
  skew(0, 1) = 0.5;
  skew(1, 0) = -0.5;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    out.values[k] += SpdRoot(g.eval(s.grid.point(k))).inverse() * skew;
  }
  return out;
}

DiscreteImmersion initial_immersion(const ExperimentConfig& cfg, const Problem& prob) {
  const int m = prob.grid.dim() + 1;
  DiscreteImmersion f{prob.grid, NodeArray(), prob.target};
  if (cfg.initial == "reconstruct") {
    f = integrate_frame(*prob.metric, prob.shape, prob.grid);
  } else if (cfg.initial == "closed-form") {
    if (!prob.preset.immersion || prob.grid.dim() != 2) bad("preset has no closed-form immersion for this grid");
    f.values = sample(prob.grid, m, prob.preset.immersion);
  } else {
    const Vec centre = 0.5 * (prob.target->domain().lower + prob.target->domain().upper);
    const Vec pc = 0.5 * (prob.grid.box().lower + prob.grid.box().upper);
    f.values = sample(prob.grid, m, [&](const Vec& x) {
      Vec y = centre;
      y.head(x.size()) += x - pc;
      return y;
    });
  }
  f.target = prob.target;
  f.validate();
  return f;
}

std::vector<double> wrinkle(const Grid& grid, const std::vector<int>& frequencies) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto idx = grid.index(k);
    double acc = 0.0;
    for (int q : frequencies) {
      double term = 1.0;
      for (int a = 0; a < grid.dim(); ++a) {
        const double s = static_cast<double>(idx[a]) / (grid.count(a) - 1);
        term *= std::sin(q * kPi * s);
      }
      acc += term;
    }
    w[k] = acc / static_cast<double>(frequencies.size());
  }
  return w;
}

DiscreteImmersion wrinkled(const DiscreteImmersion& f, const NormalField& n, const std::vector<double>& w,
                           double eps) {
  DiscreteImmersion out = f;
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    out.values.row(r) += (eps * w[k]) * n.values.row(r);
  }
  return out;
}

NodeArray smooth_noise(const Grid& grid, int components, double amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> wave(1.0, 4.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  NodeArray out = NodeArray::Zero(static_cast<Eigen::Index>(grid.size()), components);
  if (amplitude == 0.0) return out;
  for (int c = 0; c < components; ++c) {
    for (int mode = 0; mode < 4; ++mode) {
      const double amp = unit(rng);
      std::array<double, 2> kv{};
      for (int a = 0; a < grid.dim(); ++a) kv[a] = wave(rng) * kPi / grid.extent(a);
      const double ph = phase(rng);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const Vec x = grid.point(k) - grid.box().lower;
        double arg = ph;
        for (int a = 0; a < grid.dim(); ++a) arg += kv[a] * x(a);
        out(static_cast<Eigen::Index>(k), c) += amp * std::sin(arg);
      }
    }
  }
  const double peak = out.cwiseAbs().maxCoeff();
  if (peak > 0.0) out *= amplitude / peak;
  return out;
}

// ------------------------------------------------------------ random corpora

namespace {

struct Mode {
  double amp;
  std::array<double, 2> k;
  double phase;
};

std::vector<Mode> draw_modes(std::mt19937_64& rng, int count, double amplitude, double kmin, double kmax) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> wave(kmin, kmax);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::vector<Mode> modes;
  for (int q = 1; q <= count; ++q) {
    Mode m;
    m.amp = amplitude * unit(rng) / q;
    m.k = {wave(rng), wave(rng)};
    m.phase = phase(rng);
    modes.push_back(m);
  }
  return modes;
}

double eval_modes(const std::vector<Mode>& modes, const Vec& x) {
  double acc = 0.0;
  for (const Mode& m : modes) {
    double arg = m.phase;
    for (Eigen::Index a = 0; a < x.size(); ++a) arg += m.k[static_cast<std::size_t>(a)] * x(a);
    acc += m.amp * std::sin(arg);
  }
  return acc;
}

}  // namespace

ChartPtr random_parameter_metric(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> wave(0.5, 2.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::array<double, 9> c{};
  for (double& v : c) v = wave(rng);
  std::array<double, 4> ph{};
  for (double& v : ph) v = phase(rng);
  Box box{Vec::Constant(dim, -10.0), Vec::Constant(dim, 10.0)};
  auto eval = [dim, c, ph](const Vec& x) {
    Mat g(dim, dim);
    if (dim == 1) {
      const double s = std::sin(c[0] * x(0) + ph[0]);
      g(0, 0) = 1.0 + 0.3 * s * s;
      return g;
    }
    const double s0 = std::sin(c[0] * x(0) + c[1] * x(1) + ph[0]);
    const double s1 = std::cos(c[2] * x(1) + c[3] * x(0) + ph[1]);
    g(0, 0) = 1.0 + 0.3 * s0 * s0;
    g(1, 1) = 1.0 + 0.3 * s1 * s1;
    g(0, 1) = g(1, 0) = 0.2 * std::sin(c[4] * x(0) + ph[2]) * std::cos(c[5] * x(1) + ph[3]);
    return g;
  };
  return std::make_shared<AnalyticChart>("random", box, eval);
}

DiscreteImmersion random_immersion(std::mt19937_64& rng, const Grid& grid, const ChartPtr& target,
                                   double amplitude) {
  const int m = grid.dim() + 1;
  std::vector<std::vector<Mode>> modes;
  for (int c = 0; c < m; ++c) modes.push_back(draw_modes(rng, 3, amplitude, 0.5, 2.5));
  const Vec centre = 0.5 * (target->domain().lower + target->domain().upper);
  const Vec pc = 0.5 * (grid.box().lower + grid.box().upper);
  DiscreteImmersion f{grid, sample(grid, m,
                                   [&](const Vec& x) {
                                     Vec y = centre;
                                     y.head(x.size()) += x - pc;
                                     for (int c = 0; c < m; ++c) y(c) += eval_modes(modes[c], x);
                                     return y;
                                   }),
                      target};
  f.validate();
  return f;
}

ShapeField random_shape(std::mt19937_64& rng, const Grid& grid, const MetricChart& g, double amplitude) {
  const int d = grid.dim();
  std::vector<std::vector<Mode>> modes;
  for (int c = 0; c < d * d; ++c) modes.push_back(draw_modes(rng, 2, amplitude, 0.5, 2.5));
  return sample_shape(grid, [&](const Vec& x) {
    Mat sym(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        sym(i, j) = sym(j, i) = eval_modes(modes[static_cast<std::size_t>(i * d + j)], x);
      }
    }
    return Mat(SpdRoot(g.eval(x)).inverse() * sym);
  });
}

DirectorField random_director(std::mt19937_64& rng, const Grid& grid, const ChartPtr& target, double gain) {
  const DiscreteImmersion foot = random_immersion(rng, grid, target);
  const int m = grid.dim() + 1;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> base(static_cast<std::size_t>(m));
  for (double& b : base) b = unit(rng);
  std::vector<std::vector<Mode>> modes;
  for (int c = 0; c < m; ++c) modes.push_back(draw_modes(rng, 3, 0.5 * gain, 0.5 * gain, 2.5 * gain));
  NodeArray vec = sample(grid, m, [&](const Vec& x) {
    Vec v(m);
    for (int c = 0; c < m; ++c) v(c) = base[static_cast<std::size_t>(c)] + eval_modes(modes[c], x);
    return v;
  });
  return DirectorField{grid, foot.values, std::move(vec), target};
}

std::vector<double> sasaki_direct(const DirectorField& xi, const MetricChart& g) {
  const Grid& grid = xi.grid;
  const int d = grid.dim();
  const int m = d + 1;
  const NodeArray both = (NodeArray(xi.foot.rows(), 2 * m) << xi.foot, xi.vec).finished();
  std::array<NodeArray, 2> deriv;
  for (int a = 0; a < d; ++a) deriv[a] = fd_derivative(grid, both, a);
  std::vector<double> out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec x = xi.foot.row(static_cast<Eigen::Index>(k)).transpose();
    const Vec v = xi.vec.row(static_cast<Eigen::Index>(k)).transpose();
    const Eigen::MatrixXd h = xi.target->eval(x);
    const Christoffel gamma = xi.target->christoffel(x);
    // L w = Gamma(x)[w, v]
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
    for (int al = 0; al < m; ++al)
      for (int be = 0; be < m; ++be)
        for (int ga = 0; ga < m; ++ga) l(al, be) += gamma(al, be, ga) * v(ga);
    Eigen::MatrixXd sas(2 * m, 2 * m);
    sas.topLeftCorner(m, m) = h + l.transpose() * h * l;
    sas.topRightCorner(m, m) = l.transpose() * h;
    sas.bottomLeftCorner(m, m) = h * l;
    sas.bottomRightCorner(m, m) = h;
    const Eigen::MatrixXd ginv = g.eval(grid.point(k)).inverse();
    Eigen::MatrixXd tangent(2 * m, d);
    for (int a = 0; a < d; ++a) tangent.col(a) = deriv[a].row(static_cast<Eigen::Index>(k)).transpose();
    out[k] = (ginv * tangent.transpose() * sas * tangent).trace();
  }
  return out;
}

namespace {

// Central differences of the energy, summed node by node so that the
// untouched nodes cancel exactly, with one Richardson step (h, h/2).
template <class Energy>
GradientCheck compare_gradient(Eigen::VectorXd x, const Eigen::VectorXd& grad, const Energy& energy,
                               const std::vector<double>& measure, std::mt19937_64& rng, int samples,
                               double step_scale) {
  GradientCheck out;
  std::uniform_int_distribution<Eigen::Index> pick(0, x.size() - 1);
  const double scale = std::max(1.0, x.lpNorm<Eigen::Infinity>());
  const double h = step_scale * scale;
  const double floor = 1e-8 * grad.lpNorm<Eigen::Infinity>();
  auto central = [&](Eigen::Index i, double step) {
    const double xi = x(i);
    x(i) = xi + step;
    const EnergyReport up = energy(x);
    x(i) = xi - step;
    const EnergyReport down = energy(x);
    x(i) = xi;
    double diff = 0.0;
    for (std::size_t k = 0; k < measure.size(); ++k) {
      diff += measure[k] * ((up.stretch_density[k] - down.stretch_density[k]) +
                            (up.bend_density[k] - down.bend_density[k]));
    }
    return diff / (2.0 * step);
  };
  for (int s = 0; s < samples; ++s) {
    const Eigen::Index i = pick(rng);
    const double fd = (4.0 * central(i, 0.5 * h) - central(i, h)) / 3.0;
    const double denom = std::max({std::abs(fd), std::abs(grad(i)), floor});
    out.max_rel_error = std::max(out.max_rel_error, denom > 0.0 ? std::abs(fd - grad(i)) / denom : 0.0);
    ++out.samples;
  }
  return out;
}

}  // namespace

GradientCheck check_gradient(const DiscreteImmersion& f, const MetricChart& g, const ShapeField& s, double p,
                             std::mt19937_64& rng, int samples, double step_scale) {
  const NodeArray grad = energy_gradient(f, g, s, p);
  const auto rows = f.values.rows(), cols = f.values.cols();
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(f.values.data(), f.values.size());
  Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size());
  auto energy = [&](const Eigen::VectorXd& y) {
    DiscreteImmersion fy{f.grid, NodeArray(rows, cols), f.target};
    Eigen::Map<Eigen::VectorXd>(fy.values.data(), fy.values.size()) = y;
    return total_energy(fy, g, s, p);
  };
  return compare_gradient(std::move(x), gv, energy, param_frame(f.grid, g).measure, rng, samples, step_scale);
}

GradientCheck check_gradient(const DirectorField& xi, const MetricChart& g, const ShapeField& s, double p,
                             std::mt19937_64& rng, int samples, double step_scale) {
  const DirectorGradient grad = energy_gradient(xi, g, s, p);
  const auto rows = xi.foot.rows(), cols = xi.foot.cols();
  const auto n = rows * cols;
  Eigen::VectorXd x(2 * n), gv(2 * n);
  x << Eigen::Map<const Eigen::VectorXd>(xi.foot.data(), n), Eigen::Map<const Eigen::VectorXd>(xi.vec.data(), n);
  gv << Eigen::Map<const Eigen::VectorXd>(grad.foot.data(), n),
      Eigen::Map<const Eigen::VectorXd>(grad.vec.data(), n);
  auto energy = [&](const Eigen::VectorXd& y) {
    DirectorField z{xi.grid, NodeArray(rows, cols), NodeArray(rows, cols), xi.target};
    Eigen::Map<Eigen::VectorXd>(z.foot.data(), n) = y.head(n);
    Eigen::Map<Eigen::VectorXd>(z.vec.data(), n) = y.tail(n);
    return relaxed_energy(z, g, s, p);
  };
  return compare_gradient(std::move(x), gv, energy, param_frame(xi.grid, g).measure, rng, samples, step_scale);
}

// ------------------------------------------------------------ check

bool CheckReport::all_passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return e.pass; });
}

namespace {

CheckEntry entry(std::string name, double violation, double tol, bool pass) {
  return CheckEntry{std::move(name), violation, tol, pass, pass ? "pass" : "fail"};
}

CheckEntry at_most(std::string name, double violation, double tol) {
  return entry(std::move(name), violation, tol, violation <= tol);
}

std::vector<ChartPtr> corpus_targets(int m) {
  return {std::make_shared<EuclideanChart>(m), make_chart("sphere", m), make_chart("hyperbolic", m)};
}

}  // namespace

CheckReport run_check(const ExperimentConfig& cfg) {
  CheckReport rep;
  const Grid grid({cfg.grid[0], cfg.grid.size() > 1 ? cfg.grid[1] : cfg.grid[0]}, {0.0, 0.0}, {1.0, 1.0});
  std::mt19937_64 rng(cfg.seed);
  const auto targets = corpus_targets(3);

  // Random immersion corpus shared by several checks.
  struct Case {
    ChartPtr g;
    DiscreteImmersion f;
    ShapeField s;
  };
  std::vector<Case> corpus;
  for (int rep_i = 0; rep_i < 2; ++rep_i) {
    for (const auto& t : targets) {
      ChartPtr g = random_parameter_metric(rng, 2);
      DiscreteImmersion f = random_immersion(rng, grid, t);
      ShapeField s = random_shape(rng, grid, *g);
      corpus.push_back(Case{g, std::move(f), std::move(s)});
    }
  }

  double relax = 0.0;
  double dist_gap = 0.0;
  double unit_err = 0.0;
  double orth_err = 0.0;
  double orient_min = INFINITY;
  for (const Case& c : corpus) {
    const DirectorField xi = normal_director(c.f);
    for (double p : {2.0, 3.0}) {
      const double e = total_energy(c.f, *c.g, c.s, p).total;
      const double r = relaxed_energy(xi, *c.g, c.s, p).total;
      relax = std::max(relax, std::abs(e - r) / (1.0 + e));
    }
    const ParamFrame pf = param_frame(grid, *c.g);
    const JacobianField jac = fd_jacobian(c.f);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(k);
      const Mat h = c.f.target->eval(c.f.values.row(r).transpose());
      const SpdRoot root(h);
      const Vec n = xi.vec.row(r).transpose();
      const double a = dist_rotations(relaxed_frame(jac.values[k], n, root.sqrt(), pf.g_inv_sqrt[k]));
      const double b = dist_stiefel(stretch_frame(jac.values[k], root.sqrt(), pf.g_inv_sqrt[k]));
      dist_gap = std::max(dist_gap, std::abs(a - b));
      unit_err = std::max(unit_err, std::abs(std::sqrt(n.dot(h * n)) - 1.0));
      for (int i = 0; i < 2; ++i) {
        const Vec col = jac.values[k].col(i);
        orth_err = std::max(orth_err, std::abs(col.dot(h * n)) / std::sqrt(col.dot(h * col)));
      }
      Mat full(3, 3);
      full.leftCols(2) = root.sqrt() * jac.values[k];
      full.col(2) = root.sqrt() * n;
      orient_min = std::min(orient_min, full.determinant());
    }
  }
  rep.entries.push_back(at_most("relaxation_identity", relax, 1e-10));
  rep.entries.push_back(at_most("distance_identity", dist_gap, 1e-10));
  rep.entries.push_back(at_most("normal_unit_length", unit_err, 1e-10));
  rep.entries.push_back(at_most("normal_orthogonality", orth_err, 1e-8));
  rep.entries.push_back(entry("normal_orientation", std::max(0.0, -orient_min), 0.0, orient_min > 0.0));

  // Sasaki identity and the pointwise director bound on random directors.
  double sasaki = 0.0;
  double margin_violation = 0.0;
  std::size_t applicable = 0;
  for (const auto& t : targets) {
    ChartPtr g = random_parameter_metric(rng, 2);
    const DirectorField xi = random_director(rng, grid, t, 1.0);
    const auto a = sasaki_norm_sq(xi, *g);
    const auto b = sasaki_direct(xi, *g);
    for (std::size_t k = 0; k < a.size(); ++k) {
      sasaki = std::max(sasaki, std::abs(a[k] - b[k]) / std::max(1.0, std::abs(b[k])));
    }
    const DirectorField amp = random_director(rng, grid, t, 20.0);
    const ShapeField s = random_shape(rng, grid, *g);
    for (const auto& mgn : auxcalc_margin(amp, *g, s)) {
      if (!mgn) continue;
      ++applicable;
      margin_violation = std::max(margin_violation, -*mgn);
    }
  }
  rep.entries.push_back(at_most("sasaki_identity", sasaki, 1e-12));
  rep.entries.push_back(
      entry("auxcalc_margin", margin_violation, 0.0, margin_violation <= 0.0 && applicable > 0));

  // Zero-energy presets and Gauss-Codazzi on the compatible ones.
  for (const std::string name : {"flat", "sphere-cap"}) {
    const Preset pr = make_preset(name);
    const Grid pg = Grid::on_box(pr.domain, {grid.count(0), grid.count(1)});
    const DiscreteImmersion f{pg, sample(pg, 3, pr.immersion), pr.target};
    const double e = total_energy(f, *pr.metric, sample_shape(pg, pr.shape), 2.0).total;
    const double h = pg.max_spacing();
    rep.entries.push_back(at_most(name == "flat" ? "zero_energy_flat" : "zero_energy_sphere", e, 10.0 * h * h));
  }
  for (const std::string& name : preset_names()) {
    const Preset pr = make_preset(name);
    const Grid pg = Grid::on_box(pr.domain, {grid.count(0), grid.count(1)});
    const CompatibilityReport cr = gauss_codazzi_residual(*pr.metric, sample_shape(pg, pr.shape), pg);
    double worst = 0.0;
    for (std::size_t k = 0; k < pg.size(); ++k) {
      worst = std::max(worst, std::max(cr.gauss_residual[k], cr.codazzi_residual[k]) / cr.tolerance[k]);
    }
    if (pr.compatible) {
      rep.entries.push_back(at_most("gauss_codazzi_" + name, worst, 1.0));
    } else {
      rep.entries.push_back(entry("incompatibility_detected", worst, 1.0, !cr.passed));
    }
  }

  // Symmetry of g S for the configured problem.
  {
    const Problem prob = build_problem(cfg);
    const ShapeField s = cfg.corrupt_shape ? corrupted_shape(prob.shape, *prob.metric) : prob.shape;
    rep.entries.push_back(
        at_most("shape_symmetry", shape_asymmetry(s, *prob.metric), asymmetry_tolerance(prob.grid, *prob.metric, s)));
  }

  // Gradient against central differences.
  if (cfg.p < 2.0) {
    rep.entries.push_back(CheckEntry{"gradient_check", 0.0, 1e-5, true, "skipped: p<2"});
  } else {
    const Grid small({12, 12}, {0.0, 0.0}, {1.0, 1.0});
    double worst = 0.0;
    for (const auto& t : targets) {
      ChartPtr g = random_parameter_metric(rng, 2);
      const DiscreteImmersion f = random_immersion(rng, small, t);
      const ShapeField s = random_shape(rng, small, *g);
      worst = std::max(worst, check_gradient(f, *g, s, cfg.p, rng, 25).max_rel_error);
      const DirectorField xi = random_director(rng, small, t, 1.0);
      worst = std::max(worst, check_gradient(xi, *g, s, cfg.p, rng, 25).max_rel_error);
    }
    rep.entries.push_back(at_most("gradient_check", worst, 1e-5));
  }

  if (writing(cfg)) {
    json j;
    j["grid"] = grid_json(grid);
    j["p"] = cfg.p;
    j["seed"] = cfg.seed;
    j["all_passed"] = rep.all_passed();
    json checks = json::array();
    for (const auto& e : rep.entries) {
      checks.push_back({{"name", e.name},
                        {"max_violation", e.max_violation},
                        {"tolerance", e.tolerance},
                        {"pass", e.pass},
                        {"status", e.status}});
    }
    j["checks"] = checks;
    write_json(cfg, "check.json", j);
  }
  return rep;
}

// ------------------------------------------------------------ energy

namespace {

DiscreteImmersion perturbed_initial(const ExperimentConfig& cfg, const Problem& prob) {
  DiscreteImmersion f = initial_immersion(cfg, prob);
  if (!cfg.perturbation.amplitudes.empty()) {
    f = wrinkled(f, unit_normal(f), wrinkle(prob.grid, cfg.perturbation.frequencies),
                 cfg.perturbation.amplitudes.front());
  }
  if (cfg.perturbation.noise > 0.0) {
    f.values += smooth_noise(prob.grid, static_cast<int>(f.values.cols()), cfg.perturbation.noise, cfg.seed);
  }
  f.validate();
  return f;
}

DirectorField initial_director(const ExperimentConfig& cfg, const DiscreteImmersion& f) {
  DirectorField xi = normal_director(f);
  xi.vec *= cfg.director_scale;
  return xi;
}

json energy_json(const EnergyReport& e) {
  return {{"p", e.p}, {"stretch", e.stretch}, {"bend", e.bend}, {"total", e.total}};
}

void write_densities(const ExperimentConfig& cfg, const Grid& grid, const EnergyReport& e) {
  if (!writing(cfg) || !cfg.write_fields) return;
  NodeArray d(static_cast<Eigen::Index>(grid.size()), 2);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    d(static_cast<Eigen::Index>(k), 0) = e.stretch_density[k];
    d(static_cast<Eigen::Index>(k), 1) = e.bend_density[k];
  }
  write_atomic(out_path(cfg, "densities.csv"), node_csv(grid, d, {"stretch", "bend"}));
}

// Largest | |v|_h - 1 | and largest |<d_i x, v>_h| / |d_i x|_h over nodes.
std::pair<double, double> director_consistency(const DirectorField& xi) {
  const JacobianField jx = fd_jacobian(xi.grid, xi.foot);
  double unit = 0.0, orth = 0.0;
  for (std::size_t k = 0; k < xi.grid.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const Mat h = xi.target->eval(xi.foot.row(r).transpose());
    const Vec v = xi.vec.row(r).transpose();
    unit = std::max(unit, std::abs(std::sqrt(v.dot(h * v)) - 1.0));
    for (int i = 0; i < xi.grid.dim(); ++i) {
      const Vec c = jx.values[k].col(i);
      orth = std::max(orth, std::abs(c.dot(h * v)) / std::sqrt(c.dot(h * c)));
    }
  }
  return {unit, orth};
}

}  // namespace

EnergySummary run_energy(const ExperimentConfig& cfg) {
  const Problem prob = build_problem(cfg);
  const ShapeField s = cfg.corrupt_shape ? corrupted_shape(prob.shape, *prob.metric) : prob.shape;
  const DiscreteImmersion f = perturbed_initial(cfg, prob);
  EnergySummary out;
  if (cfg.state == "director") {
    out.energy = relaxed_energy(initial_director(cfg, f), *prob.metric, s, cfg.p);
  } else {
    out.energy = total_energy(f, *prob.metric, s, cfg.p);
  }
  out.summary = energy_json(out.energy);
  out.summary["experiment"] = "energy";
  out.summary["preset"] = cfg.preset;
  out.summary["state"] = cfg.state;
  out.summary["grid"] = grid_json(prob.grid);
  write_json(cfg, "energy.json", out.summary);
  write_densities(cfg, prob.grid, out.energy);
  write_immersion(cfg, "immersion", prob.grid, f.values);
  return out;
}

// ------------------------------------------------------------ reconstruct

ReconstructSummary run_reconstruct(const ExperimentConfig& cfg) {
  const Problem prob = build_problem(cfg);
  const ShapeField s = cfg.corrupt_shape ? corrupted_shape(prob.shape, *prob.metric) : prob.shape;
  ReconstructSummary out{integrate_frame(*prob.metric, s, prob.grid), 0.0, 0.0, std::nullopt, {}};
  out.pullback_error = max_frobenius_gap(pullback_metric(out.f), metric_values(prob.grid, *prob.metric));
  out.shape_error = max_frobenius_gap(shape_operator(out.f).values, s.values);
  out.summary = {{"experiment", "reconstruct"},
                 {"preset", cfg.preset},
                 {"grid", grid_json(prob.grid)},
                 {"pullback_error", out.pullback_error},
                 {"shape_error", out.shape_error}};
  if (prob.preset.immersion && prob.preset.compatible && !cfg.domain && cfg.metric.is_null() &&
      cfg.shape.is_null() && prob.grid.dim() == 2) {
    const DiscreteImmersion exact{prob.grid, sample(prob.grid, 3, prob.preset.immersion), out.f.target};
    const RigidAlignment al = align_rigid(exact, out.f);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < exact.values.rows(); ++k) {
      worst = std::max(worst, (exact.values.row(k) - al.aligned.values.row(k)).norm());
    }
    out.closed_form_distance = worst;
    out.summary["closed_form_distance"] = worst;
  }
  write_json(cfg, "reconstruct.json", out.summary);
  write_immersion(cfg, "reconstruct", prob.grid, out.f.values);
  return out;
}

// ------------------------------------------------------------ minimize

MinimizeSummary run_minimize(const ExperimentConfig& cfg) {
  const Problem prob = build_problem(cfg);
  const DiscreteImmersion f0 = perturbed_initial(cfg, prob);
  MinimizeSummary out;
  out.summary = {{"experiment", "minimize"}, {"preset", cfg.preset}, {"state", cfg.state},
                 {"grid", grid_json(prob.grid)}, {"seed", cfg.seed}};
  const std::vector<Mat> gvals = metric_values(prob.grid, *prob.metric);
  if (cfg.state == "director") {
    auto res = minimize(initial_director(cfg, f0), *prob.metric, prob.shape, cfg.p, cfg.optimizer);
    const auto [unit, orth] = director_consistency(res.state);
    out.summary["director_unit_error"] = unit;
    out.summary["director_normal_error"] = orth;
    const DiscreteImmersion foot{prob.grid, res.state.foot, prob.target};
    out.summary["pullback_error"] = max_frobenius_gap(pullback_metric(foot), gvals);
    out.energy = res.energy;
    out.trace = std::move(res.trace);
    out.director = std::move(res.state);
  } else {
    auto res = minimize(f0, *prob.metric, prob.shape, cfg.p, cfg.optimizer);
    out.summary["pullback_error"] = max_frobenius_gap(pullback_metric(res.state), gvals);
    out.summary["shape_error"] = max_frobenius_gap(shape_operator(res.state).values, prob.shape.values);
    out.energy = res.energy;
    out.trace = std::move(res.trace);
    out.immersion = std::move(res.state);
  }
  out.summary["energy"] = energy_json(out.energy);
  out.summary["iterations"] = out.trace.records.empty() ? 0 : out.trace.records.back().iter;
  out.summary["reason"] = out.trace.reason;
  write_json(cfg, "minimize.json", out.summary);
  if (writing(cfg)) write_atomic(out_path(cfg, "trace.csv"), trace_csv(out.trace));
  if (out.immersion) {
    write_immersion(cfg, "terminal", prob.grid, out.immersion->values);
  } else {
    write_immersion(cfg, "terminal_foot", prob.grid, out.director->foot);
    if (writing(cfg) && cfg.write_fields) {
      write_atomic(out_path(cfg, "terminal_vec.csv"), node_csv(prob.grid, out.director->vec));
    }
  }
  write_densities(cfg, prob.grid, out.energy);
  return out;
}

// ------------------------------------------------------------ sweeps

SweepRecord sweep_record(const DiscreteImmersion& f0, const NormalField& n0, const std::vector<double>& w,
                         double eps, const MetricChart& g, const ShapeField& s, double p) {
  SweepRecord r;
  r.epsilon = eps;
  const DiscreteImmersion f = wrinkled(f0, n0, w, eps);
  const EnergyReport e = total_energy(f, g, s, p);
  r.energy = e.total;
  r.stretch = e.stretch;
  r.bend = e.bend;
  const RigidAlignment al = align_rigid(f, f0);
  r.distance = w1p_distance(f, al.aligned, p, g);
  const NormalField nf = unit_normal(f);
  const NodeArray n_rot = n0.values * al.rotation.transpose();
  r.normal_distance = w1p_distance(f.grid, nf.values, n_rot, p, g);
  r.perturbation_norm = w1p_distance(f.grid, f.values, f0.values, p, g);
  const double denom = std::pow(r.energy, 1.0 / p);
  if (denom >= kRatioGuard) r.ratio = (r.distance + r.normal_distance) / denom;
  return r;
}

std::string sweep_csv(const std::vector<SweepRecord>& records, bool with_frequency) {
  Table t;
  if (with_frequency) t.header.push_back("frequency");
  for (const char* c : {"epsilon", "energy", "stretch", "bend", "distance", "normal_distance", "perturbation_norm",
                        "ratio", "flagged"}) {
    t.header.emplace_back(c);
  }
  for (const auto& r : records) {
    std::vector<std::string> row;
    if (with_frequency) row.push_back(std::to_string(r.frequency));
    for (double v : {r.epsilon, r.energy, r.stretch, r.bend, r.distance, r.normal_distance, r.perturbation_norm}) {
      row.push_back(format_double(v));
    }
    row.push_back(r.ratio ? format_double(*r.ratio) : "");
    row.push_back(r.ratio ? "0" : "1");
    t.rows.push_back(std::move(row));
  }
  return table_csv(t);
}

namespace {

struct SweepSetup {
  Problem prob;
  DiscreteImmersion f0;
  NormalField n0;
};

SweepSetup sweep_setup(const ExperimentConfig& cfg) {
  validate_amplitudes(cfg.perturbation.amplitudes);
  Problem prob = build_problem(cfg);
  if (!prob.target->is_euclidean()) bad("sweeps reconstruct f0 and need a Euclidean target");
  DiscreteImmersion f0 = integrate_frame(*prob.metric, prob.shape, prob.grid);
  NormalField n0 = unit_normal(f0);
  return SweepSetup{std::move(prob), std::move(f0), std::move(n0)};
}

std::vector<SweepRecord> sweep_amplitudes(const SweepSetup& st, const std::vector<double>& w,
                                          const std::vector<double>& amplitudes, double p, int frequency) {
  std::vector<std::future<SweepRecord>> jobs;
  for (double eps : amplitudes) {
    jobs.push_back(std::async(std::launch::async, [&, eps] {
      return sweep_record(st.f0, st.n0, w, eps, *st.prob.metric, st.prob.shape, p);
    }));
  }
  std::vector<SweepRecord> out;
  for (auto& j : jobs) {
    out.push_back(j.get());
    out.back().frequency = frequency;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const SweepRecord& a, const SweepRecord& b) { return a.epsilon > b.epsilon; });
  return out;
}

json ratio_summary(const std::vector<SweepRecord>& recs) {
  double lo = INFINITY, hi = 0.0;
  std::size_t flagged = 0;
  for (const auto& r : recs) {
    if (!r.ratio) {
      ++flagged;
      continue;
    }
    lo = std::min(lo, *r.ratio);
    hi = std::max(hi, *r.ratio);
  }
  json j = {{"records", recs.size()}, {"flagged", flagged}};
  if (hi > 0.0) {
    j["ratio_min"] = lo;
    j["ratio_max"] = hi;
    j["ratio_spread"] = hi / lo;
  }
  return j;
}

void write_sweep_svg(const ExperimentConfig& cfg, const std::string& name, const std::string& title,
                     const std::vector<SweepRecord>& recs) {
  if (!writing(cfg) || !cfg.svg) return;
  std::vector<double> x;
  PlotSeries energy{"energy", {}}, ratio{"ratio", {}}, dist{"distance", {}};
  for (const auto& r : recs) {
    x.push_back(r.epsilon);
    energy.y.push_back(r.energy);
    ratio.y.push_back(r.ratio ? *r.ratio : 0.0);
    dist.y.push_back(r.distance);
  }
  write_atomic(out_path(cfg, name), loglog_svg(title, "epsilon", x, {energy, ratio, dist}));
}

}  // namespace

std::vector<SweepRecord> run_stability_sweep(const ExperimentConfig& cfg) {
  const SweepSetup st = sweep_setup(cfg);
  const std::vector<double> w = wrinkle(st.prob.grid, cfg.perturbation.frequencies);
  std::vector<SweepRecord> recs = sweep_amplitudes(st, w, cfg.perturbation.amplitudes, cfg.p, 0);
  if (writing(cfg)) {
    write_atomic(out_path(cfg, "sweep.csv"), sweep_csv(recs));
    json j = ratio_summary(recs);
    bool decreasing = true;
    for (std::size_t i = 1; i < recs.size(); ++i) decreasing = decreasing && recs[i].energy < recs[i - 1].energy;
    j["energy_strictly_decreasing"] = decreasing;
    j["experiment"] = "stability-sweep";
    j["preset"] = cfg.preset;
    j["grid"] = grid_json(st.prob.grid);
    j["p"] = cfg.p;
    write_json(cfg, "sweep.json", j);
    write_sweep_svg(cfg, "sweep.svg", "stability sweep (" + cfg.preset + ")", recs);
    // fields in the order of sweep.csv, so every row can be re-evaluated
    write_immersion(cfg, "sweep_f0", st.prob.grid, st.f0.values);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      write_immersion(cfg, "sweep_" + std::to_string(i), st.prob.grid,
                      wrinkled(st.f0, st.n0, w, recs[i].epsilon).values);
    }
  }
  return recs;
}

RatioStudy run_ratio_study(const ExperimentConfig& cfg) {
  const SweepSetup st = sweep_setup(cfg);
  RatioStudy out;
  out.summary = {{"experiment", "ratio-study"}, {"preset", cfg.preset}, {"grid", grid_json(st.prob.grid)},
                 {"p", cfg.p}};
  json per = json::array();
  double empirical = 0.0;
  for (int k : cfg.perturbation.frequencies) {
    const auto recs = sweep_amplitudes(st, wrinkle(st.prob.grid, {k}), cfg.perturbation.amplitudes, cfg.p, k);
    json s = ratio_summary(recs);
    s["frequency"] = k;
    if (s.contains("ratio_max")) empirical = std::max(empirical, s["ratio_max"].get<double>());
    per.push_back(s);
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }
  out.summary["families"] = per;
  out.summary["empirical_constant"] = empirical;
  if (writing(cfg)) {
    write_atomic(out_path(cfg, "ratio_study.csv"), sweep_csv(out.records, true));
    write_json(cfg, "ratio_study.json", out.summary);
    if (cfg.svg) {
      std::vector<double> x = cfg.perturbation.amplitudes;
      std::vector<PlotSeries> series;
      for (int k : cfg.perturbation.frequencies) {
        PlotSeries s{"ratio k=" + std::to_string(k), {}};
        for (const auto& r : out.records) {
          if (r.frequency == k) s.y.push_back(r.ratio ? *r.ratio : 0.0);
        }
        series.push_back(std::move(s));
      }
      write_atomic(out_path(cfg, "ratio_study.svg"), loglog_svg("ratio study (" + cfg.preset + ")", "epsilon", x, series));
    }
  }
  return out;
}

// ------------------------------------------------------------ dispatch

int run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "check") return run_check(cfg).all_passed() ? 0 : 2;
  if (cfg.experiment == "energy") run_energy(cfg);
  else if (cfg.experiment == "reconstruct") run_reconstruct(cfg);
  else if (cfg.experiment == "minimize") run_minimize(cfg);
  else if (cfg.experiment == "stability-sweep") run_stability_sweep(cfg);
  else if (cfg.experiment == "ratio-study") run_ratio_study(cfg);
  else bad("unknown experiment '" + cfg.experiment + "'");
  return 0;
}

}  // namespace imlab
