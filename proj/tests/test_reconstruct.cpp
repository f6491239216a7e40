#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "imlab/error.hpp"
#include "imlab/immersion.hpp"
#include "imlab/presets.hpp"
#include "imlab/reconstruct.hpp"

using namespace imlab;

namespace {

constexpr double kPi = std::numbers::pi;

ShapeField shape_of(const Preset& p, const Grid& grid) { return sample_shape(grid, p.shape); }

double max_gap(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, (a[k] - b[k]).norm());
  return worst;
}

std::vector<Mat> metric_at_nodes(const Grid& grid, const MetricChart& g) {
  std::vector<Mat> out;
  for (std::size_t k = 0; k < grid.size(); ++k) out.push_back(g.eval(grid.point(k)));
  return out;
}

double max_node_distance(const NodeArray& a, const NodeArray& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.rows(); ++k) worst = std::max(worst, (a.row(k) - b.row(k)).norm());
  return worst;
}

Mat random_rotation(std::mt19937& rng) {
  std::normal_distribution<double> nd;
  Eigen::Quaterniond q(nd(rng), nd(rng), nd(rng), nd(rng));
  return Mat(q.normalized().toRotationMatrix());
}

// Closed-form cylinder of radius r with the orientation that makes
// S = diag(1/r, 0) the shape operator.
DiscreteImmersion cylinder_closed(const Grid& grid, double r) {
  return DiscreteImmersion{grid, sample(grid, 3, [r](const Vec& x) { return cylinder_point(x, r); }),
                           make_chart("euclidean", 3)};
}

}  // namespace

TEST(GaussCodazzi, FlatIsExact) {
  const Preset p = make_preset("flat");
  const Grid grid = Grid::on_box(p.domain, {12, 12});
  const CompatibilityReport r = gauss_codazzi_residual(*p.metric, shape_of(p, grid), grid);
  EXPECT_TRUE(r.passed);
  EXPECT_LE(r.gauss_max, 1e-14);
  EXPECT_LE(r.codazzi_max, 1e-14);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_GE(r.gauss_residual[k], 0.0);
    EXPECT_GE(r.codazzi_residual[k], 0.0);
  }
}

TEST(GaussCodazzi, SphereWithIdentityShape) {
  const Preset p = make_preset("sphere-cap");
  for (int n : {16, 32, 64}) {
    const Grid grid = Grid::on_box(p.domain, {n, n});
    const CompatibilityReport r = gauss_codazzi_residual(*p.metric, shape_of(p, grid), grid);
    const double h = grid.max_spacing();
    EXPECT_TRUE(r.passed) << n;
    EXPECT_LE(r.gauss_max, 10.0 * h * h);
    EXPECT_LE(r.codazzi_max, 10.0 * h * h);
  }
}

TEST(GaussCodazzi, SphereWithZeroShapeFails) {
  const Preset p = make_preset("sphere-incompatible");
  const Grid grid = Grid::on_box(p.domain, {24, 24});
  const CompatibilityReport r = gauss_codazzi_residual(*p.metric, shape_of(p, grid), grid);
  EXPECT_FALSE(r.passed);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double s = std::sin(grid.point(k)(0));
    EXPECT_NEAR(r.gauss_residual[k], s * s, 1e-5);
  }
}

TEST(GaussCodazzi, AsymmetricShapeRejected) {
  const Preset p = make_preset("flat");
  const Grid grid = Grid::on_box(p.domain, {8, 8});
  const ShapeField s = sample_shape(grid, [](const Vec&) {
    Mat m(2, 2);
    m << 0.0, 0.3, -0.3, 0.0;
    return m;
  });
  try {
    gauss_codazzi_residual(*p.metric, s, grid);
    FAIL() << "expected AsymmetricShape";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AsymmetricShape);
  }
}

TEST(GaussCodazzi, PullbackOfGraphConverges) {
  // (g, S) read off a discretized analytic graph is compatible up to the
  // discretization error.
  auto graph = [](const Vec& x) {
    Vec y(3);
    y << x(0), x(1), 0.3 * std::sin(2.0 * x(0)) * std::cos(x(1));
    return y;
  };
  double prev_g = 0.0;
  double prev_c = 0.0;
  for (int n : {16, 32, 64}) {
    const Grid grid({n, n}, {0.0, 0.0}, {1.0, 1.0});
    const DiscreteImmersion f{grid, sample(grid, 3, graph), make_chart("euclidean", 3)};
    const TabulatedChart g("pullback", grid, pullback_metric(f));
    const CompatibilityReport r = gauss_codazzi_residual(g, shape_operator(f), grid);
    EXPECT_TRUE(r.passed) << n;
    if (prev_g > 0.0) {
      EXPECT_GE(std::log2(prev_g / r.gauss_max), 1.9) << n;
      EXPECT_GE(std::log2(prev_c / r.codazzi_max), 1.9) << n;
    }
    prev_g = r.gauss_max;
    prev_c = r.codazzi_max;
  }
}

TEST(IntegrateFrame, FlatIsAffinePlane) {
  const Preset p = make_preset("flat");
  const Grid grid = Grid::on_box(p.domain, {10, 10});
  const DiscreteImmersion f = integrate_frame(*p.metric, shape_of(p, grid), grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec x = grid.point(k);
    EXPECT_NEAR(f.values(k, 0), x(0), 1e-13);
    EXPECT_NEAR(f.values(k, 1), x(1), 1e-13);
    EXPECT_NEAR(f.values(k, 2), 0.0, 1e-13);
  }
  EXPECT_LE(max_gap(pullback_metric(f), metric_at_nodes(grid, *p.metric)), 1e-12);
}

TEST(IntegrateFrame, CylinderOfRadiusR) {
  const double r = 0.7;
  const auto flat = make_chart("euclidean", 2);
  double prev = 0.0;
  for (int n : {9, 17, 33}) {
    const Grid grid({n, n}, {0.0, 0.0}, {2.0, 1.0});
    const ShapeField s = sample_shape(grid, [r](const Vec&) {
      Mat m = Mat::Zero(2, 2);
      m(0, 0) = 1.0 / r;
      return m;
    });
    const DiscreteImmersion f = integrate_frame(*flat, s, grid);
    const DiscreteImmersion exact = cylinder_closed(grid, r);
    const double err = max_node_distance(exact.values, align_rigid(exact, f).aligned.values);
    const double h = grid.max_spacing();
    EXPECT_LE(err, 2.0 * std::pow(h, 4)) << n;
    if (prev > 0.0) EXPECT_GE(std::log2(prev / err), 3.8) << n;
    prev = err;
  }
}

TEST(IntegrateFrame, SphereCapConverges) {
  const Preset p = make_preset("sphere-cap");
  double prev_g = 0.0;
  double prev_s = 0.0;
  double dist = 0.0;
  for (int n : {16, 32, 64}) {
    const Grid grid = Grid::on_box(p.domain, {n, n});
    const ShapeField s = shape_of(p, grid);
    const DiscreteImmersion f = integrate_frame(*p.metric, s, grid);
    const double eg = max_gap(pullback_metric(f), metric_at_nodes(grid, *p.metric));
    const double es = max_gap(shape_operator(f).values, s.values);
    if (prev_g > 0.0) {
      EXPECT_GE(std::log2(prev_g / eg), 1.9) << n;
      EXPECT_GE(std::log2(prev_s / es), 1.9) << n;
    }
    prev_g = eg;
    prev_s = es;
    const DiscreteImmersion exact{grid, sample(grid, 3, sphere_point), f.target};
    dist = max_node_distance(exact.values, align_rigid(exact, f).aligned.values);
  }
  EXPECT_LE(dist, 1e-4);
}

TEST(IntegrateFrame, FrameGramMatchesMetric) {
  // The Gram matrix of the integrated frame is not exposed, but the distance
  // to the closed form bounds it: on analytic data the sweep is fourth order.
  const Preset p = make_preset("sphere-cap");
  double prev = 0.0;
  for (int n : {9, 17, 33}) {
    const Grid grid = Grid::on_box(p.domain, {n, n});
    const DiscreteImmersion f = integrate_frame(*p.metric, shape_of(p, grid), grid);
    const DiscreteImmersion exact{grid, sample(grid, 3, sphere_point), f.target};
    const double err = max_node_distance(exact.values, align_rigid(exact, f).aligned.values);
    if (prev > 0.0) EXPECT_GE(std::log2(prev / err), 3.5) << n;
    prev = err;
  }
}

TEST(IntegrateFrame, IncompatibleFormsRejected) {
  const Preset p = make_preset("sphere-incompatible");
  const Grid grid = Grid::on_box(p.domain, {16, 16});
  try {
    integrate_frame(*p.metric, shape_of(p, grid), grid);
    FAIL() << "expected IncompatibleForms";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompatibleForms);
  }
}

TEST(IntegrateFrame, BadAnchorRejected) {
  const Preset p = make_preset("sphere-cap");
  const Grid grid = Grid::on_box(p.domain, {12, 12});
  Anchor a = default_anchor(*p.metric, grid, 5);
  a.frame *= 1.5;
  try {
    integrate_frame(*p.metric, shape_of(p, grid), grid, a);
    FAIL() << "expected NonSPDAnchor";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSPDAnchor);
  }
}

TEST(IntegrateFrame, DefaultAnchor) {
  const Preset p = make_preset("sphere-cap");
  const Grid grid = Grid::on_box(p.domain, {12, 12});
  const Anchor a = default_anchor(*p.metric, grid, 7);
  const Mat g = p.metric->eval(grid.point(7));
  EXPECT_LE((a.frame.transpose() * a.frame - g).norm(), 1e-14);
  EXPECT_LE(a.frame.row(2).norm(), 0.0);
  EXPECT_NEAR(a.normal(2), 1.0, 0.0);
  Mat full(3, 3);
  full << a.frame, a.normal;
  EXPECT_GT(full.determinant(), 0.0);
}

TEST(IntegrateFrame, UniqueUpToRigidMotion) {
  const Preset p = make_preset("sphere-cap");
  const Grid grid = Grid::on_box(p.domain, {24, 24});
  const ShapeField s = shape_of(p, grid);
  std::mt19937 rng(11);
  const DiscreteImmersion f1 = integrate_frame(*p.metric, s, grid);
  for (int trial = 0; trial < 3; ++trial) {
    Anchor a = default_anchor(*p.metric, grid);
    const Mat q = random_rotation(rng);
    a.frame = q * a.frame;
    a.normal = q * a.normal;
    a.position = Vec::Random(3) * 5.0;
    const DiscreteImmersion f2 = integrate_frame(*p.metric, s, grid, a);
    EXPECT_LE(align_rigid(f1, f2).residual, 1e-8);
  }
}

TEST(AlignRigid, RecoversKnownMotion) {
  const Grid grid({10, 10}, {0.0, 0.0}, {1.0, 1.0});
  const DiscreteImmersion f0 = cylinder_closed(grid, 0.8);
  std::mt19937 rng(3);
  const Mat q = random_rotation(rng);
  Vec b(3);
  b << 0.3, -1.2, 2.0;
  DiscreteImmersion f = f0;
  for (Eigen::Index k = 0; k < f.values.rows(); ++k) {
    f.values.row(k) = (q * f0.values.row(k).transpose() + b).transpose();
  }
  const RigidAlignment al = align_rigid(f, f0);
  EXPECT_LE((al.rotation - q).norm(), 1e-10);
  EXPECT_LE((al.translation - b).norm(), 1e-10);
  EXPECT_LE(al.residual, 1e-10);
  EXPECT_NEAR(al.rotation.determinant(), 1.0, 1e-12);
}

TEST(AlignRigid, IdentityForEqualInputs) {
  const Grid grid({8, 8}, {0.0, 0.0}, {2.0, 1.0});
  const DiscreteImmersion f0 = cylinder_closed(grid, 1.0);
  const RigidAlignment al = align_rigid(f0, f0);
  EXPECT_LE((al.rotation - Mat::Identity(3, 3)).norm(), 1e-12);
  EXPECT_LE(al.translation.norm(), 1e-12);
  EXPECT_LE(al.residual, 1e-12);
}

TEST(AlignRigid, NoiseBound) {
  const Grid grid({16, 16}, {0.0, 0.0}, {2.0, 1.0});
  const DiscreteImmersion f0 = cylinder_closed(grid, 1.0);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double eps = 1e-3;
  DiscreteImmersion f = f0;
  for (Eigen::Index k = 0; k < f.values.rows(); ++k) {
    Vec d(3);
    d << u(rng), u(rng), u(rng);
    f.values.row(k) += eps * d.normalized().transpose() * std::abs(u(rng));
  }
  double vol = 0.0;
  for (double w : grid.weights()) vol += w;
  EXPECT_LE(align_rigid(f, f0).residual, eps * std::sqrt(vol) * (1.0 + 1e-6));
}

TEST(AlignRigid, DegenerateCovariance) {
  const Grid grid({6, 6}, {0.0, 0.0}, {1.0, 1.0});
  DiscreteImmersion line{grid, sample(grid, 3, [](const Vec& x) {
                           Vec y(3);
                           y << x(0) + x(1), 0.0, 0.0;
                           return y;
                         }),
                         make_chart("euclidean", 3)};
  try {
    align_rigid(line, line);
    FAIL() << "expected DegenerateCovariance";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateCovariance);
  }
}

TEST(AlignRigid, GridMismatch) {
  const DiscreteImmersion a = cylinder_closed(Grid({6, 6}, {0.0, 0.0}, {1.0, 1.0}), 1.0);
  const DiscreteImmersion b = cylinder_closed(Grid({7, 6}, {0.0, 0.0}, {1.0, 1.0}), 1.0);
  try {
    align_rigid(a, b);
    FAIL() << "expected GridMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}
