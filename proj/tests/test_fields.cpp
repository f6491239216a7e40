#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "imlab/error.hpp"
#include "imlab/fields.hpp"

using namespace imlab;

namespace {

constexpr double kPi = std::numbers::pi;

Grid unit_grid(int n) {
  return Grid({n, n}, {0.0, 0.0}, {1.0, 1.0});
}

ChartPtr flat2() {
  return make_chart("euclidean", 2);
}

ScalarField scalar(const Grid& grid, const std::function<double(const Vec&)>& fn) {
  ScalarField s{grid, std::vector<double>(grid.size())};
  for (std::size_t k = 0; k < grid.size(); ++k) s.values[k] = fn(grid.point(k));
  return s;
}

// Midpoint-rule oracle on a dense grid.
double dense_integral(const std::function<double(double, double)>& fn, int n) {
  double acc = 0.0;
  const double h = 1.0 / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) acc += fn((i + 0.5) * h, (j + 0.5) * h);
  return acc * h * h;
}

}  // namespace

TEST(Grid, Construction) {
  const Grid g({5, 7}, {1.0, -1.0}, {2.0, 3.0});
  EXPECT_EQ(g.size(), 35u);
  EXPECT_DOUBLE_EQ(g.spacing(0), 0.5);
  EXPECT_DOUBLE_EQ(g.spacing(1), 0.5);
  EXPECT_EQ(g.flat(2, 3), 17u);
  EXPECT_EQ(g.index(17)[0], 2);
  EXPECT_EQ(g.index(17)[1], 3);
  EXPECT_DOUBLE_EQ(g.point(17)(0), 2.0);
  EXPECT_DOUBLE_EQ(g.point(17)(1), 0.5);
  double total = 0.0;
  for (double w : g.weights()) total += w;
  EXPECT_NEAR(total, 6.0, 1e-14);
}

TEST(Grid, RejectsBadInput) {
  EXPECT_THROW(Grid({3, 8}, {0, 0}, {1, 1}), Error);
  EXPECT_THROW(Grid({8, 8}, {0, 0}, {1, 0}), Error);
  EXPECT_THROW(Grid({8, 8, 8}, {0, 0, 0}, {1, 1, 1}), Error);
  try {
    Grid({2}, {0}, {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadGrid);
  }
}

TEST(FdJacobian, AffineExact) {
  const Grid grid({6, 9}, {-0.3, 0.2}, {1.3, 0.7});
  Mat a(3, 2);
  a << 1.0, -2.0, 0.5, 3.0, -1.5, 0.25;
  Vec b(3);
  b << 0.1, 0.2, 0.3;
  const NodeArray v = sample(grid, 3, [&](const Vec& x) { return Vec(a * x + b); });
  const JacobianField j = fd_jacobian(grid, v);
  for (const Mat& m : j.values) EXPECT_LE((m - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FdJacobian, QuadraticExact1d) {
  const Grid grid({11}, {0.0}, {1.0});
  const NodeArray v = sample(grid, 3, [](const Vec& x) {
    Vec y = Vec::Zero(3);
    y(0) = x(0) * x(0);
    return y;
  });
  const JacobianField j = fd_jacobian(grid, v);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_NEAR(j.values[k](0, 0), 2.0 * grid.point(k)(0), 1e-12);
    EXPECT_EQ(j.values[k](1, 0), 0.0);
  }
}

TEST(FdJacobian, SecondOrderConvergence) {
  double prev = 0.0;
  for (int n : {16, 32, 64, 128}) {
    const Grid grid({n}, {0.0}, {2.0});
    const NodeArray v = sample(grid, 1, [](const Vec& x) {
      Vec y(1);
      y(0) = std::sin(x(0));
      return y;
    });
    const JacobianField j = fd_jacobian(grid, v);
    double err = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      err = std::max(err, std::abs(j.values[k](0, 0) - std::cos(grid.point(k)(0))));
    }
    if (prev > 0.0) EXPECT_GE(std::log2(prev / err), 1.9) << "n = " << n;
    prev = err;
  }
}

TEST(FdJacobian, Linear) {
  const Grid grid = unit_grid(9);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  NodeArray a(grid.size(), 3), b(grid.size(), 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = n(rng);
    b.data()[i] = n(rng);
  }
  const NodeArray c = 0.75 * a - 1.5 * b;
  const auto ja = fd_jacobian(grid, a), jb = fd_jacobian(grid, b), jc = fd_jacobian(grid, c);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    EXPECT_LE((jc.values[k] - (0.75 * ja.values[k] - 1.5 * jb.values[k])).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FdDerivative, AdjointIsTranspose) {
  const Grid grid({7, 5}, {0, 0}, {1, 2});
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  NodeArray u(grid.size(), 2), w(grid.size(), 2);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    u.data()[i] = n(rng);
    w.data()[i] = n(rng);
  }
  for (int a = 0; a < 2; ++a) {
    const double lhs = fd_derivative(grid, u, a).cwiseProduct(w).sum();
    const double rhs = u.cwiseProduct(fd_derivative_adjoint(grid, w, a)).sum();
    EXPECT_NEAR(lhs, rhs, 1e-11);
    const Eigen::SparseMatrix<double> m = fd_matrix(grid, a);
    EXPECT_LE((NodeArray(m * u) - fd_derivative(grid, u, a)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(LpNorm, Constants) {
  const Grid grid = unit_grid(12);
  for (double p : {1.0, 2.0, 3.5}) {
    EXPECT_NEAR(lp_norm(scalar(grid, [](const Vec&) { return 1.0; }), p, *flat2()), 1.0, 1e-14);
    EXPECT_NEAR(lp_norm(scalar(grid, [](const Vec&) { return 2.5; }), p, *flat2()), 2.5, 1e-13);
  }
  const Grid sg = Grid::on_box(Box{Vec::Constant(2, 0.6), Vec::Constant(2, 1.9)}, {17, 13});
  const auto sphere = make_chart("sphere", 2);
  const double vol = volume(sg, *sphere);
  for (double p : {1.0, 2.0, 4.0}) {
    EXPECT_NEAR(lp_norm(scalar(sg, [](const Vec&) { return 3.0; }), p, *sphere), 3.0 * std::pow(vol, 1.0 / p),
                1e-12);
  }
}

TEST(LpNorm, SineOnSquare) {
  const Grid grid = unit_grid(64);
  const double v = lp_norm(scalar(grid, [](const Vec& x) { return std::sin(kPi * x(0)); }), 2.0, *flat2());
  EXPECT_NEAR(v, 1.0 / std::sqrt(2.0), 1e-3);
}

TEST(LpNorm, RefinementOrder) {
  const auto fn = [](const Vec& x) { return std::exp(x(0)) * std::cos(x(1)); };
  // integral of e^{2x} cos^2 y over the unit square
  const double exact = std::sqrt((std::exp(2.0) - 1.0) / 2.0 * (0.5 + std::sin(2.0) / 4.0));
  double prev = 0.0;
  for (int n : {9, 17, 33, 65}) {
    const double err = std::abs(lp_norm(scalar(unit_grid(n), fn), 2.0, *flat2()) - exact);
    if (prev > 0.0) EXPECT_GE(std::log2(prev / err), 1.9);
    prev = err;
  }
}

TEST(LpNorm, BadExponent) {
  try {
    lp_norm(scalar(unit_grid(5), [](const Vec&) { return 1.0; }), 0.5, *flat2());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadExponent);
  }
}

TEST(W1p, ZeroAndShift) {
  const Grid grid({10, 14}, {0, 0}, {1.0, 2.0});
  const auto target = make_chart("euclidean", 3);
  const DiscreteImmersion f{grid, sample(grid, 3, [](const Vec& x) {
                              Vec y(3);
                              y << x(0), x(1), std::sin(x(0) * x(1));
                              return y;
                            }),
                            target};
  EXPECT_EQ(w1p_distance(f, f, 2.0, *flat2()), 0.0);
  DiscreteImmersion shifted = f;
  Eigen::RowVector3d c(0.3, -0.4, 1.2);
  shifted.values.rowwise() += c;
  for (double p : {1.0, 2.0, 3.0}) {
    EXPECT_NEAR(w1p_distance(shifted, f, p, *flat2()), c.norm() * std::pow(2.0, 1.0 / p), 1e-12);
  }
}

TEST(W1p, WrinkleMatchesDenseQuadrature) {
  const Grid grid = unit_grid(64);
  const auto target = make_chart("euclidean", 3);
  const double eps = 1e-3;
  const DiscreteImmersion f0{grid, sample(grid, 3, [](const Vec& x) {
                               Vec y(3);
                               y << x(0), x(1), 0.0;
                               return y;
                             }),
                             target};
  DiscreteImmersion f = f0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec x = grid.point(k);
    f.values(static_cast<Eigen::Index>(k), 2) += eps * std::sin(kPi * x(0)) * std::sin(kPi * x(1));
  }
  const double oracle = std::sqrt(dense_integral(
      [&](double x, double y) {
        const double w = std::sin(kPi * x) * std::sin(kPi * y);
        const double wx = kPi * std::cos(kPi * x) * std::sin(kPi * y);
        const double wy = kPi * std::sin(kPi * x) * std::cos(kPi * y);
        return eps * eps * (w * w + wx * wx + wy * wy);
      },
      1000));
  EXPECT_NEAR(w1p_distance(f, f0, 2.0, *flat2()), oracle, 1e-6);
}

TEST(W1p, GridMismatch) {
  const auto target = make_chart("euclidean", 3);
  const DiscreteImmersion a{unit_grid(5), NodeArray::Zero(25, 3), target};
  const DiscreteImmersion b{unit_grid(6), NodeArray::Zero(36, 3), target};
  try {
    w1p_distance(a, b, 2.0, *flat2());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GridMismatch);
  }
}

TEST(ShapeField, SupNormIsLargestPrincipalCurvature) {
  const Grid grid = unit_grid(5);
  Box box{Vec::Constant(2, -1.0), Vec::Constant(2, 2.0)};
  AnalyticChart g("skew", box, [](const Vec& x) {
    Mat m(2, 2);
    m << 2.0 + x(0), 0.4, 0.4, 1.0;
    return m;
  });
  Mat sym(2, 2);
  sym << 1.0, -0.7, -0.7, -2.0;
  const ShapeField s = sample_shape(grid, [&](const Vec& x) { return Mat(g.eval(x).inverse() * sym); });
  // Generalized eigenvalues of (sym, g) are the principal curvatures.
  double oracle = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(sym),
                                                                 Eigen::MatrixXd(g.eval(grid.point(k))));
    oracle = std::max(oracle, es.eigenvalues().cwiseAbs().maxCoeff());
  }
  EXPECT_NEAR(shape_sup_norm(s, g), oracle, 1e-12);
  EXPECT_LE(shape_asymmetry(s, g), 1e-14);
}

TEST(ShapeField, AsymmetryDetected) {
  const Grid grid = unit_grid(5);
  Mat a(2, 2);
  a << 0.0, 1.0, 0.0, 0.0;
  EXPECT_NEAR(shape_asymmetry(sample_shape(grid, [&](const Vec&) { return a; }), *flat2()), 1.0, 1e-15);
}

TEST(Immersion, ValidateDomain) {
  const Grid grid = unit_grid(5);
  const auto sphere = make_chart("sphere", 3);
  DiscreteImmersion f{grid, NodeArray::Constant(25, 3, 1.0), sphere};
  EXPECT_NO_THROW(f.validate());
  f.values(3, 0) = -1.0;
  try {
    f.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfDomain);
  }
  f.values = NodeArray::Constant(24, 3, 1.0);
  EXPECT_THROW(f.validate(), Error);
}

TEST(TabulatedChart, ConvergesToAnalyticSphere) {
  const auto sphere = make_chart("sphere", 2);
  Vec x(2);
  x << 1.013, 1.377;
  const Christoffel exact = christoffel(*sphere, x);
  double prev_gamma = 0.0, prev_riem = 0.0;
  for (int n : {21, 41, 81}) {
    const Grid grid = Grid::on_box(Box{Vec::Constant(2, 0.5), Vec::Constant(2, 2.0)}, {n, n});
    std::vector<Mat> vals;
    for (std::size_t k = 0; k < grid.size(); ++k) vals.push_back(sphere->eval(grid.point(k)));
    const TabulatedChart tab("tab", grid, vals);
    EXPECT_LE((tab.eval(x) - sphere->eval(x)).norm(), 1e-5);
    const Christoffel c = tab.christoffel(x);
    double err_gamma = 0.0;
    for (int i = 0; i < 27; ++i) err_gamma = std::max(err_gamma, std::abs(c.c[i] - exact.c[i]));
    const double err_riem = std::abs(tab.riemann(x)(0, 1, 0, 1) - std::pow(std::sin(x(0)), 2));
    if (prev_gamma > 0.0) {
      EXPECT_GE(std::log2(prev_gamma / err_gamma), 1.8);
      EXPECT_GE(std::log2(prev_riem / err_riem), 1.8);
    }
    prev_gamma = err_gamma;
    prev_riem = err_riem;
  }
}
