#include "imlab/reconstruct.hpp"

#include <algorithm>
#include <cmath>

#include "imlab/error.hpp"

namespace imlab {

namespace {

void require_shape(const Grid& grid, const ShapeField& s, const MetricChart& g) {
  if (!(s.grid == grid) || s.values.size() != grid.size() || g.dim() != grid.dim()) {
    throw Error(ErrorCode::GridMismatch, "shape field, metric and grid disagree");
  }
}

// II = g S at every node, stored as d*d columns (row-major block).
NodeArray second_form(const MetricChart& g, const ShapeField& s) {
  const int d = s.grid.dim();
  NodeArray ii(s.grid.size(), d * d);
  for (std::size_t k = 0; k < s.grid.size(); ++k) {
    const Mat m = g.eval(s.grid.point(k)) * s.values[k];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) ii(k, i * d + j) = 0.5 * (m(i, j) + m(j, i));
  }
  return ii;
}

double scale_of(const NodeArray& ii, const std::array<NodeArray, 2>& dii, int dim, std::size_t k) {
  double dnorm = 0.0;
  for (int a = 0; a < dim; ++a) dnorm += dii[a].row(k).squaredNorm();
  return ii.row(k).norm() * ii.row(k).norm() + std::sqrt(dnorm);
}

}  // namespace

double asymmetry_tolerance(const Grid& grid, const MetricChart& g, const ShapeField& s) {
  require_shape(grid, s, g);
  const NodeArray ii = second_form(g, s);
  std::array<NodeArray, 2> dii;
  for (int a = 0; a < grid.dim(); ++a) dii[a] = fd_derivative(grid, ii, a);
  const double h = grid.max_spacing();
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) worst = std::max(worst, scale_of(ii, dii, grid.dim(), k));
  return 10.0 * h * h * (1.0 + worst);
}

CompatibilityReport gauss_codazzi_residual(const MetricChart& g, const ShapeField& s, const Grid& grid) {
  require_shape(grid, s, g);
  const double asym = shape_asymmetry(s, g);
  const double asym_tol = asymmetry_tolerance(grid, g, s);
  if (asym > asym_tol) {
    throw Error(ErrorCode::AsymmetricShape, "g S is not symmetric (asymmetry " + std::to_string(asym) +
                                                ", tolerance " + std::to_string(asym_tol) + ")");
  }
  CompatibilityReport rep;
  rep.gauss_residual.assign(grid.size(), 0.0);
  rep.codazzi_residual.assign(grid.size(), 0.0);
  rep.tolerance.assign(grid.size(), 0.0);
  if (grid.dim() == 1) return rep;

  const NodeArray ii = second_form(g, s);
  const std::array<NodeArray, 2> dii{fd_derivative(grid, ii, 0), fd_derivative(grid, ii, 1)};
  const double h = grid.max_spacing();
  auto two = [&](std::size_t k, int i, int j) { return ii(k, i * 2 + j); };
  auto dtwo = [&](int a, std::size_t k, int i, int j) { return dii[a](k, i * 2 + j); };

  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vec x = grid.point(k);
    const Christoffel gamma = g.christoffel(x);
    const Riemann r = g.riemann(x);
    const double det_ii = two(k, 0, 0) * two(k, 1, 1) - two(k, 0, 1) * two(k, 1, 0);
    rep.gauss_residual[k] = std::abs(r(0, 1, 0, 1) - det_ii);

    // nabla_i II_jk = d_i II_jk - Gamma^m_ij II_mk - Gamma^m_ik II_jm
    auto cov = [&](int i, int j, int kk) {
      double v = dtwo(i, k, j, kk);
      for (int m = 0; m < 2; ++m) v -= gamma(m, i, j) * two(k, m, kk) + gamma(m, i, kk) * two(k, j, m);
      return v;
    };
    double c2 = 0.0;
    for (int kk = 0; kk < 2; ++kk) {
      const double c = cov(0, 1, kk) - cov(1, 0, kk);
      c2 += c * c;
    }
    rep.codazzi_residual[k] = std::sqrt(c2);
    rep.tolerance[k] = 10.0 * h * h * (1.0 + std::abs(r(0, 1, 0, 1)) + scale_of(ii, dii, 2, k));
    rep.gauss_max = std::max(rep.gauss_max, rep.gauss_residual[k]);
    rep.codazzi_max = std::max(rep.codazzi_max, rep.codazzi_residual[k]);
    if (rep.gauss_residual[k] > rep.tolerance[k] || rep.codazzi_residual[k] > rep.tolerance[k]) {
      rep.passed = false;
    }
  }
  return rep;
}

Anchor default_anchor(const MetricChart& g, const Grid& grid, std::size_t node) {
  const int d = grid.dim();
  const Mat gm = g.eval(grid.point(node));
  Eigen::LLT<Mat> llt(gm);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NonSPDAnchor, "metric at anchor is not SPD", node);
  Anchor a;
  a.node = node;
  a.position = Vec::Zero(d + 1);
  a.frame = Mat::Zero(d + 1, d);
  a.frame.topRows(d) = Mat(llt.matrixL()).transpose();
  a.normal = Vec::Zero(d + 1);
  a.normal(d) = 1.0;
  return a;
}

namespace {

using State = Eigen::MatrixXd;  // columns: f, e_1 .. e_d, n

struct FrameSystem {
  const MetricChart& g;
  const ShapeField& s;
  const Grid& grid;
  int d;

  // Shape operator along a grid line at fractional node position t.
  Mat shape_on_line(std::size_t start, std::size_t stride, int count, double t) const {
    const int base = std::clamp(static_cast<int>(std::floor(t)) - 1, 0, count - 4);
    Mat out = Mat::Zero(d, d);
    for (int m = 0; m < 4; ++m) {
      double w = 1.0;
      for (int q = 0; q < 4; ++q) {
        if (q != m) w *= (t - (base + q)) / static_cast<double>(m - q);
      }
      out += w * s.values[start + static_cast<std::size_t>(base + m) * stride];
    }
    return out;
  }

  State rhs(int axis, const Vec& x, const Mat& shape, const State& y) const {
    const Mat gm = g.eval(x);
    const Christoffel gamma = g.christoffel(x);
    const Mat ii = gm * shape;
    const int nc = d + 2;
    State dy = State::Zero(y.rows(), nc);
    const auto n = y.col(d + 1);
    dy.col(0) = y.col(1 + axis);
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) dy.col(1 + j) += gamma(k, axis, j) * y.col(1 + k);
      dy.col(1 + j) += ii(axis, j) * n;
      dy.col(d + 1) -= shape(j, axis) * y.col(1 + j);
    }
    return dy;
  }

  // One RK4 step from node index i to i + dir along `axis`, within the grid
  // line that starts at flat index `start`.
  State step(int axis, std::size_t start, int i, int dir, const State& y) const {
    const std::size_t stride = grid.stride(axis);
    const int count = grid.count(axis);
    const double h = dir * grid.spacing(axis);
    Vec x0 = grid.point(start + static_cast<std::size_t>(i) * stride);
    auto at = [&](double frac) {
      Vec x = x0;
      x(axis) += frac * h;
      return x;
    };
    const Mat s0 = s.values[start + static_cast<std::size_t>(i) * stride];
    const Mat sh = shape_on_line(start, stride, count, i + 0.5 * dir);
    const Mat s1 = s.values[start + static_cast<std::size_t>(i + dir) * stride];
    const State k1 = rhs(axis, at(0.0), s0, y);
    const State k2 = rhs(axis, at(0.5), sh, y + 0.5 * h * k1);
    const State k3 = rhs(axis, at(0.5), sh, y + 0.5 * h * k2);
    const State k4 = rhs(axis, at(1.0), s1, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // Fill states on the line through `start` along `axis`, from index i0.
  void sweep(int axis, std::size_t start, int i0, std::vector<State>& states) const {
    const std::size_t stride = grid.stride(axis);
    const int count = grid.count(axis);
    for (int i = i0; i + 1 < count; ++i) {
      states[start + static_cast<std::size_t>(i + 1) * stride] =
          step(axis, start, i, +1, states[start + static_cast<std::size_t>(i) * stride]);
    }
    for (int i = i0; i > 0; --i) {
      states[start + static_cast<std::size_t>(i - 1) * stride] =
          step(axis, start, i, -1, states[start + static_cast<std::size_t>(i) * stride]);
    }
  }
};

void check_anchor(const MetricChart& g, const Grid& grid, const Anchor& a) {
  const int d = grid.dim();
  if (a.node >= grid.size() || a.position.size() != d + 1 || a.frame.rows() != d + 1 ||
      a.frame.cols() != d || a.normal.size() != d + 1) {
    throw Error(ErrorCode::NonSPDAnchor, "anchor has wrong shape");
  }
  const Mat gm = g.eval(grid.point(a.node));
  try {
    SpdRoot root(gm);
  } catch (const Error&) {
    throw Error(ErrorCode::NonSPDAnchor, "metric at anchor is not SPD", a.node);
  }
  const Mat gram = a.frame.transpose() * a.frame;
  const double scale = 1.0 + gm.norm();
  if ((gram - gm).norm() > 1e-8 * scale) {
    throw Error(ErrorCode::NonSPDAnchor, "anchor frame Gram matrix differs from g", a.node);
  }
  if (std::abs(a.normal.norm() - 1.0) > 1e-8 || (a.frame.transpose() * a.normal).norm() > 1e-8 * scale) {
    throw Error(ErrorCode::NonSPDAnchor, "anchor normal is not a unit normal", a.node);
  }
  Eigen::MatrixXd full(d + 1, d + 1);
  full.leftCols(d) = a.frame;
  full.col(d) = a.normal;
  if (!(full.determinant() > 0.0)) {
    throw Error(ErrorCode::NonSPDAnchor, "anchor frame is not positively oriented", a.node);
  }
}

}  // namespace

DiscreteImmersion integrate_frame(const MetricChart& g, const ShapeField& s, const Grid& grid,
                                  const std::optional<Anchor>& anchor) {
  require_shape(grid, s, g);
  const int d = grid.dim();
  const CompatibilityReport rep = gauss_codazzi_residual(g, s, grid);
  if (!rep.passed) {
    throw Error(ErrorCode::IncompatibleForms,
                "Gauss-Codazzi residual exceeds tolerance (gauss " + std::to_string(rep.gauss_max) +
                    ", codazzi " + std::to_string(rep.codazzi_max) + ")");
  }
  const Anchor a = anchor ? *anchor : default_anchor(g, grid);
  check_anchor(g, grid, a);

  std::vector<State> states(grid.size());
  State y0(d + 1, d + 2);
  y0.col(0) = a.position;
  y0.middleCols(1, d) = a.frame;
  y0.col(d + 1) = a.normal;
  states[a.node] = y0;

  const FrameSystem sys{g, s, grid, d};
  const auto idx = grid.index(a.node);
  sys.sweep(0, grid.flat(0, idx[1]), idx[0], states);
  if (d == 2) {
    for (int i = 0; i < grid.count(0); ++i) sys.sweep(1, grid.flat(i, 0), idx[1], states);
  }

  DiscreteImmersion f{grid, NodeArray(grid.size(), d + 1), std::make_shared<EuclideanChart>(d + 1)};
  for (std::size_t k = 0; k < grid.size(); ++k) f.values.row(k) = states[k].col(0).transpose();
  return f;
}

RigidAlignment align_rigid(const DiscreteImmersion& f, const DiscreteImmersion& f0) {
  if (!(f.grid == f0.grid) || f.values.rows() != f0.values.rows() || f.values.cols() != f0.values.cols()) {
    throw Error(ErrorCode::GridMismatch, "alignment needs immersions on the same grid");
  }
  if (!f.target || !f0.target || !f.target->is_euclidean() || !f0.target->is_euclidean()) {
    throw Error(ErrorCode::BadConfig, "alignment needs Euclidean targets");
  }
  const auto m = f.values.cols();
  const auto& w = f.grid.weights();
  double wsum = 0.0;
  Vec mu = Vec::Zero(m), mu0 = Vec::Zero(m);
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    wsum += w[k];
    mu += w[k] * f.values.row(k).transpose();
    mu0 += w[k] * f0.values.row(k).transpose();
  }
  mu /= wsum;
  mu0 /= wsum;
  Mat cov = Mat::Zero(m, m);
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    cov += w[k] * (f.values.row(k).transpose() - mu) * (f0.values.row(k).transpose() - mu0).transpose();
  }
  Eigen::JacobiSVD<Mat> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& sigma = svd.singularValues();
  if (!(sigma(0) > 0.0) || (m >= 3 && !(sigma(m - 2) > 1e-12 * sigma(0)))) {
    throw Error(ErrorCode::DegenerateCovariance, "cross-covariance has rank below dimension - 1");
  }
  Vec diag = Vec::Ones(m);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) diag(m - 1) = -1.0;

  RigidAlignment out{svd.matrixU() * diag.asDiagonal() * svd.matrixV().transpose(), Vec(), f0, 0.0};
  out.translation = mu - out.rotation * mu0;
  double acc = 0.0;
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    const Vec y = out.rotation * f0.values.row(k).transpose() + out.translation;
    out.aligned.values.row(k) = y.transpose();
    acc += w[k] * (f.values.row(k).transpose() - y).squaredNorm();
  }
  out.residual = std::sqrt(acc);
  out.aligned.target = f.target;
  return out;
}

}  // namespace imlab
