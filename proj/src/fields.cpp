#include "imlab/fields.hpp"

#include <cmath>

#include "imlab/error.hpp"

namespace imlab {

// ---------------------------------------------------------------- Grid

Grid::Grid(std::vector<int> counts, std::vector<double> origin, std::vector<double> extents)
    : counts_(std::move(counts)), origin_(std::move(origin)), extents_(std::move(extents)) {
  const auto d = counts_.size();
  if (d < 1 || d > 2 || origin_.size() != d || extents_.size() != d) {
    throw Error(ErrorCode::BadGrid, "grid dimension must be 1 or 2");
  }
  size_ = 1;
  for (std::size_t a = 0; a < d; ++a) {
    if (counts_[a] < 4) throw Error(ErrorCode::BadGrid, "need at least 4 nodes per axis");
    if (!(extents_[a] > 0.0)) throw Error(ErrorCode::BadGrid, "grid extent must be positive");
    size_ *= static_cast<std::size_t>(counts_[a]);
  }
  weights_.assign(size_, 1.0);
  for (std::size_t node = 0; node < size_; ++node) {
    const auto idx = index(node);
    for (int a = 0; a < dim(); ++a) {
      const double h = spacing(a);
      const bool end = idx[a] == 0 || idx[a] == counts_[a] - 1;
      weights_[node] *= end ? 0.5 * h : h;
    }
  }
}

Grid Grid::on_box(const Box& box, std::vector<int> counts) {
  std::vector<double> origin, extents;
  for (int a = 0; a < box.dim(); ++a) {
    origin.push_back(box.lower(a));
    extents.push_back(box.upper(a) - box.lower(a));
  }
  return Grid(std::move(counts), std::move(origin), std::move(extents));
}

double Grid::max_spacing() const {
  double h = 0.0;
  for (int a = 0; a < dim(); ++a) h = std::max(h, spacing(a));
  return h;
}

std::array<int, 2> Grid::index(std::size_t node) const {
  if (dim() == 1) return {static_cast<int>(node), 0};
  const auto n1 = static_cast<std::size_t>(counts_[1]);
  return {static_cast<int>(node / n1), static_cast<int>(node % n1)};
}

std::size_t Grid::flat(int i, int j) const {
  if (dim() == 1) return static_cast<std::size_t>(i);
  return static_cast<std::size_t>(i) * static_cast<std::size_t>(counts_[1]) +
         static_cast<std::size_t>(j);
}

std::size_t Grid::stride(int axis) const {
  return (dim() == 2 && axis == 0) ? static_cast<std::size_t>(counts_[1]) : 1;
}

Vec Grid::point(std::size_t node) const {
  const auto idx = index(node);
  Vec x(dim());
  for (int a = 0; a < dim(); ++a) x(a) = origin_[a] + idx[a] * spacing(a);
  return x;
}

Box Grid::box() const {
  Box b{Vec(dim()), Vec(dim())};
  for (int a = 0; a < dim(); ++a) {
    b.lower(a) = origin_[a];
    b.upper(a) = origin_[a] + extents_[a];
  }
  return b;
}

bool Grid::operator==(const Grid& other) const {
  return counts_ == other.counts_ && origin_ == other.origin_ && extents_ == other.extents_;
}

// ---------------------------------------------------------------- fields

void DiscreteImmersion::validate() const {
  if (!target) throw Error(ErrorCode::BadConfig, "immersion has no target chart");
  if (values.rows() != static_cast<Eigen::Index>(grid.size()) || values.cols() != grid.dim() + 1 ||
      target->dim() != grid.dim() + 1) {
    throw Error(ErrorCode::GridMismatch, "immersion values do not match grid/target dimensions");
  }
  for (Eigen::Index k = 0; k < values.rows(); ++k) {
    if (!target->domain().contains(values.row(k).transpose())) {
      throw Error(ErrorCode::OutOfDomain, "immersion leaves the target chart", static_cast<std::size_t>(k));
    }
  }
}

void DirectorField::validate() const {
  if (!target) throw Error(ErrorCode::BadConfig, "director field has no target chart");
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (foot.rows() != n || vec.rows() != n || foot.cols() != grid.dim() + 1 ||
      vec.cols() != grid.dim() + 1 || target->dim() != grid.dim() + 1) {
    throw Error(ErrorCode::GridMismatch, "director arrays do not match grid/target dimensions");
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!target->domain().contains(foot.row(k).transpose())) {
      throw Error(ErrorCode::OutOfDomain, "director foot leaves the target chart", static_cast<std::size_t>(k));
    }
    if (!vec.row(k).allFinite()) {
      throw Error(ErrorCode::BadConfig, "director vector is not finite", static_cast<std::size_t>(k));
    }
  }
}

NodeArray sample(const Grid& grid, int components, const std::function<Vec(const Vec&)>& fn) {
  NodeArray out(grid.size(), components);
  for (std::size_t k = 0; k < grid.size(); ++k) out.row(k) = fn(grid.point(k)).transpose();
  return out;
}

ShapeField sample_shape(const Grid& grid, const std::function<Mat(const Vec&)>& fn) {
  ShapeField s{grid, {}};
  s.values.reserve(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) s.values.push_back(fn(grid.point(k)));
  return s;
}

// ---------------------------------------------------------------- stencils

namespace {

struct Tap {
  int offset;
  double coeff;
};

// Taps (relative node offsets along the axis, unscaled by 1/h).
int stencil(int idx, int count, std::array<Tap, 4>& taps) {
  if (idx == 0) {
    taps = {{{0, -2.0}, {1, 3.5}, {2, -2.0}, {3, 0.5}}};
    return 4;
  }
  if (idx == count - 1) {
    taps = {{{0, 2.0}, {-1, -3.5}, {-2, 2.0}, {-3, -0.5}}};
    return 4;
  }
  taps[0] = {-1, -0.5};
  taps[1] = {1, 0.5};
  return 2;
}

}  // namespace

NodeArray fd_derivative(const Grid& grid, const NodeArray& values, int axis) {
  const double inv_h = 1.0 / grid.spacing(axis);
  const auto stride = static_cast<std::ptrdiff_t>(grid.stride(axis));
  const int count = grid.count(axis);
  NodeArray out = NodeArray::Zero(values.rows(), values.cols());
  std::array<Tap, 4> taps{};
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const int ntaps = stencil(grid.index(node)[axis], count, taps);
    for (int t = 0; t < ntaps; ++t) {
      const auto other = static_cast<std::ptrdiff_t>(node) + taps[t].offset * stride;
      out.row(node) += (taps[t].coeff * inv_h) * values.row(other);
    }
  }
  return out;
}

NodeArray fd_derivative_adjoint(const Grid& grid, const NodeArray& bar, int axis) {
  const double inv_h = 1.0 / grid.spacing(axis);
  const auto stride = static_cast<std::ptrdiff_t>(grid.stride(axis));
  const int count = grid.count(axis);
  NodeArray out = NodeArray::Zero(bar.rows(), bar.cols());
  std::array<Tap, 4> taps{};
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const int ntaps = stencil(grid.index(node)[axis], count, taps);
    for (int t = 0; t < ntaps; ++t) {
      const auto other = static_cast<std::ptrdiff_t>(node) + taps[t].offset * stride;
      out.row(other) += (taps[t].coeff * inv_h) * bar.row(node);
    }
  }
  return out;
}

Eigen::SparseMatrix<double> fd_matrix(const Grid& grid, int axis) {
  const double inv_h = 1.0 / grid.spacing(axis);
  const auto stride = static_cast<std::ptrdiff_t>(grid.stride(axis));
  const int count = grid.count(axis);
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(4 * grid.size());
  std::array<Tap, 4> taps{};
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const int ntaps = stencil(grid.index(node)[axis], count, taps);
    for (int t = 0; t < ntaps; ++t) {
      const auto other = static_cast<std::ptrdiff_t>(node) + taps[t].offset * stride;
      entries.emplace_back(static_cast<int>(node), static_cast<int>(other), taps[t].coeff * inv_h);
    }
  }
  const auto n = static_cast<int>(grid.size());
  Eigen::SparseMatrix<double> out(n, n);
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

JacobianField fd_jacobian(const Grid& grid, const NodeArray& values) {
  const int d = grid.dim();
  const auto m = values.cols();
  if (m > kMaxDim) throw Error(ErrorCode::GridMismatch, "jacobian supports at most 3 components");
  JacobianField out{grid, std::vector<Mat>(grid.size(), Mat::Zero(m, d))};
  for (int a = 0; a < d; ++a) {
    const NodeArray da = fd_derivative(grid, values, a);
    for (std::size_t k = 0; k < grid.size(); ++k) out.values[k].col(a) = da.row(k).transpose();
  }
  return out;
}

JacobianField fd_jacobian(const DiscreteImmersion& f) {
  return fd_jacobian(f.grid, f.values);
}

NodeArray fd_jacobian_adjoint(const Grid& grid, const std::vector<Mat>& bar, int components) {
  NodeArray out = NodeArray::Zero(grid.size(), components);
  NodeArray column(grid.size(), components);
  for (int a = 0; a < grid.dim(); ++a) {
    for (std::size_t k = 0; k < grid.size(); ++k) column.row(k) = bar[k].col(a).transpose();
    out += fd_derivative_adjoint(grid, column, a);
  }
  return out;
}

// ---------------------------------------------------------------- quadrature

ParamFrame param_frame(const Grid& grid, const MetricChart& g) {
  if (g.dim() != grid.dim()) throw Error(ErrorCode::GridMismatch, "parameter metric dimension differs from grid");
  ParamFrame pf;
  pf.g.reserve(grid.size());
  pf.g_inv.reserve(grid.size());
  pf.g_inv_sqrt.reserve(grid.size());
  pf.g_sqrt.reserve(grid.size());
  pf.measure.reserve(grid.size());
  const auto& w = grid.weights();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Mat gk = g.eval(grid.point(k));
    const SpdRoot root(gk);
    pf.g.push_back(gk);
    pf.g_inv.push_back(root.inverse());
    pf.g_inv_sqrt.push_back(root.inv_sqrt());
    pf.g_sqrt.push_back(root.sqrt());
    pf.measure.push_back(w[k] * root.sqrt_det());
  }
  return pf;
}

double mixed_norm(const Mat& a, const Mat& h, const Mat& g_inv) {
  const double sq = (g_inv * a.transpose() * h * a).trace();
  return std::sqrt(std::max(sq, 0.0));
}

double volume(const Grid& grid, const MetricChart& g) {
  const ParamFrame pf = param_frame(grid, g);
  double vol = 0.0;
  for (double m : pf.measure) vol += m;
  return vol;
}

double lp_norm(const ScalarField& field, double p, const MetricChart& g) {
  if (!(p >= 1.0)) throw Error(ErrorCode::BadExponent, "L^p norm needs p >= 1");
  if (field.values.size() != field.grid.size()) throw Error(ErrorCode::GridMismatch, "field size differs from grid");
  const ParamFrame pf = param_frame(field.grid, g);
  double acc = 0.0;
  for (std::size_t k = 0; k < field.values.size(); ++k) {
    acc += pf.measure[k] * std::pow(std::abs(field.values[k]), p);
  }
  return std::pow(acc, 1.0 / p);
}

double w1p_distance(const Grid& grid, const NodeArray& a, const NodeArray& b, double p,
                    const MetricChart& g) {
  if (!(p >= 1.0)) throw Error(ErrorCode::BadExponent, "W^{1,p} distance needs p >= 1");
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != static_cast<Eigen::Index>(grid.size())) {
    throw Error(ErrorCode::GridMismatch, "node arrays differ in shape");
  }
  const NodeArray diff = a - b;
  const JacobianField jd = fd_jacobian(grid, diff);
  const ParamFrame pf = param_frame(grid, g);
  double value_part = 0.0;
  double deriv_part = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    value_part += pf.measure[k] * std::pow(diff.row(k).norm(), p);
    const double dn = std::sqrt(std::max((pf.g_inv[k] * jd.values[k].transpose() * jd.values[k]).trace(), 0.0));
    deriv_part += pf.measure[k] * std::pow(dn, p);
  }
  return std::pow(value_part + deriv_part, 1.0 / p);
}

double w1p_distance(const DiscreteImmersion& f, const DiscreteImmersion& f0, double p,
                    const MetricChart& g) {
  if (!(f.grid == f0.grid)) throw Error(ErrorCode::GridMismatch, "immersions live on different grids");
  if (!f.target || !f0.target || !f.target->is_euclidean() || !f0.target->is_euclidean()) {
    throw Error(ErrorCode::BadConfig, "W^{1,p} distance of immersions needs a Euclidean target");
  }
  return w1p_distance(f.grid, f.values, f0.values, p, g);
}

double shape_sup_norm(const ShapeField& s, const MetricChart& g) {
  double m = 0.0;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    const SpdRoot root(g.eval(s.grid.point(k)));
    const Mat conj = root.sqrt() * s.values[k] * root.inv_sqrt();
    Eigen::JacobiSVD<Mat> svd(conj);
    m = std::max(m, svd.singularValues()(0));
  }
  return m;
}

double shape_asymmetry(const ShapeField& s, const MetricChart& g) {
  double worst = 0.0;
  for (std::size_t k = 0; k < s.values.size(); ++k) {
    const Mat ii = g.eval(s.grid.point(k)) * s.values[k];
    worst = std::max(worst, (ii - ii.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

// ---------------------------------------------------------------- tabulated chart

namespace {

Box padded_box(const Grid& grid) {
  return grid.box();
}

}  // namespace

TabulatedChart::TabulatedChart(std::string name, Grid grid, const std::vector<Mat>& values)
    : MetricChart(std::move(name), padded_box(grid)), grid_(std::move(grid)) {
  const int n = grid_.dim();
  if (values.size() != grid_.size()) throw Error(ErrorCode::GridMismatch, "tabulated metric size differs from grid");
  const auto nodes = static_cast<Eigen::Index>(grid_.size());
  metric_.resize(nodes, n * n);
  for (Eigen::Index k = 0; k < nodes; ++k) {
    const Mat& gk = values[static_cast<std::size_t>(k)];
    if (gk.rows() != n || gk.cols() != n) throw Error(ErrorCode::GridMismatch, "tabulated metric has wrong block size");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) metric_(k, i * n + j) = 0.5 * (gk(i, j) + gk(j, i));
  }
  deriv_.resize(nodes, n * n * n);
  for (int a = 0; a < n; ++a) {
    deriv_.middleCols(a * n * n, n * n) = fd_derivative(grid_, metric_, a);
  }
  gamma_ = NodeArray::Zero(nodes, 27);
  for (Eigen::Index k = 0; k < nodes; ++k) {
    Mat gk(n, n);
    MetricDerivative dg;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) gk(i, j) = metric_(k, i * n + j);
    for (int a = 0; a < n; ++a) {
      dg[a] = Mat(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dg[a](i, j) = deriv_(k, a * n * n + i * n + j);
    }
    const Christoffel c = christoffel_from(gk, dg);
    for (int i = 0; i < 27; ++i) gamma_(k, i) = c.c[i];
  }
  gamma_deriv_ = NodeArray::Zero(nodes, 81);
  for (int a = 0; a < n; ++a) gamma_deriv_.middleCols(a * 27, 27) = fd_derivative(grid_, gamma_, a);
}

Eigen::RowVectorXd TabulatedChart::interpolate(const NodeArray& data, const Vec& x) const {
  const int d = grid_.dim();
  std::array<std::array<double, 4>, 2> weights{};
  std::array<int, 2> first{0, 0};
  for (int a = 0; a < d; ++a) {
    const int count = grid_.count(a);
    double t = (x(a) - grid_.origin(a)) / grid_.spacing(a);
    const double rounded = std::round(t);
    if (std::abs(t - rounded) < 1e-9) t = rounded;
    int base = static_cast<int>(std::floor(t)) - 1;
    base = std::clamp(base, 0, count - 4);
    first[a] = base;
    for (int m = 0; m < 4; ++m) {
      double w = 1.0;
      for (int q = 0; q < 4; ++q) {
        if (q != m) w *= (t - (base + q)) / static_cast<double>(m - q);
      }
      weights[a][m] = w;
    }
  }
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(data.cols());
  if (d == 1) {
    for (int m = 0; m < 4; ++m) out += weights[0][m] * data.row(first[0] + m);
    return out;
  }
  for (int m = 0; m < 4; ++m) {
    for (int q = 0; q < 4; ++q) {
      out += (weights[0][m] * weights[1][q]) * data.row(grid_.flat(first[0] + m, first[1] + q));
    }
  }
  return out;
}

Mat TabulatedChart::eval(const Vec& x) const {
  const int n = dim();
  const Eigen::RowVectorXd row = interpolate(metric_, x);
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = row(i * n + j);
  return g;
}

MetricDerivative TabulatedChart::eval_deriv(const Vec& x) const {
  const int n = dim();
  const Eigen::RowVectorXd row = interpolate(deriv_, x);
  MetricDerivative out;
  for (int a = 0; a < n; ++a) {
    out[a] = Mat(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out[a](i, j) = row(a * n * n + i * n + j);
  }
  return out;
}

Christoffel TabulatedChart::christoffel(const Vec& x) const {
  const Eigen::RowVectorXd row = interpolate(gamma_, x);
  Christoffel c;
  c.dim = dim();
  for (int i = 0; i < 27; ++i) c.c[i] = row(i);
  return c;
}

std::array<Christoffel, kMaxDim> TabulatedChart::christoffel_deriv(const Vec& x) const {
  const Eigen::RowVectorXd row = interpolate(gamma_deriv_, x);
  std::array<Christoffel, kMaxDim> out{};
  for (int a = 0; a < kMaxDim; ++a) {
    out[a].dim = dim();
    if (a >= dim()) continue;
    for (int i = 0; i < 27; ++i) out[a].c[i] = row(a * 27 + i);
  }
  return out;
}

Riemann TabulatedChart::riemann(const Vec& x) const {
  return riemann_from(eval(x), christoffel(x), christoffel_deriv(x));
}

}  // namespace imlab
