#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/SparseCore>

#include "imlab/linalg.hpp"
#include "imlab/metric.hpp"

namespace imlab {

/// Node-major storage: one row per grid node, one column per component.
using NodeArray = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Tensor-product grid on a parameter box, dimension 1 or 2. Nodes are
/// numbered row-major: flat(i, j) = i * count(1) + j.
class Grid {
 public:
  Grid(std::vector<int> counts, std::vector<double> origin, std::vector<double> extents);
  static Grid on_box(const Box& box, std::vector<int> counts);

  int dim() const { return static_cast<int>(counts_.size()); }
  int count(int axis) const { return counts_[axis]; }
  double origin(int axis) const { return origin_[axis]; }
  double extent(int axis) const { return extents_[axis]; }
  double spacing(int axis) const { return extents_[axis] / (counts_[axis] - 1); }
  double max_spacing() const;
  std::size_t size() const { return size_; }

  std::array<int, 2> index(std::size_t node) const;
  std::size_t flat(int i, int j = 0) const;
  /// Distance between consecutive nodes along `axis` in flat numbering.
  std::size_t stride(int axis) const;
  Vec point(std::size_t node) const;
  Box box() const;

  /// Trapezoidal tensor-product weights (parameter measure, no metric).
  const std::vector<double>& weights() const { return weights_; }

  bool operator==(const Grid& other) const;

 private:
  std::vector<int> counts_;
  std::vector<double> origin_;
  std::vector<double> extents_;
  std::size_t size_ = 0;
  std::vector<double> weights_;
};

struct ScalarField {
  Grid grid;
  std::vector<double> values;
};

struct JacobianField {
  Grid grid;
  std::vector<Mat> values;  // (components x d) per node
};

struct DiscreteImmersion {
  Grid grid;
  NodeArray values;  // (nodes x (d+1)) target-chart coordinates
  ChartPtr target;

  /// Throws Error(OutOfDomain) if a node leaves the target box, or
  /// Error(GridMismatch) on shape errors.
  void validate() const;
};

struct DirectorField {
  Grid grid;
  NodeArray foot;
  NodeArray vec;
  ChartPtr target;

  void validate() const;
};

struct ShapeField {
  Grid grid;
  std::vector<Mat> values;  // S(j, i) = S^j_i, a (d x d) endomorphism per node
};

/// Sample a callable at every node.
NodeArray sample(const Grid& grid, int components, const std::function<Vec(const Vec&)>& fn);
ShapeField sample_shape(const Grid& grid, const std::function<Mat(const Vec&)>& fn);

/// Second-order derivative along one axis: central differences inside, a
/// four-point one-sided stencil at the two ends whose leading error term
/// matches the central one (so composed derivatives stay second order).
NodeArray fd_derivative(const Grid& grid, const NodeArray& values, int axis);
/// Transpose of fd_derivative, used for reverse accumulation.
NodeArray fd_derivative_adjoint(const Grid& grid, const NodeArray& bar, int axis);
/// The same stencil as a sparse node-by-node matrix.
Eigen::SparseMatrix<double> fd_matrix(const Grid& grid, int axis);

JacobianField fd_jacobian(const Grid& grid, const NodeArray& values);
JacobianField fd_jacobian(const DiscreteImmersion& f);
/// Reverse accumulation through fd_jacobian.
NodeArray fd_jacobian_adjoint(const Grid& grid, const std::vector<Mat>& bar, int components);

/// Per-node data of the parameter metric used by every integral.
struct ParamFrame {
  std::vector<Mat> g;
  std::vector<Mat> g_inv;
  std::vector<Mat> g_inv_sqrt;
  std::vector<Mat> g_sqrt;
  std::vector<double> measure;  // quadrature weight * sqrt(det g)
};
ParamFrame param_frame(const Grid& grid, const MetricChart& g);

/// |A|_{g,h} = sqrt(g^{ij} h_ab A^a_i A^b_j).
double mixed_norm(const Mat& a, const Mat& h, const Mat& g_inv);

/// Quadrature of 1 against dVol_g.
double volume(const Grid& grid, const MetricChart& g);

/// (sum_nodes w |field|^p sqrt(det g))^(1/p). Throws Error(BadExponent) for p < 1.
double lp_norm(const ScalarField& field, double p, const MetricChart& g);

/// W^{1,p} distance between two node arrays with Euclidean components; the
/// derivative part uses the g-weighted Frobenius norm.
double w1p_distance(const Grid& grid, const NodeArray& a, const NodeArray& b, double p,
                    const MetricChart& g);
/// Same, for immersions; requires matching grids and Euclidean targets.
double w1p_distance(const DiscreteImmersion& f, const DiscreteImmersion& f0, double p,
                    const MetricChart& g);

/// max over nodes of the g-operator norm of S, i.e. |g^{1/2} S g^{-1/2}|_2.
double shape_sup_norm(const ShapeField& s, const MetricChart& g);
/// max over nodes of the entrywise asymmetry of g S.
double shape_asymmetry(const ShapeField& s, const MetricChart& g);

/// Metric tabulated on grid nodes. Values, derivatives, connection and
/// curvature are precomputed at the nodes with the grid stencils and
/// interpolated between nodes with tensor-product cubic Lagrange weights.
class TabulatedChart : public MetricChart {
 public:
  TabulatedChart(std::string name, Grid grid, const std::vector<Mat>& values);

  Mat eval(const Vec& x) const override;
  MetricDerivative eval_deriv(const Vec& x) const override;
  Christoffel christoffel(const Vec& x) const override;
  std::array<Christoffel, kMaxDim> christoffel_deriv(const Vec& x) const override;
  Riemann riemann(const Vec& x) const override;

  const Grid& grid() const { return grid_; }

 private:
  Eigen::RowVectorXd interpolate(const NodeArray& data, const Vec& x) const;

  Grid grid_;
  NodeArray metric_;      // n^2 columns
  NodeArray deriv_;       // n^3 columns, [k][i][j]
  NodeArray gamma_;       // 27 columns
  NodeArray gamma_deriv_; // 81 columns, [k][a][b][c]
};

}  // namespace imlab
