#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "imlab/linalg.hpp"

namespace imlab {

/// Axis-aligned coordinate box.
struct Box {
  Vec lower;
  Vec upper;

  int dim() const { return static_cast<int>(lower.size()); }
  Vec extent() const { return upper - lower; }
  bool contains(const Vec& x, double slack = 0.0) const;
};

/// Christoffel symbols of the second kind, Gamma^a_{bc}, symmetric in (b, c).
struct Christoffel {
  int dim = 0;
  std::array<double, 27> c{};

  double operator()(int a, int b, int g) const { return c[(a * 3 + b) * 3 + g]; }
  double& operator()(int a, int b, int g) { return c[(a * 3 + b) * 3 + g]; }

  /// Gamma^a_{bc} v^b w^c.
  Vec contract(const Vec& v, const Vec& w) const;
};

/// Fully lowered curvature tensor R_{ijkl}.
struct Riemann {
  int dim = 0;
  std::array<double, 81> r{};

  double operator()(int i, int j, int k, int l) const { return r[((i * 3 + j) * 3 + k) * 3 + l]; }
  double& operator()(int i, int j, int k, int l) { return r[((i * 3 + j) * 3 + k) * 3 + l]; }
};

using MetricDerivative = std::array<Mat, kMaxDim>;

/// A Riemannian metric given in a single coordinate chart on a box.
///
/// Subclasses must provide eval(). Derivatives default to central finite
/// differences with per-axis step extent * 1e-5; the connection and curvature
/// default to the Levi-Civita formulas built on top of eval/eval_deriv.
class MetricChart {
 public:
  MetricChart(std::string name, Box domain);
  virtual ~MetricChart() = default;

  const std::string& name() const { return name_; }
  int dim() const { return domain_.dim(); }
  const Box& domain() const { return domain_; }

  virtual Mat eval(const Vec& x) const = 0;
  virtual MetricDerivative eval_deriv(const Vec& x) const;
  virtual Christoffel christoffel(const Vec& x) const;
  /// Partial derivatives d_k Gamma^a_{bc}, indexed by k.
  virtual std::array<Christoffel, kMaxDim> christoffel_deriv(const Vec& x) const;
  virtual Riemann riemann(const Vec& x) const;
  virtual bool is_euclidean() const { return false; }

  /// Finite-difference step per axis.
  Vec fd_steps() const;

 private:
  std::string name_;
  Box domain_;
};

using ChartPtr = std::shared_ptr<const MetricChart>;

/// Chart defined by closed-form callables. The derivative callable may be
/// empty, in which case finite differences are used.
class AnalyticChart : public MetricChart {
 public:
  using EvalFn = std::function<Mat(const Vec&)>;
  using DerivFn = std::function<MetricDerivative(const Vec&)>;

  AnalyticChart(std::string name, Box domain, EvalFn eval, DerivFn deriv = {});

  Mat eval(const Vec& x) const override { return eval_(x); }
  MetricDerivative eval_deriv(const Vec& x) const override;

 private:
  EvalFn eval_;
  DerivFn deriv_;
};

class EuclideanChart : public MetricChart {
 public:
  explicit EuclideanChart(int dim);

  Mat eval(const Vec& x) const override;
  MetricDerivative eval_deriv(const Vec& x) const override;
  Christoffel christoffel(const Vec& x) const override;
  std::array<Christoffel, kMaxDim> christoffel_deriv(const Vec& x) const override;
  Riemann riemann(const Vec& x) const override;
  bool is_euclidean() const override { return true; }
};

/// Built-in catalogue: "euclidean", "sphere" (diag(1, sin^2 x0, sin^2 x0 sin^2 x1)),
/// "hyperbolic" (sinh in place of the leading sin), "polar" (diag(1, x0^2[, 1])).
/// Throws Error(BadConfig) on unknown names or unsupported dimensions.
ChartPtr make_chart(std::string_view name, int dim);
std::vector<std::string> chart_names();

/// Levi-Civita connection of `m` at x. Throws Error(SingularMetric).
Christoffel christoffel(const MetricChart& m, const Vec& x);

/// Lowered curvature tensor, projected onto the algebraic curvature
/// symmetries so that antisymmetry and pair symmetry hold exactly.
Riemann riemann_curvature(const MetricChart& m, const Vec& x);

/// Levi-Civita formula from metric values and first derivatives.
Christoffel christoffel_from(const Mat& g, const MetricDerivative& dg);

/// Assemble R_{abcd} from the connection, its derivatives and the metric.
Riemann riemann_from(const Mat& g, const Christoffel& gamma,
                     const std::array<Christoffel, kMaxDim>& dgamma);

}  // namespace imlab
