#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "imlab/energy.hpp"

namespace imlab {

struct OptimizeConfig {
  int max_iters = 500;
  double grad_tol = 1e-10;
  double step_tol = 1e-14;
  int memory = 10;
  std::uint64_t seed = 0;

  /// Throws Error(BadConfig) unless max_iters >= 1, memory >= 1 and both
  /// tolerances are positive.
  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double energy = 0.0;
  double stretch = 0.0;
  double bend = 0.0;
  double grad_norm = 0.0;  // max-norm
  double step = 0.0;       // max-norm of the accepted displacement
};

struct OptimizeTrace {
  std::vector<IterationRecord> records;
  std::string reason;  // grad_tol | step_tol | max_iters | line_search_failed
};

/// Gradient of the total energy with respect to every node value, obtained
/// by reverse accumulation through the stencils. Fills `report` with the
/// energy evaluated along the way when it is non-null.
/// Throws Error(UnsupportedExponent) for p < 2 and Error(RankDeficient) when
/// the smallest singular value of the frame-reduced differential is < 1e-8.
NodeArray energy_gradient(const DiscreteImmersion& f, const MetricChart& g, const ShapeField& s,
                          double p, EnergyReport* report = nullptr);

struct DirectorGradient {
  NodeArray foot;
  NodeArray vec;
};

/// Gradient of the relaxed energy with respect to foot and vector values.
DirectorGradient energy_gradient(const DirectorField& xi, const MetricChart& g, const ShapeField& s,
                                 double p, EnergyReport* report = nullptr);

/// Objective over a flat parameter vector: returns the value and writes the
/// gradient. May throw imlab::Error for inadmissible points.
struct ObjectiveValue {
  double energy = 0.0;
  double stretch = 0.0;
  double bend = 0.0;
  Eigen::VectorXd grad;
};
using Objective = std::function<ObjectiveValue(const Eigen::VectorXd&)>;

struct LbfgsResult {
  Eigen::VectorXd x;
  ObjectiveValue value;
  OptimizeTrace trace;
};

/// Applies a fixed SPD approximation of the inverse Hessian.
using Preconditioner = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Limited-memory BFGS with backtracking Armijo search (c = 1e-4, factor
/// 0.5, at most 60 halvings). Trial points that throw count as +inf. The
/// optional preconditioner replaces the identity as the seed of the inverse
/// Hessian approximation.
LbfgsResult lbfgs(const Objective& objective, Eigen::VectorXd x0, const OptimizeConfig& cfg,
                  const Preconditioner& precond = {});

/// Inverse of K + B + delta M applied to every component of a row-major node
/// array with `components` columns, repeated over `blocks` consecutive
/// arrays. K is the g-weighted stiffness of the FD gradient, B the same for
/// FD second derivatives, M the quadrature mass.
Preconditioner smoothness_preconditioner(const Grid& grid, const MetricChart& g, int components, int blocks = 1);

template <class State>
struct MinimizeResult {
  State state;
  OptimizeTrace trace;
  EnergyReport energy;
};

MinimizeResult<DiscreteImmersion> minimize(const DiscreteImmersion& f0, const MetricChart& g,
                                           const ShapeField& s, double p, const OptimizeConfig& cfg);
MinimizeResult<DirectorField> minimize(const DirectorField& xi0, const MetricChart& g,
                                       const ShapeField& s, double p, const OptimizeConfig& cfg);

}  // namespace imlab
