#pragma once

#include <optional>
#include <vector>

#include "imlab/fields.hpp"

namespace imlab {

struct CompatibilityReport {
  std::vector<double> gauss_residual;
  std::vector<double> codazzi_residual;
  std::vector<double> tolerance;  // per-node acceptance threshold
  double gauss_max = 0.0;
  double codazzi_max = 0.0;
  bool passed = true;
};

/// Node-wise residuals of the Gauss equation R_{1212} = det II and the
/// Codazzi equations d_1 II_{2k} - d_2 II_{1k} (covariant, Levi-Civita of g),
/// with II = g S. A node passes when both residuals are at most
/// 10 h^2 (1 + |II|^2 + |R_1212| + |dII|). Curves (d = 1) are always
/// compatible. Throws Error(AsymmetricShape) if g S is not symmetric to
/// within the same kind of tolerance.
CompatibilityReport gauss_codazzi_residual(const MetricChart& g, const ShapeField& s, const Grid& grid);

/// Tolerance used for the symmetry test on g S.
double asymmetry_tolerance(const Grid& grid, const MetricChart& g, const ShapeField& s);

/// Starting data for the frame sweep: node, position, tangent frame
/// (columns are d_i f, so frame^T frame = g) and unit normal.
struct Anchor {
  std::size_t node = 0;
  Vec position;
  Mat frame;
  Vec normal;
};

/// Transposed Cholesky factor of g at the node, placed in the first d
/// coordinates, with normal e_{d+1}.
Anchor default_anchor(const MetricChart& g, const Grid& grid, std::size_t node = 0);

/// Integrate the moving-frame system
///   d_a f = e_a,  d_a e_j = Gamma^k_{aj} e_k + II_{aj} n,  d_a n = -S^j_a e_j
/// with classical RK4, first along axis 0 through the anchor, then along
/// axis 1 from every node of that line. Throws Error(IncompatibleForms) or
/// Error(NonSPDAnchor).
DiscreteImmersion integrate_frame(const MetricChart& g, const ShapeField& s, const Grid& grid,
                                  const std::optional<Anchor>& anchor = std::nullopt);

struct RigidAlignment {
  Mat rotation;
  Vec translation;
  DiscreteImmersion aligned;  // rotation * f0 + translation
  double residual = 0.0;      // sqrt(sum_k w_k |f_k - aligned_k|^2)
};

/// Weighted orthogonal Procrustes fit of f0 onto f using the trapezoid
/// weights of the grid. Throws Error(GridMismatch) or
/// Error(DegenerateCovariance).
RigidAlignment align_rigid(const DiscreteImmersion& f, const DiscreteImmersion& f0);

}  // namespace imlab
