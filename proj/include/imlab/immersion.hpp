#pragma once

#include <vector>

#include "imlab/fields.hpp"

namespace imlab {

struct NormalField {
  Grid grid;
  NodeArray values;  // (nodes x (d+1))
};

/// Smallest admissible singular value of h^{1/2} df before a node counts as
/// degenerate.
inline constexpr double kRankTolerance = 1e-8;

/// Oriented h-unit normal to the columns of `jac` at a point where the target
/// metric is h = root.sqrt()^2. Throws Error(RankDeficient).
Vec normal_at(const Mat& jac, const SpdRoot& root);

/// Per-node normal with det[h^{1/2} df | h^{1/2} n] > 0.
/// Throws Error(RankDeficient) carrying the node index.
NormalField unit_normal(const DiscreteImmersion& f);

/// f*h at every node.
std::vector<Mat> pullback_metric(const DiscreteImmersion& f);

/// d_i n^a + Gamma^a_{bc}(f) d_i f^b n^c at every node.
JacobianField covariant_normal_derivative(const DiscreteImmersion& f, const NormalField& n);

/// Least-squares S with grad n = -df S, i.e. S = -(df^T h df)^{-1} df^T h grad n.
ShapeField shape_operator(const DiscreteImmersion& f);
ShapeField shape_operator(const DiscreteImmersion& f, const NormalField& n);

}  // namespace imlab
