#pragma once

#include <Eigen/Dense>

namespace imlab {

// Small dense blocks. Everything in this library lives in dimension <= 3
// (surfaces in three-dimensional targets), so the storage is inline.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

inline constexpr int kMaxDim = 3;

/// Relative eigenvalue floor used to decide positive definiteness.
inline constexpr double kSpdTolerance = 1e-12;

/// Eigen-decomposition of an SPD matrix, kept around so that G^{1/2},
/// G^{-1/2} and the derivative of G^{1/2} share one factorization.
class SpdRoot {
 public:
  /// Throws Error(NotSPD) when the smallest eigenvalue is below
  /// kSpdTolerance times the largest.
  explicit SpdRoot(const Mat& g);

  const Mat& sqrt() const { return sqrt_; }
  const Mat& inv_sqrt() const { return inv_sqrt_; }
  Mat inverse() const;
  double sqrt_det() const { return sqrt_det_; }

  /// Directional derivative of G^{1/2} along a symmetric perturbation dG,
  /// i.e. the solution X of G^{1/2} X + X G^{1/2} = dG.
  Mat sqrt_derivative(const Mat& dg) const;

 private:
  Mat vectors_;
  Vec root_values_;
  Mat sqrt_;
  Mat inv_sqrt_;
  double sqrt_det_ = 1.0;
};

/// Symmetric positive-definite square root.
Mat metric_sqrt(const Mat& g);

/// Frobenius distance from a square matrix to SO(n).
double dist_rotations(const Mat& a);

/// Closest proper rotation in Frobenius norm (U diag(1,..,1,det(UV^T)) V^T).
Mat nearest_rotation(const Mat& a);

/// Frobenius distance from an m x k matrix (m > k) to the set of matrices
/// with orthonormal columns.
double dist_stiefel(const Mat& q);

/// Polar factor U V^T of the thin SVD. Throws Error(RankDeficient) when the
/// smallest singular value does not exceed `tol` times max(1, largest).
Mat project_stiefel(const Mat& q, double tol = 1e-12);

/// Oriented unit normal to the columns of `c` (m x (m-1), m in {2, 3}),
/// chosen so that det[c | n] > 0. Returns the unnormalized cofactor vector.
Vec cofactor_normal(const Mat& c);

}  // namespace imlab
