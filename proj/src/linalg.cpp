#include "imlab/linalg.hpp"

#include <cmath>

#include "imlab/error.hpp"

namespace imlab {

SpdRoot::SpdRoot(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(g);
  const Vec& lambda = eig.eigenvalues();
  const double largest = lambda.maxCoeff();
  const double smallest = lambda.minCoeff();
  if (!(largest > 0.0) || !(smallest > kSpdTolerance * largest)) {
    throw Error(ErrorCode::NotSPD, "matrix is not positive definite (eigenvalue " +
                                       std::to_string(smallest) + ")");
  }
  vectors_ = eig.eigenvectors();
  root_values_ = lambda.array().sqrt();
  sqrt_ = vectors_ * root_values_.asDiagonal() * vectors_.transpose();
  inv_sqrt_ = vectors_ * root_values_.cwiseInverse().asDiagonal() * vectors_.transpose();
  sqrt_det_ = root_values_.prod();
}

Mat SpdRoot::inverse() const {
  return inv_sqrt_ * inv_sqrt_;
}

Mat SpdRoot::sqrt_derivative(const Mat& dg) const {
  Mat rotated = vectors_.transpose() * dg * vectors_;
  const auto n = rotated.rows();
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      rotated(a, b) /= root_values_(a) + root_values_(b);
    }
  }
  return vectors_ * rotated * vectors_.transpose();
}

Mat metric_sqrt(const Mat& g) {
  return SpdRoot(g).sqrt();
}

double dist_rotations(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  Vec sigma = svd.singularValues();
  if (a.determinant() < 0.0) sigma(sigma.size() - 1) = -sigma(sigma.size() - 1);
  return (sigma.array() - 1.0).matrix().norm();
}

Mat nearest_rotation(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat& u = svd.matrixU();
  const Mat& v = svd.matrixV();
  Vec diag = Vec::Ones(a.cols());
  if ((u * v.transpose()).determinant() < 0.0) diag(diag.size() - 1) = -1.0;
  return u * diag.asDiagonal() * v.transpose();
}

double dist_stiefel(const Mat& q) {
  Eigen::JacobiSVD<Mat> svd(q);
  return (svd.singularValues().array() - 1.0).matrix().norm();
}

Mat project_stiefel(const Mat& q, double tol) {
  Eigen::JacobiSVD<Mat> svd(q, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sigma = svd.singularValues();
  const double smallest = sigma(sigma.size() - 1);
  if (!(smallest > tol * std::max(1.0, sigma(0)))) {
    throw Error(ErrorCode::RankDeficient, "projection onto orthonormal columns is not unique");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

Vec cofactor_normal(const Mat& c) {
  Vec n(c.rows());
  if (c.rows() == 3 && c.cols() == 2) {
    n(0) = c(1, 0) * c(2, 1) - c(2, 0) * c(1, 1);
    n(1) = c(2, 0) * c(0, 1) - c(0, 0) * c(2, 1);
    n(2) = c(0, 0) * c(1, 1) - c(1, 0) * c(0, 1);
  } else if (c.rows() == 2 && c.cols() == 1) {
    n(0) = -c(1, 0);
    n(1) = c(0, 0);
  } else {
    throw Error(ErrorCode::BadGrid, "cofactor normal needs a (d+1) x d matrix with d in {1, 2}");
  }
  return n;
}

}  // namespace imlab
