#include "imlab/immersion.hpp"

#include "imlab/error.hpp"

namespace imlab {

Vec normal_at(const Mat& jac, const SpdRoot& root) {
  const Mat c = root.sqrt() * jac;
  Eigen::JacobiSVD<Mat> svd(c);
  if (!(svd.singularValues()(c.cols() - 1) > kRankTolerance)) {
    throw Error(ErrorCode::RankDeficient, "differential is rank deficient");
  }
  const Vec m = cofactor_normal(c);
  return root.inv_sqrt() * (m / m.norm());
}

NormalField unit_normal(const DiscreteImmersion& f) {
  const JacobianField jac = fd_jacobian(f);
  NormalField n{f.grid, NodeArray(f.values.rows(), f.values.cols())};
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    const Vec x = f.values.row(k).transpose();
    try {
      n.values.row(k) = normal_at(jac.values[k], SpdRoot(f.target->eval(x))).transpose();
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), k);
    }
  }
  return n;
}

std::vector<Mat> pullback_metric(const DiscreteImmersion& f) {
  const JacobianField jac = fd_jacobian(f);
  std::vector<Mat> out;
  out.reserve(f.grid.size());
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    const Mat h = f.target->eval(f.values.row(k).transpose());
    const Mat& j = jac.values[k];
    Mat g = j.transpose() * h * j;
    out.push_back(0.5 * (g + g.transpose()));
  }
  return out;
}

JacobianField covariant_normal_derivative(const DiscreteImmersion& f, const NormalField& n) {
  if (!(n.grid == f.grid) || n.values.rows() != f.values.rows() || n.values.cols() != f.values.cols()) {
    throw Error(ErrorCode::GridMismatch, "normal field does not match immersion");
  }
  const JacobianField jf = fd_jacobian(f);
  JacobianField out = fd_jacobian(f.grid, n.values);
  if (f.target->is_euclidean()) return out;
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    const Christoffel gamma = f.target->christoffel(f.values.row(k).transpose());
    const Vec nk = n.values.row(k).transpose();
    for (int i = 0; i < f.grid.dim(); ++i) {
      out.values[k].col(i) += gamma.contract(jf.values[k].col(i), nk);
    }
  }
  return out;
}

ShapeField shape_operator(const DiscreteImmersion& f, const NormalField& n) {
  const JacobianField jf = fd_jacobian(f);
  const JacobianField dn = covariant_normal_derivative(f, n);
  ShapeField s{f.grid, {}};
  s.values.reserve(f.grid.size());
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    const Mat h = f.target->eval(f.values.row(k).transpose());
    const Mat& j = jf.values[k];
    const Mat gram = j.transpose() * h * j;
    Eigen::LDLT<Mat> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
      throw Error(ErrorCode::RankDeficient, "pullback metric is singular", k);
    }
    s.values.push_back(-ldlt.solve(j.transpose() * h * dn.values[k]));
  }
  return s;
}

ShapeField shape_operator(const DiscreteImmersion& f) {
  return shape_operator(f, unit_normal(f));
}

}  // namespace imlab
