#include "imlab/energy.hpp"

#include <cmath>

#include "imlab/error.hpp"

namespace imlab {

namespace {

void require_exponent(double p) {
  if (!(p >= 1.0)) throw Error(ErrorCode::BadExponent, "energy exponent must be >= 1");
}

void require_shape(const Grid& grid, const ShapeField& s) {
  if (!(s.grid == grid) || s.values.size() != grid.size()) {
    throw Error(ErrorCode::GridMismatch, "shape field does not match grid");
  }
  for (const Mat& m : s.values) {
    if (m.rows() != grid.dim() || m.cols() != grid.dim()) {
      throw Error(ErrorCode::GridMismatch, "shape field blocks must be d x d");
    }
  }
}

EnergyTerm integrate(std::vector<double> density, const ParamFrame& pf) {
  EnergyTerm t;
  for (std::size_t k = 0; k < density.size(); ++k) t.value += pf.measure[k] * density[k];
  t.density = std::move(density);
  return t;
}

}  // namespace

Mat stretch_frame(const Mat& jac, const Mat& h_sqrt, const Mat& g_inv_sqrt) {
  return h_sqrt * jac * g_inv_sqrt;
}

Mat relaxed_frame(const Mat& jac, const Vec& v, const Mat& h_sqrt, const Mat& g_inv_sqrt) {
  const auto m = jac.rows();
  const auto d = jac.cols();
  Mat b(m, d + 1);
  b.leftCols(d) = jac * g_inv_sqrt;
  b.col(d) = v;
  return h_sqrt * b;
}

EnergyTerm stretching_energy(const DiscreteImmersion& f, const MetricChart& g, double p) {
  require_exponent(p);
  f.validate();
  const ParamFrame pf = param_frame(f.grid, g);
  const JacobianField jac = fd_jacobian(f);
  std::vector<double> density(f.grid.size());
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    const SpdRoot h(f.target->eval(f.values.row(k).transpose()));
    density[k] = std::pow(dist_stiefel(stretch_frame(jac.values[k], h.sqrt(), pf.g_inv_sqrt[k])), p);
  }
  return integrate(std::move(density), pf);
}

EnergyTerm bending_energy(const DiscreteImmersion& f, const MetricChart& g, const ShapeField& s,
                          double p) {
  require_exponent(p);
  f.validate();
  require_shape(f.grid, s);
  const ParamFrame pf = param_frame(f.grid, g);
  const NormalField n = unit_normal(f);
  const JacobianField jac = fd_jacobian(f);
  const JacobianField dn = covariant_normal_derivative(f, n);
  std::vector<double> density(f.grid.size());
  for (std::size_t k = 0; k < f.grid.size(); ++k) {
    const Mat h = f.target->eval(f.values.row(k).transpose());
    const Mat a = dn.values[k] + jac.values[k] * s.values[k];
    density[k] = std::pow(mixed_norm(a, h, pf.g_inv[k]), p);
  }
  return integrate(std::move(density), pf);
}

EnergyReport total_energy(const DiscreteImmersion& f, const MetricChart& g, const ShapeField& s,
                          double p) {
  EnergyTerm st = stretching_energy(f, g, p);
  EnergyTerm bt = bending_energy(f, g, s, p);
  EnergyReport r;
  r.p = p;
  r.stretch = st.value;
  r.bend = bt.value;
  r.total = r.stretch + r.bend;
  r.stretch_density = std::move(st.density);
  r.bend_density = std::move(bt.density);
  return r;
}

JacobianField connector_apply(const DirectorField& xi) {
  xi.validate();
  const JacobianField jx = fd_jacobian(xi.grid, xi.foot);
  JacobianField out = fd_jacobian(xi.grid, xi.vec);
  if (xi.target->is_euclidean()) return out;
  for (std::size_t k = 0; k < xi.grid.size(); ++k) {
    const Christoffel gamma = xi.target->christoffel(xi.foot.row(k).transpose());
    const Vec v = xi.vec.row(k).transpose();
    for (int i = 0; i < xi.grid.dim(); ++i) out.values[k].col(i) += gamma.contract(jx.values[k].col(i), v);
  }
  return out;
}

EnergyTerm relaxed_stretching(const DirectorField& xi, const MetricChart& g, double p) {
  require_exponent(p);
  xi.validate();
  const ParamFrame pf = param_frame(xi.grid, g);
  const JacobianField jx = fd_jacobian(xi.grid, xi.foot);
  std::vector<double> density(xi.grid.size());
  for (std::size_t k = 0; k < xi.grid.size(); ++k) {
    const SpdRoot h(xi.target->eval(xi.foot.row(k).transpose()));
    const Mat b = relaxed_frame(jx.values[k], xi.vec.row(k).transpose(), h.sqrt(), pf.g_inv_sqrt[k]);
    density[k] = std::pow(dist_rotations(b), p);
  }
  return integrate(std::move(density), pf);
}

EnergyTerm relaxed_bending(const DirectorField& xi, const MetricChart& g, const ShapeField& s,
                           double p) {
  require_exponent(p);
  require_shape(xi.grid, s);
  const ParamFrame pf = param_frame(xi.grid, g);
  const JacobianField jx = fd_jacobian(xi.grid, xi.foot);
  const JacobianField kv = connector_apply(xi);
  std::vector<double> density(xi.grid.size());
  for (std::size_t k = 0; k < xi.grid.size(); ++k) {
    const Mat h = xi.target->eval(xi.foot.row(k).transpose());
    const Mat a = jx.values[k] * s.values[k] + kv.values[k];
    density[k] = std::pow(mixed_norm(a, h, pf.g_inv[k]), p);
  }
  return integrate(std::move(density), pf);
}

EnergyReport relaxed_energy(const DirectorField& xi, const MetricChart& g, const ShapeField& s,
                            double p) {
  EnergyTerm st = relaxed_stretching(xi, g, p);
  EnergyTerm bt = relaxed_bending(xi, g, s, p);
  EnergyReport r;
  r.p = p;
  r.stretch = st.value;
  r.bend = bt.value;
  r.total = r.stretch + r.bend;
  r.stretch_density = std::move(st.density);
  r.bend_density = std::move(bt.density);
  return r;
}

std::vector<double> sasaki_norm_sq(const DirectorField& xi, const MetricChart& g) {
  const ParamFrame pf = param_frame(xi.grid, g);
  const JacobianField jx = fd_jacobian(xi.grid, xi.foot);
  const JacobianField kv = connector_apply(xi);
  std::vector<double> out(xi.grid.size());
  for (std::size_t k = 0; k < xi.grid.size(); ++k) {
    const Mat h = xi.target->eval(xi.foot.row(k).transpose());
    const double a = mixed_norm(jx.values[k], h, pf.g_inv[k]);
    const double b = mixed_norm(kv.values[k], h, pf.g_inv[k]);
    out[k] = a * a + b * b;
  }
  return out;
}

std::vector<std::optional<double>> auxcalc_margin(const DirectorField& xi, const MetricChart& g,
                                                  const ShapeField& s) {
  require_shape(xi.grid, s);
  const double big_m = shape_sup_norm(s, g);
  const double factor = 3.0 + 2.0 * big_m;
  const double threshold = factor * std::sqrt(static_cast<double>(xi.grid.dim() + 1));
  const ParamFrame pf = param_frame(xi.grid, g);
  const JacobianField jx = fd_jacobian(xi.grid, xi.foot);
  const JacobianField kv = connector_apply(xi);
  std::vector<std::optional<double>> out(xi.grid.size());
  for (std::size_t k = 0; k < xi.grid.size(); ++k) {
    const Mat hm = xi.target->eval(xi.foot.row(k).transpose());
    const SpdRoot h(hm);
    const double dx = mixed_norm(jx.values[k], hm, pf.g_inv[k]);
    const double dk = mixed_norm(kv.values[k], hm, pf.g_inv[k]);
    const double lhs = std::sqrt(dx * dx + dk * dk);
    if (lhs < threshold) continue;
    const Mat b = relaxed_frame(jx.values[k], xi.vec.row(k).transpose(), h.sqrt(), pf.g_inv_sqrt[k]);
    const double bend = mixed_norm(jx.values[k] * s.values[k] + kv.values[k], hm, pf.g_inv[k]);
    out[k] = factor * (dist_rotations(b) + bend) - lhs;
  }
  return out;
}

DirectorField normal_director(const DiscreteImmersion& f) {
  const NormalField n = unit_normal(f);
  return DirectorField{f.grid, f.values, n.values, f.target};
}

}  // namespace imlab
