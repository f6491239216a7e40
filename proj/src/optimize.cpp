#include "imlab/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <memory>

#include <Eigen/SparseCholesky>

#include "imlab/error.hpp"

namespace imlab {

void OptimizeConfig::validate() const {
  if (max_iters < 1) throw Error(ErrorCode::BadConfig, "optimizer max_iters must be >= 1");
  if (memory < 1) throw Error(ErrorCode::BadConfig, "optimizer memory must be >= 1");
  if (!(grad_tol > 0.0) || !(step_tol > 0.0)) {
    throw Error(ErrorCode::BadConfig, "optimizer tolerances must be positive");
  }
}

namespace {

void require_gradient_inputs(const Grid& grid, const ShapeField& s, const MetricChart& g, double p) {
  if (!(p >= 2.0)) throw Error(ErrorCode::UnsupportedExponent, "gradients need p >= 2");
  if (!(s.grid == grid) || s.values.size() != grid.size() || g.dim() != grid.dim()) {
    throw Error(ErrorCode::GridMismatch, "shape field, metric and grid disagree");
  }
}

// p |x|^{p-2}, with the removable value at x = 0.
double power_factor(double x, double p) {
  if (p == 2.0) return 2.0;
  return x > 0.0 ? p * std::pow(x, p - 2.0) : 0.0;
}

double frob(const Mat& a, const Mat& b) {
  return a.cwiseProduct(b).sum();
}

// Accumulate the pieces of a bending density |A|^p_{g,h} that touch the
// connection term Gamma(x)[J, v]:
//   J_bar, v_bar, and x_bar through d Gamma.
void connection_adjoint(const Christoffel& gamma, const std::array<Christoffel, kMaxDim>& dgamma,
                        const Mat& a_bar, const Mat& jac, const Vec& v, Mat& jac_bar, Vec& v_bar,
                        Vec& x_bar) {
  const int m = static_cast<int>(jac.rows());
  const int d = static_cast<int>(jac.cols());
  for (int al = 0; al < m; ++al) {
    for (int i = 0; i < d; ++i) {
      const double ab = a_bar(al, i);
      if (ab == 0.0) continue;
      for (int be = 0; be < m; ++be) {
        for (int ga = 0; ga < m; ++ga) {
          const double gv = gamma(al, be, ga);
          jac_bar(be, i) += ab * gv * v(ga);
          v_bar(ga) += ab * gv * jac(be, i);
          for (int k = 0; k < m; ++k) x_bar(k) += ab * dgamma[k](al, be, ga) * jac(be, i) * v(ga);
        }
      }
    }
  }
}

// Adjoint of the cofactor cross product c = cofactor_normal(C).
Mat cofactor_adjoint(const Mat& c_mat, const Vec& c_bar) {
  Mat out(c_mat.rows(), c_mat.cols());
  if (c_mat.cols() == 2) {
    const Eigen::Vector3d c0 = c_mat.col(0), c1 = c_mat.col(1), cb = c_bar;
    out.col(0) = c1.cross(cb);
    out.col(1) = cb.cross(c0);
  } else {
    out(0, 0) = c_bar(1);
    out(1, 0) = -c_bar(0);
  }
  return out;
}

struct NodeMetric {
  Mat h;
  SpdRoot root;
  MetricDerivative dh;
};

NodeMetric node_metric(const MetricChart& target, const Vec& x) {
  const Mat h = target.eval(x);
  return NodeMetric{h, SpdRoot(h), target.eval_deriv(x)};
}

// x_bar contribution from adjoints of h^{1/2} and h.
void metric_adjoint(const NodeMetric& nm, const Mat& r_bar, const Mat& h_bar, Vec& x_bar) {
  for (int a = 0; a < static_cast<int>(x_bar.size()); ++a) {
    x_bar(a) += frob(r_bar, nm.root.sqrt_derivative(nm.dh[a])) + frob(h_bar, nm.dh[a]);
  }
}

}  // namespace

NodeArray energy_gradient(const DiscreteImmersion& f, const MetricChart& g, const ShapeField& s,
                          double p, EnergyReport* report) {
  require_gradient_inputs(f.grid, s, g, p);
  f.validate();
  const Grid& grid = f.grid;
  const int d = grid.dim();
  const int m = d + 1;
  const std::size_t nodes = grid.size();
  const bool curved = !f.target->is_euclidean();
  const ParamFrame pf = param_frame(grid, g);
  const JacobianField jac = fd_jacobian(f);

  std::vector<NodeMetric> metric;
  metric.reserve(nodes);
  std::vector<Vec> unit(nodes);  // h^{1/2} n
  std::vector<Mat> cmat(nodes);
  std::vector<double> cnorm(nodes);
  NodeArray normal(nodes, m);
  std::vector<Mat> jac_bar(nodes, Mat::Zero(m, d));
  std::vector<Mat> r_bar(nodes, Mat::Zero(m, m));
  std::vector<Mat> h_bar(nodes, Mat::Zero(m, m));
  NodeArray x_bar = NodeArray::Zero(nodes, m);
  EnergyReport rep;
  rep.p = p;
  rep.stretch_density.assign(nodes, 0.0);
  rep.bend_density.assign(nodes, 0.0);

  for (std::size_t k = 0; k < nodes; ++k) {
    metric.push_back(node_metric(*f.target, f.values.row(k).transpose()));
    const NodeMetric& nm = metric.back();
    const Mat& j = jac.values[k];
    const Mat& rt = nm.root.sqrt();

    const Mat q = rt * j * pf.g_inv_sqrt[k];
    Eigen::JacobiSVD<Mat> svd(q, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!(svd.singularValues()(d - 1) >= kRankTolerance)) {
      throw Error(ErrorCode::RankDeficient, "frame-reduced differential is rank deficient", k);
    }
    const double dist = (svd.singularValues().array() - 1.0).matrix().norm();
    rep.stretch_density[k] = std::pow(dist, p);
    rep.stretch += pf.measure[k] * rep.stretch_density[k];
    const Mat q_bar = pf.measure[k] * power_factor(dist, p) * (q - svd.matrixU() * svd.matrixV().transpose());
    jac_bar[k] += rt * q_bar * pf.g_inv_sqrt[k];
    r_bar[k] += q_bar * pf.g_inv_sqrt[k] * j.transpose();

    cmat[k] = rt * j;
    const Vec c = cofactor_normal(cmat[k]);
    cnorm[k] = c.norm();
    unit[k] = c / cnorm[k];
    normal.row(k) = (nm.root.inv_sqrt() * unit[k]).transpose();
  }

  const JacobianField dn = fd_jacobian(grid, normal);
  std::vector<Mat> dn_bar(nodes);
  NodeArray n_bar = NodeArray::Zero(nodes, m);
  for (std::size_t k = 0; k < nodes; ++k) {
    const Vec x = f.values.row(k).transpose();
    const Vec nk = normal.row(k).transpose();
    const Mat& j = jac.values[k];
    Mat a = dn.values[k] + j * s.values[k];
    Christoffel gamma;
    if (curved) {
      gamma = f.target->christoffel(x);
      for (int i = 0; i < d; ++i) a.col(i) += gamma.contract(j.col(i), nk);
    }
    const Mat& h = metric[k].h;
    const double norm = mixed_norm(a, h, pf.g_inv[k]);
    rep.bend_density[k] = std::pow(norm, p);
    rep.bend += pf.measure[k] * rep.bend_density[k];
    const double fac = pf.measure[k] * power_factor(norm, p);
    const Mat a_bar = fac * h * a * pf.g_inv[k];
    h_bar[k] += 0.5 * fac * a * pf.g_inv[k] * a.transpose();
    jac_bar[k] += a_bar * s.values[k].transpose();
    dn_bar[k] = a_bar;
    if (curved) {
      Vec nb = Vec::Zero(m);
      Vec xb = Vec::Zero(m);
      connection_adjoint(gamma, f.target->christoffel_deriv(x), a_bar, j, nk, jac_bar[k], nb, xb);
      n_bar.row(k) += nb.transpose();
      x_bar.row(k) += xb.transpose();
    }
  }
  n_bar += fd_jacobian_adjoint(grid, dn_bar, m);

  for (std::size_t k = 0; k < nodes; ++k) {
    const NodeMetric& nm = metric[k];
    const Vec nk = normal.row(k).transpose();
    const Vec m_bar = nm.root.inv_sqrt() * n_bar.row(k).transpose();
    r_bar[k] -= m_bar * nk.transpose();
    const Vec& u = unit[k];
    const Vec c_bar = (m_bar - u * u.dot(m_bar)) / cnorm[k];
    const Mat cm_bar = cofactor_adjoint(cmat[k], c_bar);
    jac_bar[k] += nm.root.sqrt() * cm_bar;
    r_bar[k] += cm_bar * jac.values[k].transpose();
    if (curved) {
      Vec xb = Vec::Zero(m);
      metric_adjoint(nm, r_bar[k], h_bar[k], xb);
      x_bar.row(k) += xb.transpose();
    }
  }

  if (report) {
    rep.total = rep.stretch + rep.bend;
    *report = std::move(rep);
  }
  return x_bar + fd_jacobian_adjoint(grid, jac_bar, m);
}

DirectorGradient energy_gradient(const DirectorField& xi, const MetricChart& g, const ShapeField& s,
                                 double p, EnergyReport* report) {
  require_gradient_inputs(xi.grid, s, g, p);
  xi.validate();
  const Grid& grid = xi.grid;
  const int d = grid.dim();
  const int m = d + 1;
  const std::size_t nodes = grid.size();
  const bool curved = !xi.target->is_euclidean();
  const ParamFrame pf = param_frame(grid, g);
  const JacobianField jx = fd_jacobian(grid, xi.foot);
  const JacobianField dv = fd_jacobian(grid, xi.vec);

  std::vector<Mat> jx_bar(nodes, Mat::Zero(m, d));
  std::vector<Mat> dv_bar(nodes);
  NodeArray x_bar = NodeArray::Zero(nodes, m);
  NodeArray v_bar = NodeArray::Zero(nodes, m);
  EnergyReport rep;
  rep.p = p;
  rep.stretch_density.assign(nodes, 0.0);
  rep.bend_density.assign(nodes, 0.0);

  for (std::size_t k = 0; k < nodes; ++k) {
    const Vec x = xi.foot.row(k).transpose();
    const Vec v = xi.vec.row(k).transpose();
    const NodeMetric nm = node_metric(*xi.target, x);
    const Mat& j = jx.values[k];
    Mat r_bar = Mat::Zero(m, m);
    Mat h_bar = Mat::Zero(m, m);
    Vec vb = Vec::Zero(m);
    Vec xb = Vec::Zero(m);

    const Mat b = relaxed_frame(j, v, nm.root.sqrt(), pf.g_inv_sqrt[k]);
    const double dist = dist_rotations(b);
    rep.stretch_density[k] = std::pow(dist, p);
    rep.stretch += pf.measure[k] * rep.stretch_density[k];
    const Mat b_bar = pf.measure[k] * power_factor(dist, p) * (b - nearest_rotation(b));
    Mat raw(m, m);
    raw.leftCols(d) = j * pf.g_inv_sqrt[k];
    raw.col(d) = v;
    const Mat raw_bar = nm.root.sqrt() * b_bar;
    r_bar += b_bar * raw.transpose();
    jx_bar[k] += raw_bar.leftCols(d) * pf.g_inv_sqrt[k];
    vb += raw_bar.col(d);

    Mat a = j * s.values[k] + dv.values[k];
    Christoffel gamma;
    if (curved) {
      gamma = xi.target->christoffel(x);
      for (int i = 0; i < d; ++i) a.col(i) += gamma.contract(j.col(i), v);
    }
    const double norm = mixed_norm(a, nm.h, pf.g_inv[k]);
    rep.bend_density[k] = std::pow(norm, p);
    rep.bend += pf.measure[k] * rep.bend_density[k];
    const double fac = pf.measure[k] * power_factor(norm, p);
    const Mat a_bar = fac * nm.h * a * pf.g_inv[k];
    h_bar += 0.5 * fac * a * pf.g_inv[k] * a.transpose();
    jx_bar[k] += a_bar * s.values[k].transpose();
    dv_bar[k] = a_bar;
    if (curved) {
      connection_adjoint(gamma, xi.target->christoffel_deriv(x), a_bar, j, v, jx_bar[k], vb, xb);
      metric_adjoint(nm, r_bar, h_bar, xb);
    }
    x_bar.row(k) = xb.transpose();
    v_bar.row(k) = vb.transpose();
  }

  if (report) {
    rep.total = rep.stretch + rep.bend;
    *report = std::move(rep);
  }
  return DirectorGradient{x_bar + fd_jacobian_adjoint(grid, jx_bar, m),
                          v_bar + fd_jacobian_adjoint(grid, dv_bar, m)};
}

LbfgsResult lbfgs(const Objective& objective, Eigen::VectorXd x0, const OptimizeConfig& cfg,
                  const Preconditioner& precond) {
  cfg.validate();
  constexpr double kArmijo = 1e-4;
  constexpr double kBacktrack = 0.5;
  constexpr int kMaxBacktracks = 60;

  LbfgsResult res{std::move(x0), {}, {}};
  res.value = objective(res.x);
  auto record = [&](int iter, double step) {
    res.trace.records.push_back(IterationRecord{iter, res.value.energy, res.value.stretch, res.value.bend,
                                                res.value.grad.lpNorm<Eigen::Infinity>(), step});
  };
  record(0, 0.0);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  double gamma = 1.0;  // s.y / y.H0 y for the newest pair
  res.trace.reason = "max_iters";
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Eigen::VectorXd& grad = res.value.grad;
    if (grad.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) {
      res.trace.reason = "grad_tol";
      break;
    }
    // Two-loop recursion.
    Eigen::VectorXd dir = -grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (precond) dir = precond(dir);
    if (!s_hist.empty()) dir *= gamma;
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = precond ? Eigen::VectorXd(-precond(grad)) : Eigen::VectorXd(-grad);
      slope = grad.dot(dir);
    }
    double t = s_hist.empty() ? std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>()) : 1.0;

    bool accepted = false;
    ObjectiveValue trial;
    Eigen::VectorXd x_trial;
    for (int bt = 0; bt <= kMaxBacktracks; ++bt) {
      x_trial = res.x + t * dir;
      bool ok = true;
      try {
        trial = objective(x_trial);
      } catch (const Error&) {
        ok = false;
      }
      if (ok && std::isfinite(trial.energy) && trial.energy <= res.value.energy + kArmijo * t * slope) {
        accepted = true;
        break;
      }
      t *= kBacktrack;
    }
    if (!accepted) {
      res.trace.reason = "line_search_failed";
      break;
    }
    Eigen::VectorXd s_vec = x_trial - res.x;
    Eigen::VectorXd y_vec = trial.grad - grad;
    const double sy = s_vec.dot(y_vec);
    const double step = s_vec.lpNorm<Eigen::Infinity>();
    res.x = std::move(x_trial);
    res.value = std::move(trial);
    record(iter, step);
    if (sy > 0.0) {
      gamma = sy / y_vec.dot(precond ? Eigen::VectorXd(precond(y_vec)) : y_vec);
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(y_vec));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (step <= cfg.step_tol) {
      res.trace.reason = "step_tol";
      break;
    }
  }
  return res;
}

Preconditioner smoothness_preconditioner(const Grid& grid, const MetricChart& g, int components, int blocks) {
  using Sparse = Eigen::SparseMatrix<double>;
  constexpr double kMassShift = 1e-2;
  const ParamFrame pf = param_frame(grid, g);
  const int d = grid.dim();
  const auto n = static_cast<Eigen::Index>(grid.size());
  auto weighted = [&](auto coeff) {
    Eigen::VectorXd w(n);
    for (Eigen::Index k = 0; k < n; ++k) w(k) = pf.measure[static_cast<std::size_t>(k)] * coeff(static_cast<std::size_t>(k));
    return w;
  };
  std::vector<Sparse> first;
  for (int a = 0; a < d; ++a) first.push_back(fd_matrix(grid, a));
  std::vector<Sparse> second;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) second.push_back(first[a] * first[b]);

  Sparse p(n, n);
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      p += Sparse(first[a].transpose() * weighted([&](std::size_t k) { return pf.g_inv[k](a, b); }).asDiagonal() * first[b]);
    }
  }
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) {
          const auto coeff = [&](std::size_t k) { return pf.g_inv[k](a, c) * pf.g_inv[k](b, e); };
          p += Sparse(second[a * d + b].transpose() * weighted(coeff).asDiagonal() * second[c * d + e]);
        }
  p += Sparse(weighted([](std::size_t) { return kMassShift; }).asDiagonal());

  auto solver = std::make_shared<Eigen::SimplicialLDLT<Sparse>>(p);
  if (solver->info() != Eigen::Success) throw Error(ErrorCode::NotSPD, "preconditioner factorization failed");
  return [solver, n, components, blocks](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size());
    Eigen::VectorXd column(n);
    for (int blk = 0; blk < blocks; ++blk) {
      const Eigen::Index base = blk * n * components;
      for (int c = 0; c < components; ++c) {
        for (Eigen::Index k = 0; k < n; ++k) column(k) = v(base + k * components + c);
        const Eigen::VectorXd solved = solver->solve(column);
        for (Eigen::Index k = 0; k < n; ++k) out(base + k * components + c) = solved(k);
      }
    }
    return out;
  };
}

namespace {

Eigen::VectorXd flatten(const NodeArray& a) {
  return Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
}

NodeArray unflatten(const Eigen::VectorXd& x, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  NodeArray out(rows, cols);
  Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) = x.segment(offset, rows * cols);
  return out;
}

ObjectiveValue from_report(const EnergyReport& r, Eigen::VectorXd grad) {
  return ObjectiveValue{r.total, r.stretch, r.bend, std::move(grad)};
}

}  // namespace

MinimizeResult<DiscreteImmersion> minimize(const DiscreteImmersion& f0, const MetricChart& g,
                                           const ShapeField& s, double p, const OptimizeConfig& cfg) {
  cfg.validate();
  const auto rows = f0.values.rows();
  const auto cols = f0.values.cols();
  auto state_of = [&](const Eigen::VectorXd& x) {
    return DiscreteImmersion{f0.grid, unflatten(x, 0, rows, cols), f0.target};
  };
  const Objective obj = [&](const Eigen::VectorXd& x) {
    EnergyReport r;
    const NodeArray grad = energy_gradient(state_of(x), g, s, p, &r);
    return from_report(r, flatten(grad));
  };
  LbfgsResult res = lbfgs(obj, flatten(f0.values), cfg, smoothness_preconditioner(f0.grid, g, static_cast<int>(cols)));
  MinimizeResult<DiscreteImmersion> out{state_of(res.x), std::move(res.trace), {}};
  out.energy = total_energy(out.state, g, s, p);
  return out;
}

MinimizeResult<DirectorField> minimize(const DirectorField& xi0, const MetricChart& g, const ShapeField& s,
                                       double p, const OptimizeConfig& cfg) {
  cfg.validate();
  const auto rows = xi0.foot.rows();
  const auto cols = xi0.foot.cols();
  auto state_of = [&](const Eigen::VectorXd& x) {
    return DirectorField{xi0.grid, unflatten(x, 0, rows, cols), unflatten(x, rows * cols, rows, cols),
                         xi0.target};
  };
  const Objective obj = [&](const Eigen::VectorXd& x) {
    EnergyReport r;
    const DirectorGradient grad = energy_gradient(state_of(x), g, s, p, &r);
    Eigen::VectorXd flat(2 * rows * cols);
    flat << flatten(grad.foot), flatten(grad.vec);
    return from_report(r, std::move(flat));
  };
  Eigen::VectorXd x0(2 * rows * cols);
  x0 << flatten(xi0.foot), flatten(xi0.vec);
  LbfgsResult res = lbfgs(obj, std::move(x0), cfg, smoothness_preconditioner(xi0.grid, g, static_cast<int>(cols), 2));
  MinimizeResult<DirectorField> out{state_of(res.x), std::move(res.trace), {}};
  out.energy = relaxed_energy(out.state, g, s, p);
  return out;
}

}  // namespace imlab
