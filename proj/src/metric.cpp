#include "imlab/metric.hpp"

#include <cmath>
#include <numbers>

#include "imlab/error.hpp"

namespace imlab {

bool Box::contains(const Vec& x, double slack) const {
  if (x.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) >= lower(i) - slack && x(i) <= upper(i) + slack)) return false;
  }
  return true;
}

Vec Christoffel::contract(const Vec& v, const Vec& w) const {
  Vec out = Vec::Zero(dim);
  for (int a = 0; a < dim; ++a) {
    double s = 0.0;
    for (int b = 0; b < dim; ++b) {
      for (int g = 0; g < dim; ++g) s += (*this)(a, b, g) * v(b) * w(g);
    }
    out(a) = s;
  }
  return out;
}

MetricChart::MetricChart(std::string name, Box domain)
    : name_(std::move(name)), domain_(std::move(domain)) {
  if (domain_.dim() < 1 || domain_.dim() > kMaxDim || domain_.upper.size() != domain_.lower.size()) {
    throw Error(ErrorCode::BadConfig, "chart dimension must be 1, 2 or 3");
  }
}

Vec MetricChart::fd_steps() const {
  return domain_.extent() * 1e-5;
}

MetricDerivative MetricChart::eval_deriv(const Vec& x) const {
  MetricDerivative out;
  const Vec step = fd_steps();
  for (int k = 0; k < dim(); ++k) {
    Vec xp = x, xm = x;
    xp(k) += step(k);
    xm(k) -= step(k);
    out[k] = (eval(xp) - eval(xm)) / (2.0 * step(k));
  }
  return out;
}

Christoffel MetricChart::christoffel(const Vec& x) const {
  return christoffel_from(eval(x), eval_deriv(x));
}

std::array<Christoffel, kMaxDim> MetricChart::christoffel_deriv(const Vec& x) const {
  std::array<Christoffel, kMaxDim> out{};
  const Vec step = fd_steps();
  for (int k = 0; k < dim(); ++k) {
    Vec xp = x, xm = x;
    xp(k) += step(k);
    xm(k) -= step(k);
    const Christoffel plus = christoffel(xp);
    const Christoffel minus = christoffel(xm);
    out[k].dim = dim();
    for (std::size_t i = 0; i < out[k].c.size(); ++i) {
      out[k].c[i] = (plus.c[i] - minus.c[i]) / (2.0 * step(k));
    }
  }
  return out;
}

Riemann MetricChart::riemann(const Vec& x) const {
  return riemann_from(eval(x), christoffel(x), christoffel_deriv(x));
}

Christoffel christoffel_from(const Mat& g, const MetricDerivative& dg) {
  const int n = static_cast<int>(g.rows());
  Eigen::SelfAdjointEigenSolver<Mat> eig(g);
  const double largest = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(smallest > kSpdTolerance * largest)) {
    throw Error(ErrorCode::SingularMetric, "metric is not invertible");
  }
  const Mat ginv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                   eig.eigenvectors().transpose();
  Christoffel out;
  out.dim = n;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int c = b; c < n; ++c) {
        double s = 0.0;
        for (int e = 0; e < n; ++e) {
          s += ginv(a, e) * (dg[b](e, c) + dg[c](e, b) - dg[e](b, c));
        }
        out(a, b, c) = 0.5 * s;
        out(a, c, b) = 0.5 * s;
      }
    }
  }
  return out;
}

Riemann riemann_from(const Mat& g, const Christoffel& gamma,
                     const std::array<Christoffel, kMaxDim>& dgamma) {
  const int n = static_cast<int>(g.rows());
  // R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb}
  Riemann up;
  up.dim = n;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        for (int d = 0; d < n; ++d) {
          double s = dgamma[c](a, d, b) - dgamma[d](a, c, b);
          for (int e = 0; e < n; ++e) {
            s += gamma(a, c, e) * gamma(e, d, b) - gamma(a, d, e) * gamma(e, c, b);
          }
          up(a, b, c, d) = s;
        }
      }
    }
  }
  Riemann low;
  low.dim = n;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        for (int d = 0; d < n; ++d) {
          double s = 0.0;
          for (int e = 0; e < n; ++e) s += g(a, e) * up(e, b, c, d);
          low(a, b, c, d) = s;
        }
      }
    }
  }
  // Antisymmetrize each pair, then symmetrize under pair exchange. Written so
  // that the symmetries hold bit-for-bit: fl(x - y) == -fl(y - x).
  Riemann anti;
  anti.dim = n;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        for (int d = 0; d < n; ++d) {
          anti(a, b, c, d) = (low(a, b, c, d) - low(b, a, c, d)) - (low(a, b, d, c) - low(b, a, d, c));
        }
      }
    }
  }
  Riemann out;
  out.dim = n;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      for (int c = 0; c < n; ++c) {
        for (int d = 0; d < n; ++d) {
          out(a, b, c, d) = 0.125 * (anti(a, b, c, d) + anti(c, d, a, b));
        }
      }
    }
  }
  return out;
}

Christoffel christoffel(const MetricChart& m, const Vec& x) {
  return m.christoffel(x);
}

Riemann riemann_curvature(const MetricChart& m, const Vec& x) {
  return m.riemann(x);
}

AnalyticChart::AnalyticChart(std::string name, Box domain, EvalFn eval, DerivFn deriv)
    : MetricChart(std::move(name), std::move(domain)), eval_(std::move(eval)), deriv_(std::move(deriv)) {}

MetricDerivative AnalyticChart::eval_deriv(const Vec& x) const {
  if (deriv_) return deriv_(x);
  return MetricChart::eval_deriv(x);
}

namespace {

Box cube(int dim, double lo, double hi) {
  return Box{Vec::Constant(dim, lo), Vec::Constant(dim, hi)};
}

MetricDerivative zero_derivative(int dim) {
  MetricDerivative out;
  for (int k = 0; k < dim; ++k) out[k] = Mat::Zero(dim, dim);
  return out;
}

constexpr double kPi = std::numbers::pi;
constexpr double kPoleMargin = 1e-2;

// Round metric in hyperspherical coordinates, or its hyperbolic analogue when
// `lead` is sinh: diag(1, lead(x0)^2, lead(x0)^2 sin(x1)^2).
ChartPtr warped_chart(std::string name, int dim, bool hyperbolic) {
  Box box;
  box.lower = Vec(dim);
  box.upper = Vec(dim);
  box.lower(0) = kPoleMargin;
  box.upper(0) = hyperbolic ? 4.0 : kPi - kPoleMargin;
  if (dim == 3) {
    box.lower(1) = kPoleMargin;
    box.upper(1) = kPi - kPoleMargin;
  }
  box.lower(dim - 1) = dim == 1 ? box.lower(0) : -2.0 * kPi;
  box.upper(dim - 1) = dim == 1 ? box.upper(0) : 2.0 * kPi;

  auto lead = [hyperbolic](double t) { return hyperbolic ? std::sinh(t) : std::sin(t); };
  auto lead_d = [hyperbolic](double t) { return hyperbolic ? std::cosh(t) : std::cos(t); };

  auto eval = [dim, lead](const Vec& x) {
    Mat h = Mat::Identity(dim, dim);
    if (dim >= 2) {
      const double s0 = lead(x(0));
      h(1, 1) = s0 * s0;
      if (dim == 3) {
        const double s1 = std::sin(x(1));
        h(2, 2) = s0 * s0 * s1 * s1;
      }
    }
    return h;
  };
  auto deriv = [dim, lead, lead_d](const Vec& x) {
    MetricDerivative dh = zero_derivative(dim);
    if (dim >= 2) {
      const double s0 = lead(x(0));
      const double c0 = lead_d(x(0));
      dh[0](1, 1) = 2.0 * s0 * c0;
      if (dim == 3) {
        const double s1 = std::sin(x(1));
        const double c1 = std::cos(x(1));
        dh[0](2, 2) = 2.0 * s0 * c0 * s1 * s1;
        dh[1](2, 2) = 2.0 * s0 * s0 * s1 * c1;
      }
    }
    return dh;
  };
  return std::make_shared<AnalyticChart>(std::move(name), box, eval, deriv);
}

ChartPtr polar_chart(int dim) {
  if (dim < 2) throw Error(ErrorCode::BadConfig, "polar chart needs dimension 2 or 3");
  Box box;
  box.lower = Vec(dim);
  box.upper = Vec(dim);
  box.lower(0) = kPoleMargin;
  box.upper(0) = 10.0;
  box.lower(1) = -2.0 * kPi;
  box.upper(1) = 2.0 * kPi;
  if (dim == 3) {
    box.lower(2) = -10.0;
    box.upper(2) = 10.0;
  }
  auto eval = [dim](const Vec& x) {
    Mat h = Mat::Identity(dim, dim);
    h(1, 1) = x(0) * x(0);
    return h;
  };
  auto deriv = [dim](const Vec& x) {
    MetricDerivative dh = zero_derivative(dim);
    dh[0](1, 1) = 2.0 * x(0);
    return dh;
  };
  return std::make_shared<AnalyticChart>("polar", box, eval, deriv);
}

}  // namespace

EuclideanChart::EuclideanChart(int dim) : MetricChart("euclidean", cube(dim, -1e3, 1e3)) {}

Mat EuclideanChart::eval(const Vec&) const {
  return Mat::Identity(dim(), dim());
}

MetricDerivative EuclideanChart::eval_deriv(const Vec&) const {
  return zero_derivative(dim());
}

Christoffel EuclideanChart::christoffel(const Vec&) const {
  Christoffel out;
  out.dim = dim();
  return out;
}

std::array<Christoffel, kMaxDim> EuclideanChart::christoffel_deriv(const Vec&) const {
  std::array<Christoffel, kMaxDim> out{};
  for (auto& c : out) c.dim = dim();
  return out;
}

Riemann EuclideanChart::riemann(const Vec&) const {
  Riemann out;
  out.dim = dim();
  return out;
}

ChartPtr make_chart(std::string_view name, int dim) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::BadConfig, "chart dimension must be 1, 2 or 3");
  if (name == "euclidean") return std::make_shared<EuclideanChart>(dim);
  if (name == "sphere") return warped_chart("sphere", dim, false);
  if (name == "hyperbolic") return warped_chart("hyperbolic", dim, true);
  if (name == "polar") return polar_chart(dim);
  throw Error(ErrorCode::BadConfig, "unknown chart '" + std::string(name) + "'");
}

std::vector<std::string> chart_names() {
  return {"euclidean", "sphere", "hyperbolic", "polar"};
}

}  // namespace imlab
