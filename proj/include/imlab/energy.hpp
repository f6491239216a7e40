#pragma once

#include <optional>
#include <vector>

#include "imlab/fields.hpp"
#include "imlab/immersion.hpp"

namespace imlab {

/// One integral plus the integrand sampled at the nodes (before quadrature).
struct EnergyTerm {
  double value = 0.0;
  std::vector<double> density;
};

struct EnergyReport {
  double p = 2.0;
  double stretch = 0.0;
  double bend = 0.0;
  double total = 0.0;
  std::vector<double> stretch_density;
  std::vector<double> bend_density;
};

/// Stretching energy: integral of dist(h^{1/2} df g^{-1/2}, O(d))^p dVol_g.
EnergyTerm stretching_energy(const DiscreteImmersion& f, const MetricChart& g, double p);

/// Bending energy: integral of |grad n + df S|_{g,h}^p dVol_g.
EnergyTerm bending_energy(const DiscreteImmersion& f, const MetricChart& g, const ShapeField& s,
                          double p);

EnergyReport total_energy(const DiscreteImmersion& f, const MetricChart& g, const ShapeField& s,
                          double p);

/// Connector applied to the differential of a director field:
/// d_i v^a + Gamma^a_{bc}(x) d_i x^b v^c.
JacobianField connector_apply(const DirectorField& xi);

/// Integral of dist(h^{1/2}(x) [dx g^{-1/2} | v], SO(d+1))^p dVol_g.
EnergyTerm relaxed_stretching(const DirectorField& xi, const MetricChart& g, double p);

/// Integral of |dx S + K(D xi)|_{g,h}^p dVol_g.
EnergyTerm relaxed_bending(const DirectorField& xi, const MetricChart& g, const ShapeField& s,
                           double p);

EnergyReport relaxed_energy(const DirectorField& xi, const MetricChart& g, const ShapeField& s,
                            double p);

/// |D xi|^2 = |dx|_{g,h}^2 + |K(D xi)|_{g,h}^2 at every node.
std::vector<double> sasaki_norm_sq(const DirectorField& xi, const MetricChart& g);

/// Per-node margin (3 + 2M)(dist + |dx S + K(D xi)|) - |D xi| where M is the
/// sup over nodes of the g-operator norm of S. Nodes where
/// |D xi| < (3 + 2M) sqrt(d + 1) carry no value.
std::vector<std::optional<double>> auxcalc_margin(const DirectorField& xi, const MetricChart& g,
                                                  const ShapeField& s);

/// Director field (f, n_f) built from an immersion and its unit normal.
DirectorField normal_director(const DiscreteImmersion& f);

/// Frame-reduced matrices at one node.
Mat stretch_frame(const Mat& jac, const Mat& h_sqrt, const Mat& g_inv_sqrt);
Mat relaxed_frame(const Mat& jac, const Vec& v, const Mat& h_sqrt, const Mat& g_inv_sqrt);

}  // namespace imlab
