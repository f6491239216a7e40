#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "imlab/fields.hpp"
#include "imlab/metric.hpp"

namespace imlab {

/// Named (g, S) pair on a parameter box, with the Euclidean target and, when
/// one exists, a closed-form immersion realizing it.
///
///   flat                 unit square, g = I, S = 0, f = (x, y, 0)
///   cylinder             [0,2]x[0,1], g = I, S = diag(1, 0), radius-1 cylinder
///   sphere-cap           [pi/4,3pi/4]x[0,pi/2], round g, S = I, unit sphere
///   sphere-incompatible  same box and g as sphere-cap but S = 0
///
/// Both curved closed forms use the inward normal, which is the orientation
/// for which the listed S is the shape operator.
struct Preset {
  std::string name;
  ChartPtr metric;
  ChartPtr target;
  Box domain;
  std::function<Mat(const Vec&)> shape;
  std::function<Vec(const Vec&)> immersion;
  bool compatible = true;
};

/// Throws Error(BadConfig) for unknown names.
Preset make_preset(std::string_view name);
std::vector<std::string> preset_names();

/// Unit sphere with the inward normal: (sin t cos p, -sin t sin p, cos t).
Vec sphere_point(const Vec& x);
/// Cylinder of radius r around the z axis: (r cos(u/r), -r sin(u/r), v).
Vec cylinder_point(const Vec& x, double r);

}  // namespace imlab
