#include "imlab/presets.hpp"

#include <cmath>
#include <numbers>

#include "imlab/error.hpp"

namespace imlab {

namespace {

constexpr double kPi = std::numbers::pi;

Box box2(double a0, double b0, double a1, double b1) {
  Box b{Vec(2), Vec(2)};
  b.lower << a0, a1;
  b.upper << b0, b1;
  return b;
}

}  // namespace

Vec sphere_point(const Vec& x) {
  Vec y(3);
  y << std::sin(x(0)) * std::cos(x(1)), -std::sin(x(0)) * std::sin(x(1)), std::cos(x(0));
  return y;
}

Vec cylinder_point(const Vec& x, double r) {
  Vec y(3);
  y << r * std::cos(x(0) / r), -r * std::sin(x(0) / r), x(1);
  return y;
}

Preset make_preset(std::string_view name) {
  Preset p;
  p.name = std::string(name);
  p.target = std::make_shared<EuclideanChart>(3);
  if (name == "flat") {
    p.metric = std::make_shared<EuclideanChart>(2);
    p.domain = box2(0.0, 1.0, 0.0, 1.0);
    p.shape = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
    p.immersion = [](const Vec& x) {
      Vec y(3);
      y << x(0), x(1), 0.0;
      return y;
    };
  } else if (name == "cylinder") {
    p.metric = std::make_shared<EuclideanChart>(2);
    p.domain = box2(0.0, 2.0, 0.0, 1.0);
    p.shape = [](const Vec&) {
      Mat s = Mat::Zero(2, 2);
      s(0, 0) = 1.0;
      return s;
    };
    p.immersion = [](const Vec& x) { return cylinder_point(x, 1.0); };
  } else if (name == "sphere-cap" || name == "sphere-incompatible") {
    p.metric = make_chart("sphere", 2);
    p.domain = box2(kPi / 4.0, 3.0 * kPi / 4.0, 0.0, kPi / 2.0);
    p.immersion = sphere_point;
    if (name == "sphere-cap") {
      p.shape = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
    } else {
      p.shape = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
      p.compatible = false;
    }
  } else {
    throw Error(ErrorCode::BadConfig, "unknown preset '" + std::string(name) + "'");
  }
  return p;
}

std::vector<std::string> preset_names() {
  return {"flat", "cylinder", "sphere-cap", "sphere-incompatible"};
}

}  // namespace imlab
