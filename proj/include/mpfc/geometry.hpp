#pragma once

// Reference path geometry: ellipse parametrization, analytic derivatives,
// flatness-based input references, and the tangential/normal error frame.

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mpfc {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct PathSpec {
  double ax = 0.1;  // semi-axis along x [m]
  double ay = 2.0;  // semi-axis along y [m]
};

struct PathPoint {
  double x = 0;
  double y = 0;
  double heading = 0;  // continuous (unwrapped) tangent angle [rad]
  double theta = 0;
};

struct PathDerivs {
  double dx, dy;      // p'(theta)
  double ddx, ddy;    // p''(theta)
  double dddx, dddy;  // p'''(theta)
};

struct PathFrame {
  double tx, ty;  // unit tangent
  double nx, ny;  // unit normal (tangent rotated +90 degrees)
};

struct PathError {
  double e_t = 0;  // tangential component [m]
  double e_n = 0;  // normal component [m]
};

// Wrap an angle to (-pi, pi].
inline double wrap_pi(double a) {
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - std::numbers::pi;
}

inline PathDerivs path_derivatives(const PathSpec& p, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {-p.ax * s, p.ay * c, -p.ax * c, -p.ay * s, p.ax * s, -p.ay * c};
}

// Continuous tangent angle. atan2 gives the branch in (-pi, pi]; the tangent
// of an ellipse never deviates more than pi/2 from the circle tangent
// theta + pi/2, so rounding to the nearest 2*pi multiple of that guide angle
// selects the unwrapped branch in closed form (no state, monotone across laps).
inline double path_heading(const PathSpec& p, double theta) {
  const PathDerivs d = path_derivatives(p, theta);
  const double beta = std::atan2(d.dy, d.dx);
  const double guide = theta + std::numbers::pi / 2.0;
  return beta + two_pi * std::round((guide - beta) / two_pi);
}

inline PathPoint eval_path(const PathSpec& p, double theta) {
  if (!std::isfinite(theta)) throw std::domain_error("eval_path: non-finite theta");
  return {p.ax * std::cos(theta), p.ay * std::sin(theta), path_heading(p, theta), theta};
}

// Flatness references (s_r, omega_r) for path speed v >= 0.
inline void reference_inputs(const PathSpec& p, double theta, double v,
                             double& s_r, double& omega_r) {
  const PathDerivs d = path_derivatives(p, theta);
  const double n2 = d.dx * d.dx + d.dy * d.dy;
  s_r = v * std::sqrt(n2);
  omega_r = v * (d.dx * d.ddy - d.dy * d.ddx) / n2;
}

inline PathFrame path_frame(double heading) {
  const double c = std::cos(heading), s = std::sin(heading);
  return {c, s, -s, c};
}

inline PathError error_components(const PathSpec& p, double qx, double qy, double theta) {
  const PathPoint pt = eval_path(p, theta);
  const PathFrame f = path_frame(pt.heading);
  const double ex = qx - pt.x, ey = qy - pt.y;
  return {ex * f.tx + ey * f.ty, ex * f.nx + ey * f.ny};
}

}  // namespace mpfc
