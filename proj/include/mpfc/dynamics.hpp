#pragma once

// Augmented unicycle model z = [q_x, q_y, phi, theta], w = [s, omega, v]
// with zdot = (s cos phi, s sin phi, omega, v), integrated by classical RK4.
// The same integrator serves as the OCP prediction model and as the plant.

#include <array>
#include <vector>

#include "mpfc/geometry.hpp"

namespace mpfc {

struct ExtendedState {
  double qx = 0;
  double qy = 0;
  double phi = 0;
  double theta = 0;
};

struct ExtendedInput {
  double s = 0;
  double omega = 0;
  double v = 0;
};

// Input box W from the nominal problem: |s| <= 0.26 m/s, |omega| <= 0.455
// rad/s, 0 <= v <= 0.15. Everything the solver or a clamped controller emits
// stays inside it.
inline constexpr ExtendedInput kInputLo{-0.26, -0.455, 0.0};
inline constexpr ExtendedInput kInputHi{0.26, 0.455, 0.15};

inline std::array<double, 4> dynamics(const ExtendedState& z, const ExtendedInput& w) {
  return {w.s * std::cos(z.phi), w.s * std::sin(z.phi), w.omega, w.v};
}

inline ExtendedState rk4_step(const ExtendedState& z, const ExtendedInput& w, double dt) {
  const auto add = [](const ExtendedState& a, const std::array<double, 4>& k, double h) {
    return ExtendedState{a.qx + h * k[0], a.qy + h * k[1], a.phi + h * k[2], a.theta + h * k[3]};
  };
  const auto k1 = dynamics(z, w);
  const auto k2 = dynamics(add(z, k1, dt / 2), w);
  const auto k3 = dynamics(add(z, k2, dt / 2), w);
  const auto k4 = dynamics(add(z, k3, dt), w);
  return {z.qx + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
          z.qy + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
          z.phi + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
          z.theta + dt / 6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])};
}

inline std::vector<ExtendedState> simulate_open_loop(const ExtendedState& z0,
                                                     const std::vector<ExtendedInput>& inputs,
                                                     double dt) {
  std::vector<ExtendedState> out;
  out.reserve(inputs.size() + 1);
  out.push_back(z0);
  for (const auto& w : inputs) out.push_back(rk4_step(out.back(), w, dt));
  return out;
}

}  // namespace mpfc
