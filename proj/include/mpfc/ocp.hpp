#pragma once

// Path-following optimal control problem: direct shooting over N inputs,
// quadratic stage cost against the flatness references, adjoint gradients,
// and a box-projected gradient solver with Armijo backtracking.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "mpfc/dynamics.hpp"
#include "mpfc/geometry.hpp"

namespace mpfc {

struct SolverOpts {
  int max_iters = 400;      // cold-start iteration budget
  int max_iters_warm = 60;  // warm-start budget used by the receding-horizon step
  double grad_tol = 1e-6;   // scaled by max(1, cost at the initial guess)
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  bool precondition = true;
};

struct OcpConfig {
  int N = 60;
  double dt = 0.01;
  std::array<double, 4> Q{2e5, 2e5, 1e5, 0.0};
  std::array<double, 3> R{1e1, 5e3, 1e5};
  ExtendedInput input_lo = kInputLo;
  ExtendedInput input_hi = kInputHi;
  // Largest constant path speed whose forward-speed reference s_r = v*||p'||
  // stays inside the input box everywhere on the nominal ellipse (0.26 / 2).
  double v_ref = 0.13;
  // Optional soft penalty on the state box (off by default).
  bool state_box_enabled = false;
  std::array<double, 4> state_lo{-5.0, -15.0, -1e9, -1e9};
  std::array<double, 4> state_hi{5.0, 15.0, 1e9, 1e9};
  double state_penalty = 1e3;
  SolverOpts solver{};
};

inline ExtendedInput clamp_input(const ExtendedInput& w, const OcpConfig& cfg) {
  return {std::clamp(w.s, cfg.input_lo.s, cfg.input_hi.s),
          std::clamp(w.omega, cfg.input_lo.omega, cfg.input_hi.omega),
          std::clamp(w.v, cfg.input_lo.v, cfg.input_hi.v)};
}

namespace detail {

struct StageEval {
  double cost = 0;
  std::array<double, 4> gz{};  // d cost / d z
  std::array<double, 3> gw{};  // d cost / d w
};

inline StageEval stage_eval(const PathSpec& path, const ExtendedState& z,
                            const ExtendedInput& w, const OcpConfig& cfg) {
  const double theta = z.theta;
  const PathDerivs d = path_derivatives(path, theta);
  const double n2 = d.dx * d.dx + d.dy * d.dy;
  const double nrm = std::sqrt(n2);
  const double cross = d.dx * d.ddy - d.dy * d.ddx;

  const PathPoint pt = eval_path(path, theta);
  const double ex = z.qx - pt.x;
  const double ey = z.qy - pt.y;
  const double eph = wrap_pi(z.phi - pt.heading);

  const double v = w.v;
  const double s_r = v * nrm;
  const double w_r = v * cross / n2;
  const double rs = w.s - s_r;
  const double rw = w.omega - w_r;
  const double rv = w.v - cfg.v_ref;

  StageEval e;
  e.cost = cfg.Q[0] * ex * ex + cfg.Q[1] * ey * ey + cfg.Q[2] * eph * eph +
           cfg.Q[3] * theta * theta + cfg.R[0] * rs * rs + cfg.R[1] * rw * rw +
           cfg.R[2] * rv * rv;

  // theta enters through p(theta), the heading reference, and u_r(theta, v).
  const double dot1 = d.dx * d.ddx + d.dy * d.ddy;
  const double dsr_dth = v * dot1 / nrm;
  const double dn2 = 2.0 * dot1;
  const double dcross = d.dx * d.dddy - d.dy * d.dddx;
  const double dwr_dth = v * (dcross * n2 - cross * dn2) / (n2 * n2);
  const double dheading = cross / n2;

  e.gz[0] = 2 * cfg.Q[0] * ex;
  e.gz[1] = 2 * cfg.Q[1] * ey;
  e.gz[2] = 2 * cfg.Q[2] * eph;
  e.gz[3] = -2 * cfg.Q[0] * ex * d.dx - 2 * cfg.Q[1] * ey * d.dy -
            2 * cfg.Q[2] * eph * dheading + 2 * cfg.Q[3] * theta -
            2 * cfg.R[0] * rs * dsr_dth - 2 * cfg.R[1] * rw * dwr_dth;

  e.gw[0] = 2 * cfg.R[0] * rs;
  e.gw[1] = 2 * cfg.R[1] * rw;
  e.gw[2] = 2 * cfg.R[2] * rv - 2 * cfg.R[0] * rs * nrm -
            2 * cfg.R[1] * rw * cross / n2;

  if (cfg.state_box_enabled) {
    const std::array<double, 4> zs{z.qx, z.qy, z.phi, z.theta};
    for (int i = 0; i < 4; ++i) {
      const double over = std::max(0.0, zs[i] - cfg.state_hi[i]);
      const double under = std::max(0.0, cfg.state_lo[i] - zs[i]);
      e.cost += cfg.state_penalty * (over * over + under * under);
      e.gz[i] += 2 * cfg.state_penalty * (over - under);
    }
  }
  return e;
}

// One RK4 step plus its exact Jacobians. Because df/dz has only the two
// entries (d qdot / d phi) and df/dw is constant per stage, the usual RK4
// Jacobian recursions collapse to closed forms (the state Jacobian chain is
// nilpotent: A_i * A_j = 0).
struct StepJac {
  ExtendedState next;
  double fz02, fz12;                  // Fz = I plus these two entries (rows 0,1 / col 2)
  double fw00, fw10, fw01, fw11, fw;  // Fw nonzeros; fw = Fw[2][1] = Fw[3][2] = dt
};

inline StepJac rk4_jacobians(const ExtendedState& z, const ExtendedInput& w, double dt) {
  StepJac j;
  j.next = rk4_step(z, w, dt);
  const double p1 = z.phi;
  const double p2 = z.phi + dt / 2 * w.omega;  // stages 2 and 3 share this angle
  const double p4 = z.phi + dt * w.omega;
  const double s = w.s;
  j.fz02 = dt / 6 * (-s) * (std::sin(p1) + 4 * std::sin(p2) + std::sin(p4));
  j.fz12 = dt / 6 * s * (std::cos(p1) + 4 * std::cos(p2) + std::cos(p4));
  j.fw00 = dt / 6 * (std::cos(p1) + 4 * std::cos(p2) + std::cos(p4));
  j.fw10 = dt / 6 * (std::sin(p1) + 4 * std::sin(p2) + std::sin(p4));
  j.fw01 = dt * dt / 6 * (-s) * (2 * std::sin(p2) + std::sin(p4));
  j.fw11 = dt * dt / 6 * s * (2 * std::cos(p2) + std::cos(p4));
  j.fw = dt;
  return j;
}

}  // namespace detail

inline double stage_cost(const PathSpec& path, const ExtendedState& z,
                         const ExtendedInput& w, const OcpConfig& cfg) {
  return detail::stage_eval(path, z, w, cfg).cost;
}

inline double rollout_cost(const PathSpec& path, const ExtendedState& z0,
                           const std::vector<ExtendedInput>& seq, const OcpConfig& cfg,
                           std::vector<ExtendedState>* states = nullptr) {
  double J = 0;
  ExtendedState z = z0;
  if (states) {
    states->clear();
    states->push_back(z0);
  }
  for (const auto& w : seq) {
    J += stage_cost(path, z, w, cfg) * cfg.dt;
    z = rk4_step(z, w, cfg.dt);
    if (states) states->push_back(z);
  }
  return J;
}

// Exact gradient of the discrete rollout cost w.r.t. all 3N input entries,
// by reverse accumulation through RK4 and the stage cost.
inline std::vector<double> rollout_gradient(const PathSpec& path, const ExtendedState& z0,
                                            const std::vector<ExtendedInput>& seq,
                                            const OcpConfig& cfg, double* cost = nullptr) {
  const int N = static_cast<int>(seq.size());
  std::vector<ExtendedState> zs(N);
  std::vector<detail::StepJac> js(N);
  ExtendedState z = z0;
  for (int k = 0; k < N; ++k) {
    zs[k] = z;
    js[k] = detail::rk4_jacobians(z, seq[k], cfg.dt);
    z = js[k].next;
  }

  std::vector<double> grad(3 * N, 0.0);
  std::array<double, 4> lam{};
  double J = 0;
  for (int k = N - 1; k >= 0; --k) {
    const auto e = detail::stage_eval(path, zs[k], seq[k], cfg);
    J += e.cost * cfg.dt;
    const auto& j = js[k];
    grad[3 * k + 0] = cfg.dt * e.gw[0] + j.fw00 * lam[0] + j.fw10 * lam[1];
    grad[3 * k + 1] = cfg.dt * e.gw[1] + j.fw01 * lam[0] + j.fw11 * lam[1] + j.fw * lam[2];
    grad[3 * k + 2] = cfg.dt * e.gw[2] + j.fw * lam[3];
    const double l2 = j.fz02 * lam[0] + j.fz12 * lam[1] + lam[2];
    lam = {cfg.dt * e.gz[0] + lam[0], cfg.dt * e.gz[1] + lam[1], cfg.dt * e.gz[2] + l2,
           cfg.dt * e.gz[3] + lam[3]};
  }
  if (cost) *cost = J;
  return grad;
}

namespace detail {

// Gauss-Newton Hessian of the stage cost w.r.t. z (4x4, symmetric; only the
// diagonal and the theta row/column are nonzero).
struct StageHess {
  double h00, h11, h22, h33, h03, h13, h23;
};

inline StageHess gn_state_hessian(const PathSpec& path, const ExtendedState& z,
                                  const ExtendedInput& w, const OcpConfig& cfg) {
  const PathDerivs d = path_derivatives(path, z.theta);
  const double n2 = d.dx * d.dx + d.dy * d.dy;
  const double nrm = std::sqrt(n2);
  const double cross = d.dx * d.ddy - d.dy * d.ddx;
  const double dheading = cross / n2;
  const double v = w.v;
  const double dot1 = d.dx * d.ddx + d.dy * d.ddy;
  const double dsr_dth = v * dot1 / nrm;
  const double dcross = d.dx * d.dddy - d.dy * d.dddx;
  const double dwr_dth = v * (dcross * n2 - cross * 2.0 * dot1) / (n2 * n2);
  StageHess h;
  h.h00 = 2 * cfg.Q[0];
  h.h11 = 2 * cfg.Q[1];
  h.h22 = 2 * cfg.Q[2];
  h.h33 = 2 * (cfg.Q[0] * d.dx * d.dx + cfg.Q[1] * d.dy * d.dy +
               cfg.Q[2] * dheading * dheading + cfg.Q[3] +
               cfg.R[0] * dsr_dth * dsr_dth + cfg.R[1] * dwr_dth * dwr_dth);
  h.h03 = -2 * cfg.Q[0] * d.dx;
  h.h13 = -2 * cfg.Q[1] * d.dy;
  h.h23 = -2 * cfg.Q[2] * dheading;
  return h;
}

inline std::array<double, 3> gn_input_diag(const PathSpec& path, const ExtendedState& z,
                                           const OcpConfig& cfg) {
  const PathDerivs d = path_derivatives(path, z.theta);
  const double n2 = d.dx * d.dx + d.dy * d.dy;
  const double nrm = std::sqrt(n2);
  const double dwr_dv = (d.dx * d.ddy - d.dy * d.ddx) / n2;
  return {2 * cfg.R[0], 2 * cfg.R[1],
          2 * (cfg.R[0] * nrm * nrm + cfg.R[1] * dwr_dv * dwr_dv + cfg.R[2])};
}

// Diagonal of the Gauss-Newton Hessian of the rollout cost, used as a fixed
// per-solve metric for the scaled projected-gradient step. The per-channel
// curvatures span ~4 orders of magnitude (v couples into every future stage
// through theta), which cripples an unscaled step.
inline std::vector<double> gn_diagonal(const PathSpec& path, const ExtendedState& z0,
                                       const std::vector<ExtendedInput>& seq,
                                       const OcpConfig& cfg) {
  const int N = static_cast<int>(seq.size());
  std::vector<StepJac> js(N);
  std::vector<StageHess> hs(N);
  std::vector<double> D(3 * N);
  ExtendedState z = z0;
  for (int k = 0; k < N; ++k) {
    hs[k] = gn_state_hessian(path, z, seq[k], cfg);
    const auto dw = gn_input_diag(path, z, cfg);
    for (int j = 0; j < 3; ++j) D[3 * k + j] = cfg.dt * dw[j];
    js[k] = rk4_jacobians(z, seq[k], cfg.dt);
    z = js[k].next;
  }
  for (int k = 0; k < N; ++k) {
    // Sensitivity S = d z_m / d w_k, propagated forward (4x3).
    const auto& j = js[k];
    double S[4][3] = {{j.fw00, j.fw01, 0}, {j.fw10, j.fw11, 0}, {0, j.fw, 0}, {0, 0, j.fw}};
    for (int m = k + 1; m < N; ++m) {
      const auto& h = hs[m];
      for (int c = 0; c < 3; ++c) {
        const double t0 = h.h00 * S[0][c] + h.h03 * S[3][c];
        const double t1 = h.h11 * S[1][c] + h.h13 * S[3][c];
        const double t2 = h.h22 * S[2][c] + h.h23 * S[3][c];
        const double t3 = h.h03 * S[0][c] + h.h13 * S[1][c] + h.h23 * S[2][c] + h.h33 * S[3][c];
        D[3 * k + c] += cfg.dt * (S[0][c] * t0 + S[1][c] * t1 + S[2][c] * t2 + S[3][c] * t3);
      }
      const auto& f = js[m];
      for (int c = 0; c < 3; ++c) {
        S[0][c] += f.fz02 * S[2][c];
        S[1][c] += f.fz12 * S[2][c];
      }
    }
  }
  const double dmax = *std::max_element(D.begin(), D.end());
  if (!(dmax > 0)) {
    std::fill(D.begin(), D.end(), 1.0);
  } else {
    for (auto& d : D) d = std::max(d, 1e-8 * dmax);
  }
  return D;
}

}  // namespace detail

struct SolveResult {
  std::vector<ExtendedInput> seq;
  double cost = 0;
  int iters = 0;
  bool converged = false;
  bool ok = true;  // false only if the line search hit non-finite costs
};

inline SolveResult solve(const PathSpec& path, const ExtendedState& z0,
                         const std::optional<std::vector<ExtendedInput>>& warm,
                         const OcpConfig& cfg, int max_iters_override = -1) {
  const int N = cfg.N;
  std::vector<ExtendedInput> W =
      warm ? *warm : std::vector<ExtendedInput>(N, ExtendedInput{0, 0, 0});
  for (auto& w : W) w = clamp_input(w, cfg);

  std::vector<double> D(3 * N, 1.0);
  if (cfg.solver.precondition) D = detail::gn_diagonal(path, z0, W, cfg);

  double J = 0;
  std::vector<double> G = rollout_gradient(path, z0, W, cfg, &J);
  const double tol = cfg.solver.grad_tol * std::max(1.0, J);
  const int max_iters = max_iters_override >= 0 ? max_iters_override : cfg.solver.max_iters;

  SolveResult res;
  res.seq = W;
  res.cost = J;

  std::vector<ExtendedInput> Wprev = W, Wt(N);
  std::vector<double> Gprev = G;
  double t = 1.0;
  const double lo[3] = {cfg.input_lo.s, cfg.input_lo.omega, cfg.input_lo.v};
  const double hi[3] = {cfg.input_hi.s, cfg.input_hi.omega, cfg.input_hi.v};
  auto entry = [](const std::vector<ExtendedInput>& w, int i) {
    return i % 3 == 0 ? w[i / 3].s : (i % 3 == 1 ? w[i / 3].omega : w[i / 3].v);
  };
  auto set_entry = [](std::vector<ExtendedInput>& w, int i, double x) {
    (i % 3 == 0 ? w[i / 3].s : (i % 3 == 1 ? w[i / 3].omega : w[i / 3].v)) = x;
  };

  for (int it = 0; it < max_iters; ++it) {
    double pg = 0;
    for (int i = 0; i < 3 * N; ++i) {
      const double wi = entry(W, i);
      const double c = std::clamp(wi - G[i], lo[i % 3], hi[i % 3]);
      pg = std::max(pg, std::abs(wi - c));
    }
    if (pg <= tol) {
      res.converged = true;
      break;
    }
    if (it > 0) {
      double ss = 0, sy = 0;
      for (int i = 0; i < 3 * N; ++i) {
        const double ds = entry(W, i) - entry(Wprev, i);
        ss += ds * ds * D[i];
        sy += ds * (G[i] - Gprev[i]);
      }
      if (sy > 1e-300) t = ss / sy;
      t = std::clamp(t, 1e-10, 1e6);
    }
    bool accepted = false;
    bool nonfinite = false;
    double Jt = 0;
    for (int bt = 0; bt < cfg.solver.max_backtracks; ++bt) {
      double dd = 0;
      for (int i = 0; i < 3 * N; ++i) {
        const double wi = entry(W, i);
        const double c = std::clamp(wi - t * G[i] / D[i], lo[i % 3], hi[i % 3]);
        set_entry(Wt, i, c);
        dd += (c - wi) * (c - wi) * D[i];
      }
      Jt = rollout_cost(path, z0, Wt, cfg);
      if (!std::isfinite(Jt)) {
        nonfinite = true;
        t *= cfg.solver.backtrack;
        continue;
      }
      if (Jt <= J - cfg.solver.armijo_c1 / std::max(t, 1e-300) * dd) {
        accepted = true;
        break;
      }
      t *= cfg.solver.backtrack;
    }
    if (!accepted) {
      res.ok = !nonfinite;
      break;
    }
    Wprev = W;
    Gprev = G;
    W = Wt;
    G = rollout_gradient(path, z0, W, cfg, &J);
    res.iters = it + 1;
  }
  res.seq = W;
  res.cost = J;
  return res;
}

// Reference-input sequence from z0's path parameter. Inputs are held constant
// over each step, so each stage uses the references at the midpoint parameter;
// evaluating at the left endpoint instead loses ~3 orders of magnitude of
// open-loop tracking accuracy.
inline std::vector<ExtendedInput> reference_sequence(const PathSpec& path,
                                                     const ExtendedState& z0,
                                                     const OcpConfig& cfg) {
  std::vector<ExtendedInput> seq(cfg.N);
  double theta = z0.theta;
  const double v = std::clamp(cfg.v_ref, cfg.input_lo.v, cfg.input_hi.v);
  for (int k = 0; k < cfg.N; ++k) {
    double s_r, w_r;
    reference_inputs(path, theta + 0.5 * v * cfg.dt, v, s_r, w_r);
    seq[k] = clamp_input({s_r, w_r, v}, cfg);
    theta += v * cfg.dt;
  }
  return seq;
}

// Receding-horizon controller: solves the OCP at each state and applies the
// first input, warm-starting from the previous solution shifted by one stage.
class MpfcController {
 public:
  MpfcController(const PathSpec& path, const OcpConfig& cfg) : path_(path), cfg_(cfg) {}

  ExtendedInput step(const ExtendedState& z) {
    std::vector<ExtendedInput> guess;
    int budget;
    if (warm_) {
      guess.assign(prev_.begin() + 1, prev_.end());
      guess.push_back(prev_.back());
      budget = cfg_.solver.max_iters_warm;
    } else {
      guess = reference_sequence(path_, z, cfg_);
      budget = cfg_.solver.max_iters;
    }
    const SolveResult r = solve(path_, z, guess, cfg_, budget);
    last_ = r;
    if (!r.ok) return guess.front();
    prev_ = r.seq;
    warm_ = true;
    return r.seq.front();
  }

  void reset() { warm_ = false; }
  const SolveResult& last() const { return last_; }
  const OcpConfig& config() const { return cfg_; }

 private:
  PathSpec path_;
  OcpConfig cfg_;
  bool warm_ = false;
  std::vector<ExtendedInput> prev_;
  SolveResult last_;
};

}  // namespace mpfc
