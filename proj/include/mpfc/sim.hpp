#pragma once

// Closed-loop simulation harness, per-lap error/timing metrics, benchmark
// state sampling, and the CSV trace formats used by the plotting pipeline.

#include <algorithm>
#include <chrono>
#include <cstring>
#include <functional>

#include "mpfc/controllers.hpp"
#include "mpfc/rng.hpp"

namespace mpfc {

struct SimConfig {
  double dt = 0.01;
  int laps = 1;
  double theta0 = 0.0;
  // Initial pose offsets relative to the on-path start (tangential, normal,
  // heading); all zero by default.
  double offset_t = 0.0;
  double offset_n = 0.0;
  double offset_phi = 0.0;
  double v_ref = 0.13;             // sets the step budget, not the controller
  double divergence_guard = 0.5;   // abort when the error exceeds this [m]
};

struct TraceRow {
  double t = 0;
  ExtendedState z;
  ExtendedInput w;
  double err = 0;
  double ctrl_seconds = 0;
};

struct SimTrace {
  std::vector<TraceRow> rows;
  bool failed = false;
  std::string failure;
};

struct Metrics {
  double mean_err = 0;
  double max_err = 0;
  double t_mean = 0;
  double t_std = 0;
  double t_worst = 0;
  size_t steps = 0;
};

using StepFn = std::function<ExtendedInput(const ExtendedState&)>;

inline ExtendedState initial_state(const PathSpec& path, const SimConfig& cfg) {
  const PathPoint pt = eval_path(path, cfg.theta0);
  const PathFrame f = path_frame(pt.heading);
  return {pt.x + cfg.offset_t * f.tx + cfg.offset_n * f.nx,
          pt.y + cfg.offset_t * f.ty + cfg.offset_n * f.ny, pt.heading + cfg.offset_phi,
          cfg.theta0};
}

inline SimTrace run_closed_loop(const PathSpec& path, const StepFn& controller,
                                const SimConfig& cfg) {
  SimTrace trace;
  ExtendedState z = initial_state(path, cfg);
  const double theta_end = cfg.theta0 + cfg.laps * two_pi;
  const size_t budget =
      static_cast<size_t>(cfg.laps * (two_pi / std::max(cfg.v_ref, 1e-9)) / cfg.dt * 2.0);
  trace.rows.reserve(std::min<size_t>(budget, 1 << 20));
  using clock = std::chrono::steady_clock;
  for (size_t k = 0; z.theta < theta_end && k < budget; ++k) {
    const auto t0 = clock::now();
    ExtendedInput w;
    try {
      w = controller(z);
    } catch (const std::exception& e) {
      trace.failed = true;
      trace.failure = std::string("controller failure at step ") + std::to_string(k) + ": " +
                      e.what();
      break;
    }
    const auto t1 = clock::now();
    const PathPoint pt = eval_path(path, z.theta);
    const double err = std::hypot(z.qx - pt.x, z.qy - pt.y);
    trace.rows.push_back(
        {k * cfg.dt, z, w, err, std::chrono::duration<double>(t1 - t0).count()});
    if (err > cfg.divergence_guard) {
      trace.failed = true;
      trace.failure = "error " + std::to_string(err) + " m exceeds divergence guard at theta " +
                      std::to_string(z.theta);
      break;
    }
    z = rk4_step(z, w, cfg.dt);
  }
  return trace;
}

inline Metrics compute_metrics(const SimTrace& trace) {
  if (trace.rows.empty()) throw std::invalid_argument("compute_metrics: empty trace");
  Metrics m;
  m.steps = trace.rows.size();
  double tsum = 0;
  for (const TraceRow& r : trace.rows) {
    m.mean_err += r.err;
    m.max_err = std::max(m.max_err, r.err);
    tsum += r.ctrl_seconds;
    m.t_worst = std::max(m.t_worst, r.ctrl_seconds);
  }
  m.mean_err /= static_cast<double>(m.steps);
  m.t_mean = tsum / static_cast<double>(m.steps);
  double var = 0;
  for (const TraceRow& r : trace.rows) {
    const double d = r.ctrl_seconds - m.t_mean;
    var += d * d;
  }
  m.t_std = std::sqrt(var / static_cast<double>(m.steps));
  return m;
}

// Near-path states for timing benchmarks: uniform draws from the corridor
// cuboid, sorted by theta so a warm-started controller sees the same kind of
// step-to-step similarity it gets in closed loop.
inline std::vector<ExtendedState> sample_corridor_states(const PathSpec& path,
                                                         const CorridorConfig& cfg, size_t n,
                                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ExtendedState> states;
  states.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const double theta = detail::uniform(rng, 0.0, two_pi);
    const double p_t = detail::uniform(rng, -cfg.half_length, cfg.half_length);
    const double p_n = detail::uniform(rng, -cfg.half_width, cfg.half_width);
    const double p_o = detail::uniform(rng, -cfg.half_height, cfg.half_height);
    const PathPoint pt = eval_path(path, theta);
    const PathFrame f = path_frame(pt.heading);
    states.push_back({pt.x + p_t * f.tx + p_n * f.nx, pt.y + p_t * f.ty + p_n * f.ny,
                      pt.heading + p_o, theta});
  }
  std::sort(states.begin(), states.end(),
            [](const ExtendedState& a, const ExtendedState& b) { return a.theta < b.theta; });
  return states;
}

inline Metrics bench_step_fn(const StepFn& fn, const std::vector<ExtendedState>& states) {
  SimTrace t;
  using clock = std::chrono::steady_clock;
  for (const ExtendedState& z : states) {
    const auto t0 = clock::now();
    const ExtendedInput w = fn(z);
    const auto t1 = clock::now();
    t.rows.push_back({0, z, w, 0, std::chrono::duration<double>(t1 - t0).count()});
  }
  return compute_metrics(t);
}

// --- CSV formats ---

inline void export_trace(const std::string& file, const SimTrace& trace) {
  auto f = detail::open_file(file, "w");
  std::fprintf(f.get(), "t,pathparam,pos-x,pos-y,phi,linvel,angvel,pathvel,err\n");
  for (const TraceRow& r : trace.rows)
    std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t,
                 r.z.theta, r.z.qx, r.z.qy, r.z.phi, r.w.s, r.w.omega, r.w.v, r.err);
}

inline SimTrace import_trace(const std::string& file) {
  auto f = detail::open_file(file, "r");
  SimTrace trace;
  char line[1024];
  bool first = true;
  while (std::fgets(line, sizeof line, f.get())) {
    if (first) {
      first = false;
      if (std::strncmp(line, "t,", 2) == 0) continue;
    }
    double c[9] = {};
    char* p = line;
    for (int i = 0; i < 9; ++i) {
      c[i] = std::strtod(p, &p);
      if (*p == ',') ++p;
    }
    trace.rows.push_back({c[0], {c[2], c[3], c[4], c[1]}, {c[5], c[6], c[7]}, c[8], 0.0});
  }
  return trace;
}

inline void export_path_csv(const std::string& file, const PathSpec& path, int samples = 1000) {
  auto f = detail::open_file(file, "w");
  std::fprintf(f.get(), "pathparam,pos-x,pos-y\n");
  for (int i = 0; i < samples; ++i) {
    const double theta = two_pi * i / (samples - 1);
    const PathPoint pt = eval_path(path, theta);
    std::fprintf(f.get(), "%.17g,%.17g,%.17g\n", theta, pt.x, pt.y);
  }
}

}  // namespace mpfc
