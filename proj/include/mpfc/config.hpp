#pragma once

// Plain-text key=value configuration shared by the CLI subcommands.  One
// setting per line, `#` starts a comment, whitespace around the `=` is
// ignored.  Unknown keys are an error so that typos do not silently fall back
// to defaults.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "mpfc/dataset.hpp"
#include "mpfc/ocp.hpp"
#include "mpfc/sim.hpp"
#include "mpfc/train.hpp"

namespace mpfc {

struct AppConfig {
  OcpConfig ocp;
  CorridorConfig corridor;
  TrainConfig train;
  SimConfig sim;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size())
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + value + "'");
  return v;
}

inline long to_long(const std::string& key, const std::string& value) {
  size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size())
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + value +
                                "'");
  return v;
}

}  // namespace detail

inline void apply_config_entry(AppConfig& cfg, const std::string& key, const std::string& value) {
  using detail::to_double;
  using detail::to_long;
  // OCP / solver
  if (key == "ocp.horizon") cfg.ocp.N = static_cast<int>(to_long(key, value));
  else if (key == "ocp.dt") cfg.ocp.dt = to_double(key, value);
  else if (key == "ocp.v_ref") cfg.ocp.v_ref = to_double(key, value);
  else if (key == "ocp.q0") cfg.ocp.Q[0] = to_double(key, value);
  else if (key == "ocp.q1") cfg.ocp.Q[1] = to_double(key, value);
  else if (key == "ocp.q2") cfg.ocp.Q[2] = to_double(key, value);
  else if (key == "ocp.q3") cfg.ocp.Q[3] = to_double(key, value);
  else if (key == "ocp.r0") cfg.ocp.R[0] = to_double(key, value);
  else if (key == "ocp.r1") cfg.ocp.R[1] = to_double(key, value);
  else if (key == "ocp.r2") cfg.ocp.R[2] = to_double(key, value);
  else if (key == "solver.max_iters") cfg.ocp.solver.max_iters = static_cast<int>(to_long(key, value));
  else if (key == "solver.max_iters_warm")
    cfg.ocp.solver.max_iters_warm = static_cast<int>(to_long(key, value));
  else if (key == "solver.grad_tol") cfg.ocp.solver.grad_tol = to_double(key, value);
  else if (key == "solver.precondition")
    cfg.ocp.solver.precondition = to_long(key, value) != 0;
  // Corridor / dataset
  else if (key == "corridor.n_theta") cfg.corridor.n_theta = static_cast<int>(to_long(key, value));
  else if (key == "corridor.half_length") cfg.corridor.half_length = to_double(key, value);
  else if (key == "corridor.half_width") cfg.corridor.half_width = to_double(key, value);
  else if (key == "corridor.half_height") cfg.corridor.half_height = to_double(key, value);
  else if (key == "corridor.n_l") cfg.corridor.n_l = static_cast<int>(to_long(key, value));
  else if (key == "corridor.n_w") cfg.corridor.n_w = static_cast<int>(to_long(key, value));
  else if (key == "corridor.n_h") cfg.corridor.n_h = static_cast<int>(to_long(key, value));
  // Training
  else if (key == "train.lr") cfg.train.lr = to_double(key, value);
  else if (key == "train.batch") cfg.train.batch = static_cast<int>(to_long(key, value));
  else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(to_long(key, value));
  else if (key == "train.seed") cfg.train.seed = static_cast<std::uint64_t>(to_long(key, value));
  else if (key == "train.val_split") cfg.train.val_split = to_double(key, value);
  // Simulation
  else if (key == "sim.dt") cfg.sim.dt = to_double(key, value);
  else if (key == "sim.laps") cfg.sim.laps = static_cast<int>(to_long(key, value));
  else if (key == "sim.theta0") cfg.sim.theta0 = to_double(key, value);
  else if (key == "sim.offset_t") cfg.sim.offset_t = to_double(key, value);
  else if (key == "sim.offset_n") cfg.sim.offset_n = to_double(key, value);
  else if (key == "sim.offset_phi") cfg.sim.offset_phi = to_double(key, value);
  else if (key == "sim.v_ref") cfg.sim.v_ref = to_double(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline void load_config_file(AppConfig& cfg, const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("config: cannot open '" + file + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: " + file + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    apply_config_entry(cfg, key, value);
  }
}

}  // namespace mpfc
