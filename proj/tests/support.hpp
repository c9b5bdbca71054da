#pragma once

// Shared helpers for the test suite: temp-file paths, an independent
// finite-difference gradient, and a float-arithmetic simulation of the
// integer inference kernel used as a bit-exactness oracle.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mpfc/mpfc.hpp"

namespace support {

inline std::string tmp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "mpfc-tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

inline std::vector<double> fd_gradient(const mpfc::PathSpec& path, const mpfc::ExtendedState& z0,
                                       const std::vector<mpfc::ExtendedInput>& seq,
                                       const mpfc::OcpConfig& cfg, double h = 1e-6) {
  std::vector<double> g(3 * seq.size());
  auto component = [](mpfc::ExtendedInput& w, int j) -> double& {
    return j == 0 ? w.s : (j == 1 ? w.omega : w.v);
  };
  for (size_t k = 0; k < seq.size(); ++k) {
    for (int j = 0; j < 3; ++j) {
      std::vector<mpfc::ExtendedInput> plus = seq, minus = seq;
      component(plus[k], j) += h;
      component(minus[k], j) -= h;
      g[3 * k + j] = (mpfc::rollout_cost(path, z0, plus, cfg) -
                      mpfc::rollout_cost(path, z0, minus, cfg)) /
                     (2 * h);
    }
  }
  return g;
}

// Float-arithmetic walk through the integer kernel: every intermediate is an
// integer small enough to be exact in a double, and the rounding points are
// the same, so results must agree with quantized_forward bit for bit.
inline std::array<double, 3> fake_quant_forward(const mpfc::QuantizedMlp& q,
                                                const std::array<double, 4>& x) {
  const size_t L = q.W.size();
  std::vector<double> h(4), next;
  for (int i = 0; i < 4; ++i) {
    const double v = std::lround(x[i] / q.input_qp.scale) + q.input_qp.zero_point;
    h[i] = std::clamp(v, -128.0, 127.0);
  }
  double in_zp = q.input_qp.zero_point;
  double s_in = q.input_qp.scale;
  for (size_t k = 0; k < L; ++k) {
    const int nk = q.arch[k + 1], np = q.arch[k];
    const double w_zp = q.weight_qp[k].zero_point;
    const double mult = s_in * q.weight_qp[k].scale / q.act_qp[k].scale;
    const double a_zp = q.act_qp[k].zero_point;
    next.assign(nk, 0.0);
    for (int i = 0; i < nk; ++i) {
      double acc = q.b[k][i];
      for (int j = 0; j < np; ++j)
        acc += (h[j] - in_zp) * (q.W[k][static_cast<size_t>(i) * np + j] - w_zp);
      double y = static_cast<double>(std::lround(acc * mult)) + a_zp;
      if (k + 1 < L && y < a_zp) y = a_zp;
      next[i] = std::clamp(y, -128.0, 127.0);
    }
    h.swap(next);
    in_zp = a_zp;
    s_in = q.act_qp[k].scale;
  }
  const auto deq = [&](double v) { return (v - q.output_qp.zero_point) * q.output_qp.scale; };
  return {deq(h[0]), deq(h[1]), deq(h[2])};
}

inline std::vector<mpfc::ExtendedInput> random_sequence(std::mt19937_64& rng, int n) {
  std::vector<mpfc::ExtendedInput> seq(n);
  for (auto& w : seq) {
    w.s = mpfc::detail::uniform(rng, mpfc::kInputLo.s, mpfc::kInputHi.s);
    w.omega = mpfc::detail::uniform(rng, mpfc::kInputLo.omega, mpfc::kInputHi.omega);
    w.v = mpfc::detail::uniform(rng, mpfc::kInputLo.v, mpfc::kInputHi.v);
  }
  return seq;
}

inline mpfc::ExtendedState random_near_path_state(std::mt19937_64& rng,
                                                  const mpfc::PathSpec& path) {
  const double theta = mpfc::detail::uniform(rng, 0.0, mpfc::two_pi);
  const mpfc::PathPoint pt = mpfc::eval_path(path, theta);
  const mpfc::PathFrame f = mpfc::path_frame(pt.heading);
  const double p_t = mpfc::detail::uniform(rng, -0.1, 0.1);
  const double p_n = mpfc::detail::uniform(rng, -0.01, 0.01);
  const double p_o = mpfc::detail::uniform(rng, -1.0, 1.0);
  return {pt.x + p_t * f.tx + p_n * f.nx, pt.y + p_t * f.ty + p_n * f.ny, pt.heading + p_o,
          theta};
}

// A tiny but non-degenerate training set: near-path states labeled with
// clamped reference inputs. Cheap enough for file-format and training tests.
inline mpfc::TrainingSet toy_training_set(size_t n, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const mpfc::PathSpec path;
  mpfc::TrainingSet ts;
  ts.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const mpfc::ExtendedState z = random_near_path_state(rng, path);
    double s_r = 0, w_r = 0;
    const double v = mpfc::detail::uniform(rng, 0.0, 0.15);
    mpfc::reference_inputs(path, z.theta, v, s_r, w_r);
    ts.push_back({z, mpfc::clamp_box({s_r, w_r, v})});
  }
  return ts;
}

}  // namespace support
