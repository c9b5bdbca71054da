#pragma once

// The four runtime controllers behind one shape: exact receding-horizon MPFC
// (see ocp.hpp), the float network (DNN), the quantized network (QDNN), and
// QDNN plus a proportional compensator on the tangential/normal path error.

#include "mpfc/ocp.hpp"
#include "mpfc/quant.hpp"

namespace mpfc {

struct PGains {
  // Tuned by tools/gain_search.sh (grid search minimizing max lap error of the
  // compensated quantized net). At dt = 10 ms a tangential gain of -100 puts
  // the error loop near deadbeat; pushing further flattens out and eventually
  // chatters against the input box.
  double p_t = -100.0;
  double p_n = -30.0;
};

inline ExtendedInput clamp_box(const ExtendedInput& w, const ExtendedInput& lo = kInputLo,
                               const ExtendedInput& hi = kInputHi) {
  return {std::clamp(w.s, lo.s, hi.s), std::clamp(w.omega, lo.omega, hi.omega),
          std::clamp(w.v, lo.v, hi.v)};
}

inline ExtendedInput dnn_step(const ExtendedState& z, const MlpParams& model) {
  const auto out = forward3(model, normalize_state(z, model.stats));
  return clamp_box(denormalize_input(out, model.stats));
}

inline ExtendedInput qdnn_step(const ExtendedState& z, const QuantizedMlp& model) {
  const auto out = quantized_forward(model, normalize_state(z, model.stats));
  return clamp_box(denormalize_input(out, model.stats));
}

inline ExtendedInput p_compensation(const PathSpec& path, const ExtendedState& z,
                                    const PGains& gains) {
  const PathError e = error_components(path, z.qx, z.qy, z.theta);
  return {gains.p_t * e.e_t, gains.p_n * e.e_n, 0.0};
}

inline ExtendedInput qdnn_p_step(const PathSpec& path, const ExtendedState& z,
                                 const QuantizedMlp& model, const PGains& gains) {
  const ExtendedInput wd = qdnn_step(z, model);
  const ExtendedInput wp = p_compensation(path, z, gains);
  return clamp_box({wd.s + wp.s, wd.omega + wp.omega, wd.v + wp.v});
}

}  // namespace mpfc
