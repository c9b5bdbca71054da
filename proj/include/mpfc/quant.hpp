#pragma once

// Post-training uniform asymmetric int8 quantization of the MLP plus an
// integer-arithmetic inference kernel. One scale/zero-point pair per tensor;
// biases are 32-bit integers at scale (input_scale * weight_scale); rounding
// is half-away-from-zero everywhere, saturating casts.

#include <cstdint>
#include <span>

#include "mpfc/mlp.hpp"

namespace mpfc {

struct QuantParams {
  double scale = 1.0;
  int zero_point = 0;  // int8 range
};

// Range is widened to include 0 so the real zero is exactly representable.
inline QuantParams choose_qparams(double lo, double hi) {
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  QuantParams qp;
  qp.scale = std::max((hi - lo) / 255.0, 1e-12);
  qp.zero_point =
      static_cast<int>(std::clamp<long>(std::lround(-128.0 - lo / qp.scale), -128, 127));
  return qp;
}

inline int8_t quantize_value(double x, const QuantParams& qp) {
  const long q = std::lround(x / qp.scale) + qp.zero_point;
  return static_cast<int8_t>(std::clamp<long>(q, -128, 127));
}

inline double dequantize_value(int q, const QuantParams& qp) {
  return (q - qp.zero_point) * qp.scale;
}

struct QuantizedMlp {
  MlpArchitecture arch;
  NormStats stats;
  QuantParams input_qp;
  QuantParams output_qp;  // equals act_qp.back()
  std::vector<QuantParams> weight_qp;           // per layer
  std::vector<QuantParams> act_qp;              // per layer, output side
  std::vector<std::vector<int8_t>> W;           // per layer, row-major
  std::vector<std::vector<int32_t>> b;          // per layer

  long weight_blob_bytes() const { return param_count(arch); }  // 1 byte per parameter
};

inline QuantizedMlp quantize_model(const MlpParams& p,
                                   const std::vector<std::array<double, 4>>& calibration) {
  if (calibration.empty()) throw std::invalid_argument("quantize_model: empty calibration set");
  QuantizedMlp q;
  q.arch = p.arch;
  q.stats = p.stats;
  const size_t L = p.W.size();

  // Observed ranges (zero-anchored): network input and every layer output
  // over the calibration set.
  double in_lo = 0, in_hi = 0;
  std::vector<double> act_lo(L, 0.0), act_hi(L, 0.0);
  std::vector<double> h, next;
  for (const auto& x : calibration) {
    for (double xi : x) {
      in_lo = std::min(in_lo, xi);
      in_hi = std::max(in_hi, xi);
    }
    h.assign(x.begin(), x.end());
    for (size_t k = 0; k < L; ++k) {
      const int nk = p.arch[k + 1], np = p.arch[k];
      next.assign(nk, 0.0);
      for (int i = 0; i < nk; ++i) {
        double acc = p.b[k][i];
        const double* row = p.W[k].data() + static_cast<size_t>(i) * np;
        for (int j = 0; j < np; ++j) acc += row[j] * h[j];
        next[i] = (k + 1 < L) ? std::max(0.0, acc) : acc;
      }
      for (double hv : next) {
        act_lo[k] = std::min(act_lo[k], hv);
        act_hi[k] = std::max(act_hi[k], hv);
      }
      h.swap(next);
    }
  }
  q.input_qp = choose_qparams(in_lo, in_hi);

  for (size_t k = 0; k < L; ++k) {
    double w_lo = 0, w_hi = 0;
    for (double w : p.W[k]) {
      w_lo = std::min(w_lo, w);
      w_hi = std::max(w_hi, w);
    }
    q.weight_qp.push_back(choose_qparams(w_lo, w_hi));
    q.act_qp.push_back(choose_qparams(act_lo[k], act_hi[k]));

    std::vector<int8_t> Wq(p.W[k].size());
    for (size_t i = 0; i < Wq.size(); ++i) Wq[i] = quantize_value(p.W[k][i], q.weight_qp[k]);
    q.W.push_back(std::move(Wq));

    const double s_in = k == 0 ? q.input_qp.scale : q.act_qp[k - 1].scale;
    const double s_b = s_in * q.weight_qp[k].scale;
    std::vector<int32_t> bq(p.b[k].size());
    for (size_t i = 0; i < bq.size(); ++i) {
      const long long v = std::llround(p.b[k][i] / s_b);
      bq[i] = static_cast<int32_t>(std::clamp<long long>(v, INT32_MIN, INT32_MAX));
    }
    q.b.push_back(std::move(bq));
  }
  q.output_qp = q.act_qp.back();
  return q;
}

// Integer inference: int8 tensors, int32 accumulators, one real-valued
// requantization multiplier per layer, ReLU fused as a clamp at the
// activation zero point. Worst case |acc| <= 48*255*255 + |bias| < 2^31.
inline std::array<double, 3> quantized_forward(const QuantizedMlp& q,
                                               const std::array<double, 4>& z_norm) {
  const size_t L = q.W.size();
  std::vector<int> h(4), next;
  for (int i = 0; i < 4; ++i) h[i] = quantize_value(z_norm[i], q.input_qp);

  int in_zp = q.input_qp.zero_point;
  double s_in = q.input_qp.scale;
  for (size_t k = 0; k < L; ++k) {
    const int nk = q.arch[k + 1], np = q.arch[k];
    const QuantParams& wq = q.weight_qp[k];
    const QuantParams& aq = q.act_qp[k];
    const double mult = s_in * wq.scale / aq.scale;
    next.assign(nk, 0);
    for (int i = 0; i < nk; ++i) {
      int32_t acc = q.b[k][i];
      const int8_t* row = q.W[k].data() + static_cast<size_t>(i) * np;
      for (int j = 0; j < np; ++j)
        acc += (h[j] - in_zp) * (static_cast<int>(row[j]) - wq.zero_point);
      long y = std::lround(acc * mult) + aq.zero_point;
      if (k + 1 < L && y < aq.zero_point) y = aq.zero_point;  // ReLU
      next[i] = static_cast<int>(std::clamp<long>(y, -128, 127));
    }
    h.swap(next);
    in_zp = aq.zero_point;
    s_in = aq.scale;
  }
  return {dequantize_value(h[0], q.output_qp), dequantize_value(h[1], q.output_qp),
          dequantize_value(h[2], q.output_qp)};
}

inline double quantized_mse(const QuantizedMlp& q, const NormalizedSet& data) {
  double acc = 0;
  for (size_t i = 0; i < data.x.size(); ++i) {
    const auto out = quantized_forward(q, data.x[i]);
    for (int j = 0; j < 3; ++j) {
      const double r = out[j] - data.y[i][j];
      acc += r * r;
    }
  }
  return acc / (static_cast<double>(data.x.size()) * 3.0);
}

// --- model file (binary, little-endian) ---
// Layout: magic "MPFCQN1\0" | u32 width-count | u32 widths[] | f64 mu[7] |
// f64 sigma[7] | input (f64 scale, i32 zp) | output (f64 scale, i32 zp) |
// per layer: weight (f64, i32), activation (f64, i32), i8 weights[n_k*n_{k-1}]
// row-major, i32 biases[n_k].

inline constexpr char kQuantMagic[8] = {'M', 'P', 'F', 'C', 'Q', 'N', '1', '\0'};

namespace detail {
inline void write_qp(std::FILE* f, const QuantParams& qp) {
  std::fwrite(&qp.scale, sizeof(double), 1, f);
  const int32_t zp = qp.zero_point;
  std::fwrite(&zp, sizeof zp, 1, f);
}
inline QuantParams read_qp(std::FILE* f, const std::string& path) {
  QuantParams qp;
  int32_t zp = 0;
  if (std::fread(&qp.scale, sizeof(double), 1, f) != 1 || std::fread(&zp, sizeof zp, 1, f) != 1)
    throw std::runtime_error("truncated quantized model " + path);
  qp.zero_point = zp;
  return qp;
}
}  // namespace detail

inline void save_quantized(const std::string& path, const QuantizedMlp& q) {
  static_assert(std::endian::native == std::endian::little, "format is little-endian");
  auto f = detail::open_file(path, "wb");
  std::fwrite(kQuantMagic, 1, 8, f.get());
  const uint32_t nw = static_cast<uint32_t>(q.arch.size());
  std::fwrite(&nw, sizeof nw, 1, f.get());
  for (int w : q.arch) {
    const uint32_t u = static_cast<uint32_t>(w);
    std::fwrite(&u, sizeof u, 1, f.get());
  }
  std::fwrite(q.stats.mu.data(), sizeof(double), 7, f.get());
  std::fwrite(q.stats.sigma.data(), sizeof(double), 7, f.get());
  detail::write_qp(f.get(), q.input_qp);
  detail::write_qp(f.get(), q.output_qp);
  for (size_t k = 0; k < q.W.size(); ++k) {
    detail::write_qp(f.get(), q.weight_qp[k]);
    detail::write_qp(f.get(), q.act_qp[k]);
    std::fwrite(q.W[k].data(), 1, q.W[k].size(), f.get());
    std::fwrite(q.b[k].data(), sizeof(int32_t), q.b[k].size(), f.get());
  }
}

inline QuantizedMlp load_quantized(const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "format is little-endian");
  auto f = detail::open_file(path, "rb");
  char magic[8];
  if (std::fread(magic, 1, 8, f.get()) != 8 || std::memcmp(magic, kQuantMagic, 8) != 0)
    throw std::runtime_error("bad quantized-model magic in " + path);
  uint32_t nw = 0;
  if (std::fread(&nw, sizeof nw, 1, f.get()) != 1 || nw < 2 || nw > 64)
    throw std::runtime_error("bad architecture in " + path);
  QuantizedMlp q;
  for (uint32_t i = 0; i < nw; ++i) {
    uint32_t u = 0;
    if (std::fread(&u, sizeof u, 1, f.get()) != 1)
      throw std::runtime_error("truncated quantized model " + path);
    q.arch.push_back(static_cast<int>(u));
  }
  if (std::fread(q.stats.mu.data(), sizeof(double), 7, f.get()) != 7 ||
      std::fread(q.stats.sigma.data(), sizeof(double), 7, f.get()) != 7)
    throw std::runtime_error("truncated quantized model " + path);
  q.input_qp = detail::read_qp(f.get(), path);
  q.output_qp = detail::read_qp(f.get(), path);
  for (size_t k = 1; k < q.arch.size(); ++k) {
    q.weight_qp.push_back(detail::read_qp(f.get(), path));
    q.act_qp.push_back(detail::read_qp(f.get(), path));
    std::vector<int8_t> W(static_cast<size_t>(q.arch[k]) * q.arch[k - 1]);
    std::vector<int32_t> b(q.arch[k]);
    if (std::fread(W.data(), 1, W.size(), f.get()) != W.size() ||
        std::fread(b.data(), sizeof(int32_t), b.size(), f.get()) != b.size())
      throw std::runtime_error("truncated quantized model " + path);
    q.W.push_back(std::move(W));
    q.b.push_back(std::move(b));
  }
  return q;
}

}  // namespace mpfc
