#pragma once

// Small fully connected ReLU network in plain row-major arrays: forward pass,
// parameter counting, MSE, and the versioned text model format (which bundles
// the normalization stats -- the network is meaningless without them).

#include <array>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "mpfc/dataset.hpp"

namespace mpfc {

using MlpArchitecture = std::vector<int>;

// Widths fixed by the application: 4 state inputs, 9 hidden layers, 3 outputs.
inline const MlpArchitecture kDefaultArch{4, 48, 16, 24, 16, 16, 40, 24, 16, 24, 3};

inline long param_count(const MlpArchitecture& arch) {
  long n = 0;
  for (size_t k = 1; k < arch.size(); ++k) n += static_cast<long>(arch[k]) * (1 + arch[k - 1]);
  return n;
}

struct MlpParams {
  MlpArchitecture arch;
  std::vector<std::vector<double>> W;  // layer k: arch[k] x arch[k-1], row-major
  std::vector<std::vector<double>> b;  // layer k: arch[k]
  NormStats stats;
};

inline MlpParams make_zero_params(const MlpArchitecture& arch) {
  MlpParams p;
  p.arch = arch;
  for (size_t k = 1; k < arch.size(); ++k) {
    p.W.emplace_back(static_cast<size_t>(arch[k]) * arch[k - 1], 0.0);
    p.b.emplace_back(arch[k], 0.0);
  }
  return p;
}

// ReLU on hidden layers, identity on the output layer (the regression targets
// are zero-mean normalized commands and must be allowed to go negative).
inline std::vector<double> forward(const MlpParams& p, std::span<const double> input) {
  std::vector<double> h(input.begin(), input.end());
  std::vector<double> next;
  const size_t L = p.W.size();
  for (size_t k = 0; k < L; ++k) {
    const int nk = p.arch[k + 1], np = p.arch[k];
    next.assign(nk, 0.0);
    const double* W = p.W[k].data();
    for (int i = 0; i < nk; ++i) {
      double acc = p.b[k][i];
      const double* row = W + static_cast<size_t>(i) * np;
      for (int j = 0; j < np; ++j) acc += row[j] * h[j];
      next[i] = (k + 1 < L) ? std::max(0.0, acc) : acc;
    }
    h.swap(next);
  }
  return h;
}

inline std::array<double, 3> forward3(const MlpParams& p, const std::array<double, 4>& in) {
  const auto out = forward(p, std::span<const double>(in.data(), 4));
  return {out[0], out[1], out[2]};
}

struct NormalizedSet {
  std::vector<std::array<double, 4>> x;
  std::vector<std::array<double, 3>> y;
};

inline NormalizedSet normalize_set(const TrainingSet& ts, const NormStats& st) {
  NormalizedSet ns;
  ns.x.reserve(ts.size());
  ns.y.reserve(ts.size());
  for (const Sample& s : ts) {
    ns.x.push_back(normalize_state(s.z, st));
    ns.y.push_back(normalize_input(s.w, st));
  }
  return ns;
}

inline double mse(const MlpParams& p, const NormalizedSet& data) {
  double acc = 0;
  for (size_t i = 0; i < data.x.size(); ++i) {
    const auto out = forward3(p, data.x[i]);
    for (int j = 0; j < 3; ++j) {
      const double r = out[j] - data.y[i][j];
      acc += r * r;
    }
  }
  return acc / (static_cast<double>(data.x.size()) * 3.0);
}

// --- model file (text, versioned) ---

inline void save_mlp(const std::string& path, const MlpParams& p) {
  auto f = detail::open_file(path, "w");
  std::fprintf(f.get(), "mpfc-mlp v1\n");
  for (size_t i = 0; i < p.arch.size(); ++i)
    std::fprintf(f.get(), "%d%c", p.arch[i], i + 1 == p.arch.size() ? '\n' : ' ');
  for (int i = 0; i < 7; ++i)
    std::fprintf(f.get(), "%.17g %.17g\n", p.stats.mu[i], p.stats.sigma[i]);
  for (size_t k = 0; k < p.W.size(); ++k) {
    for (size_t i = 0; i < p.b[k].size(); ++i)
      std::fprintf(f.get(), "%.17g%c", p.b[k][i], i + 1 == p.b[k].size() ? '\n' : ' ');
    const int np = p.arch[k];
    for (size_t i = 0; i < p.W[k].size(); ++i)
      std::fprintf(f.get(), "%.17g%c", p.W[k][i], (i + 1) % np == 0 ? '\n' : ' ');
  }
}

inline MlpParams load_mlp(const std::string& path) {
  auto f = detail::open_file(path, "r");
  char header[64];
  if (!std::fgets(header, sizeof header, f.get()) ||
      std::strncmp(header, "mpfc-mlp v1", 11) != 0)
    throw std::runtime_error("not an mpfc-mlp v1 file: " + path);
  char arch_line[1024];
  if (!std::fgets(arch_line, sizeof arch_line, f.get()))
    throw std::runtime_error("truncated model file " + path);
  MlpParams p;
  {
    char* q = arch_line;
    while (*q) {
      char* end = nullptr;
      const long w = std::strtol(q, &end, 10);
      if (end == q) break;
      p.arch.push_back(static_cast<int>(w));
      q = end;
    }
  }
  if (p.arch.size() < 2) throw std::runtime_error("bad architecture in " + path);
  const auto next_double = [&f, &path]() {
    double v = 0;
    if (std::fscanf(f.get(), "%lf", &v) != 1)
      throw std::runtime_error("truncated model file " + path);
    return v;
  };
  for (int i = 0; i < 7; ++i) {
    p.stats.mu[i] = next_double();
    p.stats.sigma[i] = next_double();
  }
  for (size_t k = 1; k < p.arch.size(); ++k) {
    std::vector<double> b(p.arch[k]);
    for (auto& v : b) v = next_double();
    std::vector<double> W(static_cast<size_t>(p.arch[k]) * p.arch[k - 1]);
    for (auto& v : W) v = next_double();
    p.b.push_back(std::move(b));
    p.W.push_back(std::move(W));
  }
  return p;
}

}  // namespace mpfc
