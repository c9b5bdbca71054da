#pragma once

// From-scratch mini-batch Adam training of the MLP on the normalized corridor
// dataset. All randomness (init, split, shuffles) comes from one seeded
// generator through hand-rolled draws, so results are reproducible bit for
// bit regardless of standard-library internals.

#include <cstdint>
#include <limits>
#include <random>

#include "mpfc/mlp.hpp"
#include "mpfc/rng.hpp"

namespace mpfc {

struct TrainConfig {
  double lr = 4.5e-4;
  int batch = 1024;
  int epochs = 30;
  std::uint64_t seed = 1;
  double val_split = 0.05;  // fraction held out for validation
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainLog {
  double best_val_mse = 0;
  int best_epoch = -1;
  double final_train_mse = 0;
};

namespace detail {

struct LayerGrads {
  std::vector<std::vector<double>> W, b;
};

inline LayerGrads make_grads(const MlpArchitecture& arch) {
  LayerGrads g;
  for (size_t k = 1; k < arch.size(); ++k) {
    g.W.emplace_back(static_cast<size_t>(arch[k]) * arch[k - 1], 0.0);
    g.b.emplace_back(arch[k], 0.0);
  }
  return g;
}

}  // namespace detail

inline MlpParams init_params(const MlpArchitecture& arch, const NormStats& stats,
                             std::mt19937_64& rng) {
  MlpParams p = make_zero_params(arch);
  p.stats = stats;
  for (size_t k = 0; k < p.W.size(); ++k) {
    const double limit = std::sqrt(6.0 / arch[k]);  // He-uniform, fan-in scaled
    for (auto& w : p.W[k]) w = (2.0 * detail::uniform01(rng) - 1.0) * limit;
  }
  return p;
}

// Accumulates d(MSE)/d(params) over the given sample indices into `g`
// (pre-zeroed by the caller); the MSE denominator is count*3.
inline void accumulate_mse_gradient(const MlpParams& p, const NormalizedSet& data,
                                    std::span<const size_t> idx, detail::LayerGrads& g) {
  const size_t L = p.W.size();
  std::vector<std::vector<double>> act(L + 1);
  std::vector<double> delta, delta_prev;
  const double scale = 2.0 / (static_cast<double>(idx.size()) * 3.0);
  for (const size_t si : idx) {
    act[0].assign(data.x[si].begin(), data.x[si].end());
    for (size_t k = 0; k < L; ++k) {
      const int nk = p.arch[k + 1], np = p.arch[k];
      act[k + 1].assign(nk, 0.0);
      const double* W = p.W[k].data();
      for (int i = 0; i < nk; ++i) {
        double acc = p.b[k][i];
        const double* row = W + static_cast<size_t>(i) * np;
        for (int j = 0; j < np; ++j) acc += row[j] * act[k][j];
        act[k + 1][i] = (k + 1 < L) ? std::max(0.0, acc) : acc;
      }
    }
    delta.assign(p.arch.back(), 0.0);
    for (int j = 0; j < 3; ++j) delta[j] = scale * (act[L][j] - data.y[si][j]);
    for (size_t k = L; k-- > 0;) {
      const int nk = p.arch[k + 1], np = p.arch[k];
      double* gW = g.W[k].data();
      const double* W = p.W[k].data();
      delta_prev.assign(np, 0.0);
      for (int i = 0; i < nk; ++i) {
        const double d = delta[i];
        if (d == 0.0) continue;
        g.b[k][i] += d;
        double* grow = gW + static_cast<size_t>(i) * np;
        const double* row = W + static_cast<size_t>(i) * np;
        for (int j = 0; j < np; ++j) {
          grow[j] += d * act[k][j];
          delta_prev[j] += d * row[j];
        }
      }
      if (k > 0)
        for (int j = 0; j < np; ++j)
          if (act[k][j] <= 0.0) delta_prev[j] = 0.0;  // ReLU gate
      delta.swap(delta_prev);
    }
  }
}

inline MlpParams train(const TrainingSet& ts, const NormStats& stats,
                       const MlpArchitecture& arch, const TrainConfig& cfg,
                       TrainLog* log = nullptr,
                       const std::function<void(int, double, double)>& per_epoch = {}) {
  const NormalizedSet data = normalize_set(ts, stats);
  const size_t n = data.x.size();
  if (n == 0) throw std::invalid_argument("train: empty dataset");

  std::mt19937_64 rng(cfg.seed);
  MlpParams p = init_params(arch, stats, rng);

  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  detail::shuffle_indices(idx, rng);
  const size_t n_val = std::min(n - 1, static_cast<size_t>(cfg.val_split * n));
  const size_t n_train = n - n_val;
  std::vector<size_t> train_idx(idx.begin(), idx.begin() + n_train);
  std::vector<size_t> val_idx(idx.begin() + n_train, idx.end());

  NormalizedSet val;
  for (size_t i : val_idx) {
    val.x.push_back(data.x[i]);
    val.y.push_back(data.y[i]);
  }

  detail::LayerGrads g = detail::make_grads(arch);
  detail::LayerGrads m = detail::make_grads(arch);
  detail::LayerGrads v = detail::make_grads(arch);
  long step = 0;
  MlpParams best = p;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::shuffle_indices(train_idx, rng);
    for (size_t start = 0; start < n_train; start += cfg.batch) {
      const size_t count = std::min<size_t>(cfg.batch, n_train - start);
      for (auto& gk : g.W) std::fill(gk.begin(), gk.end(), 0.0);
      for (auto& gk : g.b) std::fill(gk.begin(), gk.end(), 0.0);
      accumulate_mse_gradient(p, data, {train_idx.data() + start, count}, g);
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, step);
      const double c2 = 1.0 - std::pow(cfg.beta2, step);
      for (size_t k = 0; k < p.W.size(); ++k) {
        auto adam = [&](std::vector<double>& theta, const std::vector<double>& grad,
                        std::vector<double>& mk, std::vector<double>& vk) {
          for (size_t i = 0; i < theta.size(); ++i) {
            mk[i] = cfg.beta1 * mk[i] + (1 - cfg.beta1) * grad[i];
            vk[i] = cfg.beta2 * vk[i] + (1 - cfg.beta2) * grad[i] * grad[i];
            theta[i] -= cfg.lr * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + cfg.eps);
          }
        };
        adam(p.W[k], g.W[k], m.W[k], v.W[k]);
        adam(p.b[k], g.b[k], m.b[k], v.b[k]);
      }
    }
    double val_mse = 0;
    if (!val.x.empty()) {
      val_mse = mse(p, val);
      if (!std::isfinite(val_mse)) throw std::runtime_error("train: non-finite validation loss");
      if (val_mse < best_val) {
        best_val = val_mse;
        best = p;
        best_epoch = epoch;
      }
    } else {
      best = p;
      best_epoch = epoch;
    }
    if (per_epoch) per_epoch(epoch, val_mse, 0.0);
  }

  if (log) {
    NormalizedSet tr;
    for (size_t i : train_idx) {
      tr.x.push_back(data.x[i]);
      tr.y.push_back(data.y[i]);
    }
    log->final_train_mse = mse(best, tr);
    log->best_val_mse = val.x.empty() ? log->final_train_mse : best_val;
    log->best_epoch = best_epoch;
  }
  return best;
}

}  // namespace mpfc
