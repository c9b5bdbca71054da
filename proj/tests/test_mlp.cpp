#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace mpfc;

TEST_CASE("param_count evaluates the layer-sum formula") {
  CHECK(param_count(kDefaultArch) == 4651);
  CHECK(param_count({1, 1}) == 2);
  CHECK(param_count({4, 8, 3}) == 67);
}

TEST_CASE("zero-weight network emits its output bias") {
  MlpParams p = make_zero_params({4, 5, 3});
  p.b.back() = {0.1, -0.2, 0.3};
  const auto y = forward3(p, {0.4, -1.0, 2.0, 0.7});
  CHECK_THAT(y[0], WithinAbs(0.1, 1e-15));
  CHECK_THAT(y[1], WithinAbs(-0.2, 1e-15));
  CHECK_THAT(y[2], WithinAbs(0.3, 1e-15));
}

TEST_CASE("ReLU gates negative preactivations") {
  MlpParams p = make_zero_params({1, 1, 1});
  p.W[0] = {1.0};
  p.b[0] = {-1.0};
  p.W[1] = {1.0};
  p.b[1] = {0.0};
  const auto y = forward(p, std::array<double, 1>{0.5});
  CHECK(y[0] == 0.0);  // hidden = max(0, 0.5 - 1) = 0
  const auto y2 = forward(p, std::array<double, 1>{2.0});
  CHECK_THAT(y2[0], WithinAbs(1.0, 1e-15));
}

TEST_CASE("forward matches a naive matrix-multiply oracle") {
  std::mt19937_64 rng(71);
  const MlpArchitecture arch{4, 7, 5, 3};
  MlpParams p = init_params(arch, {}, rng);
  for (auto& bk : p.b)
    for (auto& b : bk) b = detail::uniform(rng, -0.5, 0.5);

  for (int trial = 0; trial < 20; ++trial) {
    std::array<double, 4> x;
    for (auto& xi : x) xi = detail::uniform(rng, -2.0, 2.0);

    std::vector<double> h(x.begin(), x.end());
    for (size_t k = 0; k < p.W.size(); ++k) {
      std::vector<double> out(arch[k + 1]);
      for (int i = 0; i < arch[k + 1]; ++i) {
        double acc = p.b[k][i];
        for (int j = 0; j < arch[k]; ++j) acc += p.W[k][i * arch[k] + j] * h[j];
        out[i] = (k + 1 < p.W.size() && acc < 0) ? 0.0 : acc;
      }
      h = out;
    }
    const auto got = forward3(p, x);
    for (int i = 0; i < 3; ++i) CHECK_THAT(got[i], WithinAbs(h[i], 1e-12));
  }
}

TEST_CASE("forward composes layers with ReLU between them") {
  std::mt19937_64 rng(73);
  MlpParams p = init_params({4, 6, 3}, {}, rng);
  for (auto& bk : p.b)
    for (auto& b : bk) b = detail::uniform(rng, -0.4, 0.4);
  // split into the hidden affine map and the output affine map
  MlpParams head = make_zero_params({4, 6});
  head.W[0] = p.W[0];
  head.b[0] = p.b[0];
  MlpParams tail = make_zero_params({6, 3});
  tail.W[0] = p.W[1];
  tail.b[0] = p.b[1];
  for (int trial = 0; trial < 10; ++trial) {
    std::array<double, 4> x;
    for (auto& xi : x) xi = detail::uniform(rng, -3.0, 3.0);
    std::vector<double> hidden = forward(head, x);  // single-layer net: affine, no ReLU
    bool saw_negative_preact = false;
    for (double& a : hidden) {
      if (a < 0) saw_negative_preact = true;
      a = std::max(0.0, a);
    }
    const auto via_slices = forward(tail, hidden);
    const auto direct = forward3(p, x);
    for (int i = 0; i < 3; ++i) CHECK_THAT(direct[i], WithinAbs(via_slices[i], 1e-12));
    (void)saw_negative_preact;
  }
}

TEST_CASE("backprop gradient matches central finite differences on a tiny net") {
  std::mt19937_64 rng(79);
  const MlpArchitecture arch{4, 3, 3};
  MlpParams p = init_params(arch, {}, rng);
  for (auto& bk : p.b)
    for (auto& b : bk) b = detail::uniform(rng, -0.3, 0.3);

  NormalizedSet data;
  for (int i = 0; i < 6; ++i) {
    std::array<double, 4> x;
    for (auto& xi : x) xi = detail::uniform(rng, -1.0, 1.0);
    std::array<double, 3> y;
    for (auto& yi : y) yi = detail::uniform(rng, -1.0, 1.0);
    data.x.push_back(x);
    data.y.push_back(y);
  }
  std::vector<size_t> idx(data.x.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  detail::LayerGrads g = detail::make_grads(arch);
  accumulate_mse_gradient(p, data, idx, g);

  const double h = 1e-6;
  auto fd_check = [&](std::vector<double>& theta, const std::vector<double>& grad) {
    for (size_t i = 0; i < theta.size(); ++i) {
      const double keep = theta[i];
      theta[i] = keep + h;
      const double up = mse(p, data);
      theta[i] = keep - h;
      const double dn = mse(p, data);
      theta[i] = keep;
      const double fd = (up - dn) / (2 * h);
      CHECK_THAT(grad[i], WithinAbs(fd, 1e-4 * std::max(1.0, std::abs(fd))));
    }
  };
  for (size_t k = 0; k < p.W.size(); ++k) {
    fd_check(p.W[k], g.W[k]);
    fd_check(p.b[k], g.b[k]);
  }
}

TEST_CASE("training memorizes a 32-sample toy set") {
  const TrainingSet ts = support::toy_training_set(32);
  const NormStats st = compute_stats(ts);
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.batch = 32;
  cfg.epochs = 4000;
  cfg.val_split = 0.0;  // keep every sample in the training partition
  TrainLog log;
  const MlpParams p = train(ts, st, {4, 32, 32, 3}, cfg, &log);
  CHECK(log.final_train_mse <= 1e-4);
  CHECK(mse(p, normalize_set(ts, st)) <= 1e-4);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const TrainingSet ts = support::toy_training_set(128);
  const NormStats st = compute_stats(ts);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 32;
  const MlpParams a = train(ts, st, {4, 8, 3}, cfg);
  const MlpParams b = train(ts, st, {4, 8, 3}, cfg);
  REQUIRE(a.W.size() == b.W.size());
  for (size_t k = 0; k < a.W.size(); ++k) {
    REQUIRE(a.W[k] == b.W[k]);
    REQUIRE(a.b[k] == b.b[k]);
  }
}

TEST_CASE("mse semantics") {
  std::mt19937_64 rng(83);
  MlpParams p = init_params({4, 5, 3}, {}, rng);

  NormalizedSet data;
  for (int i = 0; i < 40; ++i) {
    std::array<double, 4> x;
    for (auto& xi : x) xi = detail::uniform(rng, -1.5, 1.5);
    data.x.push_back(x);
    data.y.push_back(forward3(p, x));
  }
  SECTION("exact predictions give zero") { CHECK(mse(p, data) == 0.0); }

  SECTION("matches a naive two-loop oracle") {
    for (auto& y : data.y) y[1] += 0.25;  // create a residual
    double acc = 0;
    for (size_t i = 0; i < data.x.size(); ++i) {
      const auto out = forward3(p, data.x[i]);
      for (int j = 0; j < 3; ++j) acc += (out[j] - data.y[i][j]) * (out[j] - data.y[i][j]);
    }
    CHECK_THAT(mse(p, data), WithinAbs(acc / (3.0 * data.x.size()), 1e-10));
  }

  SECTION("zero net scores ~1 on unit-variance labels") {
    const TrainingSet ts = support::toy_training_set(600);
    const NormStats st = compute_stats(ts);
    const NormalizedSet norm = normalize_set(ts, st);
    const MlpParams zero = make_zero_params({4, 4, 3});
    CHECK_THAT(mse(zero, norm), WithinAbs(1.0, 0.05));
  }
}

TEST_CASE("output is affine within a fixed activation pattern") {
  std::mt19937_64 rng(89);
  MlpParams p = init_params({4, 10, 8, 3}, {}, rng);
  for (auto& bk : p.b)
    for (auto& b : bk) b = detail::uniform(rng, -0.2, 0.2);
  int checked = 0;
  for (int trial = 0; trial < 50 && checked < 10; ++trial) {
    std::array<double, 4> x0, d;
    for (auto& xi : x0) xi = detail::uniform(rng, -1.0, 1.0);
    for (auto& di : d) di = detail::uniform(rng, -1.0, 1.0);
    const double eps = 1e-5;
    auto at = [&](double t) {
      std::array<double, 4> x;
      for (int i = 0; i < 4; ++i) x[i] = x0[i] + t * d[i];
      return forward3(p, x);
    };
    const auto f0 = at(0), f1 = at(eps), f2 = at(2 * eps);
    bool collinear = true;
    for (int i = 0; i < 3; ++i)
      if (std::abs(f2[i] - 2 * f1[i] + f0[i]) > 1e-9) collinear = false;
    if (collinear) ++checked;  // segments crossing a ReLU kink are skipped
  }
  CHECK(checked == 10);
}

TEST_CASE("model file roundtrips bit-exactly") {
  const TrainingSet ts = support::toy_training_set(64);
  const NormStats st = compute_stats(ts);
  std::mt19937_64 rng(97);
  MlpParams p = init_params(kDefaultArch, st, rng);
  for (auto& bk : p.b)
    for (auto& b : bk) b = detail::uniform(rng, -0.4, 0.4);

  const std::string file = support::tmp_path("model.txt");
  save_mlp(file, p);
  const MlpParams back = load_mlp(file);
  REQUIRE(back.arch == p.arch);
  for (size_t k = 0; k < p.W.size(); ++k) {
    REQUIRE(back.W[k] == p.W[k]);
    REQUIRE(back.b[k] == p.b[k]);
  }
  REQUIRE(back.stats.mu == p.stats.mu);
  REQUIRE(back.stats.sigma == p.stats.sigma);

  std::ifstream in(file);
  std::string header;
  std::getline(in, header);
  CHECK(header == "mpfc-mlp v1");
}
