#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using Catch::Matchers::WithinAbs;
using namespace mpfc;

namespace {
const PathSpec kPath;

Sample constant_sample(double c) {
  return {{c, c, c, c}, {c, c, c}};
}
}  // namespace

TEST_CASE("corridor_points counts") {
  CorridorConfig planar;
  planar.n_l = 3;
  planar.n_w = 3;
  planar.n_h = 1;
  CHECK(planar.points_per_segment() == 9);
  CHECK(corridor_points(kPath, 0.7, planar).size() == 9);

  const CorridorConfig full;  // 5 x 5 x 40
  CHECK(full.points_per_segment() == 1000);
  CHECK(corridor_points(kPath, 0.7, full).size() == 1000);
}

TEST_CASE("corridor with zero half-dimensions collapses onto the path") {
  CorridorConfig cfg;
  cfg.half_length = 0;
  cfg.half_width = 0;
  cfg.half_height = 0;
  cfg.n_l = 3;
  cfg.n_w = 3;
  cfg.n_h = 3;
  const double theta = 2.2;
  const PathPoint pt = eval_path(kPath, theta);
  for (const Pose& pose : corridor_points(kPath, theta, cfg)) {
    CHECK_THAT(pose.qx, WithinAbs(pt.x, 1e-15));
    CHECK_THAT(pose.qy, WithinAbs(pt.y, 1e-15));
    CHECK_THAT(pose.phi, WithinAbs(pt.heading, 1e-15));
  }
}

TEST_CASE("grid offsets are symmetric about zero") {
  for (int n : {1, 2, 3, 5, 40}) {
    const auto off = detail::grid_offsets(0.37, n);
    REQUIRE(off.size() == static_cast<size_t>(n));
    double sum = 0;
    for (double o : off) sum += o;
    CHECK_THAT(sum, WithinAbs(0.0, 1e-12));
    if (n > 1) {
      CHECK_THAT(off.front(), WithinAbs(-0.37, 1e-15));
      CHECK_THAT(off.back(), WithinAbs(0.37, 1e-15));
    }
  }
}

TEST_CASE("corridor poses stay within the cuboid's Cartesian envelope") {
  const CorridorConfig cfg;
  const double bound = std::hypot(cfg.half_length, cfg.half_width) + 1e-12;
  for (double theta : {0.0, 1.0, 2.5, 4.8}) {
    const PathPoint pt = eval_path(kPath, theta);
    for (const Pose& pose : corridor_points(kPath, theta, cfg))
      CHECK(std::hypot(pose.qx - pt.x, pose.qy - pt.y) <= bound);
  }
}

TEST_CASE("on-path samples with feasible references are labeled near the references") {
  CorridorConfig corridor;
  corridor.n_theta = 5;  // the five angles avoid the apex curvature spikes
  corridor.half_length = corridor.half_width = corridor.half_height = 0;
  corridor.n_l = corridor.n_w = corridor.n_h = 1;
  OcpConfig ocp;
  ocp.v_ref = 0.1;
  DatasetReport report;
  const TrainingSet ts = generate_dataset(kPath, ocp, corridor, &report);
  REQUIRE(ts.size() == 5);
  CHECK(report.attempted == 5);
  CHECK(report.failed == 0);
  for (const Sample& s : ts) {
    double s_r = 0, w_r = 0;
    reference_inputs(kPath, s.z.theta, ocp.v_ref, s_r, w_r);
    CHECK_THAT(s.w.s, WithinAbs(s_r, 1e-3));
    CHECK_THAT(s.w.omega, WithinAbs(w_r, 1e-3));
    CHECK_THAT(s.w.v, WithinAbs(ocp.v_ref, 1e-3));
  }
}

TEST_CASE("labels honor the input box and regeneration is bitwise identical") {
  CorridorConfig corridor;
  corridor.n_theta = 10;
  corridor.n_l = corridor.n_w = corridor.n_h = 3;  // N_c = 27
  OcpConfig ocp;
  const TrainingSet a = generate_dataset(kPath, ocp, corridor);
  const TrainingSet b = generate_dataset(kPath, ocp, corridor);
  REQUIRE(a.size() == 270);
  REQUIRE(b.size() == a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].w.s >= kInputLo.s);
    CHECK(a[i].w.s <= kInputHi.s);
    CHECK(a[i].w.omega >= kInputLo.omega);
    CHECK(a[i].w.omega <= kInputHi.omega);
    CHECK(a[i].w.v >= kInputLo.v);
    CHECK(a[i].w.v <= kInputHi.v);
    REQUIRE(a[i].w.s == b[i].w.s);
    REQUIRE(a[i].w.omega == b[i].w.omega);
    REQUIRE(a[i].w.v == b[i].w.v);
  }
}

TEST_CASE("compute_stats: population moments and the degenerate-row floor") {
  SECTION("two-point oracle") {
    const NormStats st = compute_stats({constant_sample(0), constant_sample(2)});
    for (int i = 0; i < 7; ++i) {
      CHECK_THAT(st.mu[i], WithinAbs(1.0, 1e-15));
      CHECK_THAT(st.sigma[i], WithinAbs(1.0, 1e-15));  // population stdev
    }
  }
  SECTION("constant rows floor sigma to one and roundtrip exactly") {
    const TrainingSet ts(5, constant_sample(0.4));
    const NormStats st = compute_stats(ts);
    for (int i = 0; i < 7; ++i) {
      CHECK(st.sigma[i] == 1.0);
      CHECK_THAT(st.mu[i], WithinAbs(0.4, 1e-15));
    }
    const auto zn = normalize_state(ts[0].z, st);
    for (double x : zn) CHECK_THAT(x, WithinAbs(0.0, 1e-15));
    const ExtendedInput w = denormalize_input(normalize_input(ts[0].w, st), st);
    CHECK_THAT(w.s, WithinAbs(0.4, 1e-12));
  }
  SECTION("empty set is rejected") { CHECK_THROWS_AS(compute_stats({}), std::invalid_argument); }
}

TEST_CASE("normalization yields zero mean and unit variance") {
  const TrainingSet ts = support::toy_training_set(500);
  const NormStats st = compute_stats(ts);
  double mean[7] = {}, var[7] = {};
  for (const Sample& s : ts) {
    const auto zn = normalize_state(s.z, st);
    const auto wn = normalize_input(s.w, st);
    const double row[7] = {zn[0], zn[1], zn[2], zn[3], wn[0], wn[1], wn[2]};
    for (int i = 0; i < 7; ++i) mean[i] += row[i];
  }
  for (double& m : mean) m /= ts.size();
  for (const Sample& s : ts) {
    const auto zn = normalize_state(s.z, st);
    const auto wn = normalize_input(s.w, st);
    const double row[7] = {zn[0], zn[1], zn[2], zn[3], wn[0], wn[1], wn[2]};
    for (int i = 0; i < 7; ++i) var[i] += (row[i] - mean[i]) * (row[i] - mean[i]);
  }
  for (int i = 0; i < 7; ++i) {
    CHECK_THAT(mean[i], WithinAbs(0.0, 1e-9));
    CHECK_THAT(std::sqrt(var[i] / ts.size()), WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("state rows use indices 0-3 and input rows 4-6") {
  const TrainingSet ts = support::toy_training_set(64);
  const NormStats st = compute_stats(ts);
  const Sample& s = ts[10];
  const auto full = sample_row(s);
  const auto zn = normalize_state(s.z, st);
  const auto wn = normalize_input(s.w, st);
  for (int i = 0; i < 4; ++i) CHECK_THAT(zn[i], WithinAbs((full[i] - st.mu[i]) / st.sigma[i], 1e-15));
  for (int i = 0; i < 3; ++i)
    CHECK_THAT(wn[i], WithinAbs((full[4 + i] - st.mu[4 + i]) / st.sigma[4 + i], 1e-15));
  const ExtendedInput back = denormalize_input(wn, st);
  CHECK_THAT(back.s, WithinAbs(s.w.s, 1e-12));
  CHECK_THAT(back.omega, WithinAbs(s.w.omega, 1e-12));
  CHECK_THAT(back.v, WithinAbs(s.w.v, 1e-12));
}

TEST_CASE("csv dataset roundtrip preserves every bit") {
  const TrainingSet ts = support::toy_training_set(100);
  const std::string file = support::tmp_path("roundtrip.csv");
  write_dataset_csv(file, ts);
  const TrainingSet back = read_dataset_csv(file);
  REQUIRE(back.size() == ts.size());
  for (size_t i = 0; i < ts.size(); ++i) {
    REQUIRE(sample_row(back[i]) == sample_row(ts[i]));  // %.17g roundtrips doubles exactly
  }
}

TEST_CASE("csv header matches the published column order") {
  const std::string file = support::tmp_path("header.csv");
  write_dataset_csv(file, support::toy_training_set(1));
  std::ifstream in(file);
  std::string header;
  std::getline(in, header);
  CHECK(header == "qx,qy,phi,theta,s,omega,v");
}

TEST_CASE("binary dataset roundtrip and magic validation") {
  const TrainingSet ts = support::toy_training_set(257);
  const std::string file = support::tmp_path("roundtrip.bin");
  write_dataset_bin(file, ts);
  const TrainingSet back = read_dataset_bin(file);
  REQUIRE(back.size() == ts.size());
  for (size_t i = 0; i < ts.size(); ++i) REQUIRE(sample_row(back[i]) == sample_row(ts[i]));

  const std::string bogus = support::tmp_path("bogus.bin");
  {
    auto f = detail::open_file(bogus, "wb");
    std::fputs("NOTMAGIC", f.get());
  }
  CHECK_THROWS(read_dataset_bin(bogus));
}

TEST_CASE("stats csv roundtrip") {
  const TrainingSet ts = support::toy_training_set(64);
  const NormStats st = compute_stats(ts);
  const std::string file = support::tmp_path("stats.csv");
  write_stats_csv(file, st);
  const NormStats back = read_stats_csv(file);
  for (int i = 0; i < 7; ++i) {
    REQUIRE(back.mu[i] == st.mu[i]);
    REQUIRE(back.sigma[i] == st.sigma[i]);
  }
}
