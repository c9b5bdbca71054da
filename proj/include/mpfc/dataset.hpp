#pragma once

// Corridor-shaped training set: grid poses around the path, label each with
// the first input of the OCP solution, and compute the normalization stats
// used by the network at train and inference time.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpfc/ocp.hpp"

namespace mpfc {

struct CorridorConfig {
  int n_theta = 4000;        // equidistant path segments in [0, 2*pi)
  double half_width = 0.01;  // normal offset bound c_W [m]
  double half_length = 0.1;  // tangential offset bound c_L [m]
  double half_height = std::numbers::pi / 3;  // heading offset bound c_H [rad]
  int n_w = 5;   // samples across the width (normal axis)
  int n_l = 5;   // samples across the length (tangential axis)
  int n_h = 40;  // samples across the height (heading axis)

  int points_per_segment() const { return n_w * n_l * n_h; }
};

struct Sample {
  ExtendedState z;
  ExtendedInput w;
};

using TrainingSet = std::vector<Sample>;

struct NormStats {
  std::array<double, 7> mu{};
  std::array<double, 7> sigma{1, 1, 1, 1, 1, 1, 1};
};

inline constexpr std::array<const char*, 7> kRowNames{"qx", "qy",    "phi", "theta",
                                                      "s",  "omega", "v"};

namespace detail {
inline std::vector<double> grid_offsets(double half, int n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = 0.0;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = -half + 2.0 * half * i / (n - 1);
  return out;
}
}  // namespace detail

struct Pose {
  double qx, qy, phi;
};

inline std::vector<Pose> corridor_points(const PathSpec& path, double theta,
                                         const CorridorConfig& cfg) {
  const PathPoint pt = eval_path(path, theta);
  const PathFrame f = path_frame(pt.heading);
  const auto ts = detail::grid_offsets(cfg.half_length, cfg.n_l);
  const auto ns = detail::grid_offsets(cfg.half_width, cfg.n_w);
  const auto hs = detail::grid_offsets(cfg.half_height, cfg.n_h);
  std::vector<Pose> out;
  out.reserve(static_cast<size_t>(cfg.points_per_segment()));
  for (double p_t : ts)
    for (double p_n : ns)
      for (double p_o : hs)
        out.push_back({pt.x + p_t * f.tx + p_n * f.nx, pt.y + p_t * f.ty + p_n * f.ny,
                       pt.heading + p_o});
  return out;
}

struct DatasetReport {
  size_t attempted = 0;
  size_t failed = 0;
};

inline TrainingSet generate_dataset(const PathSpec& path, const OcpConfig& ocp,
                                    const CorridorConfig& cfg, DatasetReport* report = nullptr,
                                    const std::function<void(size_t, size_t)>& progress = {}) {
  TrainingSet ts;
  const size_t total = static_cast<size_t>(cfg.n_theta) * cfg.points_per_segment();
  ts.reserve(total);
  size_t failed = 0, done = 0;
  for (int i = 0; i < cfg.n_theta; ++i) {
    const double theta = two_pi * i / cfg.n_theta;
    for (const Pose& pose : corridor_points(path, theta, cfg)) {
      const ExtendedState z{pose.qx, pose.qy, pose.phi, theta};
      const SolveResult r = solve(path, z, reference_sequence(path, z, ocp), ocp);
      if (r.ok) {
        ts.push_back({z, r.seq.front()});
      } else {
        ++failed;
      }
      if (progress && (++done % 1000 == 0 || done == total)) progress(done, total);
    }
  }
  if (report) *report = {total, failed};
  if (failed * 100 > total)
    throw std::runtime_error("generate_dataset: more than 1% of labels failed to solve");
  return ts;
}

inline std::array<double, 7> sample_row(const Sample& s) {
  return {s.z.qx, s.z.qy, s.z.phi, s.z.theta, s.w.s, s.w.omega, s.w.v};
}

inline NormStats compute_stats(const TrainingSet& ts) {
  if (ts.size() < 2) throw std::invalid_argument("compute_stats: need at least 2 records");
  NormStats st;
  std::array<double, 7> sum{}, sum2{};
  for (const Sample& s : ts) {
    const auto r = sample_row(s);
    for (int i = 0; i < 7; ++i) {
      sum[i] += r[i];
      sum2[i] += r[i] * r[i];
    }
  }
  const double n = static_cast<double>(ts.size());
  for (int i = 0; i < 7; ++i) {
    st.mu[i] = sum[i] / n;
    const double var = std::max(0.0, sum2[i] / n - st.mu[i] * st.mu[i]);
    st.sigma[i] = std::sqrt(var);  // population standard deviation
    if (st.sigma[i] < 1e-9) st.sigma[i] = 1.0;
  }
  return st;
}

inline std::array<double, 4> normalize_state(const ExtendedState& z, const NormStats& st) {
  return {(z.qx - st.mu[0]) / st.sigma[0], (z.qy - st.mu[1]) / st.sigma[1],
          (z.phi - st.mu[2]) / st.sigma[2], (z.theta - st.mu[3]) / st.sigma[3]};
}

inline std::array<double, 3> normalize_input(const ExtendedInput& w, const NormStats& st) {
  return {(w.s - st.mu[4]) / st.sigma[4], (w.omega - st.mu[5]) / st.sigma[5],
          (w.v - st.mu[6]) / st.sigma[6]};
}

inline ExtendedInput denormalize_input(const std::array<double, 3>& wn, const NormStats& st) {
  return {wn[0] * st.sigma[4] + st.mu[4], wn[1] * st.sigma[5] + st.mu[5],
          wn[2] * st.sigma[6] + st.mu[6]};
}

// --- file formats ---

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

inline File open_file(const std::string& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}
}  // namespace detail

inline void write_dataset_csv(const std::string& path, const TrainingSet& ts) {
  auto f = detail::open_file(path, "w");
  std::fprintf(f.get(), "qx,qy,phi,theta,s,omega,v\n");
  for (const Sample& s : ts) {
    const auto r = sample_row(s);
    std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r[0], r[1], r[2],
                 r[3], r[4], r[5], r[6]);
  }
}

inline TrainingSet read_dataset_csv(const std::string& path) {
  auto f = detail::open_file(path, "r");
  TrainingSet ts;
  char line[512];
  bool first = true;
  while (std::fgets(line, sizeof line, f.get())) {
    if (first) {
      first = false;
      if (std::strncmp(line, "qx,", 3) == 0) continue;
    }
    std::array<double, 7> r{};
    char* p = line;
    for (int i = 0; i < 7; ++i) {
      r[i] = std::strtod(p, &p);
      if (*p == ',') ++p;
    }
    ts.push_back({{r[0], r[1], r[2], r[3]}, {r[4], r[5], r[6]}});
  }
  return ts;
}

inline void write_stats_csv(const std::string& path, const NormStats& st) {
  auto f = detail::open_file(path, "w");
  std::fprintf(f.get(), "name,mu,sigma\n");
  for (int i = 0; i < 7; ++i)
    std::fprintf(f.get(), "%s,%.17g,%.17g\n", kRowNames[i], st.mu[i], st.sigma[i]);
}

inline NormStats read_stats_csv(const std::string& path) {
  auto f = detail::open_file(path, "r");
  NormStats st;
  char line[256];
  int row = 0;
  while (std::fgets(line, sizeof line, f.get()) && row < 7) {
    if (std::strncmp(line, "name,", 5) == 0) continue;
    const char* comma = std::strchr(line, ',');
    if (!comma) continue;
    char* p = nullptr;
    st.mu[row] = std::strtod(comma + 1, &p);
    if (*p == ',') ++p;
    st.sigma[row] = std::strtod(p, nullptr);
    ++row;
  }
  if (row != 7) throw std::runtime_error("malformed stats file " + path);
  return st;
}

inline constexpr char kDatasetMagic[8] = {'M', 'P', 'F', 'C', 'D', 'S', '1', '\0'};

inline void write_dataset_bin(const std::string& path, const TrainingSet& ts) {
  static_assert(std::endian::native == std::endian::little, "format is little-endian");
  auto f = detail::open_file(path, "wb");
  std::fwrite(kDatasetMagic, 1, 8, f.get());
  const uint64_t n = ts.size();
  std::fwrite(&n, sizeof n, 1, f.get());
  for (const Sample& s : ts) {
    const auto r = sample_row(s);
    std::fwrite(r.data(), sizeof(double), 7, f.get());
  }
}

inline TrainingSet read_dataset_bin(const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "format is little-endian");
  auto f = detail::open_file(path, "rb");
  char magic[8];
  if (std::fread(magic, 1, 8, f.get()) != 8 || std::memcmp(magic, kDatasetMagic, 8) != 0)
    throw std::runtime_error("bad dataset magic in " + path);
  uint64_t n = 0;
  if (std::fread(&n, sizeof n, 1, f.get()) != 1)
    throw std::runtime_error("truncated dataset " + path);
  TrainingSet ts;
  ts.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    std::array<double, 7> r{};
    if (std::fread(r.data(), sizeof(double), 7, f.get()) != 7)
      throw std::runtime_error("truncated dataset " + path);
    ts.push_back({{r[0], r[1], r[2], r[3]}, {r[4], r[5], r[6]}});
  }
  return ts;
}

}  // namespace mpfc
