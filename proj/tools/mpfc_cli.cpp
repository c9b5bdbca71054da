// Command-line front end: dataset generation, training, quantization,
// closed-loop simulation, step-time benchmarks, model/trace evaluation, and
// reference-path export.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "mpfc/mpfc.hpp"

namespace {

namespace fs = std::filesystem;

std::string out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

// Model files are self-describing: the quantized container starts with its
// binary magic, the float container with its text header.
bool is_quantized_model(const std::string& file) {
  auto f = mpfc::detail::open_file(file, "rb");
  char head[8] = {};
  const size_t n = std::fread(head, 1, sizeof head, f.get());
  return n == sizeof head && std::memcmp(head, mpfc::kQuantMagic, 8) == 0;
}

mpfc::PGains parse_gains(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos)
    throw std::invalid_argument("gains: expected 'P_t,P_n', got '" + text + "'");
  return {mpfc::detail::to_double("gains.P_t", mpfc::detail::trim(text.substr(0, comma))),
          mpfc::detail::to_double("gains.P_n", mpfc::detail::trim(text.substr(comma + 1)))};
}

mpfc::TrainingSet load_dataset_any(const std::string& file) {
  auto f = mpfc::detail::open_file(file, "rb");
  char head[8] = {};
  const size_t n = std::fread(head, 1, sizeof head, f.get());
  if (n == sizeof head && std::memcmp(head, mpfc::kDatasetMagic, 8) == 0)
    return mpfc::read_dataset_bin(file);
  return mpfc::read_dataset_csv(file);
}

void print_metrics(const char* tag, const mpfc::Metrics& m, bool timing) {
  std::printf("%s.steps=%zu\n", tag, m.steps);
  std::printf("%s.mean-err=%.17g\n", tag, m.mean_err);
  std::printf("%s.max-err=%.17g\n", tag, m.max_err);
  if (timing) {
    std::printf("%s.t-mean=%.17g\n", tag, m.t_mean);
    std::printf("%s.t-std=%.17g\n", tag, m.t_std);
    std::printf("%s.t-worst=%.17g\n", tag, m.t_worst);
  }
}

struct Shared {
  std::string config_file;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;

  mpfc::AppConfig load() const {
    mpfc::AppConfig cfg;
    if (!config_file.empty()) mpfc::load_config_file(cfg, config_file);
    if (seed) cfg.train.seed = *seed;
    return cfg;
  }
};

void add_shared(CLI::App* cmd, Shared& sh) {
  cmd->add_option("--config", sh.config_file, "plain-text key=value configuration file");
  cmd->add_option("--seed", sh.seed, "seed override for stochastic stages");
  cmd->add_option("--out", sh.out_dir, "output directory");
}

mpfc::StepFn make_controller(const std::string& kind, const mpfc::PathSpec& path,
                             const mpfc::AppConfig& cfg, const std::string& model_file,
                             const mpfc::PGains& gains,
                             std::shared_ptr<void>* keepalive) {
  if (kind == "mpfc") {
    auto ctrl = std::make_shared<mpfc::MpfcController>(path, cfg.ocp);
    *keepalive = ctrl;
    return [ctrl](const mpfc::ExtendedState& z) { return ctrl->step(z); };
  }
  if (model_file.empty())
    throw std::invalid_argument("controller '" + kind + "' requires --model");
  if (kind == "dnn") {
    auto model = std::make_shared<mpfc::MlpParams>(mpfc::load_mlp(model_file));
    *keepalive = model;
    return [model](const mpfc::ExtendedState& z) { return mpfc::dnn_step(z, *model); };
  }
  auto model = std::make_shared<mpfc::QuantizedMlp>(mpfc::load_quantized(model_file));
  *keepalive = model;
  if (kind == "qdnn")
    return [model](const mpfc::ExtendedState& z) { return mpfc::qdnn_step(z, *model); };
  if (kind == "qdnn-p")
    return [model, path, gains](const mpfc::ExtendedState& z) {
      return mpfc::qdnn_p_step(path, z, *model, gains);
    };
  throw std::invalid_argument("unknown controller '" + kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model-predictive path following: data, training, quantization, simulation"};
  app.require_subcommand(1);
  const mpfc::PathSpec path;

  // dataset generate
  auto* dataset = app.add_subcommand("dataset", "training-set operations");
  dataset->require_subcommand(1);
  auto* gen = dataset->add_subcommand("generate", "label corridor states with the OCP solver");
  Shared gen_sh;
  add_shared(gen, gen_sh);
  std::string gen_format = "csv";
  bool gen_quiet = false;
  gen->add_option("--format", gen_format, "dataset container: csv or bin")
      ->check(CLI::IsMember({"csv", "bin"}));
  gen->add_flag("--quiet", gen_quiet, "suppress progress output");

  // train
  auto* train_cmd = app.add_subcommand("train", "fit the network to a labeled dataset");
  Shared train_sh;
  add_shared(train_cmd, train_sh);
  std::string train_dataset;
  train_cmd->add_option("--dataset", train_dataset, "labeled dataset (csv or bin)")->required();

  // quantize
  auto* quant_cmd = app.add_subcommand("quantize", "post-training int8 quantization");
  Shared quant_sh;
  add_shared(quant_cmd, quant_sh);
  std::string quant_model, quant_dataset;
  quant_cmd->add_option("--model", quant_model, "float model file")->required();
  quant_cmd->add_option("--dataset", quant_dataset, "calibration dataset (csv or bin)")
      ->required();

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "closed-loop lap simulation");
  Shared sim_sh;
  add_shared(sim_cmd, sim_sh);
  std::string sim_controller = "mpfc", sim_model, sim_gains;
  int sim_laps = 1;
  sim_cmd->add_option("--controller", sim_controller, "mpfc, dnn, qdnn, or qdnn-p")
      ->check(CLI::IsMember({"mpfc", "dnn", "qdnn", "qdnn-p"}));
  sim_cmd->add_option("--laps", sim_laps, "number of laps");
  sim_cmd->add_option("--model", sim_model, "model file for the network controllers");
  sim_cmd->add_option("--gains", sim_gains, "P compensator gains as P_t,P_n");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "per-step timing benchmark near the path");
  Shared bench_sh;
  add_shared(bench_cmd, bench_sh);
  std::string bench_model, bench_qmodel, bench_gains;
  std::size_t bench_reps = 10000;
  bench_cmd->add_option("--model", bench_model, "float model file (enables dnn)");
  bench_cmd->add_option("--qmodel", bench_qmodel, "quantized model file (enables qdnn, qdnn-p)");
  bench_cmd->add_option("--reps", bench_reps, "number of benchmark states");
  bench_cmd->add_option("--gains", bench_gains, "P compensator gains as P_t,P_n");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "metrics from a trace or model-vs-dataset MSE");
  Shared eval_sh;
  add_shared(eval_cmd, eval_sh);
  std::string eval_trace, eval_model, eval_dataset;
  eval_cmd->add_option("--trace", eval_trace, "trace csv from `simulate`");
  eval_cmd->add_option("--model", eval_model, "model file (float or quantized)");
  eval_cmd->add_option("--dataset", eval_dataset, "dataset for MSE evaluation");

  // path export
  auto* path_cmd = app.add_subcommand("path", "reference-path operations");
  path_cmd->require_subcommand(1);
  auto* path_export = path_cmd->add_subcommand("export", "sample the reference path to csv");
  Shared path_sh;
  add_shared(path_export, path_sh);
  int path_samples = 1000;
  path_export->add_option("--samples", path_samples, "number of samples over one period");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const mpfc::AppConfig cfg = gen_sh.load();
      mpfc::DatasetReport report;
      auto progress = [&](size_t done, size_t total) {
        if (!gen_quiet) std::fprintf(stderr, "labeled %zu/%zu\n", done, total);
      };
      const mpfc::TrainingSet set =
          mpfc::generate_dataset(path, cfg.ocp, cfg.corridor, &report, progress);
      const std::string file =
          out_path(gen_sh.out_dir, gen_format == "bin" ? "dataset.bin" : "dataset.csv");
      if (gen_format == "bin")
        mpfc::write_dataset_bin(file, set);
      else
        mpfc::write_dataset_csv(file, set);
      const mpfc::NormStats stats = mpfc::compute_stats(set);
      mpfc::write_stats_csv(out_path(gen_sh.out_dir, "stats.csv"), stats);
      std::printf("dataset.samples=%zu\n", set.size());
      std::printf("dataset.failed=%zu\n", report.failed);
      std::printf("dataset.file=%s\n", file.c_str());
    } else if (train_cmd->parsed()) {
      const mpfc::AppConfig cfg = train_sh.load();
      const mpfc::TrainingSet set = load_dataset_any(train_dataset);
      const mpfc::NormStats stats = mpfc::compute_stats(set);
      mpfc::TrainLog log;
      auto per_epoch = [](int epoch, double train_mse, double val_mse) {
        std::fprintf(stderr, "epoch %d train-mse %.6g val-mse %.6g\n", epoch, train_mse, val_mse);
      };
      const mpfc::MlpParams model =
          mpfc::train(set, stats, mpfc::kDefaultArch, cfg.train, &log, per_epoch);
      const std::string file = out_path(train_sh.out_dir, "model.txt");
      mpfc::save_mlp(file, model);
      std::printf("train.epochs=%d\n", cfg.train.epochs);
      std::printf("train.final-train-mse=%.17g\n", log.final_train_mse);
      std::printf("train.best-val-mse=%.17g\n", log.best_val_mse);
      std::printf("train.model=%s\n", file.c_str());
    } else if (quant_cmd->parsed()) {
      const mpfc::MlpParams model = mpfc::load_mlp(quant_model);
      const mpfc::TrainingSet calib = load_dataset_any(quant_dataset);
      const mpfc::NormalizedSet norm = mpfc::normalize_set(calib, model.stats);
      const mpfc::QuantizedMlp q = mpfc::quantize_model(model, norm.x);
      const std::string file = out_path(quant_sh.out_dir, "model.qnn");
      mpfc::save_quantized(file, q);
      std::printf("quantize.float-mse=%.17g\n", mpfc::mse(model, norm));
      std::printf("quantize.quant-mse=%.17g\n", mpfc::quantized_mse(q, norm));
      std::printf("quantize.weight-bytes=%zu\n", q.weight_blob_bytes());
      std::printf("quantize.model=%s\n", file.c_str());
    } else if (sim_cmd->parsed()) {
      mpfc::AppConfig cfg = sim_sh.load();
      cfg.sim.laps = sim_laps;
      mpfc::PGains gains;
      if (!sim_gains.empty()) gains = parse_gains(sim_gains);
      std::shared_ptr<void> keepalive;
      const mpfc::StepFn fn =
          make_controller(sim_controller, path, cfg, sim_model, gains, &keepalive);
      const mpfc::SimTrace trace = mpfc::run_closed_loop(path, fn, cfg.sim);
      mpfc::export_trace(out_path(sim_sh.out_dir, "trace.csv"), trace);
      if (trace.failed) {
        std::fprintf(stderr, "error: simulate: %s\n", trace.failure.c_str());
        return 1;
      }
      print_metrics("simulate", mpfc::compute_metrics(trace), true);
    } else if (bench_cmd->parsed()) {
      mpfc::AppConfig cfg = bench_sh.load();
      const std::uint64_t seed = bench_sh.seed.value_or(1);
      mpfc::PGains gains;
      if (!bench_gains.empty()) gains = parse_gains(bench_gains);
      const std::vector<mpfc::ExtendedState> states =
          mpfc::sample_corridor_states(path, cfg.corridor, bench_reps, seed);
      std::vector<std::pair<std::string, std::string>> kinds = {{"mpfc", ""}};
      if (!bench_model.empty()) kinds.push_back({"dnn", bench_model});
      if (!bench_qmodel.empty()) {
        kinds.push_back({"qdnn", bench_qmodel});
        kinds.push_back({"qdnn-p", bench_qmodel});
      }
      for (const auto& [kind, file] : kinds) {
        std::shared_ptr<void> keepalive;
        const mpfc::StepFn fn = make_controller(kind, path, cfg, file, gains, &keepalive);
        const mpfc::Metrics m = mpfc::bench_step_fn(fn, states);
        std::printf("bench.%s.reps=%zu\n", kind.c_str(), m.steps);
        std::printf("bench.%s.t-mean=%.17g\n", kind.c_str(), m.t_mean);
        std::printf("bench.%s.t-std=%.17g\n", kind.c_str(), m.t_std);
        std::printf("bench.%s.t-worst=%.17g\n", kind.c_str(), m.t_worst);
      }
    } else if (eval_cmd->parsed()) {
      if (eval_trace.empty() && (eval_model.empty() || eval_dataset.empty()))
        throw std::invalid_argument("evaluate: need --trace, or --model with --dataset");
      if (!eval_trace.empty()) {
        const mpfc::SimTrace trace = mpfc::import_trace(eval_trace);
        print_metrics("evaluate", mpfc::compute_metrics(trace), false);
      }
      if (!eval_model.empty() && !eval_dataset.empty()) {
        const mpfc::TrainingSet set = load_dataset_any(eval_dataset);
        if (is_quantized_model(eval_model)) {
          const mpfc::QuantizedMlp q = mpfc::load_quantized(eval_model);
          std::printf("evaluate.quant-mse=%.17g\n",
                      mpfc::quantized_mse(q, mpfc::normalize_set(set, q.stats)));
        } else {
          const mpfc::MlpParams m = mpfc::load_mlp(eval_model);
          std::printf("evaluate.float-mse=%.17g\n",
                      mpfc::mse(m, mpfc::normalize_set(set, m.stats)));
        }
      }
    } else if (path_export->parsed()) {
      const std::string file = out_path(path_sh.out_dir, "path.csv");
      mpfc::export_path_csv(file, path, path_samples);
      std::printf("path.samples=%d\n", path_samples);
      std::printf("path.file=%s\n", file.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
