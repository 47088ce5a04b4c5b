#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qmda/experiments.hpp"

namespace fs = std::filesystem;

namespace {

struct CliState {
  qmda::ExperimentConfig cfg;
  std::string preset;
  std::string config_file;
  std::string bundle_dir;
  std::string out_dir;
  double scale = 1.0;
  std::string sweep_text;
  int eig_count = 30;
  double eig_window = 10.0;
  bool no_check_invariants = false;
  long steps_override = -1;
  long truth_seed_override = -1;
};

void add_common_options(CLI::App* app, CliState& st) {
  app->add_option("--preset", st.preset, "named experiment preset");
  app->add_option("--scale", st.scale, "shrink N and L for desk runs (0,1]");
  app->add_option("--out", st.out_dir, "output directory");
  app->add_option("--config", st.config_file,
                  "JSON config file; its values override flags");
  app->add_option("--n", st.cfg.n_train, "training samples N");
  app->add_option("--l", st.cfg.l_basis, "spectral resolution L");
  app->add_option("--s-bins", st.cfg.s_bins, "partition size S");
  app->add_option("--q-delays", st.cfg.q_delays, "delays Q (0 = full observation)");
  app->add_option("--dt", st.cfg.dt, "sampling interval");
  app->add_option("--alpha", st.cfg.alpha, "binary observable arc length");
  app->add_option("--obs-interval", st.cfg.obs_interval_steps,
                  "steps between measurements");
  app->add_option("--report-stride", st.cfg.report_stride,
                  "steps between probability reports");
  app->add_option("--steps", st.steps_override, "assimilation steps");
  app->add_option("--seed", st.cfg.seed, "training seed");
  app->add_option("--truth-seed", st.truth_seed_override, "truth trajectory seed");
  app->add_option("--kb", st.cfg.kernel.k_b, "bandwidth neighbor count");
  app->add_option("--knn", st.cfg.kernel.r, "kNN sparsification r (0 = auto)");
  app->add_flag("--no-check-invariants", st.no_check_invariants,
                "skip per-step state invariant checks");
}

// Resolution order: preset defaults, then scale, then explicit flags, then
// the config file.
qmda::ExperimentConfig resolve_config(const CliState& st, const CLI::App* app) {
  qmda::ExperimentConfig cfg;
  if (!st.preset.empty()) {
    cfg = qmda::preset_config(st.preset);
    cfg.scale = st.scale;
    qmda::apply_scale(cfg);
  } else {
    cfg = st.cfg;
  }
  const auto passed = [&](const std::string& flag) {
    return app->count(flag) > 0;
  };
  if (passed("--n")) cfg.n_train = st.cfg.n_train;
  if (passed("--l")) cfg.l_basis = st.cfg.l_basis;
  if (passed("--s-bins")) cfg.s_bins = st.cfg.s_bins;
  if (passed("--q-delays")) cfg.q_delays = st.cfg.q_delays;
  if (passed("--dt")) cfg.dt = st.cfg.dt;
  if (passed("--alpha")) cfg.alpha = st.cfg.alpha;
  if (passed("--obs-interval")) cfg.obs_interval_steps = st.cfg.obs_interval_steps;
  if (passed("--report-stride")) cfg.report_stride = st.cfg.report_stride;
  if (passed("--seed")) cfg.seed = st.cfg.seed;
  if (passed("--kb")) cfg.kernel.k_b = st.cfg.kernel.k_b;
  if (passed("--knn")) cfg.kernel.r = st.cfg.kernel.r;
  if (st.steps_override >= 0) cfg.n_steps = st.steps_override;
  if (st.truth_seed_override >= 0)
    cfg.truth_seed = static_cast<std::uint64_t>(st.truth_seed_override);
  if (st.no_check_invariants) cfg.check_invariants = false;
  if (!st.out_dir.empty()) cfg.out_dir = st.out_dir;

  if (!st.config_file.empty()) {
    std::ifstream in(st.config_file);
    if (!in) throw qmda::ParameterError("cannot open config " + st.config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = qmda::config_from_json(ss.str());
    if (!st.out_dir.empty()) cfg.out_dir = st.out_dir;
  }
  return cfg;
}

std::vector<long> parse_sweep(const std::string& text) {
  std::vector<long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stol(item));
  }
  if (out.empty()) throw qmda::ParameterError("empty --sweep list");
  return out;
}

qmda::ExperimentConfig load_bundle_config(const std::string& bundle_dir) {
  const fs::path cfg_path = fs::path(bundle_dir) / "config.json";
  std::ifstream in(cfg_path);
  if (!in)
    throw qmda::ParameterError("no config.json in bundle dir " + bundle_dir);
  std::stringstream ss;
  ss << in.rdbuf();
  return qmda::config_from_json(ss.str());
}

int run_train(const CliState& st, const CLI::App* app) {
  qmda::ExperimentConfig cfg = resolve_config(st, app);
  if (cfg.out_dir.empty()) throw qmda::ParameterError("train needs --out");
  fs::create_directories(cfg.out_dir);
  const qmda::OperatorBundle bundle = qmda::train(cfg);
  const std::string bundle_path =
      (fs::path(cfg.out_dir) / "bundle.bin").string();
  const std::uint64_t hash = qmda::save_bundle(bundle, bundle_path);
  {
    auto j = nlohmann::json::parse(qmda::config_to_json(cfg));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash));
    j["bundle_hash"] = buf;
    std::ofstream out(fs::path(cfg.out_dir) / "config.json");
    out << j.dump(2);
  }
  std::cout << "wrote " << bundle_path << " (dim " << bundle.dim() << ", S "
            << bundle.partition.s << ")\n";
  return 0;
}

int run_assimilate(const CliState& st, const CLI::App* app) {
  qmda::ExperimentConfig cfg;
  std::optional<qmda::OperatorBundle> bundle;
  if (!st.bundle_dir.empty()) {
    cfg = load_bundle_config(st.bundle_dir);
    if (st.steps_override >= 0) cfg.n_steps = st.steps_override;
    if (st.truth_seed_override >= 0)
      cfg.truth_seed = static_cast<std::uint64_t>(st.truth_seed_override);
    if (app->count("--report-stride") > 0)
      cfg.report_stride = st.cfg.report_stride;
    if (st.no_check_invariants) cfg.check_invariants = false;
    cfg.out_dir = st.out_dir.empty() ? st.bundle_dir : st.out_dir;
    bundle = qmda::load_bundle(
        (fs::path(st.bundle_dir) / "bundle.bin").string());
  } else {
    cfg = resolve_config(st, app);
    if (cfg.out_dir.empty())
      throw qmda::ParameterError("assimilate needs --out (or --bundle)");
    bundle = qmda::train(cfg);
  }
  fs::create_directories(cfg.out_dir);
  const qmda::AssimilationResult result = qmda::assimilate(*bundle, cfg);
  const std::string run_path = (fs::path(cfg.out_dir) / "run.csv").string();
  qmda::write_run_csv(result.records, bundle->partition.s, run_path);
  nlohmann::json summary;
  summary["mean_precision"] = result.summary.mean_precision;
  summary["mean_ignorance"] = result.summary.mean_ignorance;
  summary["useful_fraction"] = result.summary.useful_fraction;
  summary["n_records"] = result.records.size();
  std::ofstream out(fs::path(cfg.out_dir) / "summary.json");
  out << summary.dump(2);
  std::cout << "wrote " << run_path << " (" << result.records.size()
            << " reports, mean D " << result.summary.mean_precision
            << ", mean E " << result.summary.mean_ignorance << ")\n";
  return 0;
}

int run_converge(const CliState& st, const CLI::App* app) {
  CliState with_default = st;
  if (with_default.preset.empty()) with_default.preset = "convergence-study";
  qmda::ExperimentConfig cfg = resolve_config(with_default, app);
  if (!st.sweep_text.empty()) cfg.sweep = parse_sweep(st.sweep_text);
  if (cfg.out_dir.empty()) throw qmda::ParameterError("converge needs --out");
  fs::create_directories(cfg.out_dir);
  const qmda::ConvergenceReport report = qmda::convergence_study(cfg);
  const std::string path =
      (fs::path(cfg.out_dir) / "convergence.csv").string();
  qmda::write_convergence_csv(report, path);
  std::ofstream out(fs::path(cfg.out_dir) / "config.json");
  out << qmda::config_to_json(cfg);
  std::cout << "wrote " << path << "\n";
  for (std::size_t i = 0; i < report.n_values.size(); ++i)
    std::printf("N=%-6ld  err_U=%.4g  err_E=%.4g  err_xi=%.4g  err_P=%.4g\n",
                report.n_values[i], report.u_errors[i], report.e_errors[i],
                report.boundary_errors[i], report.prob_errors[i]);
  return 0;
}

int run_dump_eigfuncs(const CliState& st) {
  if (st.bundle_dir.empty())
    throw qmda::ParameterError("dump-eigfuncs needs --bundle");
  const qmda::OperatorBundle bundle = qmda::load_bundle(
      (fs::path(st.bundle_dir) / "bundle.bin").string());
  const std::string out_dir =
      st.out_dir.empty() ? st.bundle_dir : st.out_dir;
  qmda::eigfuncs_dump(bundle, st.eig_count, st.eig_window, out_dir);
  std::cout << "wrote eigenfunction CSVs to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QMDA: operator-theoretic sequential data assimilation"};
  app.require_subcommand(1);

  CliState train_st, assim_st, conv_st, dump_st;

  auto* train_cmd = app.add_subcommand("train", "build basis and operators");
  add_common_options(train_cmd, train_st);

  auto* assim_cmd = app.add_subcommand("assimilate", "run the filter");
  add_common_options(assim_cmd, assim_st);
  assim_cmd->add_option("--bundle", assim_st.bundle_dir,
                        "directory holding bundle.bin + config.json");

  auto* conv_cmd = app.add_subcommand("converge", "convergence study vs the analytic backend");
  add_common_options(conv_cmd, conv_st);
  conv_cmd->add_option("--sweep", conv_st.sweep_text,
                       "comma-separated N values");

  auto* dump_cmd = app.add_subcommand("dump-eigfuncs", "export eigenfunction CSVs");
  dump_cmd->add_option("--bundle", dump_st.bundle_dir, "trained bundle directory");
  dump_cmd->add_option("--out", dump_st.out_dir, "output directory");
  dump_cmd->add_option("--count", dump_st.eig_count, "eigenfunctions to dump");
  dump_cmd->add_option("--window", dump_st.eig_window,
                       "time-series window length (time units)");

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) return run_train(train_st, train_cmd);
    if (assim_cmd->parsed()) return run_assimilate(assim_st, assim_cmd);
    if (conv_cmd->parsed()) return run_converge(conv_st, conv_cmd);
    if (dump_cmd->parsed()) return run_dump_eigfuncs(dump_st);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const qmda::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const qmda::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
