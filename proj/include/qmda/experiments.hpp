#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qmda/dynamics.hpp"
#include "qmda/filter.hpp"
#include "qmda/kernel_basis.hpp"
#include "qmda/metrics.hpp"
#include "qmda/operators.hpp"
#include "qmda/quantizer.hpp"

namespace qmda {

struct ExperimentConfig {
  std::string preset;
  std::string backend = "analytic";   // "analytic" | "data"
  std::string system = "circle";      // "circle" | "l63"
  std::string observable = "cos";     // "binary" | "cos" | "x1"
  double alpha = std::numbers::pi;    // binary arc length

  CircleParams circle;
  L63Params l63;

  double dt = 0.01;          // base sampling/reporting step
  long n_train = 0;          // N (data backend)
  int q_delays = 0;          // 0 = full observation
  KernelBasisParams kernel;
  int l_basis = 64;          // basis size (data) or Fourier l_max (analytic)
  int s_bins = 32;

  int obs_interval_steps = 100;
  int report_stride = 1;
  long n_steps = 1000;       // assimilation length in base steps
  ZeroProbPolicy zero_prob_policy = ZeroProbPolicy::error;
  bool check_invariants = true;

  std::uint64_t seed = 7;
  std::uint64_t truth_seed = 8;   // L63 truth initial-condition jitter
  double truth_theta0 = 0.0;      // circle truth phase
  double scale = 1.0;
  std::string out_dir;

  // convergence-study extras
  std::vector<long> sweep = {500, 1000, 2000, 4000};
  int study_q = 10;
};

/// Named presets mirroring the experiments in the source material; throws
/// ParameterError for unknown names.
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Shrink n_train and l_basis for desk runs; no-op at scale 1.
void apply_scale(ExperimentConfig& cfg);

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

// Everything the filter needs, plus optional training artifacts so a bundle
// can also feed eigenfunction dumps. Exactly one backend variant is set.
struct RealBackendOps {
  std::map<int, Eigen::MatrixXd> shifts;     // q -> U^(q)
  std::vector<Eigen::MatrixXd> projectors;   // S of them
};

struct AnalyticBackendOps {
  AnalyticCircleBasis basis;
  std::vector<Eigen::MatrixXcd> projectors;
};

struct OperatorBundle {
  std::uint32_t version = 1;
  std::string preset;
  double dt_base = 0.0;
  int obs_interval_steps = 1;
  PartitionSpec partition;
  std::variant<RealBackendOps, AnalyticBackendOps> ops;

  // data-backend training artifacts (present when trained in this process
  // or loaded from a bundle that carried them)
  std::optional<EigenBasis> basis;
  std::optional<Eigen::MatrixXd> train_samples;
  std::optional<Eigen::VectorXd> train_h;

  std::string meta_json;  // config echo + kernel diagnostics
  std::uint64_t payload_hash = 0;

  Eigen::Index dim() const;
  bool is_analytic() const {
    return std::holds_alternative<AnalyticBackendOps>(ops);
  }
};

std::uint64_t save_bundle(const OperatorBundle& bundle, const std::string& path);
OperatorBundle load_bundle(const std::string& path);

/// Build the operator bundle for a config: closed forms for the analytic
/// circle backend, the full kernel pipeline for the data-driven one.
OperatorBundle train(const ExperimentConfig& cfg);

struct AssimilationResult {
  std::vector<StepRecord> records;
  MetricsSummary summary;
  Eigen::VectorXd truth_h;
};

/// Generate an independent truth trajectory and run the filter over it.
AssimilationResult assimilate(const OperatorBundle& bundle,
                              const ExperimentConfig& cfg);

struct PresetOutputs {
  ExperimentConfig config;
  std::string bundle_path;
  std::string run_csv_path;
  std::string summary_path;
  std::string convergence_csv_path;
  MetricsSummary summary;
  std::uint64_t bundle_hash = 0;
};

/// Run the full pipeline for a config and write config.json, bundle.bin,
/// run.csv and summary.json under cfg.out_dir (convergence.csv and the
/// eigenfunction CSVs for the presets that produce them).
PresetOutputs run_pipeline(const ExperimentConfig& cfg);

/// preset_config + scale + out_dir, then run_pipeline.
PresetOutputs run_preset(const std::string& name, const std::string& out_dir,
                         double scale = 1.0);

struct ConvergenceReport {
  std::vector<long> n_values;
  std::vector<double> u_errors;         // max-entry error of U^(q)
  std::vector<double> e_errors;         // max over bins of projector errors
  std::vector<double> boundary_errors;  // max over quantile boundaries
  std::vector<double> prob_errors;      // max over reports/bins
};

/// Sweep N on circle data with F = (cos, sin) at fixed L and S, comparing
/// the data-driven operators, partition boundaries and probability series
/// against the analytic backend.
ConvergenceReport convergence_study(const ExperimentConfig& cfg);

void write_convergence_csv(const ConvergenceReport& report,
                           const std::string& path);

/// Rotate each near-degenerate eigenfunction pair onto the real Fourier
/// pair (sqrt2 cos m, sqrt2 sin m) evaluated at the sample angles; column 0
/// is left alone. Needed only for entrywise operator comparisons.
EigenBasis align_circle_basis(const EigenBasis& basis,
                              const Eigen::VectorXd& thetas);

/// Per-sample eigenfunction values plus a trailing time-series window,
/// eigenvalues in the header comment.
void eigfuncs_dump(const OperatorBundle& bundle, int j_count,
                   double window_time, const std::string& out_dir);

int count_zero_crossings(const Eigen::VectorXd& series);

std::uint64_t fnv1a64(const void* data, std::size_t bytes,
                      std::uint64_t seed = 1469598103934665603ULL);

}  // namespace qmda
