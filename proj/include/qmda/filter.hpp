#pragma once

#include <Eigen/Dense>
#include <complex>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "qmda/errors.hpp"
#include "qmda/metrics.hpp"
#include "qmda/operators.hpp"
#include "qmda/quantizer.hpp"

namespace qmda {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Filter state: Hermitian, positive-semidefinite, unit-trace matrix over the
// backend's scalar field (real for the data-driven basis, complex for the
// analytic circle basis).
template <typename Scalar>
struct DensityMatrix {
  DenseMatrix<Scalar> m;

  Eigen::Index dim() const { return m.rows(); }
  double trace_real() const { return std::real(m.trace()); }
  double hermiticity_error() const {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
  }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> es(m,
                                                          Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
  double purity() const { return std::real((m * m).trace()); }
  void symmetrize() { m = ((m + m.adjoint().eval()) / Scalar(2)).eval(); }
};

/// Rank-one projector onto the constant basis vector: entry (0,0) = 1.
template <typename Scalar>
DensityMatrix<Scalar> stationary_state(Eigen::Index dim);

/// Forecast by operator conjugation with trace renormalization:
/// rho -> U* rho U / tr(U* rho U). Hermiticity is repaired afterwards.
template <typename Scalar>
DensityMatrix<Scalar> forecast(const DensityMatrix<Scalar>& rho,
                               const DenseMatrix<Scalar>& u);

/// P_i = tr(E_i rho); negative roundoff clamps to 0 and the vector is
/// renormalized when the raw sum is within 1e-6 of 1 (else it throws).
template <typename Scalar>
Eigen::VectorXd measurement_probs(const DensityMatrix<Scalar>& rho,
                                  const std::vector<DenseMatrix<Scalar>>& projectors);

enum class ZeroProbPolicy { error, reset_to_stationary };

/// Projective update rho -> E_i rho E_i / tr(E_i rho E_i). On a vanishing
/// denominator, either throws or resets to the stationary state per policy
/// (reset_event reports which happened). reset_state overrides the default
/// stationary layout for backends with a different constant-mode index.
template <typename Scalar>
DensityMatrix<Scalar> analyze(const DensityMatrix<Scalar>& rho_minus, int bin,
                              const std::vector<DenseMatrix<Scalar>>& projectors,
                              ZeroProbPolicy policy, bool* reset_event = nullptr,
                              const DensityMatrix<Scalar>* reset_state = nullptr);

struct FilterConfig {
  int obs_interval_steps = 1;   // q between measurements
  int report_stride = 1;        // steps between probability reports
  ZeroProbPolicy zero_prob_policy = ZeroProbPolicy::error;
  double prob_floor = 9.313225746154785e-10;  // 2^-30, ignorance clamp
  bool check_invariants = true;
};

struct StepRecord {
  double time = 0.0;
  Eigen::VectorXd probs;
  int measured_bin = -1;  // -1: no measurement at this step
  double measured_value = std::numeric_limits<double>::quiet_NaN();
  double precision = 0.0;   // D(t), bits
  double ignorance = 0.0;   // E(t), bits
  bool ignorance_clamped = false;
  bool reset_event = false;
};

// Advances the post-analysis state by q base steps (forecast semantics,
// including trace renormalization).
template <typename Scalar>
class Propagator {
 public:
  virtual ~Propagator() = default;
  virtual DensityMatrix<Scalar> advance(const DensityMatrix<Scalar>& rho_plus,
                                        int q) const = 0;
  // Rank-one projector onto the constant eigenfunction in this backend's
  // index layout.
  virtual DensityMatrix<Scalar> initial_state(Eigen::Index dim) const {
    return stationary_state<Scalar>(dim);
  }
};

// Data-driven backend: precomputed shift matrices for every q it will be
// asked to advance by.
class ShiftPropagator final : public Propagator<double> {
 public:
  explicit ShiftPropagator(std::map<int, Eigen::MatrixXd> shifts)
      : shifts_(std::move(shifts)) {}
  ShiftPropagator(const EigenBasis& basis, const std::vector<int>& q_values);

  DensityMatrix<double> advance(const DensityMatrix<double>& rho_plus,
                                int q) const override;
  const std::map<int, Eigen::MatrixXd>& shifts() const { return shifts_; }

 private:
  std::map<int, Eigen::MatrixXd> shifts_;
};

// Analytic circle backend: exact phase evolution of the matrix elements.
// The constant eigenfunction sits at the centered index l_max.
class CirclePropagator final : public Propagator<std::complex<double>> {
 public:
  CirclePropagator(const AnalyticCircleBasis& basis, double dt_base)
      : basis_(basis), dt_base_(dt_base) {}

  DensityMatrix<std::complex<double>> advance(
      const DensityMatrix<std::complex<double>>& rho_plus, int q) const override;
  DensityMatrix<std::complex<double>> initial_state(
      Eigen::Index dim) const override;

 private:
  AnalyticCircleBasis basis_;
  double dt_base_;
};

/// rho_t[j,k] = exp(i (k-j) omega t) rho[j,k], renormalized to unit trace
/// (a no-op: the diagonal carries the trace and is untouched).
DensityMatrix<std::complex<double>> circle_phase_forecast(
    const DensityMatrix<std::complex<double>>& rho,
    const AnalyticCircleBasis& c, double t);

/// The assimilation cycle: start at the stationary state, report
/// probabilities every report_stride base steps, and at every
/// obs_interval_steps-th step measure truth_h, affiliate it, and collapse.
/// truth_h holds one value per base step (size n_steps+1).
template <typename Scalar>
std::vector<StepRecord> run_filter(const Propagator<Scalar>& propagator,
                                   const std::vector<DenseMatrix<Scalar>>& projectors,
                                   const PartitionSpec& partition,
                                   const Eigen::VectorXd& truth_h,
                                   double dt_base, const FilterConfig& cfg);

MetricsSeries to_metrics_series(const std::vector<StepRecord>& records, int s);

void write_run_csv(const std::vector<StepRecord>& records, int s,
                   const std::string& path);

}  // namespace qmda
