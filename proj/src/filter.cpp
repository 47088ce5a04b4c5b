#include "qmda/filter.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace qmda {

namespace {

constexpr double kTraceFloor = 1e-14;

template <typename Scalar>
double trace_of_product(const DenseMatrix<Scalar>& e,
                        const DenseMatrix<Scalar>& rho) {
  // tr(E rho) = sum_jk E[j,k] rho[k,j]; both are Hermitian so this is
  // the (real) Frobenius pairing.
  return std::real((e.array() * rho.transpose().array()).sum());
}

std::string step_context(const char* what, Eigen::Index step, double t) {
  return std::string(what) + " (at step " + std::to_string(step) +
         ", t=" + std::to_string(t) + ")";
}

void check_state_invariants(double trace_dev, double herm_err, double min_eig,
                            const char* where) {
  if (trace_dev > 1e-10)
    throw InternalConsistencyError(std::string(where) +
                                   ": trace deviates from 1 by " +
                                   std::to_string(trace_dev));
  if (herm_err > 1e-12)
    throw InternalConsistencyError(std::string(where) +
                                   ": hermiticity deviation " +
                                   std::to_string(herm_err));
  if (min_eig < -1e-9)
    throw InternalConsistencyError(std::string(where) +
                                   ": negative eigenvalue " +
                                   std::to_string(min_eig));
}

}  // namespace

template <typename Scalar>
DensityMatrix<Scalar> stationary_state(Eigen::Index dim) {
  if (dim < 1) throw ParameterError("stationary_state: dim must be >= 1");
  DensityMatrix<Scalar> rho;
  rho.m = DenseMatrix<Scalar>::Zero(dim, dim);
  rho.m(0, 0) = Scalar(1);
  return rho;
}

template <typename Scalar>
DensityMatrix<Scalar> forecast(const DensityMatrix<Scalar>& rho,
                               const DenseMatrix<Scalar>& u) {
  if (u.rows() != rho.dim() || u.cols() != rho.dim())
    throw ParameterError("forecast: dimension mismatch");
  DensityMatrix<Scalar> out;
  out.m.noalias() = u.adjoint() * rho.m * u;
  const double tr = std::real(out.m.trace());
  if (tr <= kTraceFloor)
    throw ForecastDegenerateError("forecast: trace collapsed to " +
                                  std::to_string(tr));
  out.m /= Scalar(tr);
  out.symmetrize();
  return out;
}

template <typename Scalar>
Eigen::VectorXd measurement_probs(
    const DensityMatrix<Scalar>& rho,
    const std::vector<DenseMatrix<Scalar>>& projectors) {
  Eigen::VectorXd probs(static_cast<Eigen::Index>(projectors.size()));
  for (std::size_t i = 0; i < projectors.size(); ++i) {
    if (projectors[i].rows() != rho.dim())
      throw ParameterError("measurement_probs: dimension mismatch");
    probs[static_cast<Eigen::Index>(i)] =
        trace_of_product<Scalar>(projectors[i], rho.m);
  }
  const double raw_sum = probs.sum();
  if (std::abs(raw_sum - 1.0) >= 1e-6)
    throw InternalConsistencyError(
        "measurement_probs: probabilities sum to " + std::to_string(raw_sum));
  probs = probs.cwiseMax(0.0);
  probs /= probs.sum();
  return probs;
}

template <typename Scalar>
DensityMatrix<Scalar> analyze(const DensityMatrix<Scalar>& rho_minus, int bin,
                              const std::vector<DenseMatrix<Scalar>>& projectors,
                              ZeroProbPolicy policy, bool* reset_event,
                              const DensityMatrix<Scalar>* reset_state) {
  if (bin < 0 || static_cast<std::size_t>(bin) >= projectors.size())
    throw ParameterError("analyze: bin index out of range");
  if (reset_event) *reset_event = false;

  const DenseMatrix<Scalar>& e = projectors[static_cast<std::size_t>(bin)];
  DensityMatrix<Scalar> out;
  out.m.noalias() = e * rho_minus.m * e;
  const double z = std::real(out.m.trace());
  if (z <= kTraceFloor) {
    if (policy == ZeroProbPolicy::error)
      throw ZeroProbabilityError("analyze: measurement of bin " +
                                 std::to_string(bin) +
                                 " has vanishing probability");
    if (reset_event) *reset_event = true;
    return reset_state ? *reset_state
                       : stationary_state<Scalar>(rho_minus.dim());
  }
  out.m /= Scalar(z);
  out.symmetrize();
  return out;
}

ShiftPropagator::ShiftPropagator(const EigenBasis& basis,
                                 const std::vector<int>& q_values) {
  for (const int q : q_values)
    if (!shifts_.count(q)) shifts_.emplace(q, shift_matrix(basis, q).m);
}

DensityMatrix<double> ShiftPropagator::advance(
    const DensityMatrix<double>& rho_plus, int q) const {
  if (q == 0) return rho_plus;
  const auto it = shifts_.find(q);
  if (it == shifts_.end())
    throw ParameterError("ShiftPropagator: no shift matrix for q=" +
                         std::to_string(q));
  return forecast(rho_plus, it->second);
}

DensityMatrix<std::complex<double>> circle_phase_forecast(
    const DensityMatrix<std::complex<double>>& rho,
    const AnalyticCircleBasis& c, double t) {
  if (rho.dim() != c.dim())
    throw ParameterError("circle_phase_forecast: dimension mismatch");
  DensityMatrix<std::complex<double>> out;
  out.m.resize(rho.dim(), rho.dim());
  const std::complex<double> i_unit(0.0, 1.0);
  for (Eigen::Index a = 0; a < rho.dim(); ++a)
    for (Eigen::Index b = 0; b < rho.dim(); ++b)
      out.m(a, b) =
          std::exp(i_unit * (static_cast<double>(b - a) * c.omega * t)) *
          rho.m(a, b);
  // phases leave the diagonal alone, so the trace is already 1
  const double tr = std::real(out.m.trace());
  if (tr <= kTraceFloor)
    throw ForecastDegenerateError("circle_phase_forecast: degenerate trace");
  out.m /= tr;
  out.symmetrize();
  return out;
}

DensityMatrix<std::complex<double>> CirclePropagator::advance(
    const DensityMatrix<std::complex<double>>& rho_plus, int q) const {
  if (q == 0) return rho_plus;
  return circle_phase_forecast(rho_plus, basis_, q * dt_base_);
}

DensityMatrix<std::complex<double>> CirclePropagator::initial_state(
    Eigen::Index dim) const {
  if (dim != basis_.dim())
    throw ParameterError("CirclePropagator: dimension mismatch");
  DensityMatrix<std::complex<double>> rho;
  rho.m = Eigen::MatrixXcd::Zero(dim, dim);
  rho.m(basis_.l_max, basis_.l_max) = 1.0;
  return rho;
}

template <typename Scalar>
std::vector<StepRecord> run_filter(
    const Propagator<Scalar>& propagator,
    const std::vector<DenseMatrix<Scalar>>& projectors,
    const PartitionSpec& partition, const Eigen::VectorXd& truth_h,
    double dt_base, const FilterConfig& cfg) {
  if (cfg.obs_interval_steps < 1)
    throw ParameterError("run_filter: obs_interval_steps must be >= 1");
  if (cfg.report_stride < 1)
    throw ParameterError("run_filter: report_stride must be >= 1");
  if (!(cfg.prob_floor > 0.0) || cfg.prob_floor >= 1.0 / partition.s)
    throw ParameterError("run_filter: prob_floor must lie in (0, 1/S)");
  if (truth_h.size() < 2)
    throw ParameterError("run_filter: truth series too short");
  if (static_cast<std::size_t>(partition.s) != projectors.size())
    throw ParameterError("run_filter: partition/projector size mismatch");

  const Eigen::Index n_steps = truth_h.size() - 1;
  const Eigen::Index dim = projectors.front().rows();

  const DensityMatrix<Scalar> rho_bar = propagator.initial_state(dim);
  DensityMatrix<Scalar> rho_plus = rho_bar;
  Eigen::Index anchor = 0;
  std::vector<StepRecord> records;
  records.reserve(static_cast<std::size_t>(n_steps / cfg.report_stride + 2));

  for (Eigen::Index n = 0; n <= n_steps; ++n) {
    const bool is_measurement =
        n > 0 && n % cfg.obs_interval_steps == 0;
    const bool is_report = n % cfg.report_stride == 0 || is_measurement;
    if (!is_report) continue;

    StepRecord rec;
    rec.time = static_cast<double>(n) * dt_base;
    try {
      const DensityMatrix<Scalar> rho_t =
          propagator.advance(rho_plus, static_cast<int>(n - anchor));
      rec.probs = measurement_probs(rho_t, projectors);
      rec.precision = precision_bits(rec.probs);
      const int truth_bin = affiliation(partition, truth_h[n]);
      const IgnoranceResult ign =
          ignorance_bits(rec.probs, truth_bin, cfg.prob_floor);
      rec.ignorance = ign.bits;
      rec.ignorance_clamped = ign.clamped;

      if (cfg.check_invariants) {
        check_state_invariants(std::abs(rho_t.trace_real() - 1.0),
                               rho_t.hermiticity_error(),
                               rho_t.min_eigenvalue(), "run_filter forecast");
        if (std::abs(rec.probs.sum() - 1.0) > 1e-9)
          throw InternalConsistencyError("run_filter: probability sum drifted");
      }

      if (is_measurement) {
        rec.measured_value = truth_h[n];
        rec.measured_bin = affiliation(partition, rec.measured_value);
        bool reset = false;
        rho_plus = analyze(rho_t, rec.measured_bin, projectors,
                           cfg.zero_prob_policy, &reset, &rho_bar);
        rec.reset_event = reset;
        anchor = n;
        if (cfg.check_invariants)
          check_state_invariants(std::abs(rho_plus.trace_real() - 1.0),
                                 rho_plus.hermiticity_error(),
                                 rho_plus.min_eigenvalue(),
                                 "run_filter analyze");
      }
    } catch (const ZeroProbabilityError& err) {
      throw ZeroProbabilityError(step_context(err.what(), n, rec.time));
    } catch (const ForecastDegenerateError& err) {
      throw ForecastDegenerateError(step_context(err.what(), n, rec.time));
    } catch (const InternalConsistencyError& err) {
      throw InternalConsistencyError(step_context(err.what(), n, rec.time));
    } catch (const NumericalError& err) {
      throw NumericalError(step_context(err.what(), n, rec.time));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

MetricsSeries to_metrics_series(const std::vector<StepRecord>& records, int s) {
  MetricsSeries series;
  series.s = s;
  const Eigen::Index n = static_cast<Eigen::Index>(records.size());
  series.times.resize(n);
  series.precision.resize(n);
  series.ignorance.resize(n);
  series.clamped.resize(n);
  const double threshold = std::log2(static_cast<double>(s));
  Eigen::Index useful = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    series.times[i] = r.time;
    series.precision[i] = r.precision;
    series.ignorance[i] = r.ignorance;
    series.clamped[i] = r.ignorance_clamped ? 1 : 0;
    if (r.ignorance < threshold) ++useful;
  }
  series.useful_fraction =
      n > 0 ? static_cast<double>(useful) / static_cast<double>(n) : 0.0;
  return series;
}

void write_run_csv(const std::vector<StepRecord>& records, int s,
                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("write_run_csv: cannot open " + path);
  out << "t";
  for (int i = 0; i < s; ++i) out << ",P_" << i;
  out << ",measured_bin,measured_value,D,E\n";
  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (const auto& r : records) {
    put(r.time);
    for (Eigen::Index i = 0; i < r.probs.size(); ++i) {
      out << ',';
      put(r.probs[i]);
    }
    out << ',';
    if (r.measured_bin >= 0) out << r.measured_bin;
    out << ',';
    if (r.measured_bin >= 0) put(r.measured_value);
    out << ',';
    put(r.precision);
    out << ',';
    put(r.ignorance);
    out << '\n';
  }
}

// explicit instantiations for the two backend scalar fields
template struct DensityMatrix<double>;
template struct DensityMatrix<std::complex<double>>;

template DensityMatrix<double> stationary_state<double>(Eigen::Index);
template DensityMatrix<std::complex<double>>
stationary_state<std::complex<double>>(Eigen::Index);

template DensityMatrix<double> forecast<double>(const DensityMatrix<double>&,
                                                const DenseMatrix<double>&);
template DensityMatrix<std::complex<double>> forecast<std::complex<double>>(
    const DensityMatrix<std::complex<double>>&,
    const DenseMatrix<std::complex<double>>&);

template Eigen::VectorXd measurement_probs<double>(
    const DensityMatrix<double>&, const std::vector<DenseMatrix<double>>&);
template Eigen::VectorXd measurement_probs<std::complex<double>>(
    const DensityMatrix<std::complex<double>>&,
    const std::vector<DenseMatrix<std::complex<double>>>&);

template DensityMatrix<double> analyze<double>(
    const DensityMatrix<double>&, int, const std::vector<DenseMatrix<double>>&,
    ZeroProbPolicy, bool*, const DensityMatrix<double>*);
template DensityMatrix<std::complex<double>> analyze<std::complex<double>>(
    const DensityMatrix<std::complex<double>>&, int,
    const std::vector<DenseMatrix<std::complex<double>>>&, ZeroProbPolicy,
    bool*, const DensityMatrix<std::complex<double>>*);

template std::vector<StepRecord> run_filter<double>(
    const Propagator<double>&, const std::vector<DenseMatrix<double>>&,
    const PartitionSpec&, const Eigen::VectorXd&, double, const FilterConfig&);
template std::vector<StepRecord> run_filter<std::complex<double>>(
    const Propagator<std::complex<double>>&,
    const std::vector<DenseMatrix<std::complex<double>>>&,
    const PartitionSpec&, const Eigen::VectorXd&, double, const FilterConfig&);

}  // namespace qmda
