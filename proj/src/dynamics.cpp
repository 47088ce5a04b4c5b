#include "qmda/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace qmda {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return t;
}

}  // namespace

Eigen::Vector3d l63_velocity(const Eigen::Vector3d& x, const L63Params& p) {
  return {p.sigma * (x[1] - x[0]), x[0] * (p.rho - x[2]) - x[1],
          x[0] * x[1] - p.beta * x[2]};
}

Eigen::MatrixXd integrate_rk4(const Eigen::VectorXd& x0,
                              const VelocityField& field, double dt,
                              Eigen::Index n_steps) {
  if (dt <= 0.0) throw ParameterError("integrate_rk4: dt must be positive");
  if (n_steps < 0) throw ParameterError("integrate_rk4: negative step count");

  Eigen::MatrixXd out(n_steps + 1, x0.size());
  Eigen::VectorXd x = x0;
  out.row(0) = x;
  for (Eigen::Index n = 0; n < n_steps; ++n) {
    const Eigen::VectorXd k1 = field(x);
    const Eigen::VectorXd k2 = field(x + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = field(x + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = field(x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw IntegrationDivergedError("integrate_rk4: non-finite state at step " +
                                     std::to_string(n + 1));
    out.row(n + 1) = x;
  }
  return out;
}

TrajectoryDataset spinup_sample(const L63Params& p,
                                const Eigen::Vector3d& x_init, Eigen::Index n,
                                double dt) {
  if (n < 2) throw ParameterError("spinup_sample: need at least 2 samples");
  if (dt <= 0.0) throw ParameterError("spinup_sample: dt must be positive");

  const VelocityField field = [&p](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return l63_velocity(x, p);
  };
  // Discard exactly n*dt time units of transient, then keep n samples.
  const Eigen::MatrixXd spin = integrate_rk4(x_init, field, dt, n);
  const Eigen::MatrixXd orbit =
      integrate_rk4(spin.row(n).transpose(), field, dt, n - 1);

  TrajectoryDataset ds;
  ds.delta_t = dt;
  ds.samples = orbit;
  ds.h_values = orbit.col(0);
  return ds;
}

TrajectoryDataset circle_trajectory(double theta0, const CircleParams& c,
                                    double dt, Eigen::Index n,
                                    const CircleObservable& obs) {
  if (c.omega == 0.0) throw ParameterError("circle_trajectory: omega must be nonzero");
  if (dt <= 0.0) throw ParameterError("circle_trajectory: dt must be positive");
  if (n < 1) throw ParameterError("circle_trajectory: need at least 1 sample");
  if (obs.kind == CircleObservable::Kind::binary &&
      (obs.alpha <= 0.0 || obs.alpha >= kTwoPi))
    throw ParameterError("circle_trajectory: alpha must lie in (0, 2pi)");

  TrajectoryDataset ds;
  ds.delta_t = dt;
  ds.samples.resize(n, 2);
  ds.h_values.resize(n);
  std::vector<double> thetas(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double theta = wrap_angle(theta0 + static_cast<double>(i) * c.omega * dt);
    thetas[static_cast<std::size_t>(i)] = theta;
    ds.samples(i, 0) = std::cos(theta);
    ds.samples(i, 1) = std::sin(theta);
    ds.h_values[i] = obs.kind == CircleObservable::Kind::binary
                         ? (theta < obs.alpha ? 1.0 : 0.0)
                         : std::cos(theta);
  }

  // Rational resonance between omega*dt and 2pi repeats points exactly.
  if (n > 1) {
    std::sort(thetas.begin(), thetas.end());
    constexpr double kDupTol = 1e-12;
    for (std::size_t i = 1; i < thetas.size(); ++i)
      if (thetas[i] - thetas[i - 1] < kDupTol)
        throw DuplicateSampleError(
            "circle_trajectory: duplicate samples; omega*dt resonates with 2pi");
    if (kTwoPi - thetas.back() + thetas.front() < kDupTol)
      throw DuplicateSampleError(
          "circle_trajectory: duplicate samples; omega*dt resonates with 2pi");
  }
  return ds;
}

EmbeddedSeries delay_embed(const Eigen::VectorXd& h_values, int q_delays) {
  const Eigen::Index n = h_values.size();
  if (q_delays < 1) throw ParameterError("delay_embed: Q must be >= 1");
  if (q_delays > n)
    throw InsufficientDataError("delay_embed: Q exceeds series length");

  EmbeddedSeries es;
  es.q_delays = q_delays;
  es.vectors.resize(n - q_delays + 1, q_delays);
  for (Eigen::Index row = 0; row + q_delays <= n; ++row)
    for (int k = 0; k < q_delays; ++k)
      es.vectors(row, k) = h_values[row + q_delays - 1 - k];
  return es;
}

void write_dataset_csv(const TrajectoryDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("write_dataset_csv: cannot open " + path);
  out << "index,t";
  for (Eigen::Index j = 0; j < ds.ambient_dim(); ++j) out << ",x" << (j + 1);
  out << ",h\n";
  char buf[32];
  for (Eigen::Index i = 0; i < ds.n_samples(); ++i) {
    out << i;
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(i) * ds.delta_t);
    out << ',' << buf;
    for (Eigen::Index j = 0; j < ds.ambient_dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.samples(i, j));
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", ds.h_values[i]);
    out << ',' << buf << '\n';
  }
}

}  // namespace qmda
