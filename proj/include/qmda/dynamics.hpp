#pragma once

#include <Eigen/Dense>
#include <functional>
#include <numbers>
#include <string>

#include "qmda/errors.hpp"

namespace qmda {

struct CircleParams {
  double omega = 1.0;  // angular frequency (rad per unit time), nonzero
  double period() const { return 2.0 * std::numbers::pi / omega; }
};

struct L63Params {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

// One sampled orbit: ambient points x_n (one per row), scalar observable
// values h(x_n), and a fixed sampling interval.
struct TrajectoryDataset {
  double delta_t = 0.0;
  Eigen::MatrixXd samples;   // N x m
  Eigen::VectorXd h_values;  // N
  Eigen::Index n_samples() const { return samples.rows(); }
  Eigen::Index ambient_dim() const { return samples.cols(); }
};

// Delay-coordinate vectors (h_n, h_{n-1}, ..., h_{n-Q+1}), one per row,
// aligned to source indices Q-1..N-1.
struct EmbeddedSeries {
  int q_delays = 1;
  Eigen::MatrixXd vectors;  // (N-Q+1) x Q
};

Eigen::Vector3d l63_velocity(const Eigen::Vector3d& x, const L63Params& p);

using VelocityField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Fixed-step classical 4th-order Runge-Kutta. Returns n_steps+1 rows,
/// the first being x0. Throws IntegrationDivergedError if the state
/// stops being finite.
Eigen::MatrixXd integrate_rk4(const Eigen::VectorXd& x0,
                              const VelocityField& field, double dt,
                              Eigen::Index n_steps);

/// Integrate L63 from x_init for n*dt time units to shed the transient,
/// then record n samples at spacing dt. h is the first state coordinate.
TrajectoryDataset spinup_sample(const L63Params& p,
                                const Eigen::Vector3d& x_init, Eigen::Index n,
                                double dt);

struct CircleObservable {
  enum class Kind { binary, cosine };
  Kind kind = Kind::cosine;
  double alpha = std::numbers::pi;  // arc on which the binary observable is 1
};

/// Sample theta_n = theta0 + n*omega*dt (mod 2pi). The ambient embedding is
/// (cos theta, sin theta) so the observation map stays injective and
/// continuous. Throws DuplicateSampleError when the step resonates with the
/// period and produces coincident samples.
TrajectoryDataset circle_trajectory(double theta0, const CircleParams& c,
                                    double dt, Eigen::Index n,
                                    const CircleObservable& obs);

EmbeddedSeries delay_embed(const Eigen::VectorXd& h_values, int q_delays);

// Columns: index, t, x1..xm, h
void write_dataset_csv(const TrajectoryDataset& ds, const std::string& path);

}  // namespace qmda
