#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qmda/errors.hpp"
#include "qmda/kernel_basis.hpp"
#include "qmda/quantizer.hpp"

namespace qmda {

// q-step shift operator in the data-driven basis,
// U[j,k] = (1/N) sum_{n=0}^{N-1-q} phi_j(x_n) phi_k(x_{n+q}).
struct ShiftMatrix {
  int q = 0;
  Eigen::MatrixXd m;
};

ShiftMatrix shift_matrix(const EigenBasis& basis, int q);

enum class ShiftMode { direct, power };

/// direct: the q-step sum above. power: (U^(1))^q, cheaper to store but
/// numerically riskier at large q. The two agree only as N grows.
ShiftMatrix shift_power(const EigenBasis& basis, int q, ShiftMode mode);

// Truncated Fourier/Koopman eigenbasis of the circle rotation; array index
// i holds Fourier index j = i - l_max, so the dimension is 2*l_max+1 and
// index l_max is the constant eigenfunction.
struct AnalyticCircleBasis {
  int l_max = 0;
  double omega = 1.0;
  int dim() const { return 2 * l_max + 1; }
};

struct ComplexProjectorSet {
  std::vector<Eigen::MatrixXcd> mats;
};

/// Spectral projectors of the binary observable 1_[0,alpha) in the Fourier
/// basis; index 0 is the a=0 outcome, index 1 the a=1 outcome.
ComplexProjectorSet circle_binary_projectors(double alpha,
                                             const AnalyticCircleBasis& c);

/// Projectors of the S-bin equal-mass quantization of h(theta) = cos(theta).
ComplexProjectorSet circle_cos_projectors(int s, const AnalyticCircleBasis& c);

/// Equal-mass partition of cos(theta) under the invariant measure:
/// boundaries cos((1-b_k) pi) and conditional means in closed form.
PartitionSpec circle_cos_partition(int s);

/// Two-bin partition spec for the binary observable (masses 1-alpha/2pi,
/// alpha/2pi; boundary at 1/2 so measured values 0 and 1 affiliate cleanly).
PartitionSpec circle_binary_partition(double alpha);

// Unitary change of basis from the real Fourier basis
// {1, sqrt2 cos(m theta), sqrt2 sin(m theta)} to the complex one; column k of
// the returned matrix expresses real basis vector k in complex coordinates.
Eigen::MatrixXcd real_fourier_change_of_basis(int l_max);

/// Koopman matrix at time t in the real Fourier basis: identity on the
/// constant, rotation by m*omega*t on each (cos m, sin m) pair.
Eigen::MatrixXd real_shift_matrix(const AnalyticCircleBasis& c, double t);

/// Conjugate an analytic projector into the real Fourier basis.
Eigen::MatrixXd real_projector(const Eigen::MatrixXcd& e, int l_max);

}  // namespace qmda
