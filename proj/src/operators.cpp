#include "qmda/operators.hpp"

#include <cmath>
#include <numbers>

namespace qmda {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::complex<double> kI{0.0, 1.0};

}  // namespace

ShiftMatrix shift_matrix(const EigenBasis& basis, int q) {
  const Eigen::Index n = basis.n();
  const Eigen::Index l = basis.l();
  if (q < 0 || q >= n) throw ParameterError("shift_matrix: need 0 <= q < N");

  ShiftMatrix u;
  u.q = q;
  u.m.resize(l, l);
  const Eigen::Index rows = n - q;
  u.m.noalias() = basis.values.topRows(rows).transpose() *
                  basis.values.bottomRows(rows);
  u.m /= static_cast<double>(n);
  return u;
}

ShiftMatrix shift_power(const EigenBasis& basis, int q, ShiftMode mode) {
  if (mode == ShiftMode::direct) return shift_matrix(basis, q);
  const ShiftMatrix u1 = shift_matrix(basis, 1);
  ShiftMatrix u;
  u.q = q;
  u.m = Eigen::MatrixXd::Identity(basis.l(), basis.l());
  for (int k = 0; k < q; ++k) u.m = (u.m * u1.m).eval();
  return u;
}

ComplexProjectorSet circle_binary_projectors(double alpha,
                                             const AnalyticCircleBasis& c) {
  if (alpha <= 0.0 || alpha >= 2.0 * kPi)
    throw ParameterError("circle_binary_projectors: alpha must lie in (0, 2pi)");
  const int dim = c.dim();
  Eigen::MatrixXcd e1(dim, dim);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b) {
      const int diff = b - a;  // Fourier index difference k - j
      if (diff == 0) {
        e1(a, b) = alpha / (2.0 * kPi);
      } else {
        e1(a, b) = std::exp(kI * (diff * alpha / 2.0)) *
                   std::sin(diff * alpha / 2.0) / (diff * kPi);
      }
    }
  ComplexProjectorSet set;
  set.mats.push_back(Eigen::MatrixXcd::Identity(dim, dim) - e1);
  set.mats.push_back(std::move(e1));
  return set;
}

ComplexProjectorSet circle_cos_projectors(int s, const AnalyticCircleBasis& c) {
  if (s < 1) throw ParameterError("circle_cos_projectors: S must be >= 1");
  const int dim = c.dim();
  ComplexProjectorSet set;
  set.mats.reserve(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) {
    const double b_lo = static_cast<double>(i) / s;
    const double b_hi = static_cast<double>(i + 1) / s;
    Eigen::MatrixXcd e(dim, dim);
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) {
        const int diff = b - a;
        if (diff == 0)
          e(a, b) = b_hi - b_lo;
        else
          e(a, b) = (std::sin(diff * (1.0 - b_lo) * kPi) -
                     std::sin(diff * (1.0 - b_hi) * kPi)) /
                    (diff * kPi);
      }
    set.mats.push_back(std::move(e));
  }
  return set;
}

PartitionSpec circle_cos_partition(int s) {
  if (s < 1) throw ParameterError("circle_cos_partition: S must be >= 1");
  PartitionSpec spec;
  spec.s = s;
  spec.boundaries.resize(s - 1);
  spec.cond_means.resize(s);
  spec.masses = Eigen::VectorXd::Constant(s, 1.0 / s);
  for (int k = 1; k < s; ++k)
    spec.boundaries[k - 1] = std::cos((1.0 - static_cast<double>(k) / s) * kPi);
  for (int i = 0; i < s; ++i) {
    const double a_hi = (1.0 - static_cast<double>(i) / s) * kPi;
    const double a_lo = (1.0 - static_cast<double>(i + 1) / s) * kPi;
    // conditional mean of cos over the two arcs of the bin
    spec.cond_means[i] = s * (std::sin(a_hi) - std::sin(a_lo)) / kPi;
  }
  return spec;
}

PartitionSpec circle_binary_partition(double alpha) {
  if (alpha <= 0.0 || alpha >= 2.0 * kPi)
    throw ParameterError("circle_binary_partition: alpha must lie in (0, 2pi)");
  PartitionSpec spec;
  spec.s = 2;
  spec.boundaries.resize(1);
  spec.boundaries[0] = 0.5;
  spec.cond_means.resize(2);
  spec.cond_means << 0.0, 1.0;
  spec.masses.resize(2);
  spec.masses << 1.0 - alpha / (2.0 * kPi), alpha / (2.0 * kPi);
  return spec;
}

Eigen::MatrixXcd real_fourier_change_of_basis(int l_max) {
  const int dim = 2 * l_max + 1;
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(dim, dim);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  c(l_max, 0) = 1.0;  // constant
  for (int m = 1; m <= l_max; ++m) {
    // sqrt2 cos(m theta) = (phi_m + phi_-m)/sqrt2
    c(l_max + m, 2 * m - 1) = inv_sqrt2;
    c(l_max - m, 2 * m - 1) = inv_sqrt2;
    // sqrt2 sin(m theta) = -i (phi_m - phi_-m)/sqrt2
    c(l_max + m, 2 * m) = -kI * inv_sqrt2;
    c(l_max - m, 2 * m) = kI * inv_sqrt2;
  }
  return c;
}

Eigen::MatrixXd real_shift_matrix(const AnalyticCircleBasis& c, double t) {
  const int dim = c.dim();
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(dim, dim);
  u(0, 0) = 1.0;
  for (int m = 1; m <= c.l_max; ++m) {
    const double ang = m * c.omega * t;
    u(2 * m - 1, 2 * m - 1) = std::cos(ang);
    u(2 * m - 1, 2 * m) = std::sin(ang);
    u(2 * m, 2 * m - 1) = -std::sin(ang);
    u(2 * m, 2 * m) = std::cos(ang);
  }
  return u;
}

Eigen::MatrixXd real_projector(const Eigen::MatrixXcd& e, int l_max) {
  const Eigen::MatrixXcd c = real_fourier_change_of_basis(l_max);
  const Eigen::MatrixXcd er = c.adjoint() * e * c;
  if (er.imag().cwiseAbs().maxCoeff() > 1e-12)
    throw InternalConsistencyError(
        "real_projector: projector is not real in the real Fourier basis");
  return er.real();
}

}  // namespace qmda
