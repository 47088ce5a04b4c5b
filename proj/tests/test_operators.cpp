#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "oracles.hpp"
#include "qmda/dynamics.hpp"
#include "qmda/filter.hpp"
#include "qmda/operators.hpp"

using namespace qmda;

namespace {
constexpr double kPi = std::numbers::pi;
using Complex = std::complex<double>;

EigenBasis circle_basis(int n, int l, double theta0 = 0.37) {
  CircleParams c{1.0};
  CircleObservable obs{CircleObservable::Kind::cosine, 0.0};
  const auto ds = circle_trajectory(
      theta0, c, c.period() / (50.0 * std::sqrt(2.0)), n, obs);
  KernelBasisParams prm;
  prm.k_b = 8;
  return build_basis(ds.samples, l, prm).basis;
}
}  // namespace

TEST_CASE("shift_matrix") {
  const auto basis = circle_basis(400, 9);

  SUBCASE("q=0 is the identity up to orthonormality tolerance") {
    const auto u = shift_matrix(basis, 0);
    CHECK((u.m - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("matches the direct double sum") {
    const int q = 7;
    const auto u = shift_matrix(basis, q);
    Eigen::MatrixXd direct = Eigen::MatrixXd::Zero(9, 9);
    for (int j = 0; j < 9; ++j)
      for (int k = 0; k < 9; ++k) {
        double acc = 0.0;
        for (int n = 0; n < 400 - q; ++n)
          acc += basis.values(n, j) * basis.values(n + q, k);
        direct(j, k) = acc / 400.0;
      }
    CHECK((u.m - direct).cwiseAbs().maxCoeff() < 1e-13);
  }

  SUBCASE("row 0 concentrates on (1 - q/N, 0, ..., 0)") {
    const int n = 2000, q = 40;
    const auto big = circle_basis(n, 9);
    const auto u = shift_matrix(big, q);
    const double expected = 1.0 - static_cast<double>(q) / n;
    CHECK(std::abs(u.m(0, 0) - expected) < 5.0 / std::sqrt(n) + 2.0 * q / n);
    for (int k = 1; k < 9; ++k)
      CHECK(std::abs(u.m(0, k)) < 5.0 / std::sqrt(n) + 2.0 * q / n);
  }

  SUBCASE("contraction: largest singular value stays near or below 1") {
    for (const int q : {0, 1, 5, 20}) {
      const auto u = shift_matrix(basis, q);
      const double smax =
          u.m.jacobiSvd().singularValues()(0);
      CHECK(smax <= 1.0 + 1e-8);
    }
  }

  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(shift_matrix(basis, 400), ParameterError);
    CHECK_THROWS_AS(shift_matrix(basis, -1), ParameterError);
  }
}

TEST_CASE("shift_power") {
  const auto basis = circle_basis(300, 7);

  SUBCASE("q=0 and q=1 agree between modes") {
    CHECK((shift_power(basis, 0, ShiftMode::power).m -
           shift_matrix(basis, 0).m).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((shift_power(basis, 1, ShiftMode::power).m -
           shift_matrix(basis, 1).m).cwiseAbs().maxCoeff() == 0.0);
    CHECK((shift_power(basis, 5, ShiftMode::direct).m -
           shift_matrix(basis, 5).m).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("finite-N discrepancy shrinks with N") {
    double prev = 1e9;
    for (const int n : {250, 500, 1000}) {
      const auto b = circle_basis(n, 7);
      const double diff = (shift_power(b, 5, ShiftMode::power).m -
                           shift_matrix(b, 5).m).cwiseAbs().maxCoeff();
      CHECK(diff < prev);
      prev = diff;
    }
  }
}

TEST_CASE("circle binary projectors") {
  AnalyticCircleBasis basis{16, 1.0};

  SUBCASE("complementarity is exact") {
    const auto set = circle_binary_projectors(1.234, basis);
    const Eigen::MatrixXcd sum = set.mats[0] + set.mats[1];
    CHECK((sum - Eigen::MatrixXcd::Identity(33, 33)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("alpha = pi closed-form entries") {
    const auto set = circle_binary_projectors(kPi, basis);
    for (int a = 0; a < 33; ++a)
      CHECK(set.mats[1](a, a) == doctest::Approx(0.5));
    // k - j = 1 entries equal i/pi
    CHECK(set.mats[1](16, 17).real() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(set.mats[1](16, 17).imag() == doctest::Approx(1.0 / kPi));
  }

  SUBCASE("entries match the quadrature oracle") {
    const double alpha = 2.1;
    const auto set = circle_binary_projectors(alpha, basis);
    for (const int a : {0, 5, 16, 30})
      for (const int b : {0, 7, 16, 32}) {
        const Complex direct = oracle::fourier_arc_integral(b - a, 0.0, alpha);
        CHECK(std::abs(set.mats[1](a, b) - direct) < 1e-12);
      }
  }

  SUBCASE("hermiticity") {
    const auto set = circle_binary_projectors(0.7, basis);
    for (const auto& e : set.mats)
      CHECK((e - e.adjoint()).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("circle cos projectors") {
  AnalyticCircleBasis basis{12, 1.0};
  const int s = 8;
  const auto set = circle_cos_projectors(s, basis);

  SUBCASE("resolution of identity and flat diagonal") {
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(25, 25);
    for (const auto& e : set.mats) sum += e;
    CHECK((sum - Eigen::MatrixXcd::Identity(25, 25)).cwiseAbs().maxCoeff() < 1e-12);
    for (const auto& e : set.mats)
      for (int a = 0; a < 25; ++a)
        CHECK(e(a, a).real() == doctest::Approx(1.0 / s).epsilon(1e-13));
  }

  SUBCASE("entries match quadrature over the preimage arcs") {
    for (const int i : {0, 3, 7}) {
      const double a_hi = (1.0 - static_cast<double>(i) / s) * kPi;
      const double a_lo = (1.0 - static_cast<double>(i + 1) / s) * kPi;
      for (const int a : {0, 6, 12, 20})
        for (const int b : {0, 12, 24}) {
          const Complex direct =
              oracle::fourier_arc_integral(b - a, a_lo, a_hi) +
              oracle::fourier_arc_integral(b - a, -a_hi, -a_lo);
          CHECK(std::abs(set.mats[static_cast<std::size_t>(i)](a, b) - direct)
                < 1e-12);
        }
    }
  }

  SUBCASE("projector matrices are real symmetric for the cos observable") {
    for (const auto& e : set.mats) {
      CHECK(e.imag().cwiseAbs().maxCoeff() == 0.0);
      CHECK((e - e.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("circle cos partition closed forms") {
  const auto spec = circle_cos_partition(2);
  CHECK(spec.boundaries[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(spec.cond_means[0] == doctest::Approx(-2.0 / kPi));
  CHECK(spec.cond_means[1] == doctest::Approx(2.0 / kPi));

  const auto spec32 = circle_cos_partition(32);
  for (int k = 1; k < 32; ++k)
    CHECK(spec32.boundaries[k - 1] ==
          doctest::Approx(std::cos((1.0 - k / 32.0) * kPi)).epsilon(1e-14));
  CHECK(spec32.masses.sum() == doctest::Approx(1.0));
}

TEST_CASE("circle_phase_forecast") {
  AnalyticCircleBasis basis{8, 1.3};
  const int dim = basis.dim();

  // a mixed state built from two pure components
  DensityMatrix<Complex> rho;
  Eigen::VectorXcd f1(dim), f2(dim);
  for (int a = 0; a < dim; ++a) {
    f1[a] = Complex(std::cos(0.3 * a), std::sin(0.2 * a));
    f2[a] = Complex(std::cos(0.9 * a + 1.0), -std::sin(0.4 * a));
  }
  f1.normalize();
  f2.normalize();
  rho.m = 0.7 * f1 * f1.adjoint() + 0.3 * f2 * f2.adjoint();

  SUBCASE("t = 0 is the identity map") {
    const auto out = circle_phase_forecast(rho, basis, 0.0);
    CHECK((out.m - rho.m).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("stationary state is invariant for all t") {
    const auto bar = stationary_state<Complex>(dim);
    // index layout: array 0 is Fourier -l_max; the constant sits at l_max.
    DensityMatrix<Complex> stat;
    stat.m = Eigen::MatrixXcd::Zero(dim, dim);
    stat.m(basis.l_max, basis.l_max) = 1.0;
    const auto out = circle_phase_forecast(stat, basis, 2.7);
    CHECK((out.m - stat.m).cwiseAbs().maxCoeff() == 0.0);
    CHECK(bar.m(0, 0) == Complex(1.0));
  }

  SUBCASE("one full period returns the state exactly") {
    const double period = 2.0 * kPi / basis.omega;
    const auto out = circle_phase_forecast(rho, basis, period);
    CHECK((out.m - rho.m).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("trace, hermiticity, purity are preserved") {
    const auto out = circle_phase_forecast(rho, basis, 0.83);
    CHECK(std::abs(out.trace_real() - 1.0) < 1e-14);
    CHECK(out.hermiticity_error() < 1e-15);
    CHECK(out.purity() == doctest::Approx(rho.purity()).epsilon(1e-12));
    CHECK(out.min_eigenvalue() > -1e-12);
  }
}

TEST_CASE("real Fourier pairing") {
  AnalyticCircleBasis basis{5, 1.0};

  SUBCASE("change of basis is unitary") {
    const Eigen::MatrixXcd c = real_fourier_change_of_basis(5);
    CHECK((c.adjoint() * c - Eigen::MatrixXcd::Identity(11, 11))
              .cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("Koopman matrix becomes rotation blocks") {
    const double t = 0.61;
    const Eigen::MatrixXcd c = real_fourier_change_of_basis(5);
    Eigen::MatrixXcd u_complex = Eigen::MatrixXcd::Zero(11, 11);
    for (int a = 0; a < 11; ++a)
      u_complex(a, a) = std::exp(Complex(0, (a - 5) * t));
    const Eigen::MatrixXcd u_real_c = c.adjoint() * u_complex * c;
    CHECK(u_real_c.imag().cwiseAbs().maxCoeff() < 1e-14);
    CHECK((u_real_c.real() - real_shift_matrix(basis, t)).cwiseAbs().maxCoeff()
          < 1e-13);
  }

  SUBCASE("cos projectors stay real in the real basis") {
    const auto set = circle_cos_projectors(4, basis);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(11, 11);
    for (const auto& e : set.mats) sum += real_projector(e, 5);
    CHECK((sum - Eigen::MatrixXd::Identity(11, 11)).cwiseAbs().maxCoeff() < 1e-12);
  }
}
