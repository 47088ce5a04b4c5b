#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qmda/dynamics.hpp"

using namespace qmda;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("l63_velocity closed-form values") {
  const L63Params p;
  CHECK(l63_velocity({0, 0, 0}, p).norm() == 0.0);

  const Eigen::Vector3d v = l63_velocity({1, 1, 1}, p);
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(26.0));
  CHECK(v[2] == doctest::Approx(-5.0 / 3.0));
}

TEST_CASE("l63_velocity divergence is -(sigma+1+beta) everywhere") {
  const L63Params p;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Vector3d x(u(rng), u(rng), u(rng));
    double div = 0.0;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d hi = x, lo = x;
      hi[k] += h;
      lo[k] -= h;
      div += (l63_velocity(hi, p)[k] - l63_velocity(lo, p)[k]) / (2 * h);
    }
    CHECK(div == doctest::Approx(-(p.sigma + 1.0 + p.beta)).epsilon(1e-6));
  }
}

TEST_CASE("integrate_rk4 constant-zero field keeps the state") {
  const auto zero = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  Eigen::VectorXd x0(2);
  x0 << 3.0, -1.0;
  const Eigen::MatrixXd out = integrate_rk4(x0, zero, 0.1, 25);
  CHECK(out.rows() == 26);
  CHECK((out.rowwise() - x0.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("integrate_rk4 harmonic field matches the closed form") {
  const auto field = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd v(2);
    v << x[1], -x[0];
    return v;
  };
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.0;
  const double dt = 1e-3;
  const auto n = static_cast<Eigen::Index>(std::llround(2.0 * kPi / dt));
  const Eigen::MatrixXd out = integrate_rk4(x0, field, dt, n);
  const Eigen::Vector2d exact = oracle::harmonic_exact(x0, n * dt);
  CHECK((out.row(n).transpose() - exact).norm() < 1e-6);
}

TEST_CASE("integrate_rk4 one-step error falls ~16x when dt halves") {
  const L63Params p;
  const auto field = [&p](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return l63_velocity(x, p);
  };
  Eigen::VectorXd x0(3);
  x0 << 1.0, 1.0, 1.0;
  // Richardson-style reference: many tiny steps over the same interval
  const double dt = 0.02;
  const Eigen::MatrixXd ref = integrate_rk4(x0, field, dt / 64, 64);
  const double e1 =
      (integrate_rk4(x0, field, dt, 1).row(1) - ref.row(64)).norm();
  const Eigen::MatrixXd ref2 = integrate_rk4(x0, field, dt / 128, 128);
  const double e2 =
      (integrate_rk4(x0, field, dt / 2, 1).row(1) - ref2.row(64)).norm();
  const double ratio = e1 / e2;
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("integrate_rk4 diverging field reports integration-diverged") {
  const auto blowup = [](const Eigen::VectorXd& x) {
    return (x.array().square() * 1e10).matrix().eval();
  };
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  CHECK_THROWS_AS(integrate_rk4(x0, blowup, 10.0, 50),
                  IntegrationDivergedError);
}

TEST_CASE("L63 trajectory stays inside the absorbing ball") {
  const L63Params p;
  const auto field = [&p](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return l63_velocity(x, p);
  };
  Eigen::VectorXd x0(3);
  x0 << 1.0, 1.0, 1.0;
  const Eigen::MatrixXd orbit = integrate_rk4(x0, field, 0.01, 100000);
  CHECK(orbit.cwiseAbs().maxCoeff() < 100.0);
}

TEST_CASE("spinup_sample basic contract") {
  const L63Params p;

  SUBCASE("two samples, distinct") {
    const TrajectoryDataset ds = spinup_sample(p, {1, 1, 1}, 2, 0.01);
    CHECK(ds.n_samples() == 2);
    CHECK((ds.samples.row(0) - ds.samples.row(1)).norm() > 0.0);
    CHECK(ds.h_values[0] == ds.samples(0, 0));
  }

  SUBCASE("spun-up start point is inside the absorbing ball") {
    const TrajectoryDataset ds = spinup_sample(p, {30, -20, 40}, 2000, 0.01);
    CHECK(ds.samples.row(0).cwiseAbs().maxCoeff() < 100.0);
    CHECK(ds.samples.cwiseAbs().maxCoeff() < 100.0);
  }

  SUBCASE("paper-scale training protocol") {
    const TrajectoryDataset ds = spinup_sample(p, {1, 1, 1}, 64000, 0.01);
    CHECK(ds.n_samples() == 64000);
    CHECK(ds.delta_t == 0.01);
    CHECK(ds.h_values == ds.samples.col(0));
  }
}

TEST_CASE("circle_trajectory sampling and observables") {
  CircleParams c{1.0};

  SUBCASE("full period returns to the start") {
    CircleObservable obs{CircleObservable::Kind::cosine, 0.0};
    const auto ds = circle_trajectory(0.0, c, c.period() / 8, 8, obs);
    CHECK(ds.samples(0, 0) == doctest::Approx(1.0));
    // theta_8 = 2pi wraps to ~0 (one full revolution would duplicate; use 8 of 9ths)
  }

  SUBCASE("binary alpha=pi gives a regular square waveform") {
    CircleObservable obs{CircleObservable::Kind::binary, kPi};
    const double dt = c.period() / (50.0 * std::sqrt(2.0));
    const auto ds = circle_trajectory(0.0, c, dt, 4000, obs);
    // h flips exactly when theta crosses 0 or pi
    for (Eigen::Index i = 0; i < ds.n_samples(); ++i) {
      const double theta = std::fmod(i * c.omega * dt, 2 * kPi);
      CHECK(ds.h_values[i] == (theta < kPi ? 1.0 : 0.0));
    }
    // equal-mass: fraction of ones tends to alpha/2pi
    CHECK(ds.h_values.mean() == doctest::Approx(0.5).epsilon(2e-3));
  }

  SUBCASE("intermittent observable alpha=pi/6") {
    CircleObservable obs{CircleObservable::Kind::binary, kPi / 6};
    const double dt = c.period() / (50.0 * std::sqrt(2.0));
    const auto ds = circle_trajectory(0.0, c, dt, 20000, obs);
    CHECK(ds.h_values.mean() ==
          doctest::Approx(1.0 / 12.0).epsilon(2e-2));
  }

  SUBCASE("rational resonance raises duplicate-sample") {
    CircleObservable obs{CircleObservable::Kind::cosine, 0.0};
    CHECK_THROWS_AS(
        circle_trajectory(0.0, c, c.period() / 5.0, 10, obs),
        DuplicateSampleError);
  }

  SUBCASE("flow group property: t then s equals t+s") {
    CircleObservable obs{CircleObservable::Kind::cosine, 0.0};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 0.4);
    for (int trial = 0; trial < 5; ++trial) {
      const double dt = u(rng);
      const auto a = circle_trajectory(0.3, c, dt, 40, obs);
      const double theta_n = std::atan2(a.samples(39, 1), a.samples(39, 0));
      const auto b = circle_trajectory(theta_n, c, dt, 40, obs);
      const auto direct = circle_trajectory(0.3, c, dt, 79, obs);
      CHECK((b.samples.row(39) - direct.samples.row(78)).cwiseAbs().maxCoeff()
            < 1e-9);
    }
  }
}

TEST_CASE("delay_embed windows") {
  SUBCASE("Q=1 is the identity") {
    Eigen::VectorXd h(4);
    h << 5, 6, 7, 8;
    const auto es = delay_embed(h, 1);
    CHECK(es.vectors.rows() == 4);
    CHECK(es.vectors.col(0) == h);
  }

  SUBCASE("hand example Q=3") {
    Eigen::VectorXd h(4);
    h << 0, 1, 2, 3;
    const auto es = delay_embed(h, 3);
    CHECK(es.vectors.rows() == 2);
    CHECK(es.vectors(0, 0) == 2);
    CHECK(es.vectors(0, 1) == 1);
    CHECK(es.vectors(0, 2) == 0);
    CHECK(es.vectors(1, 0) == 3);
    CHECK(es.vectors(1, 1) == 2);
    CHECK(es.vectors(1, 2) == 1);
  }

  SUBCASE("columns are exact windows of the source series") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    Eigen::VectorXd h(200);
    for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = g(rng);
    const int q = 24;
    const auto es = delay_embed(h, q);
    CHECK(es.vectors.rows() == h.size() - q + 1);
    for (int k = 0; k < q; ++k)
      CHECK(es.vectors.col(k) == h.segment(q - 1 - k, es.vectors.rows()));
  }

  SUBCASE("Q beyond the series length is insufficient data") {
    Eigen::VectorXd h(3);
    h << 1, 2, 3;
    CHECK_THROWS_AS(delay_embed(h, 4), InsufficientDataError);
    CHECK_THROWS_AS(delay_embed(h, 0), ParameterError);
  }
}
