#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qmda/metrics.hpp"

using namespace qmda;

TEST_CASE("precision_bits") {
  SUBCASE("uniform vanishes, Dirac saturates at log2 S") {
    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(32, 1.0 / 32);
    CHECK(precision_bits(uniform) == doctest::Approx(0.0).epsilon(1e-14));
    Eigen::VectorXd dirac = Eigen::VectorXd::Zero(32);
    dirac[7] = 1.0;
    CHECK(precision_bits(dirac) == doctest::Approx(5.0));
  }

  SUBCASE("hand value for S=2") {
    Eigen::VectorXd p(2);
    p << 0.25, 0.75;
    CHECK(precision_bits(p) == doctest::Approx(0.18872187554086717).epsilon(1e-12));
  }

  SUBCASE("invariant under bin relabeling") {
    std::mt19937_64 rng(3);
    Eigen::VectorXd p(8);
    for (Eigen::Index i = 0; i < 8; ++i)
      p[i] = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    p /= p.sum();
    Eigen::VectorXd q = p;
    std::shuffle(q.data(), q.data() + 8, rng);
    CHECK(precision_bits(p) == doctest::Approx(precision_bits(q)).epsilon(1e-13));
  }

  SUBCASE("equals log2 S minus Shannon entropy") {
    std::mt19937_64 rng(5);
    Eigen::VectorXd p(16);
    for (Eigen::Index i = 0; i < 16; ++i)
      p[i] = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    p /= p.sum();
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < 16; ++i) entropy -= p[i] * std::log2(p[i]);
    CHECK(precision_bits(p) == doctest::Approx(4.0 - entropy).epsilon(1e-12));
  }
}

TEST_CASE("ignorance_bits") {
  Eigen::VectorXd p(4);
  p << 0.0, 1.0, 0.0, 0.0;

  SUBCASE("certainty about the truth is zero bits") {
    const auto r = ignorance_bits(p, 1, 1e-9);
    CHECK(r.bits == 0.0);
    CHECK(!r.clamped);
  }

  SUBCASE("uniform gives log2 S") {
    Eigen::VectorXd u = Eigen::VectorXd::Constant(32, 1.0 / 32);
    CHECK(ignorance_bits(u, 3, 1e-9).bits == doctest::Approx(5.0));
  }

  SUBCASE("zero probability clamps at the floor") {
    const auto r = ignorance_bits(p, 0, std::pow(2.0, -20));
    CHECK(r.bits == doctest::Approx(20.0));
    CHECK(r.clamped);
  }

  SUBCASE("matches KL of the Dirac truth when unclamped") {
    std::mt19937_64 rng(9);
    Eigen::VectorXd q(8);
    for (Eigen::Index i = 0; i < 8; ++i)
      q[i] = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    q /= q.sum();
    for (int bin = 0; bin < 8; ++bin) {
      const double kl = -std::log2(q[bin]);  // D_KL(delta_bin || q)
      CHECK(ignorance_bits(q, bin, 1e-12).bits == doctest::Approx(kl));
    }
  }

  SUBCASE("bin range validation") {
    CHECK_THROWS_AS(ignorance_bits(p, 4, 1e-9), ParameterError);
  }
}

TEST_CASE("summarize") {
  MetricsSeries series;
  series.s = 4;

  SUBCASE("all-uniform run has zero precision and no useful reports") {
    const int n = 10;
    series.times = Eigen::VectorXd::LinSpaced(n, 0.0, 9.0);
    series.precision = Eigen::VectorXd::Zero(n);
    series.ignorance = Eigen::VectorXd::Constant(n, 2.0);  // log2 4
    series.clamped = Eigen::VectorXi::Zero(n);
    const auto sum = summarize(series, -1.0);
    CHECK(sum.mean_precision == 0.0);
    CHECK(sum.useful_fraction == 0.0);
    CHECK(sum.n_non_useful == 10);
    CHECK(sum.n_excursions == 1);  // one contiguous run
  }

  SUBCASE("all-correct run is fully useful") {
    const int n = 6;
    series.times = Eigen::VectorXd::LinSpaced(n, 0.0, 5.0);
    series.precision = Eigen::VectorXd::Constant(n, 2.0);
    series.ignorance = Eigen::VectorXd::Zero(n);
    series.clamped = Eigen::VectorXi::Zero(n);
    const auto sum = summarize(series, -1.0);
    CHECK(sum.mean_ignorance == 0.0);
    CHECK(sum.useful_fraction == 1.0);
    CHECK(sum.n_excursions == 0);
  }

  SUBCASE("burn-in trims early reports and excursions are runs") {
    series.times.resize(6);
    series.times << 0, 1, 2, 3, 4, 5;
    series.precision.resize(6);
    series.precision << 0, 0, 1, 1, 2, 2;
    series.ignorance.resize(6);
    series.ignorance << 5, 5, 1, 3, 1, 1;  // threshold is 2
    series.clamped = Eigen::VectorXi::Zero(6);
    const auto sum = summarize(series, 1.0);
    CHECK(sum.n_reports == 4);
    CHECK(sum.mean_precision == doctest::Approx(1.5));
    CHECK(sum.n_non_useful == 1);
    CHECK(sum.n_excursions == 1);
    CHECK(sum.useful_fraction == doctest::Approx(0.75));
    CHECK_THROWS_AS(summarize(series, 5.0), ParameterError);
  }
}
