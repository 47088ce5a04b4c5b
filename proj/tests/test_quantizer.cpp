#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "qmda/dynamics.hpp"
#include "qmda/quantizer.hpp"

using namespace qmda;

namespace {
constexpr double kPi = std::numbers::pi;

Eigen::VectorXd circle_cos_values(int n) {
  CircleParams c{1.0};
  CircleObservable obs{CircleObservable::Kind::cosine, 0.0};
  return circle_trajectory(0.37, c, c.period() / (50.0 * std::sqrt(2.0)), n, obs)
      .h_values;
}
}  // namespace

TEST_CASE("empirical_cdf") {
  Eigen::VectorXd h(3);
  h << 1, 2, 3;
  CHECK(empirical_cdf(h, 3.0) == 1.0);
  CHECK(empirical_cdf(h, 100.0) == 1.0);
  CHECK(empirical_cdf(h, 2.0) == doctest::Approx(2.0 / 3.0));
  CHECK(empirical_cdf(h, 0.5) == 0.0);
}

TEST_CASE("build_partition") {
  SUBCASE("singleton bins at S = N") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    Eigen::VectorXd h(32);
    for (Eigen::Index i = 0; i < 32; ++i) h[i] = g(rng);
    const auto part = build_partition(h, 32);
    Eigen::VectorXd sorted = h;
    std::sort(sorted.data(), sorted.data() + 32);
    CHECK((part.cond_means - sorted).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& bin : part.index_sets) CHECK(bin.size() == 1);
  }

  SUBCASE("equal mass within one sample") {
    Eigen::VectorXd h = circle_cos_values(1001);
    const auto part = build_partition(h, 8);
    std::size_t lo = 1001, hi = 0;
    std::size_t total = 0;
    for (const auto& bin : part.index_sets) {
      lo = std::min(lo, bin.size());
      hi = std::max(hi, bin.size());
      total += bin.size();
    }
    CHECK(total == 1001);
    CHECK(hi - lo <= 1);
    CHECK(hi == 126);  // larger blocks first
    CHECK(part.index_sets[0].size() == 126);
  }

  SUBCASE("cos observable boundaries tend to the closed form") {
    const int s = 8;
    Eigen::VectorXd h = circle_cos_values(20000);
    const auto part = build_partition(h, s);
    for (int k = 1; k < s; ++k) {
      const double exact = std::cos((1.0 - static_cast<double>(k) / s) * kPi);
      CHECK(part.boundaries[k - 1] == doctest::Approx(exact).epsilon(5e-3));
    }
  }

  SUBCASE("cos observable S=2 conditional means match quadrature") {
    Eigen::VectorXd h = circle_cos_values(20000);
    const auto part = build_partition(h, 2);
    // oracle: conditional mean of cos over the half circle where it is
    // negative, (1/pi) * integral_{pi/2}^{3pi/2} cos
    const double lower =
        oracle::gauss_legendre([](double t) { return std::cos(t); },
                               kPi / 2.0, 3.0 * kPi / 2.0, 64) /
        kPi;
    CHECK(part.cond_means[0] == doctest::Approx(-2.0 / kPi).epsilon(2e-3));
    CHECK(part.cond_means[1] == doctest::Approx(2.0 / kPi).epsilon(2e-3));
    CHECK(lower == doctest::Approx(-2.0 / kPi).epsilon(1e-12));
    // conditional means are nondecreasing
    for (int i = 1; i < part.s; ++i)
      CHECK(part.cond_means[i] >= part.cond_means[i - 1]);
  }

  SUBCASE("ties split deterministically by index with a diagnostics flag") {
    Eigen::VectorXd h(6);
    h << 1, 1, 1, 1, 2, 3;
    const auto part = build_partition(h, 3);
    CHECK(part.ties_split);
    CHECK(part.index_sets[0] == std::vector<Eigen::Index>{0, 1});
    CHECK(part.index_sets[1] == std::vector<Eigen::Index>{2, 3});
    CHECK(part.index_sets[2] == std::vector<Eigen::Index>{4, 5});
  }

  SUBCASE("S above the distinct value count is a parameter error") {
    Eigen::VectorXd h(4);
    h << 1, 1, 2, 2;
    CHECK_THROWS_AS(build_partition(h, 3), ParameterError);
  }
}

TEST_CASE("affiliation") {
  Eigen::VectorXd h = circle_cos_values(4096);
  const auto part = build_partition(h, 4);

  SUBCASE("clamping conventions") {
    CHECK(affiliation(part, -5.0) == 0);
    CHECK(affiliation(part, 5.0) == 3);
    CHECK(affiliation(part, part.boundaries[1]) == 2);  // left-closed
    CHECK(affiliation(part, std::nextafter(part.boundaries[1], -1.0)) == 1);
  }

  SUBCASE("training samples affiliate to their own bin") {
    for (int i = 0; i < part.s; ++i)
      for (const auto idx : part.index_sets[static_cast<std::size_t>(i)])
        CHECK(affiliation(part, h[idx]) == i);
  }

  SUBCASE("affiliation histogram of the training samples is flat") {
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(4);
    for (const double v : h) ++counts[affiliation(part, v)];
    CHECK(counts.maxCoeff() - counts.minCoeff() <= 1);
  }
}

TEST_CASE("projector_matrices") {
  const int n = 256;
  CircleParams c{1.0};
  CircleObservable obs{CircleObservable::Kind::cosine, 0.0};
  const auto ds =
      circle_trajectory(0.1, c, c.period() / (50.0 * std::sqrt(2.0)), n, obs);
  KernelBasisParams prm;
  prm.k_b = 8;
  const auto basis = build_basis(ds.samples, 9, prm).basis;

  SUBCASE("S=1 gives the identity") {
    const auto part = build_partition(ds.h_values, 1);
    const auto set = projector_matrices(basis, part);
    CHECK(set.mats.size() == 1);
    CHECK((set.mats[0] - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff()
          < 1e-8);
  }

  SUBCASE("resolution of identity and trace shares") {
    const auto part = build_partition(ds.h_values, 4);
    const auto set = projector_matrices(basis, part);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(9, 9);
    for (const auto& e : set.mats) sum += e;
    CHECK((sum - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-8);
    for (int i = 0; i < 4; ++i) {
      const double share =
          static_cast<double>(part.index_sets[static_cast<std::size_t>(i)].size()) / n;
      CHECK(set.mats[static_cast<std::size_t>(i)].trace() ==
            doctest::Approx(share).epsilon(1e-8));
      CHECK(set.mats[static_cast<std::size_t>(i)](0, 0) ==
            doctest::Approx(share).epsilon(1e-6));
      // symmetric PSD
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          set.mats[static_cast<std::size_t>(i)]);
      CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
  }

  SUBCASE("idempotence sharpens as L grows toward N") {
    const auto part = build_partition(ds.h_values, 4);
    double prev = 1e9;
    for (const int l : {9, 65, 256}) {
      KernelBasisParams p2;
      p2.k_b = 8;
      const auto b = build_basis(ds.samples, l, p2).basis;
      const auto set = projector_matrices(b, part);
      double worst = 0.0;
      for (const auto& e : set.mats)
        worst = std::max(worst, (e * e - e).cwiseAbs().maxCoeff());
      CHECK(worst < prev + 1e-12);
      prev = worst;
      if (l == 256) CHECK(worst < 1e-10);  // exact at full resolution
    }
  }

  SUBCASE("empty bin is rejected") {
    QuantilePartition part;
    part.s = 2;
    part.boundaries.resize(1);
    part.boundaries << 0.0;
    part.cond_means.resize(2);
    part.cond_means << -1.0, 1.0;
    part.index_sets = {{0, 1, 2}, {}};
    CHECK_THROWS_AS(projector_matrices(basis, part), DegeneratePartitionError);
  }
}
