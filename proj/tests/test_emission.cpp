#include <doctest.h>

#include <cmath>
#include <random>

#include "copulahmm/emission.hpp"
#include "copulahmm/error.hpp"
#include "helpers.hpp"

using namespace copulahmm;

namespace {

EmissionParams one_state(double lp, double ld, double rho, int MP = 10, int MD = 7) {
  EmissionParams e;
  e.lambda_pain = Eigen::VectorXd::Constant(1, lp);
  e.lambda_disability = Eigen::VectorXd::Constant(1, ld);
  e.copula = {rho, CopulaFamily::survival_gumbel};
  e.MP = MP;
  e.MD = MD;
  return e;
}

}  // namespace

TEST_SUITE("emission") {
  TEST_CASE("truncated Poisson matches the direct formula") {
    for (double lam : {0.05, 0.7, 3.0, 9.5, 40.0}) {
      const auto p = trunc_poisson_pmf(lam, 10);
      REQUIRE(p.size() == 11);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
      for (int y = 0; y <= 10; ++y) CHECK(p[y] == doctest::Approx(testutil::tpois(lam, y, 10)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(trunc_poisson_pmf(0.0, 10), ParameterError);
    CHECK_THROWS_AS(trunc_poisson_pmf(1.0, -1), ParameterError);
  }

  TEST_CASE("joint pmf agrees with CDF inclusion-exclusion") {
    Rng rng(5);
    std::uniform_real_distribution<double> lam(0.5, 7.0), rho(1.0, 4.0);
    for (int rep = 0; rep < 20; ++rep) {
      const auto e = one_state(lam(rng), lam(rng), rho(rng));
      for (int yp = 0; yp <= e.MP; ++yp)
        for (int yd = 0; yd <= e.MD; ++yd)
          CHECK(std::abs(joint_pmf(e, 0, yp, yd) - testutil::joint_oracle(e, 0, yp, yd)) < 1e-12);
    }
  }

  TEST_CASE("joint pmf normalizes and marginalizes") {
    Rng rng(9);
    std::uniform_real_distribution<double> lam(0.1, 12.0), rho(1.0, 6.0);
    for (int rep = 0; rep < 30; ++rep) {
      const auto e = one_state(lam(rng), lam(rng), rho(rng));
      const auto tab = joint_log_pmf_table(e);
      const Eigen::MatrixXd P = tab.joint[0].array().exp();
      CHECK(std::abs(P.sum() - 1.0) < 1e-10);
      const auto mp = trunc_poisson_pmf(e.lambda_pain[0], e.MP);
      const auto md = trunc_poisson_pmf(e.lambda_disability[0], e.MD);
      CHECK((P.rowwise().sum() - mp).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((P.colwise().sum().transpose() - md).cwiseAbs().maxCoeff() < 1e-10);
    }
  }

  TEST_CASE("rho = 1 and the independence family give the product") {
    auto e = one_state(2.5, 1.5, 1.0);
    auto f = e;
    f.copula.family = CopulaFamily::independence;
    const auto mp = trunc_poisson_pmf(2.5, 10);
    const auto md = trunc_poisson_pmf(1.5, 7);
    for (int yp = 0; yp <= 10; ++yp)
      for (int yd = 0; yd <= 7; ++yd) {
        CHECK(std::abs(joint_pmf(e, 0, yp, yd) - mp[yp] * md[yd]) < 1e-14);
        CHECK(std::abs(joint_pmf(f, 0, yp, yd) - mp[yp] * md[yd]) < 1e-15);
      }
  }

  TEST_CASE("lower tail dependence raises joint low mass") {
    const auto ind = one_state(3.0, 3.0, 1.0);
    const auto dep = one_state(3.0, 3.0, 3.0);
    CHECK(joint_pmf(dep, 0, 0, 0) > joint_pmf(ind, 0, 0, 0));
  }

  TEST_CASE("log table handles missing coordinates") {
    const auto e = one_state(4.0, 2.0, 2.0);
    const auto tab = joint_log_pmf_table(e);
    CHECK(tab.log_emission(0, Observation{3, 1}) == doctest::Approx(std::log(joint_pmf(e, 0, 3, 1))));
    CHECK(tab.log_emission(0, Observation{3, std::nullopt}) == doctest::Approx(std::log(testutil::tpois(4.0, 3, 10))));
    CHECK(tab.log_emission(0, Observation{std::nullopt, 5}) == doctest::Approx(std::log(testutil::tpois(2.0, 5, 7))));
    CHECK(tab.log_emission(0, Observation{}) == 0.0);
  }

  TEST_CASE("extreme rates stay finite") {
    const auto tab = joint_log_pmf_table(one_state(1e-4, 80.0, 20.0));
    CHECK(tab.joint[0].allFinite());
    CHECK(tab.joint[0].maxCoeff() <= 1e-12);
  }

  TEST_CASE("sampling reproduces the joint pmf") {
    const auto e = one_state(3.0, 2.0, 2.5);
    Rng rng(11);
    const int n = 40000;
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(11, 8);
    for (int i = 0; i < n; ++i) {
      auto [a, b] = emission_sample(e, 0, rng);
      counts(a, b) += 1.0;
    }
    double chi2 = 0.0;
    int cells = 0;
    for (int yp = 0; yp <= 10; ++yp)
      for (int yd = 0; yd <= 7; ++yd) {
        const double expct = n * joint_pmf(e, 0, yp, yd);
        if (expct < 5.0) continue;
        chi2 += (counts(yp, yd) - expct) * (counts(yp, yd) - expct) / expct;
        ++cells;
      }
    // Generous bound: mean cells - 1, sd sqrt(2 (cells - 1)).
    CHECK(chi2 < cells + 5.0 * std::sqrt(2.0 * cells));
  }

  TEST_CASE("validation") {
    auto e = one_state(1.0, 1.0, 1.5);
    e.lambda_pain[0] = -1.0;
    CHECK_THROWS_AS(e.validate(), ParameterError);
    auto f = one_state(1.0, 1.0, 0.9);
    CHECK_THROWS_AS(f.validate(), ParameterError);
  }
}
