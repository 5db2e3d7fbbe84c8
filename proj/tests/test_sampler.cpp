#include <doctest.h>

#include <cmath>
#include <random>

#include "copulahmm/error.hpp"
#include "copulahmm/inference.hpp"
#include "helpers.hpp"

using namespace copulahmm;

namespace {

// K = S = 1, independent margins with negligible truncation and gamma priors:
// each rate has a Gamma(a + sum y, b + n) posterior.
struct Conjugate {
  Dataset ds;
  ModelSpec spec;
  double post_mean_pain = 0.0, post_mean_dis = 0.0;
  double post_sd_pain = 0.0;
};

Conjugate conjugate_problem() {
  Conjugate c;
  Rng rng(77);
  std::poisson_distribution<int> pp(3.0), pd(1.5);
  c.ds.T = 5;
  c.ds.MP = 30;
  c.ds.MD = 30;
  c.ds.encoding.columns = {{"x", ColumnKind::numeric, {}}};
  c.ds.encoding.centering = Eigen::VectorXd::Zero(1);
  double sp = 0, sd = 0;
  for (int i = 0; i < 20; ++i) {
    PatientRecord r;
    r.id = "p" + std::to_string(i);
    r.x = Eigen::VectorXd::Constant(1, (i % 5) - 2.0);
    for (int t = 0; t < 5; ++t) {
      Observation o{pp(rng), pd(rng)};
      sp += *o.pain;
      sd += *o.disability;
      r.y.push_back(o);
    }
    c.ds.patients.push_back(r);
  }
  c.spec.K = 1;
  c.spec.S = 1;
  c.spec.MP = 30;
  c.spec.MD = 30;
  c.spec.copula = CopulaFamily::independence;
  c.spec.priors.lambda_gamma = GammaPrior{2.0, 1.0};
  c.post_mean_pain = (2.0 + sp) / 101.0;
  c.post_mean_dis = (2.0 + sd) / 101.0;
  c.post_sd_pain = std::sqrt(2.0 + sp) / 101.0;
  return c;
}

void check_conjugate(SamplerKind kind) {
  const auto c = conjugate_problem();
  SamplerOptions so;
  so.kind = kind;
  so.n_chains = 2;
  so.n_warmup = 400;
  so.n_iter = 2400;
  so.seed = 5;
  so.map.restarts = 2;
  const auto d = sample_posterior(c.ds, c.spec, so);
  REQUIRE(d.size() == 4000);
  double mp = 0, md = 0, m2 = 0;
  for (const auto& m : d.draws) {
    mp += m.hmms[0].emissions.lambda_pain[0];
    md += m.hmms[0].emissions.lambda_disability[0];
    m2 += std::pow(m.hmms[0].emissions.lambda_pain[0], 2);
  }
  mp /= 4000;
  md /= 4000;
  const double sdp = std::sqrt(m2 / 4000 - mp * mp);
  const double ess = std::max(50.0, d.min_ess());
  CHECK(std::abs(mp - c.post_mean_pain) < 4.0 * c.post_sd_pain / std::sqrt(ess));
  CHECK(std::abs(md - c.post_mean_dis) < 4.0 * c.post_sd_pain / std::sqrt(ess));
  CHECK(sdp == doctest::Approx(c.post_sd_pain).epsilon(0.15));
  CHECK(d.max_rhat() < 1.05);
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("HMC recovers a conjugate posterior") { check_conjugate(SamplerKind::hmc); }
  TEST_CASE("random-walk Metropolis recovers a conjugate posterior") { check_conjugate(SamplerKind::random_walk); }

  TEST_CASE("same seed gives identical draws") {
    const auto c = conjugate_problem();
    SamplerOptions so;
    so.n_chains = 1;
    so.n_warmup = 50;
    so.n_iter = 100;
    so.map.restarts = 1;
    const auto a = sample_posterior(c.ds, c.spec, so);
    const auto b = sample_posterior(c.ds, c.spec, so);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(a.draws[i].hmms[0].emissions.lambda_pain[0] == b.draws[i].hmms[0].emissions.lambda_pain[0]);
  }

  TEST_CASE("bad options") {
    const auto c = conjugate_problem();
    SamplerOptions so;
    so.n_warmup = 10;
    so.n_iter = 10;
    CHECK_THROWS_AS(sample_posterior(c.ds, c.spec, so), InputError);
  }

  TEST_CASE("MAP finds the conjugate mode") {
    const auto c = conjugate_problem();
    MapOptions mo;
    mo.restarts = 3;
    const auto r = fit_map(c.ds, c.spec, mo);
    // Mode of the log-rate posterior: (a + sum y) / (b + n).
    CHECK(r.params.hmms[0].emissions.lambda_pain[0] == doctest::Approx(c.post_mean_pain).epsilon(1e-4));
  }
}

TEST_SUITE("diagnostics") {
  TEST_CASE("split R-hat and ESS on independent draws") {
    Rng rng(9);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> chains(4, std::vector<double>(1000));
    for (auto& c : chains)
      for (auto& v : c) v = z(rng);
    CHECK(split_rhat(chains) < 1.01);
    const double ess = effective_sample_size(chains);
    CHECK(ess > 3000.0);
    CHECK(ess < 5000.0);
  }

  TEST_CASE("R-hat flags chains stuck in different places") {
    Rng rng(10);
    std::normal_distribution<double> z;
    std::vector<std::vector<double>> chains(4, std::vector<double>(500));
    for (std::size_t c = 0; c < 4; ++c)
      for (auto& v : chains[c]) v = z(rng) + static_cast<double>(c);
    CHECK(split_rhat(chains) > 1.5);
  }

  TEST_CASE("R-hat flags a trending single chain") {
    std::vector<std::vector<double>> chains(1, std::vector<double>(400));
    Rng rng(11);
    std::normal_distribution<double> z;
    for (std::size_t t = 0; t < 400; ++t) chains[0][t] = z(rng) + 0.01 * static_cast<double>(t);
    CHECK(split_rhat(chains) > 1.1);
  }

  TEST_CASE("ESS of an AR(1) chain") {
    Rng rng(12);
    std::normal_distribution<double> z;
    const double phi = 0.5;
    std::vector<std::vector<double>> chains(4, std::vector<double>(5000));
    for (auto& c : chains) {
      double x = 0.0;
      for (auto& v : c) v = x = phi * x + z(rng);
    }
    const double expect = 20000.0 * (1 - phi) / (1 + phi);
    CHECK(effective_sample_size(chains) == doctest::Approx(expect).epsilon(0.2));
  }
}

TEST_SUITE("relabel") {
  TEST_CASE("canonical order is restored after permutation") {
    Rng rng(14);
    auto ds = testutil::random_dataset(10, 5, 2, 10, 7, rng);
    const auto m = testutil::random_model(3, 3, 2, 10, 7, rng);
    const auto canon = relabel(m);
    for (const auto& h : canon.hmms) {
      CHECK(h.emissions.lambda_pain[0] >= h.emissions.lambda_pain[1]);
      CHECK(h.emissions.lambda_pain[1] >= h.emissions.lambda_pain[2]);
    }
    CHECK(canon.hmms[0].emissions.lambda_pain.mean() >= canon.hmms[1].emissions.lambda_pain.mean());
    CHECK(canon.weights.alpha[0] == 0.0);
    CHECK(canon.weights.beta.row(0).isZero());
    auto shuffled = permute_states(m, 1, {2, 0, 1});
    shuffled = permute_subgroups(shuffled, {1, 2, 0});
    const auto again = relabel(shuffled);
    CHECK((flatten(again, ModelSpec{3, 3}) - flatten(canon, ModelSpec{3, 3})).cwiseAbs().maxCoeff() < 1e-12);
    // Likelihood and per-patient weights are label invariant.
    CHECK(mixture_loglik(shuffled, ds) == doctest::Approx(mixture_loglik(m, ds)).epsilon(1e-12));
    CHECK(mixture_loglik(canon, ds) == doctest::Approx(mixture_loglik(m, ds)).epsilon(1e-12));
    const auto w0 = subgroup_weights(m.weights, ds.patients[0].x);
    const auto w1 = subgroup_weights(shuffled.weights, ds.patients[0].x);
    CHECK(w1[0] == doctest::Approx(w0[1]).epsilon(1e-12));
    CHECK(w1[2] == doctest::Approx(w0[0]).epsilon(1e-12));
  }
}
