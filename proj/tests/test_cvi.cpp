#include <doctest.h>

#include <random>

#include "copulahmm/cvi.hpp"
#include "cvi_oracle.hpp"
#include "helpers.hpp"

using namespace copulahmm;

namespace {

Clustering from_points(const std::vector<std::vector<double>>& pts, const std::vector<int>& labels) {
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(pts.size()), static_cast<Eigen::Index>(pts[0].size()));
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t t = 0; t < pts[i].size(); ++t) Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = pts[i][t];
  return make_clustering(Y, labels);
}

const std::vector<std::vector<double>> kFour{{0, 0}, {0, 2}, {10, 0}, {10, 2}};
const std::vector<std::vector<double>> kFive{{0, 0}, {1, 0}, {0, 1}, {4, 4}, {5, 4}};

}  // namespace

TEST_SUITE("cvi") {
  TEST_CASE("four-point hand instance") {
    const auto c = from_points(kFour, {0, 0, 1, 1});
    CHECK(*calinski_harabasz(c) == 10.0);
    CHECK(*davies_bouldin_star(c) == 0.2);
  }

  TEST_CASE("five-point instance against frozen script values") {
    const auto c = from_points(kFive, {0, 0, 0, 1, 1});
    CHECK(*silhouette(c) == doctest::Approx(0.8820336999589184).epsilon(1e-14));
    CHECK(*silhouette(c, SilhouetteVariant::textbook) == doctest::Approx(0.8050859450070587).epsilon(1e-14));
    CHECK(*calinski_harabasz(c) == doctest::Approx(13.49102300828042).epsilon(1e-14));
    CHECK(*davies_bouldin_star(c) == doctest::Approx(0.2079246126446881).epsilon(1e-14));
  }

  TEST_CASE("duplicated points") {
    const auto c = from_points({{1, 1}, {1, 1}, {9, 9}, {9, 9}}, {0, 0, 1, 1});
    CHECK(*silhouette(c) == 1.0);
    CHECK(*davies_bouldin_star(c) == 0.0);
    CHECK_FALSE(calinski_harabasz(c).has_value());
  }

  TEST_CASE("undefined cases") {
    const auto one = from_points(kFour, {0, 0, 0, 0});
    CHECK_FALSE(calinski_harabasz(one).has_value());
    CHECK_FALSE(silhouette(one).has_value());
    CHECK_FALSE(davies_bouldin_star(one).has_value());
    // Same centroid for both clusters.
    const auto same = from_points({{0, 0}, {2, 2}, {1, 0}, {1, 2}}, {0, 0, 1, 1});
    CHECK_FALSE(davies_bouldin_star(same).has_value());
  }

  TEST_CASE("equidistant point contributes zero") {
    // x=1: a = (1 + 0)/2 = 0.5 and b = 0.5, so its term is 0.
    const auto e = from_points({{0}, {1}, {1.5}}, {0, 0, 1});
    const double t0 = (1.5 - 0.5) / 1.5;  // x=0: a = 0.5, b = 1.5
    const double t2 = 1.0;                // singleton: a = 0
    CHECK(*silhouette(e) == doctest::Approx((t0 + 0.0 + t2) / 3.0));
    // Terms: x=0: 1 - 1/4; x=2: 1 - 1/2; x=4: singleton.
    const auto c = from_points({{0}, {2}, {4}}, {0, 0, 1});
    CHECK(*silhouette(c) == doctest::Approx((0.75 + 0.5 + 1.0) / 3.0));
  }

  TEST_CASE("agrees with the direct formulas on random clusterings") {
    Rng rng(61);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 50; ++rep) {
      const int K = 2 + rep % 4;
      const int N = 12 + rep;
      const int T = 1 + rep % 6;
      std::vector<std::vector<double>> pts(static_cast<std::size_t>(N), std::vector<double>(static_cast<std::size_t>(T)));
      std::vector<int> lab(static_cast<std::size_t>(N));
      for (int i = 0; i < N; ++i) {
        lab[static_cast<std::size_t>(i)] = i < K ? i : std::uniform_int_distribution<int>(0, K - 1)(rng);
        for (auto& v : pts[static_cast<std::size_t>(i)]) v = z(rng) + 2.0 * lab[static_cast<std::size_t>(i)];
      }
      const auto c = from_points(pts, lab);
      CHECK(std::abs(*calinski_harabasz(c) - cvi_oracle::ch(pts, lab, K)) < 1e-10);
      CHECK(std::abs(*silhouette(c) - cvi_oracle::sil(pts, lab, K)) < 1e-10);
      CHECK(std::abs(*davies_bouldin_star(c) - cvi_oracle::db(pts, lab, K)) < 1e-10);
    }
  }

  TEST_CASE("invariances") {
    Rng rng(62);
    std::normal_distribution<double> z;
    Eigen::MatrixXd Y(30, 5);
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = z(rng);
    std::vector<int> lab(30);
    for (int i = 0; i < 30; ++i) lab[static_cast<std::size_t>(i)] = i % 3;
    for (int i = 0; i < 30; ++i) Y.row(i).array() += lab[static_cast<std::size_t>(i)];
    const auto base = make_clustering(Y, lab);
    const double ch = *calinski_harabasz(base), sil = *silhouette(base), db = *davies_bouldin_star(base);
    // Translation and scaling.
    Eigen::MatrixXd Y2 = (3.0 * Y).rowwise() + Eigen::RowVectorXd::Constant(5, 7.0);
    const auto moved = make_clustering(Y2, lab);
    CHECK(*calinski_harabasz(moved) == doctest::Approx(ch).epsilon(1e-12));
    CHECK(*silhouette(moved) == doctest::Approx(sil).epsilon(1e-12));
    CHECK(*davies_bouldin_star(moved) == doctest::Approx(db).epsilon(1e-12));
    // Relabeling and reordering.
    std::vector<int> relab(30);
    Eigen::MatrixXd Y3(30, 5);
    for (int i = 0; i < 30; ++i) {
      Y3.row(i) = Y.row(29 - i);
      relab[static_cast<std::size_t>(i)] = (lab[static_cast<std::size_t>(29 - i)] + 1) % 3 + 10;
    }
    const auto perm = make_clustering(Y3, relab);
    CHECK(*calinski_harabasz(perm) == doctest::Approx(ch).epsilon(1e-12));
    CHECK(*silhouette(perm) == doctest::Approx(sil).epsilon(1e-12));
    CHECK(*davies_bouldin_star(perm) == doctest::Approx(db).epsilon(1e-12));
    // Separated clusters beat random labels on CH.
    std::vector<int> rnd(30);
    for (auto& l : rnd) l = std::uniform_int_distribution<int>(0, 2)(rng);
    CHECK(*calinski_harabasz(make_clustering(Y, rnd)) < ch);
  }

  TEST_CASE("tighter clusters lower DB*") {
    const std::vector<std::vector<double>> wide{{0, -1}, {0, 1}, {10, -1}, {10, 1}};
    const std::vector<std::vector<double>> tight{{0, -0.5}, {0, 0.5}, {10, -0.5}, {10, 0.5}};
    CHECK(*davies_bouldin_star(from_points(tight, {0, 0, 1, 1})) < *davies_bouldin_star(from_points(wide, {0, 0, 1, 1})));
  }

  TEST_CASE("panel matrix imputes with the patient mean") {
    Dataset ds;
    ds.T = 3;
    ds.encoding.centering = Eigen::VectorXd(0);
    ds.patients.push_back({"a", Eigen::VectorXd(0), {{2, 1}, {std::nullopt, 3}, {4, std::nullopt}}});
    ds.patients.push_back({"b", Eigen::VectorXd(0), {{}, {}, {}}});
    const auto Y = panel_matrix(ds, Panel::pain);
    CHECK(Y(0, 1) == 3.0);
    CHECK(Y(1, 0) == 3.0);  // cohort mean of {2, 4}
    const auto D = panel_matrix(ds, Panel::disability);
    CHECK(D(0, 2) == 2.0);
  }
}
