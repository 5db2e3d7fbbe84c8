#include <doctest.h>

#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <set>

#include "copulahmm/data.hpp"
#include "copulahmm/error.hpp"
#include "copulahmm/simulate.hpp"
#include "helpers.hpp"

using namespace copulahmm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("copulahmm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path file(const std::string& name, const std::string& contents) const {
    std::ofstream(path / name) << contents;
    return path / name;
  }
  static inline int counter = 0;
};

RiskFactorEncoding schema() {
  RiskFactorEncoding e;
  e.columns = {{"age", ColumnKind::numeric, {}},
               {"sex", ColumnKind::binary, {"m", "f"}},
               {"work", ColumnKind::categorical, {"none", "part", "full"}}};
  return e;
}

const char* kBaseline = "id,age,sex,work\na,40,m,none\nb,50,f,full\nc,60,f,part\n";

std::string weeks(const std::string& id, int T, int skip = -1) {
  std::string s;
  for (int t = 1; t <= T; ++t)
    if (t != skip) s += id + "," + std::to_string(t) + "," + std::to_string(t % 11) + "," + std::to_string(t % 8) + "\n";
  return s;
}

DataConfig cfg(int T) {
  DataConfig c;
  c.T = T;
  return c;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("loads, encodes and centers") {
    TempDir d;
    const auto b = d.file("b.csv", kBaseline);
    const auto t = d.file("t.csv", "id,week,pain,disability\n" + weeks("a", 52) + weeks("b", 52, 7));
    const auto ds = load_dataset(b, t, schema(), cfg(52));
    REQUIRE(ds.size() == 3);
    CHECK(ds.T == 52);
    CHECK(ds.P() == 4);
    CHECK(ds.encoding.encoded_names() == std::vector<std::string>{"age", "sex", "work=part", "work=full"});
    const auto X = ds.design_matrix();
    CHECK(X.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ds.patients[0].y[51].pain == 52 % 11);
    CHECK(ds.patients[1].y[6].fully_missing());
    CHECK_FALSE(ds.patients[1].y[7].fully_missing());
    // c has no trajectory rows at all.
    for (const auto& o : ds.patients[2].y) CHECK(o.fully_missing());
  }

  TEST_CASE("rejects bad rows with locations") {
    TempDir d;
    const auto b = d.file("b.csv", kBaseline);
    auto expect = [&](const std::string& traj, const std::string& needle) {
      const auto t = d.file("t.csv", "id,week,pain,disability\n" + traj);
      try {
        load_dataset(b, t, schema(), cfg(4));
        FAIL("expected an input error");
      } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK_MESSAGE(msg.find(needle) != std::string::npos, msg);
        CHECK_MESSAGE(msg.find("t.csv:") != std::string::npos, msg);
      }
    };
    expect("a,1,11,0\n", "value out of range");
    expect("a,1,3,8\n", "value out of range");
    expect("a,1,2.5,0\n", "not an integer");
    expect("a,1,2,0\na,1,3,0\n", "duplicate (id, week) pair");
    expect("a,5,2,0\n", "week");
    expect("zz,1,2,0\n", "not in baseline");
  }

  TEST_CASE("schema problems") {
    TempDir d;
    const auto t = d.file("t.csv", "id,week,pain,disability\n");
    CHECK_THROWS_WITH_AS(load_dataset(d.file("b.csv", "id,age,sex,work,extra\na,1,m,none,3\n"), t, schema()),
                         doctest::Contains("unknown column"), InputError);
    CHECK_THROWS_WITH_AS(load_dataset(d.file("b.csv", "id,age,sex,work\na,NA,m,none\n"), t, schema()),
                         doctest::Contains("missing risk factor"), InputError);
    CHECK_THROWS_WITH_AS(load_dataset(d.file("b.csv", "id,age,sex,work\na,1,x,none\n"), t, schema()),
                         doctest::Contains("sex"), InputError);
    CHECK_THROWS_WITH_AS(load_dataset(d.path / "nope.csv", t, schema()), doctest::Contains("nope.csv"), InputError);
  }

  TEST_CASE("missing markers and half-missing weeks") {
    TempDir d;
    const auto b = d.file("b.csv", kBaseline);
    const auto t = d.file("t.csv", "id,week,pain,disability\na,1,NA,3\na,2,4,\n");
    const auto ds = load_dataset(b, t, schema(), cfg(3));
    CHECK_FALSE(ds.patients[0].y[0].pain.has_value());
    CHECK(ds.patients[0].y[0].disability == 3);
    CHECK(ds.patients[0].y[1].pain == 4);
    CHECK_FALSE(ds.patients[0].y[1].disability.has_value());
  }

  TEST_CASE("write then read round trip") {
    TempDir d;
    const auto sim = simulate(benchmark_config(40, 3));
    write_dataset(sim.data, d.path / "b.csv", d.path / "t.csv");
    RiskFactorEncoding enc = sim.data.encoding;
    const auto back = load_dataset(d.path / "b.csv", d.path / "t.csv", enc);
    REQUIRE(back.size() == 40);
    for (std::size_t i = 0; i < 40; ++i) {
      CHECK(back.patients[i].id == sim.data.patients[i].id);
      CHECK(back.patients[i].y == sim.data.patients[i].y);
      CHECK((back.patients[i].x - sim.data.patients[i].x).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("encoding metadata is lossless") {
    const auto e = schema();
    const Eigen::Vector4d raw(42.5, 1.0, 0.0, 1.0);
    CHECK(e.decode_row(raw) == std::vector<std::string>{"42.5", "f", "full"});
    CHECK(e.encode_row(e.decode_row(raw)) == raw);
  }

  TEST_CASE("split sizes and partition") {
    Rng rng(1);
    const auto ds = testutil::random_dataset(847, 2, 2, 10, 7, rng);
    const auto [train, test] = split_dataset(ds, 0.5, 11);
    CHECK(train.size() + test.size() == 847);
    CHECK(std::max(train.size(), test.size()) - std::min(train.size(), test.size()) == 1);
    std::set<std::string> ids;
    for (const auto& p : train.patients) ids.insert(p.id);
    for (const auto& p : test.patients) CHECK(ids.insert(p.id).second);
    CHECK(ids.size() == 847);
    CHECK(train.design_matrix().colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
    CHECK(test.encoding.centering == train.encoding.centering);
    const auto [t2, s2] = split_dataset(ds, 0.5, 11);
    for (std::size_t i = 0; i < t2.size(); ++i) CHECK(t2.patients[i].id == train.patients[i].id);
    const auto small = testutil::random_dataset(100, 2, 1, 10, 7, rng);
    CHECK(split_dataset(small, 0.25, 3).first.size() == 25);
    CHECK_THROWS_AS(split_dataset(Dataset{}, 0.5, 1), InputError);
  }
}
