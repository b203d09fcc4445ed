#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "keydetect/errors.hpp"
#include "keydetect/stats.hpp"
#include "keydetect/timing.hpp"
#include "support.hpp"

using namespace keydetect;

namespace {

// Full valid trace whose first two keystrokes are given explicitly.
EventTrace trace_with_prefix(std::int64_t d0, std::int64_t u0, std::int64_t d1, std::int64_t u1) {
  EventTrace t;
  t.push_back({".", KeyAction::down, d0});
  t.push_back({".", KeyAction::up, u0});
  t.push_back({"t", KeyAction::down, d1});
  t.push_back({"t", KeyAction::up, u1});
  std::int64_t at = std::max(u0, u1) + 50;
  for (std::size_t k = 2; k < kKeyCount; ++k) {
    t.push_back({std::string(kTraceKeyNames[k]), KeyAction::down, at});
    t.push_back({std::string(kTraceKeyNames[k]), KeyAction::up, at + 70});
    at += 120;
  }
  std::stable_sort(t.begin(), t.end(), [](auto& a, auto& b) { return a.t_ms < b.t_ms; });
  return t;
}

}  // namespace

TEST_CASE("feature labels follow the benchmark column order") {
  const auto& l = feature_labels();
  CHECK(l[0] == "H.period");
  CHECK(l[1] == "DD.period.t");
  CHECK(l[2] == "UD.period.t");
  CHECK(l[3] == "H.t");
  CHECK(l[14] == "UD.five.Shift.r");
  CHECK(l[15] == "H.Shift.r");
  CHECK(l[29] == "UD.l.Return");
  CHECK(l[30] == "H.Return");
}

TEST_CASE("extract_features: hand-computed first keystrokes") {
  const auto v = extract_features(trace_with_prefix(0, 100, 150, 230));
  CHECK(v[0] == doctest::Approx(0.100).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.150).epsilon(1e-12));
  CHECK(v[2] == doctest::Approx(0.050).epsilon(1e-12));
  CHECK(v[3] == doctest::Approx(0.080).epsilon(1e-12));
}

TEST_CASE("extract_features: overlapping keys give negative UD") {
  const auto v = extract_features(trace_with_prefix(0, 180, 150, 260));
  CHECK(v[2] == doctest::Approx(-0.030).epsilon(1e-12));
}

TEST_CASE("extract_features rejects malformed traces") {
  const EventTrace good = trace_with_prefix(0, 100, 150, 230);

  SUBCASE("backspace") {
    EventTrace t = good;
    t.insert(t.begin() + 3, {"Backspace", KeyAction::down, 150});
    CHECK_THROWS_AS(extract_features(t), MalformedTrace);
  }
  SUBCASE("unmatched down") {
    EventTrace t = good;
    t.erase(std::find_if(t.begin(), t.end(), [](auto& e) {
      return e.key == "o" && e.action == KeyAction::up;
    }));
    CHECK_THROWS_AS(extract_features(t), MalformedTrace);
  }
  SUBCASE("release before press") {
    EventTrace t = good;
    t.insert(t.begin(), {"Enter", KeyAction::up, 0});
    CHECK_THROWS_AS(extract_features(t), MalformedTrace);
  }
  SUBCASE("wrong key") {
    EventTrace t = good;
    t[4].key = "x";
    CHECK_THROWS_AS(extract_features(t), MalformedTrace);
  }
  SUBCASE("keys out of order") {
    EventTrace t = trace_with_prefix(0, 100, 150, 230);
    std::swap(t[0].key, t[2].key);
    CHECK_THROWS_AS(extract_features(t), MalformedTrace);
  }
  SUBCASE("decreasing timestamps") {
    EventTrace t = good;
    t.back().t_ms = 0;
    CHECK_THROWS_AS(extract_features(t), MalformedTrace);
  }
  SUBCASE("truncated") {
    EventTrace t(good.begin(), good.begin() + 10);
    CHECK_THROWS_AS(extract_features(t), MalformedTrace);
  }
}

TEST_CASE("extract_features accepts browser key codes and skips Shift") {
  EventTrace t = trace_with_prefix(0, 100, 150, 230);
  for (auto& e : t) {
    if (e.key == "R") e.key = "KeyR";
    if (e.key == ".") e.key = "Period";
  }
  const auto ref = extract_features(trace_with_prefix(0, 100, 150, 230));
  t.insert(t.begin() + 2, {"ShiftLeft", KeyAction::down, t[2].t_ms});
  CHECK(extract_features(t) == ref);
}

TEST_CASE("extract_features equals the brute-force extractor on random traces") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const EventTrace t = test_support::random_trace(rng);
    const auto f = extract_features(t);
    const auto expect = test_support::brute_force_features(t);
    for (std::size_t i = 0; i < kFeatureCount; ++i) REQUIRE(f[i] == expect[i]);
  }
}

TEST_CASE("extract_features is invariant to a timestamp shift") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    EventTrace t = test_support::random_trace(rng);
    const auto before = extract_features(t);
    for (auto& e : t) e.t_ms += 123456;
    CHECK(extract_features(t) == before);
  }
}

TEST_CASE("synthesize_trace round-trips to millisecond precision") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = extract_features(test_support::random_trace(rng));
    CHECK(extract_features(synthesize_trace(v)) == v);
  }
}

TEST_CASE("TimingVector enforces its invariants") {
  std::array<double, kFeatureCount> f{};
  f.fill(0.1);
  CHECK_NOTHROW(TimingVector::from(f));
  f[2] = -0.05;  // UD may be negative
  CHECK_NOTHROW(TimingVector::from(f));
  f[0] = 0.0;
  CHECK_THROWS_AS(TimingVector::from(f), ValueError);
  f[0] = NAN;
  CHECK_THROWS_AS(TimingVector::from(f), ValueError);
  CHECK_THROWS_AS(TimingVector::from(std::span<const double>(f.data(), 30)), ValueError);
}

TEST_CASE("column_stats hand-computed columns") {
  Matrix rows(3, 3);
  rows << 1, 1, 0,
          1, 3, 0,
          1, 2, 3;
  SUBCASE("constant column") {
    const auto s = column_stats(rows);
    CHECK(s.mean[0] == 1.0);
    CHECK(s.std[0] == 0.0);
    CHECK(s.mad[0] == 0.0);
    CHECK(s.count == 3);
  }
  SUBCASE("{1,3}") {
    const auto s = column_stats(rows.topRows(2));
    CHECK(s.mean[1] == doctest::Approx(2.0));
    CHECK(s.std[1] == doctest::Approx(1.0));
    CHECK(s.mad[1] == doctest::Approx(1.0));
  }
  SUBCASE("{0,0,3}") {
    const auto s = column_stats(rows);
    CHECK(s.mean[2] == doctest::Approx(1.0));
    CHECK(s.std[2] == doctest::Approx(std::sqrt(2.0)));
    CHECK(s.mad[2] == doctest::Approx(4.0 / 3.0));
  }
  CHECK_THROWS_AS(column_stats(rows.topRows(1)), InsufficientData);
}

TEST_CASE("column_stats is permutation invariant") {
  std::mt19937_64 rng(3);
  Matrix rows = test_support::random_matrix(rng, 40, 31);
  const auto a = column_stats(rows);
  std::vector<Eigen::Index> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Matrix shuffled(40, 31);
  for (Eigen::Index r = 0; r < 40; ++r) shuffled.row(r) = rows.row(order[r]);
  const auto b = column_stats(shuffled);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.std - b.std).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.mad - b.mad).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance_matrix") {
  SUBCASE("identical rows give zero") {
    Matrix rows = Matrix::Constant(5, 4, 0.3);
    CHECK(covariance_matrix(rows).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("2-D toy, population convention") {
    Matrix rows(2, 2);
    rows << 0, 0, 2, 2;
    const Matrix c = covariance_matrix(rows);
    CHECK(c(0, 0) == doctest::Approx(1.0));
    CHECK(c(0, 1) == doctest::Approx(1.0));
    CHECK(c(1, 0) == doctest::Approx(1.0));
    CHECK(c(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("matches the double-loop oracle on a random 5x31 matrix") {
    std::mt19937_64 rng(17);
    const Matrix rows = test_support::random_matrix(rng, 5, 31);
    const Matrix c = covariance_matrix(rows);
    const Matrix oracle = test_support::brute_force_covariance(rows);
    CHECK((c - oracle).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Matrix reg = c;
    reg.diagonal().array() += 1e-6;
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(reg);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}
