#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "keydetect/dataset.hpp"
#include "keydetect/errors.hpp"
#include "keydetect/ocsvm.hpp"
#include "keydetect/synthetic.hpp"
#include "support.hpp"

using namespace keydetect;

namespace {

Matrix ring(std::size_t n, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 0.05);
  Matrix m(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(n);
    m(static_cast<Eigen::Index>(i), 0) = radius * std::cos(a) + jitter(rng);
    m(static_cast<Eigen::Index>(i), 1) = radius * std::sin(a) + jitter(rng);
  }
  return m;
}

// Brute-force kernel sum straight from the model fields.
double brute_score(const OcSvmModel& m, const Vector& x) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m.support_vectors.rows(); ++i) {
    double d2 = 0.0;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      const double z = m.shift.size() ? (x[c] - m.shift[c]) / m.scale[c] : x[c];
      d2 += (m.support_vectors(i, c) - z) * (m.support_vectors(i, c) - z);
    }
    sum += m.alphas[static_cast<std::size_t>(i)] * std::exp(-m.gamma * d2);
  }
  return m.rho - sum;
}

double outlier_fraction(const OcSvmModel& m, const Matrix& rows) {
  long out = 0;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) out += m.is_outlier(rows.row(r).transpose());
  return static_cast<double>(out) / static_cast<double>(rows.rows());
}

}  // namespace

TEST_CASE("one-class SVM multipliers satisfy the constraints") {
  std::mt19937_64 rng(1);
  const Matrix train = test_support::random_matrix(rng, 120, 5);
  for (double nu : {0.05, 0.1, 0.2, 0.3, 0.5, 1.0}) {
    OcSvmOptions o;
    o.nu = nu;
    o.gamma = 0.2;
    const auto m = fit_ocsvm(train, o);
    const double sum = std::accumulate(m.alphas.begin(), m.alphas.end(), 0.0);
    CHECK(std::abs(sum - 1.0) < 1e-6);
    const double upper = 1.0 / (nu * 120.0);
    for (double a : m.alphas) {
      CHECK(a >= -1e-6);
      CHECK(a <= upper + 1e-6);
    }
    CHECK(m.kkt_gap < 1e-4);
  }
}

TEST_CASE("one-class SVM training outlier fraction is bounded by nu") {
  SyntheticOptions so;
  so.subjects = 10;
  so.seed = 3;
  const Dataset ds = make_synthetic_dataset(so);
  for (const auto& subject : ds.subjects) {
    const Matrix train = ds.rows_of(subject).topRows(200);
    for (double nu : {0.05, 0.1, 0.2, 0.3, 0.5}) {
      OcSvmOptions o;
      o.nu = nu;
      const auto m = fit_ocsvm(train, o);
      CHECK(outlier_fraction(m, train) <= nu + 0.05);
    }
  }
}

TEST_CASE("one-class SVM on duplicate rows gives equal decision values") {
  Matrix train = Matrix::Constant(30, 4, 0.2);
  OcSvmOptions o;
  o.nu = 0.5;
  const auto m = fit_ocsvm(train, o);
  const double first = m.decision_value(train.row(0).transpose());
  for (Eigen::Index r = 1; r < train.rows(); ++r) {
    CHECK(m.decision_value(train.row(r).transpose()) == first);
  }
}

TEST_CASE("one-class SVM on a ring: interior beats far exterior") {
  std::mt19937_64 rng(5);
  const Matrix train = ring(80, 1.0, rng);
  OcSvmOptions o;
  o.nu = 0.1;
  o.gamma = 0.5;
  const auto m = fit_ocsvm(train, o);
  Vector inside = Vector::Zero(2);
  Vector far(2);
  far << 5.0, 5.0;
  CHECK(score_ocsvm(m, inside) < score_ocsvm(m, far));
}

TEST_CASE("score_ocsvm limits and brute-force agreement") {
  std::mt19937_64 rng(6);
  const Matrix train = test_support::random_matrix(rng, 60, 3);
  const auto m = fit_ocsvm(train, {});
  for (int t = 0; t < 50; ++t) {
    const Vector x = test_support::random_matrix(rng, 1, 3, -2, 2).row(0).transpose();
    CHECK(std::abs(score_ocsvm(m, x) - brute_score(m, x)) < 1e-10);
  }
  // Far away the kernel vanishes and the score approaches rho.
  const Vector far = Vector::Constant(3, 1e3);
  CHECK(score_ocsvm(m, far) == doctest::Approx(m.rho).epsilon(1e-12));
  // The heaviest support vector scores lower than a distant point.
  const auto heaviest = std::max_element(m.alphas.begin(), m.alphas.end()) - m.alphas.begin();
  Vector sv = m.support_vectors.row(heaviest).transpose();
  sv = sv.cwiseProduct(m.scale) + m.shift;
  CHECK(score_ocsvm(m, sv) < score_ocsvm(m, far));
}

TEST_CASE("one-class SVM argument validation") {
  const Matrix train = Matrix::Random(10, 2);
  OcSvmOptions o;
  o.nu = 0.0;
  CHECK_THROWS_AS(fit_ocsvm(train, o), ValueError);
  o.nu = 0.5;
  o.gamma = -1;
  CHECK_THROWS_AS(fit_ocsvm(train, o), ValueError);
  o.gamma = 0.5;
  o.max_iterations = 0;
  std::mt19937_64 rng(2);
  CHECK_THROWS_AS(fit_ocsvm(test_support::random_matrix(rng, 50, 2), o), NonConvergence);
}

TEST_CASE("select_nu picks a grid value and is deterministic") {
  SyntheticOptions so;
  so.subjects = 3;
  const Dataset ds = make_synthetic_dataset(so);
  const Matrix train = ds.rows_of(ds.subjects[0]).topRows(200);
  const Matrix impostors = ds.rows_of(ds.subjects[1]).topRows(25);
  const std::vector<double> grid = {0.05, 0.1, 0.2, 0.3, 0.5};
  const auto a = select_nu(train, impostors, grid);
  const auto b = select_nu(train, impostors, grid);
  CHECK(a.nu == b.nu);
  CHECK(a.eers == b.eers);
  CHECK(a.eers.size() == grid.size());
  CHECK(std::find(grid.begin(), grid.end(), a.nu) != grid.end());
}
