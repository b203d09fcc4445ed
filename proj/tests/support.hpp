#pragma once

// Shared fixtures and independent oracles for the unit tests.

#include <algorithm>
#include <array>
#include <set>
#include <string>
#include <vector>
#include <numeric>
#include <random>

#include "keydetect/stats.hpp"
#include "keydetect/timing.hpp"

namespace test_support {

using keydetect::EventTrace;
using keydetect::KeyAction;
using keydetect::Matrix;

// Valid trace with random holds (20..250 ms) and gaps (30..400 ms) between
// presses; keys may overlap. Includes an occasional Shift around 'R'.
inline EventTrace random_trace(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> hold(20, 250);
  std::uniform_int_distribution<int> gap(30, 400);
  std::uniform_int_distribution<int> start(0, 5000);
  EventTrace t;
  std::int64_t at = start(rng);
  for (std::size_t k = 0; k < keydetect::kKeyCount; ++k) {
    const std::string key(keydetect::kTraceKeyNames[k]);
    if (k == 5 && (rng() & 1)) {
      t.push_back({"ShiftLeft", KeyAction::down, at - 20});
      t.push_back({"ShiftLeft", KeyAction::up, at + 10});
    }
    t.push_back({key, KeyAction::down, at});
    t.push_back({key, KeyAction::up, at + hold(rng)});
    at += gap(rng);
  }
  std::stable_sort(t.begin(), t.end(), [](auto& a, auto& b) { return a.t_ms < b.t_ms; });
  return t;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

inline Matrix brute_force_covariance(const Matrix& rows) {
  const auto n = rows.rows();
  const auto p = rows.cols();
  std::vector<double> mean(static_cast<std::size_t>(p), 0.0);
  for (Eigen::Index c = 0; c < p; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) mean[static_cast<std::size_t>(c)] += rows(r, c);
    mean[static_cast<std::size_t>(c)] /= static_cast<double>(n);
  }
  Matrix cov(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b < p; ++b) {
      double s = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        s += (rows(r, a) - mean[static_cast<std::size_t>(a)]) *
             (rows(r, b) - mean[static_cast<std::size_t>(b)]);
      }
      cov(a, b) = s / static_cast<double>(n);
    }
  }
  return cov;
}

// Counting oracle for a threshold: false alarm = genuine >= t,
// miss = impostor < t.
inline std::pair<double, double> brute_rates(const std::vector<double>& genuine,
                                             const std::vector<double>& impostor, double t) {
  double fa = 0, miss = 0;
  for (double g : genuine) fa += (g >= t);
  for (double i : impostor) miss += (i < t);
  return {fa / static_cast<double>(genuine.size()), miss / static_cast<double>(impostor.size())};
}

// Brute-force EER: evaluate (FA, miss) by counting at every observed score
// and at +inf, then find the first sign change of FA - miss and interpolate.
inline double brute_eer(const std::vector<double>& g, const std::vector<double>& imp) {
  std::set<double> ts(g.begin(), g.end());
  ts.insert(imp.begin(), imp.end());
  std::vector<std::pair<double, double>> pts;
  for (double t : ts) pts.push_back(brute_rates(g, imp, t));
  pts.push_back({0.0, 1.0});
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double d = pts[k].first - pts[k].second;
    if (d == 0.0) return pts[k].first;
    if (d < 0.0) {
      const double dp = pts[k - 1].first - pts[k - 1].second;
      const double s = dp / (dp - d);
      return pts[k - 1].first + s * (pts[k].first - pts[k - 1].first);
    }
  }
  return -1.0;
}

inline double brute_zfr(const std::vector<double>& g, const std::vector<double>& imp) {
  std::set<double> ts(g.begin(), g.end());
  ts.insert(imp.begin(), imp.end());
  double best = 1.0;
  for (double t : ts) {
    const auto [fa, miss] = brute_rates(g, imp, t);
    if (miss == 0.0) best = std::min(best, fa);
  }
  return best;
}

// Independent extractor: looks up each key's press and release by search.
inline std::array<double, keydetect::kFeatureCount> brute_force_features(const EventTrace& t) {
  std::array<double, keydetect::kKeyCount> down{}, up{};
  for (std::size_t k = 0; k < keydetect::kKeyCount; ++k) {
    const std::string key(keydetect::kTraceKeyNames[k]);
    for (const auto& e : t) {
      if (e.key == key && e.action == KeyAction::down) down[k] = static_cast<double>(e.t_ms);
      if (e.key == key && e.action == KeyAction::up) up[k] = static_cast<double>(e.t_ms);
    }
  }
  std::array<double, keydetect::kFeatureCount> f{};
  for (std::size_t k = 0; k < keydetect::kKeyCount; ++k) {
    f[3 * k] = (up[k] - down[k]) / 1000.0;
    if (k + 1 < keydetect::kKeyCount) {
      f[3 * k + 1] = (down[k + 1] - down[k]) / 1000.0;
      f[3 * k + 2] = (down[k + 1] - up[k]) / 1000.0;
    }
  }
  return f;
}

}  // namespace test_support
