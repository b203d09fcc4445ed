#include "keydetect/forest.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "keydetect/errors.hpp"

namespace keydetect {

const TreeNode& DecisionTree::leaf_for(const Vector& x) const {
  if (nodes.empty()) throw NotTrained("empty decision tree");
  std::size_t at = 0;
  while (nodes[at].feature >= 0) {
    const auto& n = nodes[at];
    if (n.feature >= x.size()) throw DimensionMismatch("tree splits on a feature the input lacks");
    at = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return nodes[at];
}

int DecisionTree::predict(const Vector& x) const {
  const auto& counts = leaf_for(x).counts;
  int best = counts.front().first;
  long best_count = counts.front().second;
  for (const auto& [c, n] : counts) {
    if (n > best_count) {  // counts are sorted by class, so ties keep the lowest
      best = c;
      best_count = n;
    }
  }
  return best;
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    const auto [at, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& n = nodes[static_cast<std::size_t>(at)];
    if (n.feature >= 0) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return deepest;
}

std::vector<long> ForestModel::votes(const Vector& x) const {
  std::vector<long> v(static_cast<std::size_t>(n_classes), 0);
  for (const auto& t : trees) ++v.at(static_cast<std::size_t>(t.predict(x)));
  return v;
}

int ForestModel::predict(const Vector& x) const {
  if (trees.empty()) throw NotTrained("forest has no trees");
  const auto v = votes(x);
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<int> ForestModel::predict_rows(const Matrix& rows, Exec exec) const {
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  const auto n = static_cast<std::ptrdiff_t>(rows.rows());
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    out[static_cast<std::size_t>(r)] = predict(Vector(rows.row(r).transpose()));
  }
  return out;
}

namespace {

struct Split {
  bool found = false;
  double impurity = 0.0;  // n_l * gini_l + n_r * gini_r
  int feature = -1;
  double threshold = 0.0;
};

bool better(const Split& a, const Split& b) {
  if (!b.found) return a.found;
  if (!a.found) return false;
  if (a.impurity != b.impurity) return a.impurity < b.impurity;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

Split best_split_on(const Matrix& x, std::span<const int> y, int n_classes,
                    const std::vector<std::size_t>& rows, int feature, std::size_t min_leaf) {
  std::vector<std::pair<double, int>> v;
  v.reserve(rows.size());
  for (auto r : rows) v.emplace_back(x(static_cast<Eigen::Index>(r), feature), y[r]);
  std::sort(v.begin(), v.end());

  std::vector<long> left(static_cast<std::size_t>(n_classes), 0), right(left);
  for (const auto& e : v) ++right[static_cast<std::size_t>(e.second)];
  long sq_left = 0, sq_right = 0;
  for (long c : right) sq_right += c * c;

  Split best;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto c = static_cast<std::size_t>(v[i].second);
    sq_left += 2 * left[c] + 1;
    ++left[c];
    sq_right -= 2 * right[c] - 1;
    --right[c];
    if (v[i].first == v[i + 1].first) continue;
    const std::size_t nl = i + 1, nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double imp = (static_cast<double>(nl) - static_cast<double>(sq_left) / static_cast<double>(nl)) +
                       (static_cast<double>(nr) - static_cast<double>(sq_right) / static_cast<double>(nr));
    if (!best.found || imp < best.impurity) {
      double thr = 0.5 * (v[i].first + v[i + 1].first);
      if (!(thr >= v[i].first && thr < v[i + 1].first)) thr = v[i].first;
      best = {true, imp, feature, thr};
    }
  }
  return best;
}

}  // namespace

DecisionTree grow_tree(const Matrix& x, std::span<const int> y, int n_classes,
                       std::span<const std::size_t> rows, std::size_t max_features,
                       std::size_t min_leaf, std::uint64_t seed) {
  if (rows.empty()) throw EmptySet("cannot grow a tree on zero rows");
  if (max_features == 0) throw ValueError("max_features must be >= 1");
  min_leaf = std::max<std::size_t>(min_leaf, 1);
  const auto p = static_cast<int>(x.cols());
  std::mt19937_64 rng(seed);

  DecisionTree tree;
  struct Pending {
    std::size_t node;
    std::vector<std::size_t> rows;
  };
  tree.nodes.emplace_back();
  std::vector<Pending> stack;
  stack.push_back({0, {rows.begin(), rows.end()}});
  std::vector<int> features(static_cast<std::size_t>(p));

  while (!stack.empty()) {
    Pending job = std::move(stack.back());
    stack.pop_back();

    std::vector<long> hist(static_cast<std::size_t>(n_classes), 0);
    for (auto r : job.rows) {
      const int label = y[r];
      if (label < 0 || label >= n_classes) throw ValueError("label outside [0, n_classes)");
      ++hist[static_cast<std::size_t>(label)];
    }
    const bool pure = std::count_if(hist.begin(), hist.end(), [](long c) { return c > 0; }) == 1;

    Split best;
    if (!pure && job.rows.size() >= 2 * min_leaf) {
      std::iota(features.begin(), features.end(), 0);
      std::shuffle(features.begin(), features.end(), rng);
      const std::size_t first = std::min<std::size_t>(max_features, features.size());
      for (std::size_t f = 0; f < first; ++f) {
        const Split s = best_split_on(x, y, n_classes, job.rows, features[f], min_leaf);
        if (better(s, best)) best = s;
      }
      for (std::size_t f = first; !best.found && f < features.size(); ++f) {
        best = best_split_on(x, y, n_classes, job.rows, features[f], min_leaf);
      }
    }

    if (!best.found) {
      auto& leaf = tree.nodes[job.node];
      for (int c = 0; c < n_classes; ++c) {
        if (hist[static_cast<std::size_t>(c)] > 0) leaf.counts.emplace_back(c, hist[static_cast<std::size_t>(c)]);
      }
      continue;
    }

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : job.rows) {
      (x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left_rows : right_rows).push_back(r);
    }
    const auto left = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& node = tree.nodes[job.node];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = static_cast<int>(left);
    node.right = static_cast<int>(left + 1);
    // Right first so the left subtree is expanded first.
    stack.push_back({left + 1, std::move(right_rows)});
    stack.push_back({left, std::move(left_rows)});
  }
  return tree;
}

ForestModel train_random_forest(const LabeledSet& train, int n_classes, const ForestOptions& options,
                                Exec exec) {
  if (train.size() == 0) throw EmptySet("training set is empty");
  if (n_classes < 1) throw ValueError("n_classes must be >= 1");
  if (options.n_trees == 0) throw ValueError("forest needs at least one tree");
  ForestModel model;
  model.n_classes = n_classes;
  model.max_features = options.max_features;
  model.trees.resize(options.n_trees);
  const std::size_t n = train.size();
  const auto count = static_cast<std::ptrdiff_t>(options.n_trees);

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    try {
      std::mt19937_64 rng(derive_seed(options.seed, static_cast<std::uint64_t>(t)));
      std::vector<std::size_t> rows(n);
      if (options.bootstrap) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (auto& r : rows) r = pick(rng);
      } else {
        std::iota(rows.begin(), rows.end(), 0);
      }
      model.trees[static_cast<std::size_t>(t)] =
          grow_tree(train.x, train.y, n_classes, rows, options.max_features, options.min_leaf, rng());
    } catch (...) {
#pragma omp critical(keydetect_forest_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return model;
}

}  // namespace keydetect
