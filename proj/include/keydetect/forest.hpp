#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "keydetect/dataset.hpp"
#include "keydetect/exec.hpp"

namespace keydetect {

// Rows with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Leaves only: nonzero training class counts as (class, count), by class.
  std::vector<std::pair<int, long>> counts;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const Vector& x) const;
  // Majority class of the leaf; ties go to the lowest class index.
  int predict(const Vector& x) const;
  int depth() const;
};

struct ForestOptions {
  std::size_t n_trees = 100;
  std::size_t max_features = 5;  // features drawn per split
  bool bootstrap = true;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 42;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_classes = 0;
  std::size_t max_features = 5;

  // Vote counts per class.
  std::vector<long> votes(const Vector& x) const;
  // Majority vote; ties go to the lowest class index.
  int predict(const Vector& x) const;
  std::vector<int> predict_rows(const Matrix& rows, Exec exec = Exec::parallel) const;
};

// Grows one unpruned Gini tree. Candidate thresholds are midpoints between
// adjacent distinct values; equal impurities prefer the lower feature index,
// then the lower threshold. When none of the drawn features can split a node
// the remaining ones are tried in random order.
DecisionTree grow_tree(const Matrix& x, std::span<const int> y, int n_classes,
                       std::span<const std::size_t> rows, std::size_t max_features,
                       std::size_t min_leaf, std::uint64_t seed);

// Trees are grown independently, in parallel on the parallel path; tree t
// draws its bootstrap sample and feature subsets from derive_seed(seed, t),
// so both paths give identical forests.
ForestModel train_random_forest(const LabeledSet& train, int n_classes,
                                const ForestOptions& options = {}, Exec exec = Exec::parallel);

}  // namespace keydetect
