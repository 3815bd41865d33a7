// Copyright 2026 The MQE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mqe/common.hpp"

#include <string>
#include <vector>

namespace mqe::forest {

/// Defaults: 100 trees, unrestricted depth, Gini impurity.
struct ForestConfig {
  int n_trees = 100;
  /// 0 = unrestricted.
  int max_depth = 0;
  /// 0 = ceil(sqrt(d)).
  int features_per_split = 0;
  std::uint64_t seed = 13;
  unsigned workers = 0;
};

/// 1 - sum_k (n_k / n)^2 over the two class counts.
double gini(long benign, long attack);

struct TreeNode {
  /// -1 for leaves.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  long benign = 0;
  long attack = 0;

  bool is_leaf() const { return feature < 0; }
  double attack_fraction() const { return static_cast<double>(attack) / static_cast<double>(benign + attack); }
  /// Majority class; ties go to attack.
  int vote() const { return attack >= benign ? 1 : 0; }
};

/// CART tree; node 0 is the root. Samples with x[feature] <= threshold go left.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  const TreeNode& leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  int depth() const;
};

/// Grows one tree on the given rows (bootstrap duplicates allowed).
DecisionTree grow_tree(const Eigen::MatrixXd& features, const Labels& labels, const std::vector<std::size_t>& rows,
                       int features_per_split, int max_depth, Rng& rng);

struct Forest {
  ForestConfig config;
  int n_features = 0;
  std::vector<DecisionTree> trees;
};

Forest fit_forest(const Eigen::MatrixXd& features, const Labels& labels, const ForestConfig& config);

struct ForestPrediction {
  Labels labels;
  Eigen::VectorXd probs;
};

/// Label = mode of the tree votes (exact tie -> attack); prob = mean leaf
/// attack fraction.
ForestPrediction forest_predict(const Forest& forest, const Eigen::MatrixXd& features);

std::string to_json(const Forest& forest);
Forest forest_from_json(const std::string& text);

}  // namespace mqe::forest
