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

#include "mqe/forest.hpp"

#include <json.hpp>

#include <cmath>
#include <iostream>
#include <numeric>

namespace mqe::forest {

double gini(long benign, long attack) {
  if (benign < 0 || attack < 0) throw std::invalid_argument("class counts must be non-negative");
  const long n = benign + attack;
  if (n == 0) throw std::invalid_argument("Gini impurity of an empty node");
  const double p0 = static_cast<double>(benign) / static_cast<double>(n);
  const double p1 = static_cast<double>(attack) / static_cast<double>(n);
  return 1.0 - (p0 * p0 + p1 * p1);
}

const TreeNode& DecisionTree::leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int idx = 0;
  while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
    idx = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(idx)];
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

// n_L * gini_L + n_R * gini_R, i.e. n - sum_c n_c^2 / n per child.
double weighted_impurity(long l0, long l1, long r0, long r1) {
  const double nl = static_cast<double>(l0 + l1), nr = static_cast<double>(r0 + r1);
  const double left = nl - (static_cast<double>(l0 * l0) + static_cast<double>(l1 * l1)) / nl;
  const double right = nr - (static_cast<double>(r0 * r0) + static_cast<double>(r1 * r1)) / nr;
  return left + right;
}

bool is_constant(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows, int f) {
  const double first = x(static_cast<Eigen::Index>(rows.front()), f);
  for (std::size_t r : rows) {
    if (x(static_cast<Eigen::Index>(r), f) != first) return false;
  }
  return true;
}

void best_split_on(const Eigen::MatrixXd& x, const Labels& y, const std::vector<std::size_t>& rows, int f,
                   long total0, long total1, Split& best) {
  std::vector<std::pair<double, int>> vals;
  vals.reserve(rows.size());
  for (std::size_t r : rows) vals.emplace_back(x(static_cast<Eigen::Index>(r), f), y[r]);
  std::sort(vals.begin(), vals.end());
  long l0 = 0, l1 = 0;
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    (vals[i].second == 1 ? l1 : l0) += 1;
    const double a = vals[i].first, b = vals[i + 1].first;
    if (a == b) continue;
    double t = a + (b - a) / 2.0;
    if (!(t >= a && t < b)) t = a;
    const double imp = weighted_impurity(l0, l1, total0 - l0, total1 - l1);
    // Features are visited in ascending order and thresholds ascending, so a
    // strict improvement keeps the lowest (feature, threshold) on ties.
    if (imp < best.impurity - 1e-12) best = {f, t, imp};
  }
}

}  // namespace

DecisionTree grow_tree(const Eigen::MatrixXd& x, const Labels& y, const std::vector<std::size_t>& rows,
                       int features_per_split, int max_depth, Rng& rng) {
  if (rows.empty()) throw std::invalid_argument("cannot grow a tree on zero rows");
  const int d = static_cast<int>(x.cols());
  const int k = features_per_split > 0 ? std::min(features_per_split, d)
                                       : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  DecisionTree tree;
  struct Pending {
    int node;
    int depth;
    std::vector<std::size_t> rows;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, rows});
  std::vector<int> order(static_cast<std::size_t>(d));

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    long c0 = 0, c1 = 0;
    for (std::size_t r : cur.rows) (y[r] == 1 ? c1 : c0) += 1;
    TreeNode& node = tree.nodes[static_cast<std::size_t>(cur.node)];
    node.benign = c0;
    node.attack = c1;
    if (c0 == 0 || c1 == 0 || (max_depth > 0 && cur.depth >= max_depth)) continue;

    // Draw features in random order until k non-constant ones are found.
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> candidates;
    for (int f : order) {
      if (static_cast<int>(candidates.size()) == k) break;
      if (!is_constant(x, cur.rows, f)) candidates.push_back(f);
    }
    if (candidates.empty()) continue;
    std::sort(candidates.begin(), candidates.end());

    Split best;
    for (int f : candidates) best_split_on(x, y, cur.rows, f, c0, c1, best);
    if (best.feature < 0) continue;

    std::vector<std::size_t> left, right;
    for (std::size_t r : cur.rows) {
      (x(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left : right).push_back(r);
    }
    const int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& parent = tree.nodes[static_cast<std::size_t>(cur.node)];
    parent.feature = best.feature;
    parent.threshold = best.threshold;
    parent.left = li;
    parent.right = li + 1;
    stack.push_back({li + 1, cur.depth + 1, std::move(right)});
    stack.push_back({li, cur.depth + 1, std::move(left)});
  }
  return tree;
}

Forest fit_forest(const Eigen::MatrixXd& features, const Labels& labels, const ForestConfig& config) {
  const auto m = static_cast<std::size_t>(features.rows());
  if (m < 2) throw std::invalid_argument("forest training needs at least 2 samples");
  if (labels.size() != m) throw std::invalid_argument("feature and label counts differ");
  if (features.cols() < 1) throw std::invalid_argument("forest training needs at least one feature");
  if (config.n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
  }
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || static_cast<std::size_t>(pos) == m) {
    std::clog << "warning: forest trained on a single class; it will predict a constant\n";
  }

  Forest forest;
  forest.config = config;
  forest.n_features = static_cast<int>(features.cols());
  forest.trees.resize(static_cast<std::size_t>(config.n_trees));
  parallel_for(forest.trees.size(), config.workers, [&](std::size_t t) {
    Rng rng = derive_rng(config.seed, t);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    std::vector<std::size_t> sample(m);
    for (auto& s : sample) s = pick(rng);
    forest.trees[t] = grow_tree(features, labels, sample, config.features_per_split, config.max_depth, rng);
  });
  return forest;
}

ForestPrediction forest_predict(const Forest& forest, const Eigen::MatrixXd& features) {
  if (features.cols() != forest.n_features) {
    throw std::invalid_argument("forest expects " + std::to_string(forest.n_features) + " features, got " +
                                std::to_string(features.cols()));
  }
  ForestPrediction out;
  const Eigen::Index n = features.rows();
  out.labels.assign(static_cast<std::size_t>(n), 0);
  out.probs.resize(n);
  const auto n_trees = static_cast<long>(forest.trees.size());
  parallel_for(static_cast<std::size_t>(n), forest.config.workers, [&](std::size_t i) {
    long votes = 0;
    double frac = 0.0;
    for (const auto& tree : forest.trees) {
      const TreeNode& leaf = tree.leaf_for(features.row(static_cast<Eigen::Index>(i)));
      votes += leaf.vote();
      frac += leaf.attack_fraction();
    }
    out.labels[i] = 2 * votes >= n_trees ? 1 : 0;
    out.probs(static_cast<Eigen::Index>(i)) = frac / static_cast<double>(n_trees);
  });
  return out;
}

std::string to_json(const Forest& forest) {
  nlohmann::ordered_json j;
  j["format"] = "mqe.forest/1";
  j["config"] = {{"n_trees", forest.config.n_trees},
                 {"max_depth", forest.config.max_depth},
                 {"features_per_split", forest.config.features_per_split},
                 {"criterion", "gini"},
                 {"seed", forest.config.seed}};
  j["n_features"] = forest.n_features;
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& tree : forest.trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"benign", n.benign}, {"attack", n.attack}});
      } else {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"benign", n.benign},
                         {"attack", n.attack}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees);
  return j.dump() + "\n";
}

Forest forest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "mqe.forest/1") throw std::invalid_argument("not a forest document");
    Forest f;
    const auto& c = j.at("config");
    f.config.n_trees = c.at("n_trees");
    f.config.max_depth = c.at("max_depth");
    f.config.features_per_split = c.at("features_per_split");
    f.config.seed = c.at("seed");
    f.n_features = j.at("n_features");
    for (const auto& t : j.at("trees")) {
      DecisionTree tree;
      for (const auto& n : t.at("nodes")) {
        TreeNode node;
        node.benign = n.at("benign");
        node.attack = n.at("attack");
        if (n.contains("feature")) {
          node.feature = n.at("feature");
          node.threshold = n.at("threshold");
          node.left = n.at("left");
          node.right = n.at("right");
        }
        tree.nodes.push_back(node);
      }
      const auto size = static_cast<int>(tree.nodes.size());
      for (const auto& n : tree.nodes) {
        if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size ||
                             n.feature >= f.n_features)) {
          throw std::invalid_argument("forest document has dangling node references");
        }
      }
      f.trees.push_back(std::move(tree));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed forest document: ") + e.what());
  }
}

}  // namespace mqe::forest
