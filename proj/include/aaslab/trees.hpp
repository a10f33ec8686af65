#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aaslab/common.hpp"

// Tree-ensemble classifiers: softmax gradient boosting and a bagged random forest.
namespace aaslab::ml {

struct TreeNode {
  int feature = -1;  // -1: leaf
  double threshold = 0.0;  // x < threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output (GBDT margin or forest class index)
};

struct Tree {
  std::vector<TreeNode> nodes;

  double evaluate(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      double v = x[static_cast<std::size_t>(n.feature)];
      if (std::isnan(v)) v = 0.5;
      i = v < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (nodes[i].feature >= 0) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
    }
    return best;
  }
};

struct BoostingParams {
  std::size_t rounds = 100;
  std::size_t max_depth = 6;
  double learning_rate = 0.3;
  double lambda = 1.0;
  double gamma = 0.0;
  double min_child_weight = 1e-6;

  nlohmann::json to_json() const {
    return {{"rounds", rounds},   {"max_depth", max_depth}, {"learning_rate", learning_rate},
            {"lambda", lambda},   {"gamma", gamma},         {"min_child_weight", min_child_weight}};
  }
};

struct ForestParams {
  std::size_t trees = 100;
  std::size_t max_depth = 0;  // 0: unlimited
  std::size_t min_samples_split = 2;

  nlohmann::json to_json() const {
    return {{"trees", trees}, {"max_depth", max_depth}, {"min_samples_split", min_samples_split}};
  }
};

enum class ModelKind { gbdt, forest, constant };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::gbdt: return "gbdt";
    case ModelKind::forest: return "forest";
    case ModelKind::constant: return "constant";
  }
  return "unknown";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "gbdt") return ModelKind::gbdt;
  if (s == "forest") return ModelKind::forest;
  if (s == "constant") return ModelKind::constant;
  fail(ErrorKind::data, "unknown model kind '" + s + "'");
}

/// Multi-class classifier over dense feature rows. Class indices refer to `classes`.
struct Classifier {
  ModelKind kind = ModelKind::constant;
  std::size_t num_features = 0;
  std::vector<std::string> classes;
  std::size_t constant_class = 0;
  std::vector<Tree> trees;  // gbdt: round-major, one tree per class per round

  std::size_t predict_index(std::span<const double> x) const {
    if (x.size() != num_features)
      fail(ErrorKind::domain, "classifier expects " + std::to_string(num_features) + " features, got " +
                                  std::to_string(x.size()));
    const std::size_t k = classes.size();
    if (kind == ModelKind::constant) return constant_class;
    std::vector<double> score(k, 0.0);
    if (kind == ModelKind::gbdt) {
      for (std::size_t t = 0; t < trees.size(); ++t) score[t % k] += trees[t].evaluate(x);
    } else {
      for (const auto& t : trees) score[static_cast<std::size_t>(t.evaluate(x))] += 1.0;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (score[c] > score[best]) best = c;
    return best;
  }

  const std::string& predict(std::span<const double> x) const { return classes[predict_index(x)]; }

  nlohmann::json to_json() const {
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : trees) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
      jt.push_back(nodes);
    }
    return {{"kind", to_string(kind)},
            {"num_features", num_features},
            {"classes", classes},
            {"constant_class", constant_class},
            {"trees", jt}};
  }

  static Classifier from_json(const nlohmann::json& j) {
    Classifier c;
    try {
      c.kind = model_kind_from_string(j.at("kind").get<std::string>());
      c.num_features = j.at("num_features").get<std::size_t>();
      c.classes = j.at("classes").get<std::vector<std::string>>();
      c.constant_class = j.at("constant_class").get<std::size_t>();
      for (const auto& jt : j.at("trees")) {
        Tree t;
        for (const auto& n : jt)
          t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                             n.at(4).get<double>()});
        c.trees.push_back(std::move(t));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::data, std::string("malformed classifier: ") + e.what());
    }
    if (c.classes.empty() || c.constant_class >= c.classes.size()) fail(ErrorKind::data, "classifier has no classes");
    return c;
  }
};

struct Dataset {
  std::vector<std::vector<double>> x;  // rows
  std::vector<std::size_t> y;          // class indices
  std::vector<std::string> classes;

  std::size_t rows() const { return x.size(); }
  std::size_t cols() const { return x.empty() ? 0 : x.front().size(); }

  void validate() const {
    if (x.empty()) fail(ErrorKind::domain, "empty training set");
    if (y.size() != x.size()) fail(ErrorKind::domain, "labels and rows differ in count");
    for (const auto& r : x)
      if (r.size() != cols()) fail(ErrorKind::domain, "ragged feature rows");
    for (auto c : y)
      if (c >= classes.size()) fail(ErrorKind::domain, "label outside the class set");
  }

  double value(std::size_t row, std::size_t feature) const {
    const double v = x[row][feature];
    return std::isnan(v) ? 0.5 : v;
  }
};

namespace detail {

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact second-order split search over the given rows.
inline Split best_boosting_split(const Dataset& data, const std::vector<std::size_t>& rows,
                                 const std::vector<double>& g, const std::vector<double>& h,
                                 const BoostingParams& p) {
  double G = 0.0, H = 0.0;
  for (auto r : rows) {
    G += g[r];
    H += h[r];
  }
  const double parent = G * G / (H + p.lambda);
  Split best;
  std::vector<std::size_t> order(rows);
  for (std::size_t f = 0; f < data.cols(); ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.value(a, f) < data.value(b, f); });
    double gl = 0.0, hl = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      gl += g[order[i]];
      hl += h[order[i]];
      const double v0 = data.value(order[i], f), v1 = data.value(order[i + 1], f);
      if (!(v0 < v1)) continue;
      const double hr = H - hl, gr = G - gl;
      if (hl < p.min_child_weight || hr < p.min_child_weight) continue;
      const double gain = gl * gl / (hl + p.lambda) + gr * gr / (hr + p.lambda) - parent;
      if (gain > best.gain && gain > p.gamma) {
        best = {true, f, v0 + 0.5 * (v1 - v0), gain};
      }
    }
  }
  return best;
}

inline int grow_boosting_tree(const Dataset& data, const std::vector<std::size_t>& rows, const std::vector<double>& g,
                              const std::vector<double>& h, const BoostingParams& p, std::size_t depth, Tree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  Split s;
  if (depth < p.max_depth && rows.size() >= 2) s = best_boosting_split(data, rows, g, h, p);
  if (!s.found) {
    double G = 0.0, H = 0.0;
    for (auto r : rows) {
      G += g[r];
      H += h[r];
    }
    tree.nodes[static_cast<std::size_t>(id)].value = -p.learning_rate * G / (H + p.lambda);
    return id;
  }
  std::vector<std::size_t> left, right;
  for (auto r : rows) (data.value(r, s.feature) < s.threshold ? left : right).push_back(r);
  const int l = grow_boosting_tree(data, left, g, h, p, depth + 1, tree);
  const int r = grow_boosting_tree(data, right, g, h, p, depth + 1, tree);
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = static_cast<int>(s.feature);
  node.threshold = s.threshold;
  node.left = l;
  node.right = r;
  return id;
}

inline double gini(const std::vector<double>& counts, double total) {
  double acc = 1.0;
  for (double c : counts) acc -= (c / total) * (c / total);
  return acc;
}

inline int grow_forest_tree(const Dataset& data, const std::vector<std::size_t>& rows, const ForestParams& p,
                            std::size_t depth, std::size_t mtry, Rng& rng, Tree& tree) {
  const std::size_t k = data.classes.size();
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  std::vector<double> counts(k, 0.0);
  for (auto r : rows) counts[data.y[r]] += 1.0;
  std::size_t majority = 0;
  for (std::size_t c = 1; c < k; ++c)
    if (counts[c] > counts[majority]) majority = c;
  const bool pure = counts[majority] == static_cast<double>(rows.size());
  const bool depth_ok = p.max_depth == 0 || depth < p.max_depth;

  Split best;
  if (!pure && depth_ok && rows.size() >= p.min_samples_split) {
    std::vector<std::size_t> feats(data.cols());
    std::iota(feats.begin(), feats.end(), 0);
    shuffle(feats, rng);
    feats.resize(std::min(mtry, feats.size()));
    std::sort(feats.begin(), feats.end());
    const double n = static_cast<double>(rows.size());
    const double parent = gini(counts, n);
    std::vector<std::size_t> order(rows);
    for (auto f : feats) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return data.value(a, f) < data.value(b, f); });
      std::vector<double> lc(k, 0.0), rc = counts;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        lc[data.y[order[i]]] += 1.0;
        rc[data.y[order[i]]] -= 1.0;
        const double v0 = data.value(order[i], f), v1 = data.value(order[i + 1], f);
        if (!(v0 < v1)) continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double gain = parent - (nl / n) * gini(lc, nl) - (nr / n) * gini(rc, nr);
        if (gain > best.gain) best = {true, f, v0 + 0.5 * (v1 - v0), gain};
      }
    }
  }
  if (!best.found) {
    tree.nodes[static_cast<std::size_t>(id)].value = static_cast<double>(majority);
    return id;
  }
  std::vector<std::size_t> left, right;
  for (auto r : rows) (data.value(r, best.feature) < best.threshold ? left : right).push_back(r);
  const int l = grow_forest_tree(data, left, p, depth + 1, mtry, rng, tree);
  const int r = grow_forest_tree(data, right, p, depth + 1, mtry, rng, tree);
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = static_cast<int>(best.feature);
  node.threshold = best.threshold;
  node.left = l;
  node.right = r;
  return id;
}

inline bool single_label(const Dataset& data) {
  return std::all_of(data.y.begin(), data.y.end(), [&](std::size_t c) { return c == data.y.front(); });
}

inline Classifier constant_classifier(const Dataset& data) {
  Classifier c;
  c.kind = ModelKind::constant;
  c.num_features = data.cols();
  c.classes = data.classes;
  c.constant_class = data.y.front();
  return c;
}

}  // namespace detail

/// Softmax gradient boosting; one regression tree per class per round.
inline Classifier train_gbdt(const Dataset& data, const BoostingParams& p = {}) {
  data.validate();
  if (detail::single_label(data)) return detail::constant_classifier(data);
  const std::size_t n = data.rows(), k = data.classes.size();
  Classifier model;
  model.kind = ModelKind::gbdt;
  model.num_features = data.cols();
  model.classes = data.classes;
  model.constant_class = data.y.front();

  std::vector<std::vector<double>> margin(n, std::vector<double>(k, 0.0));
  std::vector<std::vector<double>> grad(k, std::vector<double>(n)), hess(k, std::vector<double>(n));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t round = 0; round < p.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double top = *std::max_element(margin[i].begin(), margin[i].end());
      double z = 0.0;
      std::vector<double> prob(k);
      for (std::size_t c = 0; c < k; ++c) z += prob[c] = std::exp(margin[i][c] - top);
      for (std::size_t c = 0; c < k; ++c) {
        const double pc = prob[c] / z;
        grad[c][i] = pc - (data.y[i] == c ? 1.0 : 0.0);
        hess[c][i] = std::max(2.0 * pc * (1.0 - pc), 1e-16);
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      Tree t;
      detail::grow_boosting_tree(data, all, grad[c], hess[c], p, 0, t);
      for (std::size_t i = 0; i < n; ++i) margin[i][c] += t.evaluate(data.x[i]);
      model.trees.push_back(std::move(t));
    }
  }
  return model;
}

/// Bagged Gini trees with sqrt(features) candidates per split; majority vote.
inline Classifier train_forest(const Dataset& data, const ForestParams& p, std::uint64_t seed) {
  data.validate();
  if (detail::single_label(data)) return detail::constant_classifier(data);
  Classifier model;
  model.kind = ModelKind::forest;
  model.num_features = data.cols();
  model.classes = data.classes;
  model.constant_class = data.y.front();
  const auto mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(data.cols())))));
  for (std::size_t t = 0; t < p.trees; ++t) {
    Rng rng(derive_seed(seed, "forest-tree", t));
    std::vector<std::size_t> rows(data.rows());
    for (auto& r : rows) r = static_cast<std::size_t>(uniform_index(rng, data.rows()));
    std::sort(rows.begin(), rows.end());
    Tree tree;
    detail::grow_forest_tree(data, rows, p, 0, mtry, rng, tree);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace aaslab::ml
