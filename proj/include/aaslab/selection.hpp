#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aaslab/common.hpp"

namespace aaslab {

enum class SelectionStrategy { random, greedy, components };

inline std::string to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::random: return "random";
    case SelectionStrategy::greedy: return "greedy";
    case SelectionStrategy::components: return "components";
  }
  return "unknown";
}

inline SelectionStrategy strategy_from_string(const std::string& s) {
  if (s == "random") return SelectionStrategy::random;
  if (s == "greedy") return SelectionStrategy::greedy;
  if (s == "components") return SelectionStrategy::components;
  fail(ErrorKind::config, "unknown selection strategy '" + s + "'");
}

struct InstanceSet {
  std::vector<int> ids;  // in selection order
  SelectionStrategy strategy = SelectionStrategy::random;
  std::size_t size = 0;
  std::size_t repetition = 0;
  std::vector<int> excluded;  // sorted
  std::size_t dim = 0;

  std::string name() const {
    return to_string(strategy) + "_s" + std::to_string(size) + "_r" + std::to_string(repetition);
  }

  std::uint64_t excluded_hash() const {
    Hasher h;
    for (int id : excluded) h.add(static_cast<std::uint64_t>(id));
    return h.value();
  }

  nlohmann::json to_json() const {
    return {{"name", name()},
            {"strategy", to_string(strategy)},
            {"size", size},
            {"repetition", repetition},
            {"d", dim},
            {"excluded_count", excluded.size()},
            {"excluded_hash", hex64(excluded_hash())},
            {"ids", ids}};
  }

  static InstanceSet from_json(const nlohmann::json& j) {
    InstanceSet s;
    try {
      s.strategy = strategy_from_string(j.at("strategy").get<std::string>());
      s.size = j.at("size").get<std::size_t>();
      s.repetition = j.at("repetition").get<std::size_t>();
      s.dim = j.at("d").get<std::size_t>();
      s.ids = j.at("ids").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::data, std::string("malformed instance set: ") + e.what());
    }
    return s;
  }
};

struct SelectionPlan {
  std::vector<std::size_t> sizes{24, 120, 600, 1200, 1800, 3600};
  std::vector<std::size_t> repetitions{10, 10, 5, 3, 3, 2};
  std::vector<SelectionStrategy> strategies{SelectionStrategy::random, SelectionStrategy::greedy};
  std::vector<int> component_instances{1, 5};

  /// Every (size, repetitions) pair must fit into the pool without overlap.
  void validate(std::size_t pool_size) const {
    if (sizes.size() != repetitions.size()) fail(ErrorKind::config, "selection sizes and repetitions differ in length");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] < 1 || repetitions[i] < 1) fail(ErrorKind::config, "selection sizes and repetitions must be >= 1");
      if (sizes[i] * repetitions[i] > pool_size)
        fail(ErrorKind::capacity, std::to_string(repetitions[i]) + " disjoint sets of size " +
                                      std::to_string(sizes[i]) + " exceed the pool of " + std::to_string(pool_size));
    }
  }
};

namespace detail {

inline std::vector<int> available(const std::vector<int>& pool, const std::vector<int>& excluded, std::size_t s) {
  const std::set<int> ex(excluded.begin(), excluded.end());
  std::vector<int> out;
  std::set<int> seen;
  for (int id : pool)
    if (!ex.count(id) && seen.insert(id).second) out.push_back(id);
  if (out.size() < s)
    fail(ErrorKind::capacity, "need " + std::to_string(s) + " instances but only " + std::to_string(out.size()) +
                                  " remain after exclusions");
  return out;
}

inline std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

/// Uniform sample without replacement from pool \ excluded.
inline InstanceSet select_random(const std::vector<int>& pool, std::size_t s, const std::vector<int>& excluded,
                                 std::uint64_t seed) {
  auto cand = detail::available(pool, excluded, s);
  std::sort(cand.begin(), cand.end());
  Rng rng(seed);
  for (std::size_t i = 0; i < s; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, cand.size() - i));
    std::swap(cand[i], cand[j]);
  }
  cand.resize(s);
  InstanceSet out;
  out.ids = std::move(cand);
  out.strategy = SelectionStrategy::random;
  out.size = s;
  out.excluded = detail::sorted(excluded);
  return out;
}

/// Feature rows keyed by problem id; NaN entries are infeasible.
using FeatureTable = std::map<int, std::vector<double>>;

inline double manhattan(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = std::isnan(a[i]) ? 0.5 : a[i];
    const double y = std::isnan(b[i]) ? 0.5 : b[i];
    acc += std::abs(x - y);
  }
  return acc;
}

/// Maximin greedy selection in Manhattan distance. First pick: farthest from the
/// centroid of the candidates; ties go to the lowest problem id.
inline InstanceSet select_greedy(const std::vector<int>& pool, const FeatureTable& features, std::size_t s,
                                 const std::vector<int>& excluded) {
  auto cand = detail::sorted(detail::available(pool, excluded, s));
  std::vector<std::vector<double>> x;
  x.reserve(cand.size());
  for (int id : cand) {
    auto it = features.find(id);
    if (it == features.end()) fail(ErrorKind::data, "no features for problem " + std::to_string(id));
    x.push_back(it->second);
    for (auto& v : x.back())
      if (std::isnan(v)) v = 0.5;
  }
  const std::size_t nf = x.front().size();
  for (const auto& r : x)
    if (r.size() != nf) fail(ErrorKind::data, "feature rows differ in length");

  std::vector<double> centroid(nf, 0.0);
  for (const auto& r : x)
    for (std::size_t j = 0; j < nf; ++j) centroid[j] += r[j];
  for (auto& c : centroid) c /= static_cast<double>(x.size());

  std::vector<double> score(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) score[i] = manhattan(x[i], centroid);
  std::vector<char> taken(x.size(), 0);
  InstanceSet out;
  out.strategy = SelectionStrategy::greedy;
  out.size = s;
  out.excluded = detail::sorted(excluded);
  for (std::size_t step = 0; step < s; ++step) {
    std::size_t best = x.size();
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!taken[i] && (best == x.size() || score[i] > score[best])) best = i;
    taken[best] = 1;
    out.ids.push_back(cand[best]);
    // score becomes the min distance to the selected set
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (taken[i]) continue;
      const double dist = manhattan(x[i], x[best]);
      score[i] = step == 0 ? dist : std::min(score[i], dist);
    }
  }
  return out;
}

/// Component-function wrappers with instance ids 1..instances_per_function for every registry entry.
/// `component_keys` maps problem id -> (function id, instance id) for the component problems in the pool.
inline InstanceSet select_components(const std::map<int, std::pair<int, int>>& component_keys,
                                     std::size_t registry_size, int instances_per_function) {
  if (instances_per_function < 1) fail(ErrorKind::domain, "instances per function must be >= 1");
  std::map<std::pair<int, int>, int> by_key;
  for (const auto& [pid, key] : component_keys) by_key.emplace(key, pid);
  InstanceSet out;
  out.strategy = SelectionStrategy::components;
  for (std::size_t f = 1; f <= registry_size; ++f)
    for (int iid = 1; iid <= instances_per_function; ++iid) {
      auto it = by_key.find({static_cast<int>(f), iid});
      if (it == by_key.end())
        fail(ErrorKind::pool, "component problem for function " + std::to_string(f) + " instance " +
                                  std::to_string(iid) + " missing from the pool");
      out.ids.push_back(it->second);
    }
  out.size = out.ids.size();
  return out;
}

/// Mean Manhattan distance over all unordered pairs of the set.
inline double avg_pairwise_manhattan(const std::vector<int>& ids, const FeatureTable& features) {
  if (ids.size() < 2) fail(ErrorKind::domain, "average pairwise distance needs at least 2 instances");
  std::vector<const std::vector<double>*> rows;
  for (int id : ids) {
    auto it = features.find(id);
    if (it == features.end()) fail(ErrorKind::data, "no features for problem " + std::to_string(id));
    rows.push_back(&it->second);
  }
  double acc = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      acc += manhattan(*rows[a], *rows[b]);
      ++pairs;
    }
  return acc / static_cast<double>(pairs);
}

/// All sets of a plan for one strategy; repetition j of a size excludes the union of repetitions < j.
inline std::vector<InstanceSet> plan_sets(const SelectionPlan& plan, SelectionStrategy strategy,
                                          const std::vector<int>& pool, const FeatureTable& features,
                                          std::uint64_t seed, std::size_t dim) {
  plan.validate(pool.size());
  std::vector<InstanceSet> out;
  for (std::size_t i = 0; i < plan.sizes.size(); ++i) {
    std::vector<int> excluded;
    for (std::size_t r = 0; r < plan.repetitions[i]; ++r) {
      InstanceSet set = strategy == SelectionStrategy::greedy
                            ? select_greedy(pool, features, plan.sizes[i], excluded)
                            : select_random(pool, plan.sizes[i], excluded,
                                            derive_seed(seed, "random-selection", plan.sizes[i], r));
      set.repetition = r + 1;
      set.dim = dim;
      excluded.insert(excluded.end(), set.ids.begin(), set.ids.end());
      out.push_back(std::move(set));
    }
  }
  return out;
}

}  // namespace aaslab
