#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aaslab/aas.hpp"
#include "aaslab/common.hpp"
#include "aaslab/ela.hpp"
#include "aaslab/generator.hpp"
#include "aaslab/portfolio.hpp"
#include "aaslab/selection.hpp"

namespace aaslab {

struct ElaConfig {
  std::size_t sample_factor = 500;
  std::size_t repetitions = 5;
  double prune_threshold = 0.9;
};

struct PortfolioConfig {
  std::vector<OptimizerSpec> algorithms = default_portfolio();
  std::size_t budget_factor = 2000;
  std::size_t runs = 15;
  std::size_t component_runs = 50;
};

struct ExperimentConfig {
  std::size_t dim = 2;
  std::uint64_t master_seed = 20240501;
  std::string output_dir = "aaslab-out";
  std::size_t jobs = 1;
  GeneratorSpec generator;
  ElaConfig ela;
  PortfolioConfig portfolio;
  SelectionPlan selection;
  aas::SelectorHyperparameters selector;
  bool training_set_sbs = false;

  ExperimentConfig() { generator.counts_per_k = GeneratorSpec::full_scale_counts(); }

  void apply_seed(std::uint64_t seed) {
    master_seed = seed;
    generator.master_seed = seed;
    selector.seed = derive_seed(seed, "selector");
  }

  void validate() const {
    if (dim < 1 || dim > SobolSequence::max_dimension)
      fail(ErrorKind::config, "d must lie in [1, " + std::to_string(SobolSequence::max_dimension) + "]");
    if (generator.dim != dim) fail(ErrorKind::config, "generator dimension differs from d");
    generator.validate();
    if (ela.repetitions < 1) fail(ErrorKind::config, "ELA repetitions must be >= 1");
    if (ela.sample_factor < 50) fail(ErrorKind::config, "ELA sample factor must be >= 50");
    if (!(ela.prune_threshold > 0.0 && ela.prune_threshold <= 1.0))
      fail(ErrorKind::config, "prune threshold must lie in (0, 1]");
    validate_portfolio(portfolio.algorithms);
    if (portfolio.budget_factor < 1 || portfolio.runs < 1 || portfolio.component_runs < 1)
      fail(ErrorKind::config, "budget factor and run counts must be >= 1");
    if (selection.sizes.size() != selection.repetitions.size())
      fail(ErrorKind::config, "selection sizes and repetitions differ in length");
    for (int c : selection.component_instances)
      if (c < 1 || c > generator.component_instances)
        fail(ErrorKind::config, "component set instance count " + std::to_string(c) +
                                    " exceeds the generated component instances");
    if (selector.kind != "gbdt" && selector.kind != "forest")
      fail(ErrorKind::config, "selector kind must be gbdt or forest");
  }
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json optimizer_to_json(const OptimizerSpec& s) {
  nlohmann::json hp = nlohmann::json::object();
  for (const auto& [k, v] : s.hyperparameters) hp[k] = v;
  return {{"id", s.algorithm_id}, {"kind", s.name}, {"hyperparameters", hp}, {"population_based", s.population_based}};
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [k, n] : c.generator.counts_per_k) counts[std::to_string(k)] = n;
  nlohmann::json algs = nlohmann::json::array();
  for (const auto& s : c.portfolio.algorithms) algs.push_back(optimizer_to_json(s));
  nlohmann::json strategies = nlohmann::json::array();
  for (auto s : c.selection.strategies) strategies.push_back(to_string(s));
  return {
      {"d", c.dim},
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir},
      {"jobs", c.jobs},
      {"generator",
       {{"counts_per_k", counts},
        {"instance_pool_size", c.generator.instance_pool_size},
        {"component_instances", c.generator.component_instances}}},
      {"ela",
       {{"sample_factor", c.ela.sample_factor},
        {"repetitions", c.ela.repetitions},
        {"prune_threshold", c.ela.prune_threshold}}},
      {"portfolio",
       {{"algorithms", algs},
        {"budget_factor", c.portfolio.budget_factor},
        {"runs", c.portfolio.runs},
        {"component_runs", c.portfolio.component_runs}}},
      {"selection",
       {{"sizes", c.selection.sizes},
        {"repetitions", c.selection.repetitions},
        {"strategies", strategies},
        {"component_instances", c.selection.component_instances}}},
      {"selector",
       {{"kind", c.selector.kind},
        {"rounds", c.selector.boosting.rounds},
        {"max_depth", c.selector.boosting.max_depth},
        {"learning_rate", c.selector.boosting.learning_rate},
        {"lambda", c.selector.boosting.lambda},
        {"gamma", c.selector.boosting.gamma},
        {"min_child_weight", c.selector.boosting.min_child_weight},
        {"forest_trees", c.selector.forest.trees},
        {"forest_max_depth", c.selector.forest.max_depth}}},
      {"evaluation", {{"sbs_reference", c.training_set_sbs ? "training" : "evaluation"}}},
  };
}

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::config, where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      fail(ErrorKind::config, "unknown key '" + it.key() + "' in " + where);
}

}  // namespace detail

/// Overlays the keys present in `j` onto `base`; unknown keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  using detail::read_opt;
  try {
    detail::check_keys(j, {"d", "master_seed", "output_dir", "jobs", "generator", "ela", "portfolio", "selection",
                           "selector", "evaluation"},
                       "config");
    read_opt(j, "d", c.dim);
    std::uint64_t seed = c.master_seed;
    read_opt(j, "master_seed", seed);
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "jobs", c.jobs);
    if (j.contains("generator")) {
      const auto& g = j.at("generator");
      detail::check_keys(g, {"counts_per_k", "instance_pool_size", "component_instances"}, "generator");
      if (g.contains("counts_per_k")) {
        c.generator.counts_per_k.clear();
        for (auto it = g.at("counts_per_k").begin(); it != g.at("counts_per_k").end(); ++it)
          c.generator.counts_per_k[static_cast<std::size_t>(parse_int(it.key()))] = it.value().get<std::size_t>();
      }
      read_opt(g, "instance_pool_size", c.generator.instance_pool_size);
      read_opt(g, "component_instances", c.generator.component_instances);
    }
    if (j.contains("ela")) {
      const auto& e = j.at("ela");
      detail::check_keys(e, {"sample_factor", "repetitions", "prune_threshold"}, "ela");
      read_opt(e, "sample_factor", c.ela.sample_factor);
      read_opt(e, "repetitions", c.ela.repetitions);
      read_opt(e, "prune_threshold", c.ela.prune_threshold);
    }
    if (j.contains("portfolio")) {
      const auto& p = j.at("portfolio");
      detail::check_keys(p, {"algorithms", "budget_factor", "runs", "component_runs"}, "portfolio");
      if (p.contains("algorithms")) {
        c.portfolio.algorithms.clear();
        for (const auto& a : p.at("algorithms")) {
          detail::check_keys(a, {"id", "kind", "hyperparameters", "population_based"}, "portfolio.algorithms[]");
          OptimizerSpec s;
          s.algorithm_id = a.at("id").get<std::string>();
          s.name = a.at("kind").get<std::string>();
          // start from the built-in defaults of that kind
          for (const auto& d : default_portfolio())
            if (d.name == s.name) {
              s.hyperparameters = d.hyperparameters;
              s.population_based = d.population_based;
            }
          if (a.contains("hyperparameters"))
            for (auto it = a.at("hyperparameters").begin(); it != a.at("hyperparameters").end(); ++it)
              s.hyperparameters[it.key()] = it.value().get<double>();
          read_opt(a, "population_based", s.population_based);
          c.portfolio.algorithms.push_back(std::move(s));
        }
      }
      read_opt(p, "budget_factor", c.portfolio.budget_factor);
      read_opt(p, "runs", c.portfolio.runs);
      read_opt(p, "component_runs", c.portfolio.component_runs);
    }
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      detail::check_keys(s, {"sizes", "repetitions", "strategies", "component_instances"}, "selection");
      read_opt(s, "sizes", c.selection.sizes);
      read_opt(s, "repetitions", c.selection.repetitions);
      read_opt(s, "component_instances", c.selection.component_instances);
      if (s.contains("strategies")) {
        c.selection.strategies.clear();
        for (const auto& v : s.at("strategies")) {
          const auto st = strategy_from_string(v.get<std::string>());
          if (st == SelectionStrategy::components)
            fail(ErrorKind::config, "component sets are configured through selection.component_instances");
          c.selection.strategies.push_back(st);
        }
      }
    }
    if (j.contains("selector")) {
      const auto& s = j.at("selector");
      detail::check_keys(s, {"kind", "rounds", "max_depth", "learning_rate", "lambda", "gamma", "min_child_weight",
                             "forest_trees", "forest_max_depth"},
                         "selector");
      read_opt(s, "kind", c.selector.kind);
      read_opt(s, "rounds", c.selector.boosting.rounds);
      read_opt(s, "max_depth", c.selector.boosting.max_depth);
      read_opt(s, "learning_rate", c.selector.boosting.learning_rate);
      read_opt(s, "lambda", c.selector.boosting.lambda);
      read_opt(s, "gamma", c.selector.boosting.gamma);
      read_opt(s, "min_child_weight", c.selector.boosting.min_child_weight);
      read_opt(s, "forest_trees", c.selector.forest.trees);
      read_opt(s, "forest_max_depth", c.selector.forest.max_depth);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      detail::check_keys(e, {"sbs_reference"}, "evaluation");
      std::string ref = "evaluation";
      read_opt(e, "sbs_reference", ref);
      if (ref != "evaluation" && ref != "training")
        fail(ErrorKind::config, "evaluation.sbs_reference must be 'evaluation' or 'training'");
      c.training_set_sbs = ref == "training";
    }
    c.generator.dim = c.dim;
    c.apply_seed(seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path), nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::config, path + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
  return config_from_json(j, std::move(base));
}

/// Full-scale defaults (d = 2).
inline ExperimentConfig full_scale_config() {
  ExperimentConfig c;
  c.generator.dim = c.dim;
  c.apply_seed(c.master_seed);
  return c;
}

/// Small end-to-end experiment: 600 generated problems in d = 2, five optimizers,
/// five runs each, training sizes 24 and 120.
inline ExperimentConfig desk_scale_config() {
  ExperimentConfig c;
  c.dim = 2;
  c.output_dir = "desk-out";
  c.generator.dim = 2;
  c.generator.counts_per_k.clear();
  for (std::size_t k = 2; k <= 5; ++k) c.generator.counts_per_k[k] = 112;
  for (std::size_t k = 6; k <= registry_size(); ++k) c.generator.counts_per_k[k] = 8;
  c.portfolio.algorithms.clear();
  for (const auto& s : default_portfolio())
    if (s.name != "random_search") c.portfolio.algorithms.push_back(s);
  c.portfolio.runs = 5;
  c.portfolio.component_runs = 5;
  c.selection.sizes = {24, 120};
  c.selection.repetitions = {5, 5};
  c.apply_seed(c.master_seed);
  return c;
}

// ---------------------------------------------------------------------------
// Stage hashes: each covers the settings a stage and its inputs depend on.
// ---------------------------------------------------------------------------

struct StageHashes {
  std::string generate, features, run, select, train, evaluate;
};

inline StageHashes stage_hashes(const ExperimentConfig& c) {
  const auto j = to_json(c);
  auto h = [](std::initializer_list<std::string> parts) {
    Hasher hs;
    for (const auto& p : parts) hs.add(std::string_view(p));
    return hex64(hs.value());
  };
  StageHashes s;
  s.generate = h({"generate", j.at("d").dump(), j.at("master_seed").dump(), j.at("generator").dump(),
                  std::to_string(registry_size())});
  s.features = h({"features", s.generate, j.at("ela").dump(), ela::catalog().version});
  s.run = h({"run", s.generate, j.at("portfolio").dump()});
  s.select = h({"select", s.features, j.at("selection").dump()});
  s.train = h({"train", s.select, s.run, j.at("selector").dump()});
  s.evaluate = h({"evaluate", s.train, j.at("evaluation").dump()});
  return s;
}

}  // namespace aaslab
