#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "aaslab/common.hpp"
#include "aaslab/io.hpp"
#include "aaslab/portfolio.hpp"
#include "aaslab/selection.hpp"
#include "aaslab/trees.hpp"

// Algorithm selection: labels, SBS/VBS, gap closure, portfolio complementarity, projections.
namespace aaslab::aas {

/// Algorithm subset as indices into the performance table, in table order.
/// Ties anywhere are broken in favour of the earlier algorithm in that order.
inline std::vector<std::size_t> subset_indices(const PerformanceTable& perf, const std::vector<std::string>& subset) {
  if (subset.empty()) fail(ErrorKind::domain, "empty algorithm subset");
  std::vector<std::size_t> idx;
  for (const auto& id : subset) idx.push_back(perf.algorithm_index(id));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

inline std::vector<std::size_t> all_algorithms(const PerformanceTable& perf) {
  std::vector<std::size_t> idx(perf.algorithm_ids.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return idx;
}

struct LabeledRow {
  int problem_id = 0;
  std::string label;
  std::vector<double> aocc;  // over the subset, in table order
};

struct LabeledDataset {
  std::vector<std::string> algorithms;  // the subset, in table order
  std::vector<LabeledRow> rows;
};

inline std::size_t argmax_index(const PerformanceTable& perf, std::size_t p, const std::vector<std::size_t>& subset) {
  std::size_t best = subset.front();
  for (auto a : subset)
    if (perf.cells[p][a].mean_aocc > perf.cells[p][best].mean_aocc) best = a;
  return best;
}

/// Per-instance best algorithm of the subset.
inline LabeledDataset label_instances(const PerformanceTable& perf, const std::vector<std::string>& subset,
                                      const std::vector<int>& problem_ids) {
  const auto idx = subset_indices(perf, subset);
  LabeledDataset out;
  for (auto a : idx) out.algorithms.push_back(perf.algorithm_ids[a]);
  for (int pid : problem_ids) {
    const auto p = perf.problem_index(pid);
    LabeledRow row;
    row.problem_id = pid;
    row.label = perf.algorithm_ids[argmax_index(perf, p, idx)];
    for (auto a : idx) row.aocc.push_back(perf.cells[p][a].mean_aocc);
    out.rows.push_back(std::move(row));
  }
  return out;
}

struct SbsVbs {
  std::string sbs_id;
  double sbs_mean = 0.0;
  double vbs_mean = 0.0;
  double gap() const { return vbs_mean - sbs_mean; }
};

inline SbsVbs sbs_vbs(const PerformanceTable& perf, const std::vector<int>& problem_ids,
                      const std::vector<std::size_t>& subset) {
  if (problem_ids.empty()) fail(ErrorKind::domain, "SBS/VBS of an empty instance set");
  if (subset.empty()) fail(ErrorKind::domain, "empty algorithm subset");
  std::vector<std::size_t> rows;
  for (int pid : problem_ids) rows.push_back(perf.problem_index(pid));
  const double n = static_cast<double>(rows.size());
  SbsVbs out;
  double best_mean = -1.0;
  for (auto a : subset) {
    double acc = 0.0;
    for (auto p : rows) acc += perf.cells[p][a].mean_aocc;
    if (acc / n > best_mean) {
      best_mean = acc / n;
      out.sbs_id = perf.algorithm_ids[a];
    }
  }
  out.sbs_mean = best_mean;
  double acc = 0.0;
  for (auto p : rows) acc += perf.cells[p][argmax_index(perf, p, subset)].mean_aocc;
  out.vbs_mean = acc / n;
  return out;
}

inline std::string sbs(const PerformanceTable& perf, const std::vector<int>& problem_ids,
                       const std::vector<std::string>& subset) {
  return sbs_vbs(perf, problem_ids, subset_indices(perf, subset)).sbs_id;
}

inline double vbs_mean(const PerformanceTable& perf, const std::vector<int>& problem_ids,
                       const std::vector<std::string>& subset) {
  return sbs_vbs(perf, problem_ids, subset_indices(perf, subset)).vbs_mean;
}

struct PowersetRow {
  std::vector<std::string> algorithms;
  std::string sbs_id;
  double sbs_mean = 0.0;
  double vbs_mean = 0.0;
  double gap = 0.0;
};

inline constexpr std::size_t kPowersetLimit = 12;

/// VBS-SBS gap for every algorithm subset with at least `min_size` members, in
/// increasing bitmask order.
inline std::vector<PowersetRow> portfolio_powerset_gaps(const PerformanceTable& perf, const std::vector<int>& problem_ids,
                                                        std::size_t min_size = 3) {
  const std::size_t m = perf.algorithm_ids.size();
  if (m > kPowersetLimit)
    fail(ErrorKind::enumeration_guard, "powerset over " + std::to_string(m) + " algorithms exceeds the limit of " +
                                           std::to_string(kPowersetLimit));
  std::vector<PowersetRow> out;
  for (std::uint32_t mask = 1; mask < (1U << m); ++mask) {
    std::vector<std::size_t> subset;
    for (std::size_t a = 0; a < m; ++a)
      if (mask & (1U << a)) subset.push_back(a);
    if (subset.size() < std::max<std::size_t>(min_size, 1)) continue;
    const auto sv = sbs_vbs(perf, problem_ids, subset);
    PowersetRow row;
    for (auto a : subset) row.algorithms.push_back(perf.algorithm_ids[a]);
    row.sbs_id = sv.sbs_id;
    row.sbs_mean = sv.sbs_mean;
    row.vbs_mean = sv.vbs_mean;
    row.gap = sv.gap();
    out.push_back(std::move(row));
  }
  return out;
}

struct ComplementarityFinding {
  std::string full_sbs;
  double full_gap = 0.0;
  bool exists = false;  // some subset without the full SBS has a strictly larger gap
  std::vector<std::string> best_subset;
  double best_gap = 0.0;
};

inline ComplementarityFinding larger_gap_without_sbs(const std::vector<PowersetRow>& rows, std::size_t num_algorithms) {
  ComplementarityFinding f;
  for (const auto& r : rows)
    if (r.algorithms.size() == num_algorithms) {
      f.full_sbs = r.sbs_id;
      f.full_gap = r.gap;
    }
  if (f.full_sbs.empty()) fail(ErrorKind::domain, "powerset rows do not contain the full portfolio");
  for (const auto& r : rows) {
    if (std::find(r.algorithms.begin(), r.algorithms.end(), f.full_sbs) != r.algorithms.end()) continue;
    if (r.gap > f.full_gap && (!f.exists || r.gap > f.best_gap)) {
      f.exists = true;
      f.best_gap = r.gap;
      f.best_subset = r.algorithms;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Selector models
// ---------------------------------------------------------------------------

struct SelectorHyperparameters {
  std::string kind = "gbdt";  // gbdt | forest
  ml::BoostingParams boosting;
  ml::ForestParams forest;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"kind", kind}, {"boosting", boosting.to_json()}, {"forest", forest.to_json()}, {"seed", seed}};
  }
};

struct SelectorModel {
  ml::Classifier classifier;
  std::vector<std::string> feature_names;
  std::string training_set;
  std::vector<int> training_ids;
  std::string catalog_version;
  nlohmann::json hyperparameters = nlohmann::json::object();
  bool constant = false;

  const std::string& predict(const std::vector<double>& features) const { return classifier.predict(features); }

  nlohmann::json to_json() const {
    return {{"format", "aaslab-selector"},
            {"version", 1},
            {"training_set", training_set},
            {"training_ids", training_ids},
            {"catalog_version", catalog_version},
            {"features", feature_names},
            {"hyperparameters", hyperparameters},
            {"constant", constant},
            {"classifier", classifier.to_json()}};
  }

  static SelectorModel from_json(const nlohmann::json& j) {
    SelectorModel m;
    try {
      if (j.at("format").get<std::string>() != "aaslab-selector" || j.at("version").get<int>() != 1)
        fail(ErrorKind::data, "unsupported model format");
      m.training_set = j.at("training_set").get<std::string>();
      m.training_ids = j.at("training_ids").get<std::vector<int>>();
      m.catalog_version = j.at("catalog_version").get<std::string>();
      m.feature_names = j.at("features").get<std::vector<std::string>>();
      m.hyperparameters = j.at("hyperparameters");
      m.constant = j.at("constant").get<bool>();
      m.classifier = ml::Classifier::from_json(j.at("classifier"));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::data, std::string("malformed selector model: ") + e.what());
    }
    return m;
  }
};

/// Normalized, pruned feature rows keyed by problem id, with their column names.
struct FeatureSpace {
  std::vector<std::string> names;
  FeatureTable rows;

  const std::vector<double>& row(int problem_id) const {
    auto it = rows.find(problem_id);
    if (it == rows.end()) fail(ErrorKind::data, "no features for problem " + std::to_string(problem_id));
    return it->second;
  }
};

inline SelectorModel train_selector(const LabeledDataset& data, const FeatureSpace& features,
                                    const SelectorHyperparameters& hp, const std::string& training_set = {},
                                    const std::string& catalog_version = {}) {
  if (data.rows.empty()) fail(ErrorKind::domain, "cannot train a selector on an empty dataset");
  ml::Dataset ds;
  std::set<std::string> present;
  for (const auto& r : data.rows) present.insert(r.label);
  for (const auto& a : data.algorithms)
    if (present.count(a)) ds.classes.push_back(a);
  SelectorModel model;
  for (const auto& r : data.rows) {
    const auto& x = features.row(r.problem_id);
    if (x.size() != features.names.size()) fail(ErrorKind::domain, "feature row does not match the catalog");
    ds.x.push_back(x);
    ds.y.push_back(static_cast<std::size_t>(std::find(ds.classes.begin(), ds.classes.end(), r.label) -
                                            ds.classes.begin()));
    model.training_ids.push_back(r.problem_id);
  }
  if (hp.kind == "gbdt") model.classifier = ml::train_gbdt(ds, hp.boosting);
  else if (hp.kind == "forest") model.classifier = ml::train_forest(ds, hp.forest, hp.seed);
  else fail(ErrorKind::config, "unknown selector kind '" + hp.kind + "'");
  model.feature_names = features.names;
  model.training_set = training_set;
  model.catalog_version = catalog_version;
  model.hyperparameters = hp.to_json();
  model.constant = model.classifier.kind == ml::ModelKind::constant;
  return model;
}

/// Algorithm choice per problem id.
using Selector = std::function<std::string(int)>;

inline Selector model_selector(const SelectorModel& model, const FeatureSpace& features) {
  if (model.feature_names != features.names)
    fail(ErrorKind::domain, "model feature catalog does not match the evaluation features");
  return [&model, &features](int pid) { return model.predict(features.row(pid)); };
}

inline Selector oracle_selector(const PerformanceTable& perf) {
  return [&perf](int pid) {
    return perf.algorithm_ids[argmax_index(perf, perf.problem_index(pid), all_algorithms(perf))];
  };
}

inline Selector constant_selector(std::string id) {
  return [id = std::move(id)](int) { return id; };
}

struct GapReport {
  std::string sbs_id;
  double sbs_mean = 0.0;
  double vbs_mean = 0.0;
  double selector_mean = 0.0;
  double gap = 0.0;
  std::optional<double> gap_closed_pct;  // empty for a zero-gap set
};

inline constexpr double kZeroGap = 1e-12;

/// Fraction of the VBS-SBS gap closed by the selector on `eval_ids`. SBS comes from
/// `sbs_ids` (the evaluation set itself unless another set is given).
inline GapReport gap_closed(const Selector& selector, const PerformanceTable& perf, const std::vector<int>& eval_ids,
                            const std::vector<int>& sbs_ids = {}) {
  if (eval_ids.empty()) fail(ErrorKind::domain, "gap closure over an empty set");
  const auto all = all_algorithms(perf);
  const auto sv = sbs_vbs(perf, eval_ids, all);
  GapReport r;
  r.sbs_id = sv.sbs_id;
  r.vbs_mean = sv.vbs_mean;
  r.sbs_mean = sv.sbs_mean;
  if (!sbs_ids.empty()) {
    r.sbs_id = sbs_vbs(perf, sbs_ids, all).sbs_id;
    double acc = 0.0;
    for (int pid : eval_ids) acc += perf.mean(pid, r.sbs_id);
    r.sbs_mean = acc / static_cast<double>(eval_ids.size());
  }
  double acc = 0.0;
  for (int pid : eval_ids) acc += perf.mean(pid, selector(pid));
  r.selector_mean = acc / static_cast<double>(eval_ids.size());
  r.gap = r.vbs_mean - r.sbs_mean;
  if (r.gap > kZeroGap) r.gap_closed_pct = 100.0 * (r.selector_mean - r.sbs_mean) / r.gap;
  return r;
}

struct SetInfo {
  std::string name;
  std::string strategy;
  std::size_t size = 0;
  std::size_t repetition = 0;
  std::vector<int> ids;
};

struct CrossCell {
  std::string model;
  std::string eval;
  GapReport report;
  bool diagonal = false;  // evaluation set equals the model's training set
};

struct CrossMatrix {
  std::vector<SetInfo> models;  // metadata of each model's training set
  std::vector<SetInfo> evals;   // eval sets followed by the per-model "unseen" column
  std::vector<std::vector<CrossCell>> cells;  // [model][eval]

  std::size_t unseen_column() const { return evals.size() - 1; }
};

inline bool same_ids(std::vector<int> a, std::vector<int> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

/// Gap closure of every model on every evaluation set plus the pool minus its own training ids.
inline CrossMatrix cross_evaluate(const std::vector<const SelectorModel*>& models, const std::vector<SetInfo>& model_sets,
                                  const std::vector<SetInfo>& eval_sets, const PerformanceTable& perf,
                                  const FeatureSpace& features, const std::vector<int>& pool, std::size_t jobs = 1,
                                  bool training_sbs = false) {
  if (models.size() != model_sets.size()) fail(ErrorKind::domain, "model metadata count mismatch");
  for (const auto* m : models)
    if (m->feature_names != models.front()->feature_names)
      fail(ErrorKind::domain, "models do not share a feature catalog");
  CrossMatrix out;
  out.models = model_sets;
  out.evals = eval_sets;
  out.evals.push_back({"unseen", "unseen", 0, 0, {}});
  out.cells.assign(models.size(), std::vector<CrossCell>(out.evals.size()));
  parallel_for(models.size(), jobs, [&](std::size_t mi) {
    const auto sel = model_selector(*models[mi], features);
    const std::set<int> train(model_sets[mi].ids.begin(), model_sets[mi].ids.end());
    std::vector<int> unseen;
    for (int id : pool)
      if (!train.count(id)) unseen.push_back(id);
    for (std::size_t e = 0; e < out.evals.size(); ++e) {
      const bool is_unseen = e == out.unseen_column();
      const auto& ids = is_unseen ? unseen : out.evals[e].ids;
      auto& cell = out.cells[mi][e];
      cell.model = model_sets[mi].name;
      cell.eval = out.evals[e].name;
      cell.diagonal = !is_unseen && same_ids(ids, model_sets[mi].ids);
      cell.report = gap_closed(sel, perf, ids, training_sbs ? model_sets[mi].ids : std::vector<int>{});
    }
  });
  return out;
}

inline io::CsvTable cross_matrix_csv(const CrossMatrix& m, const std::string& config_hash) {
  io::CsvTable t;
  t.config_hash = config_hash;
  t.header = {"model",       "train_strategy", "train_size", "train_repetition", "eval",       "eval_strategy",
              "eval_size",   "eval_repetition", "diagonal",  "sbs_id",           "sbs_mean",   "vbs_mean",
              "selector_mean", "gap_closed_pct"};
  for (std::size_t i = 0; i < m.models.size(); ++i)
    for (std::size_t e = 0; e < m.evals.size(); ++e) {
      const auto& c = m.cells[i][e];
      const auto& ms = m.models[i];
      const auto& es = m.evals[e];
      t.rows.push_back({ms.name, ms.strategy, std::to_string(ms.size), std::to_string(ms.repetition), es.name,
                        es.strategy, std::to_string(es.size), std::to_string(es.repetition), c.diagonal ? "1" : "0",
                        c.report.sbs_id, format_double(c.report.sbs_mean), format_double(c.report.vbs_mean),
                        format_double(c.report.selector_mean),
                        c.report.gap_closed_pct ? format_double(*c.report.gap_closed_pct) : ""});
    }
  return t;
}

struct AggregateCell {
  std::string train_strategy;
  std::size_t train_size = 0;
  std::string eval_strategy;
  std::size_t eval_size = 0;
  double mean_gap_closed_pct = 0.0;
  std::size_t cells = 0;
};

/// Mean gap closure per (train strategy, size) x (eval strategy, size); diagonal
/// and zero-gap cells are left out.
inline std::vector<AggregateCell> aggregate_by_strategy_size(const CrossMatrix& m) {
  std::map<std::tuple<std::string, std::size_t, std::string, std::size_t>, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < m.models.size(); ++i)
    for (std::size_t e = 0; e < m.evals.size(); ++e) {
      const auto& c = m.cells[i][e];
      if (c.diagonal || !c.report.gap_closed_pct) continue;
      auto& slot = acc[{m.models[i].strategy, m.models[i].size, m.evals[e].strategy, m.evals[e].size}];
      slot.first += *c.report.gap_closed_pct;
      slot.second += 1;
    }
  std::vector<AggregateCell> out;
  for (const auto& [k, v] : acc)
    out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k),
                   v.first / static_cast<double>(v.second), v.second});
  return out;
}

inline io::CsvTable aggregate_csv(const std::vector<AggregateCell>& cells, const std::string& config_hash) {
  io::CsvTable t;
  t.config_hash = config_hash;
  t.header = {"train_strategy", "train_size", "eval_strategy", "eval_size", "mean_gap_closed_pct", "cells"};
  for (const auto& c : cells)
    t.rows.push_back({c.train_strategy, std::to_string(c.train_size), c.eval_strategy, std::to_string(c.eval_size),
                      format_double(c.mean_gap_closed_pct), std::to_string(c.cells)});
  return t;
}

// ---------------------------------------------------------------------------
// PCA projection
// ---------------------------------------------------------------------------

struct Projection {
  Eigen::VectorXd center;
  Eigen::MatrixXd axes;  // features x available components (<= requested)
  Eigen::VectorXd explained_variance;

  Eigen::VectorXd project(const std::vector<double>& x, std::size_t components) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = std::isnan(x[i]) ? 0.5 : x[i];
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(components));
    const Eigen::VectorXd c = v - center;
    for (Eigen::Index k = 0; k < axes.cols(); ++k) out(k) = axes.col(k).dot(c);
    return out;
  }
};

/// Principal axes of the reference rows; zero-variance directions are dropped.
inline Projection fit_pca(const std::vector<std::vector<double>>& reference, std::size_t components = 2) {
  if (reference.size() < 3) fail(ErrorKind::domain, "PCA reference needs at least 3 vectors");
  const auto n = static_cast<Eigen::Index>(reference.size());
  const auto f = static_cast<Eigen::Index>(reference.front().size());
  Eigen::MatrixXd x(n, f);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(reference[static_cast<std::size_t>(i)].size()) != f)
      fail(ErrorKind::domain, "PCA reference rows differ in length");
    for (Eigen::Index j = 0; j < f; ++j) {
      const double v = reference[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      x(i, j) = std::isnan(v) ? 0.5 : v;
    }
  }
  Projection p;
  p.center = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - p.center.transpose();
  const Eigen::MatrixXd cov = (c.transpose() * c) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double top = ev.size() ? std::max(ev(ev.size() - 1), 0.0) : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = ev.size() - 1; k >= 0 && keep.size() < components; --k)
    if (ev(k) > 1e-12 * std::max(1.0, top)) keep.push_back(k);
  p.axes.resize(f, static_cast<Eigen::Index>(keep.size()));
  p.explained_variance.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    Eigen::VectorXd a = es.eigenvectors().col(keep[k]);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < f; ++j)
      if (std::abs(a(j)) > std::abs(a(arg)) + 1e-12) arg = j;
    if (a(arg) < 0.0) a = -a;
    p.axes.col(static_cast<Eigen::Index>(k)) = a;
    p.explained_variance(static_cast<Eigen::Index>(k)) = ev(keep[k]);
  }
  return p;
}

/// 2-d coordinates of `all` on the principal axes fitted to `reference`.
inline std::vector<std::array<double, 2>> pca_project(const std::vector<std::vector<double>>& reference,
                                                      const std::vector<std::vector<double>>& all) {
  const auto p = fit_pca(reference, 2);
  std::vector<std::array<double, 2>> out;
  out.reserve(all.size());
  for (const auto& x : all) {
    const auto v = p.project(x, 2);
    out.push_back({v(0), v(1)});
  }
  return out;
}

}  // namespace aaslab::aas
