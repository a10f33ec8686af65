#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aaslab/aas.hpp"
#include "aaslab/common.hpp"
#include "aaslab/config.hpp"
#include "aaslab/ela.hpp"
#include "aaslab/generator.hpp"
#include "aaslab/io.hpp"
#include "aaslab/portfolio.hpp"
#include "aaslab/sampling.hpp"
#include "aaslab/selection.hpp"
#include "aaslab/svg.hpp"

// Experiment stages: generate -> features -> run -> select -> train -> evaluate -> report.
// Every stage reads its inputs from the output directory and checks their config hashes.
namespace aaslab::pipeline {

struct Context {
  ExperimentConfig config;
  StageHashes hashes;
  std::string out;
  std::size_t jobs = 1;
  bool resume = false;
  std::ostream* log = nullptr;

  Context(ExperimentConfig cfg, std::size_t jobs_, bool resume_ = false, std::ostream* log_ = nullptr)
      : config(std::move(cfg)), hashes(stage_hashes(config)), out(config.output_dir), jobs(jobs_), resume(resume_),
        log(log_) {}

  std::string path(const std::string& name) const { return (std::filesystem::path(out) / name).string(); }

  void note(const std::string& msg) const {
    if (log) *log << "[aaslab] " << msg << "\n" << std::flush;
  }
};

namespace files {
inline constexpr const char* suite = "suite.json";
inline constexpr const char* scale_factors = "scale_factors.json";
inline constexpr const char* features = "features.csv";
inline constexpr const char* features_normalized = "features_normalized.csv";
inline constexpr const char* retained = "retained_features.json";
inline constexpr const char* normalization = "normalization.json";
inline constexpr const char* performance = "performance.csv";
inline constexpr const char* checkpoint = "performance.checkpoint";
inline constexpr const char* sets_index = "sets/index.json";
inline constexpr const char* table1 = "table1.csv";
inline constexpr const char* cross = "cross_evaluation.csv";
inline constexpr const char* aggregate = "aggregate.csv";
inline constexpr const char* powerset = "powerset.csv";
inline constexpr const char* complementarity = "complementarity.csv";
inline constexpr const char* labels = "label_counts.csv";
inline constexpr const char* sbs_scatter = "sbs_vs_algorithms.csv";
inline constexpr const char* pca = "pca.csv";
inline constexpr const char* headline = "headline.csv";
inline constexpr const char* summary = "summary.json";
}  // namespace files

// ---------------------------------------------------------------------------
// Shared loaders
// ---------------------------------------------------------------------------

inline Suite load_suite(const Context& ctx) {
  const auto path = ctx.path(files::suite);
  if (!io::exists(path)) fail(ErrorKind::data, "missing " + path + "; run 'generate' first");
  return suite_from_manifest(io::read_json(path, ctx.hashes.generate));
}

inline std::shared_ptr<ComponentFactory> load_factory(const Context& ctx) {
  auto cache = std::make_shared<ScaleFactorCache>();
  const auto path = ctx.path(files::scale_factors);
  if (io::exists(path)) cache->merge_json(io::read_json(path, ctx.hashes.generate).at("values"));
  return std::make_shared<ComponentFactory>(ctx.config.master_seed, ctx.config.generator.instance_pool_size, cache);
}

inline std::vector<int> generated_ids(const Suite& suite) {
  std::vector<int> ids;
  for (const auto& p : suite.problems) ids.push_back(p.problem_id);
  return ids;
}

inline aas::FeatureSpace load_feature_space(const Context& ctx) {
  const auto path = ctx.path(files::features_normalized);
  if (!io::exists(path)) fail(ErrorKind::data, "missing " + path + "; run 'features' first");
  const auto t = io::read_csv(path, ctx.hashes.features);
  aas::FeatureSpace fs;
  fs.names.assign(t.header.begin() + 2, t.header.end());
  for (const auto& r : t.rows) {
    std::vector<double> v;
    for (std::size_t j = 2; j < r.size(); ++j) v.push_back(r[j].empty() ? ela::kNaN : parse_double(r[j]));
    fs.rows[static_cast<int>(parse_int(r[0]))] = std::move(v);
  }
  return fs;
}

inline PerformanceTable load_performance(const Context& ctx) {
  const auto path = ctx.path(files::performance);
  if (!io::exists(path)) fail(ErrorKind::data, "missing " + path + "; run 'run' first");
  return PerformanceTable::from_csv(io::read_csv(path, ctx.hashes.run), ctx.config.dim);
}

inline std::vector<InstanceSet> load_sets(const Context& ctx) {
  const auto path = ctx.path(files::sets_index);
  if (!io::exists(path)) fail(ErrorKind::data, "missing " + path + "; run 'select' first");
  const auto index = io::read_json(path, ctx.hashes.select);
  std::vector<InstanceSet> sets;
  for (const auto& name : index.at("sets"))
    sets.push_back(InstanceSet::from_json(io::read_json(ctx.path("sets/" + name.get<std::string>() + ".json"),
                                                        ctx.hashes.select)));
  return sets;
}

inline aas::SetInfo set_info(const InstanceSet& s) {
  return {s.name(), to_string(s.strategy), s.size, s.repetition, s.ids};
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline Suite cmd_generate(const Context& ctx) {
  io::ensure_dir(ctx.out);
  const auto& cfg = ctx.config;
  auto suite = generate_suite(cfg.generator);
  ctx.note("generated " + std::to_string(suite.problems.size()) + " problems and " +
           std::to_string(suite.component_problems.size()) + " component problems in d=" + std::to_string(cfg.dim));

  std::set<std::pair<int, int>> keys;
  for (const auto& p : suite.pool())
    for (const auto& a : p.active) keys.insert({a.component_id, a.instance_id});
  const std::vector<std::pair<int, int>> todo(keys.begin(), keys.end());
  std::vector<double> values(todo.size());
  parallel_for(todo.size(), ctx.jobs, [&](std::size_t i) {
    const auto ci = make_component_instance(todo[i].first, todo[i].second, cfg.dim, cfg.master_seed,
                                            cfg.generator.instance_pool_size);
    values[i] = estimate_scale_factor(ci, 500 * cfg.dim);
  });
  nlohmann::json sf = nlohmann::json::object();
  for (std::size_t i = 0; i < todo.size(); ++i)
    sf[ComponentInstance::scale_key(todo[i].first, todo[i].second, cfg.dim)] = values[i];
  io::write_json(ctx.path(files::suite), suite_manifest(suite, cfg.generator), ctx.hashes.generate);
  io::write_json(ctx.path(files::scale_factors), {{"d", cfg.dim}, {"values", sf}}, ctx.hashes.generate);
  ctx.note("cached " + std::to_string(todo.size()) + " scale factors");
  return suite;
}

struct FeatureStageResult {
  std::vector<std::string> retained;
  ela::NormalizationBounds bounds;
  std::size_t rows = 0;
};

inline FeatureStageResult cmd_features(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto suite = load_suite(ctx);
  auto factory = load_factory(ctx);
  const auto pool = suite.pool();
  const std::size_t d = cfg.dim;
  const auto base = SampleDesign::box(cfg.ela.sample_factor * d, d, kDomainLo, kDomainHi);
  const auto designs = repeat_designs(base, cfg.ela.repetitions, derive_seed(cfg.master_seed, "ela-designs"));
  std::vector<PointMatrix> samples;
  for (const auto& des : designs) samples.push_back(sobol_points(des));

  std::vector<std::vector<ela::FeatureVector>> reps(pool.size());
  std::vector<ela::FeatureVector> avg(pool.size());
  std::atomic<std::size_t> done{0};
  parallel_for(pool.size(), ctx.jobs, [&](std::size_t i) {
    const auto problem = bind_problem(pool[i], *factory);
    std::vector<double> y(base.n);
    for (const auto& pts : samples) {
      for (Eigen::Index r = 0; r < pts.rows(); ++r) y[static_cast<std::size_t>(r)] = problem(row_span(pts, r));
      reps[i].push_back(ela::compute_features(pts, y, pool[i].problem_id));
    }
    avg[i] = ela::average_feature_repetitions(reps[i]);
    const auto n = ++done;
    if (n % std::max<std::size_t>(1, pool.size() / 10) == 0)
      ctx.note("features: " + std::to_string(n) + "/" + std::to_string(pool.size()));
  });

  const auto& names = ela::catalog().names;
  io::CsvTable raw;
  raw.config_hash = ctx.hashes.features;
  raw.header = {"problem_id", "repetition"};
  raw.header.insert(raw.header.end(), names.begin(), names.end());
  auto emit = [&](const ela::FeatureVector& fv, const std::string& rep) {
    std::vector<std::string> row = {std::to_string(fv.problem_id), rep};
    for (std::size_t j = 0; j < fv.size(); ++j) row.push_back(fv.feasible[j] ? format_double(fv.values[j]) : "");
    raw.rows.push_back(std::move(row));
  };
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t r = 0; r < reps[i].size(); ++r) emit(reps[i][r], std::to_string(r + 1));
    emit(avg[i], "avg");
  }
  io::write_csv(ctx.path(files::features), raw);

  const auto matrix = ela::FeatureMatrix::from_vectors(avg);
  FeatureStageResult res;
  res.retained = ela::prune_features(matrix, cfg.ela.prune_threshold);
  std::vector<std::string> dropped;
  for (const auto& n : names)
    if (std::find(res.retained.begin(), res.retained.end(), n) == res.retained.end()) dropped.push_back(n);
  io::write_json(ctx.path(files::retained),
                 {{"catalog_version", ela::catalog().version},
                  {"threshold", cfg.ela.prune_threshold},
                  {"retained", res.retained},
                  {"dropped", dropped}},
                 ctx.hashes.features);

  std::vector<ela::FeatureVector> kept;
  for (const auto& fv : avg) kept.push_back(fv.subset(res.retained));
  res.bounds = ela::fit_minmax(ela::FeatureMatrix::from_vectors(kept), d, "generated+component");
  io::write_json(ctx.path(files::normalization), res.bounds.to_json(), ctx.hashes.features);

  io::CsvTable norm;
  norm.config_hash = ctx.hashes.features;
  norm.header = {"problem_id", "source"};
  norm.header.insert(norm.header.end(), res.retained.begin(), res.retained.end());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto nv = ela::apply_minmax(avg[i], res.bounds);
    std::vector<std::string> row = {std::to_string(pool[i].problem_id),
                                    pool[i].source == ProblemSource::generated ? "generated" : "component"};
    for (std::size_t j = 0; j < nv.size(); ++j) row.push_back(nv.feasible[j] ? format_double(nv.values[j]) : "");
    norm.rows.push_back(std::move(row));
  }
  io::write_csv(ctx.path(files::features_normalized), norm);
  res.rows = pool.size();
  ctx.note("retained " + std::to_string(res.retained.size()) + " of " + std::to_string(names.size()) + " features");
  return res;
}

inline PerformanceTable cmd_run(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto suite = load_suite(ctx);
  auto factory = load_factory(ctx);
  const auto pool = suite.pool();
  std::vector<Problem> bound;
  bound.reserve(pool.size());
  for (const auto& p : pool) bound.push_back(bind_problem(p, *factory));
  std::vector<PortfolioProblem> problems;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Problem* prob = &bound[i];
    problems.push_back({pool[i].problem_id, cfg.dim,
                        pool[i].source == ProblemSource::component ? cfg.portfolio.component_runs : cfg.portfolio.runs,
                        [prob](std::span<const double> x) { return (*prob)(x); }});
  }
  PortfolioOptions opt;
  opt.budget_factor = cfg.portfolio.budget_factor;
  opt.master_seed = cfg.master_seed;
  opt.jobs = ctx.jobs;
  opt.checkpoint_path = ctx.path(files::checkpoint);
  opt.config_hash = ctx.hashes.run;
  opt.progress = [&](std::size_t done, std::size_t total) {
    if (done % std::max<std::size_t>(1, total / 10) == 0)
      ctx.note("run: " + std::to_string(done) + "/" + std::to_string(total) + " cells");
  };
  if (!ctx.resume && io::exists(opt.checkpoint_path)) std::filesystem::remove(opt.checkpoint_path);
  auto table = run_portfolio(problems, cfg.portfolio.algorithms, opt);
  io::write_csv(ctx.path(files::performance), table.to_csv(ctx.hashes.run));
  return table;
}

inline std::vector<InstanceSet> cmd_select(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto suite = load_suite(ctx);
  const auto fs = load_feature_space(ctx);
  const auto pool = generated_ids(suite);
  io::ensure_dir(ctx.path("sets"));

  std::vector<InstanceSet> sets;
  for (auto strategy : cfg.selection.strategies) {
    auto s = plan_sets(cfg.selection, strategy, pool, fs.rows, derive_seed(cfg.master_seed, "selection"), cfg.dim);
    sets.insert(sets.end(), s.begin(), s.end());
  }
  std::map<int, std::pair<int, int>> keys;
  for (const auto& p : suite.component_problems) keys[p.problem_id] = {p.active[0].component_id, p.active[0].instance_id};
  for (int c : cfg.selection.component_instances) {
    auto s = select_components(keys, registry_size(), c);
    s.repetition = static_cast<std::size_t>(c);
    s.dim = cfg.dim;
    sets.push_back(std::move(s));
  }

  nlohmann::json names = nlohmann::json::array();
  for (const auto& s : sets) {
    io::write_json(ctx.path("sets/" + s.name() + ".json"), s.to_json(), ctx.hashes.select);
    names.push_back(s.name());
  }
  io::write_json(ctx.path(files::sets_index), {{"sets", names}}, ctx.hashes.select);

  io::CsvTable t1;
  t1.config_hash = ctx.hashes.select;
  t1.header = {"strategy", "size", "repetition", "avg_pairwise_manhattan"};
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> by_group;
  for (const auto& s : sets) {
    const double v = avg_pairwise_manhattan(s.ids, fs.rows);
    by_group[{to_string(s.strategy), s.size}].push_back(v);
    t1.rows.push_back({to_string(s.strategy), std::to_string(s.size), std::to_string(s.repetition), format_double(v)});
  }
  for (const auto& [k, v] : by_group) t1.rows.push_back({k.first, std::to_string(k.second), "mean", format_double(mean(v))});
  io::write_csv(ctx.path(files::table1), t1);
  ctx.note("selected " + std::to_string(sets.size()) + " instance sets");
  return sets;
}

inline std::vector<aas::SelectorModel> cmd_train(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto sets = load_sets(ctx);
  const auto perf = load_performance(ctx);
  const auto fs = load_feature_space(ctx);
  io::ensure_dir(ctx.path("models"));
  std::vector<aas::SelectorModel> models(sets.size());
  parallel_for(sets.size(), ctx.jobs, [&](std::size_t i) {
    const auto data = aas::label_instances(perf, perf.algorithm_ids, sets[i].ids);
    models[i] = aas::train_selector(data, fs, cfg.selector, sets[i].name(), ela::catalog().version);
  });
  for (std::size_t i = 0; i < sets.size(); ++i)
    io::write_json(ctx.path("models/" + sets[i].name() + ".json"), models[i].to_json(), ctx.hashes.train);
  ctx.note("trained " + std::to_string(models.size()) + " selectors");
  return models;
}

inline std::vector<aas::SelectorModel> load_models(const Context& ctx, const std::vector<InstanceSet>& sets) {
  std::vector<aas::SelectorModel> models;
  for (const auto& s : sets) {
    const auto path = ctx.path("models/" + s.name() + ".json");
    if (!io::exists(path)) fail(ErrorKind::data, "missing " + path + "; run 'train' first");
    models.push_back(aas::SelectorModel::from_json(io::read_json(path, ctx.hashes.train)));
  }
  return models;
}

/// Cross matrix of the trained models plus oracle and SBS-constant baseline rows.
inline aas::CrossMatrix cmd_evaluate(const Context& ctx) {
  const auto suite = load_suite(ctx);
  const auto sets = load_sets(ctx);
  const auto perf = load_performance(ctx);
  const auto fs = load_feature_space(ctx);
  const auto models = load_models(ctx, sets);
  std::vector<const aas::SelectorModel*> ptrs;
  std::vector<aas::SetInfo> infos;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    ptrs.push_back(&models[i]);
    infos.push_back(set_info(sets[i]));
  }
  const auto pool = generated_ids(suite);
  auto m = aas::cross_evaluate(ptrs, infos, infos, perf, fs, pool, ctx.jobs, ctx.config.training_set_sbs);

  // baselines: oracle and the evaluation set's own SBS
  for (const std::string kind : {"oracle", "sbs"}) {
    m.models.push_back({kind, "baseline", 0, 0, {}});
    std::vector<aas::CrossCell> row;
    for (std::size_t e = 0; e < m.evals.size(); ++e) {
      const auto& ids = e == m.unseen_column() ? pool : m.evals[e].ids;
      aas::Selector sel = kind == "oracle" ? aas::oracle_selector(perf)
                                           : aas::constant_selector(aas::sbs(perf, ids, perf.algorithm_ids));
      row.push_back({kind, m.evals[e].name, aas::gap_closed(sel, perf, ids), false});
    }
    m.cells.push_back(std::move(row));
  }
  io::write_csv(ctx.path(files::cross), aas::cross_matrix_csv(m, ctx.hashes.evaluate));
  io::write_csv(ctx.path(files::aggregate), aas::aggregate_csv(aas::aggregate_by_strategy_size(m), ctx.hashes.evaluate));
  ctx.note("evaluated " + std::to_string(models.size()) + " selectors on " + std::to_string(m.evals.size()) +
           " evaluation sets");
  return m;
}

struct HeadlineRow {
  std::size_t size = 0;
  std::string strategy;
  std::optional<double> unseen_mean;
  std::optional<double> component_unseen_mean;
  bool holds = false;
};

struct ReportSummary {
  aas::ComplementarityFinding complementarity;
  std::vector<HeadlineRow> headline;
  std::size_t powerset_rows = 0;
  bool powerset_monotone = true;
};

inline std::optional<double> aggregate_value(const std::vector<aas::AggregateCell>& agg, const std::string& strategy,
                                             std::size_t size, const std::string& eval_strategy) {
  for (const auto& c : agg)
    if (c.train_strategy == strategy && c.train_size == size && c.eval_strategy == eval_strategy)
      return c.mean_gap_closed_pct;
  return std::nullopt;
}

inline ReportSummary cmd_report(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto suite = load_suite(ctx);
  const auto perf = load_performance(ctx);
  const auto fs = load_feature_space(ctx);
  const auto pool = generated_ids(suite);
  const auto& hash = ctx.hashes.evaluate;
  io::ensure_dir(ctx.path("plots"));
  ReportSummary summary;

  // portfolio complementarity over every subset of >= 3 algorithms
  const auto rows = aas::portfolio_powerset_gaps(perf, pool, 3);
  io::CsvTable ps;
  ps.config_hash = hash;
  ps.header = {"subset", "size", "sbs_id", "sbs_mean", "vbs_mean", "gap"};
  std::vector<svg::Point> dots;
  for (const auto& r : rows) {
    ps.rows.push_back({io::join(r.algorithms, '+'), std::to_string(r.algorithms.size()), r.sbs_id,
                       format_double(r.sbs_mean), format_double(r.vbs_mean), format_double(r.gap)});
    dots.push_back({static_cast<double>(r.algorithms.size()), r.gap, "SBS " + r.sbs_id});
  }
  io::write_csv(ctx.path(files::powerset), ps);
  summary.powerset_rows = rows.size();
  for (const auto& big : rows)
    for (const auto& small : rows) {
      if (small.algorithms.size() + 1 != big.algorithms.size()) continue;
      if (!std::includes(big.algorithms.begin(), big.algorithms.end(), small.algorithms.begin(),
                         small.algorithms.end(), [&](const std::string& a, const std::string& b) {
                           return perf.algorithm_index(a) < perf.algorithm_index(b);
                         }))
        continue;
      if (std::find(small.algorithms.begin(), small.algorithms.end(), big.sbs_id) == small.algorithms.end()) continue;
      if (small.gap > big.gap) summary.powerset_monotone = false;
    }
  summary.complementarity = aas::larger_gap_without_sbs(rows, perf.algorithm_ids.size());
  const auto& cf = summary.complementarity;
  io::CsvTable comp;
  comp.config_hash = hash;
  comp.header = {"full_sbs", "full_gap", "larger_gap_without_sbs_exists", "best_subset", "best_gap"};
  comp.rows.push_back({cf.full_sbs, format_double(cf.full_gap), cf.exists ? "1" : "0",
                       cf.exists ? io::join(cf.best_subset, '+') : "", cf.exists ? format_double(cf.best_gap) : ""});
  io::write_csv(ctx.path(files::complementarity), comp);
  write_file(ctx.path("plots/powerset_gaps.svg"),
             svg::scatter(dots, {"VBS-SBS gap per sub-portfolio", "portfolio size", "VBS-SBS gap (AOCC)"}));

  // best-algorithm counts and SBS-vs-algorithm scatter
  const auto labels = aas::label_instances(perf, perf.algorithm_ids, pool);
  std::map<std::string, std::size_t> counts;
  for (const auto& r : labels.rows) ++counts[r.label];
  io::CsvTable lc;
  lc.config_hash = hash;
  lc.header = {"algorithm_id", "best_on", "mean_aocc"};
  for (const auto& a : perf.algorithm_ids) {
    double acc = 0.0;
    for (int pid : pool) acc += perf.mean(pid, a);
    lc.rows.push_back({a, std::to_string(counts[a]), format_double(acc / static_cast<double>(pool.size()))});
  }
  io::write_csv(ctx.path(files::labels), lc);
  const auto sbs_id = aas::sbs(perf, pool, perf.algorithm_ids);
  io::CsvTable sc;
  sc.config_hash = hash;
  sc.header = {"problem_id", "algorithm_id", "sbs_id", "sbs_aocc", "algorithm_aocc"};
  std::vector<svg::Point> sp;
  for (int pid : pool)
    for (const auto& a : perf.algorithm_ids) {
      if (a == sbs_id) continue;
      sc.rows.push_back({std::to_string(pid), a, sbs_id, format_double(perf.mean(pid, sbs_id)),
                         format_double(perf.mean(pid, a))});
      sp.push_back({perf.mean(pid, sbs_id), perf.mean(pid, a), a});
    }
  io::write_csv(ctx.path(files::sbs_scatter), sc);
  svg::ScatterOptions so{"AOCC of each algorithm against the SBS (" + sbs_id + ")", "SBS AOCC", "algorithm AOCC"};
  so.diagonal = true;
  write_file(ctx.path("plots/sbs_vs_algorithms.svg"), svg::scatter(sp, so));

  // PCA fitted on the component problems
  std::vector<std::vector<double>> reference, all;
  std::vector<std::pair<int, std::string>> who;
  for (const auto& p : suite.component_problems) reference.push_back(fs.row(p.problem_id));
  for (const auto& p : suite.pool()) {
    all.push_back(fs.row(p.problem_id));
    who.push_back({p.problem_id, p.source == ProblemSource::generated ? "generated" : "component"});
  }
  const auto coords = aas::pca_project(reference, all);
  io::CsvTable pc;
  pc.config_hash = hash;
  pc.header = {"problem_id", "source", "pc1", "pc2"};
  std::vector<svg::Point> pp;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    pc.rows.push_back({std::to_string(who[i].first), who[i].second, format_double(coords[i][0]),
                       format_double(coords[i][1])});
    pp.push_back({coords[i][0], coords[i][1], who[i].second});
  }
  io::write_csv(ctx.path(files::pca), pc);
  write_file(ctx.path("plots/pca.svg"), svg::scatter(pp, {"Feature space projection (axes fitted on component problems)",
                                                          "PC1", "PC2"}));

  // gap-closed heatmaps
  const auto cross = io::read_csv(ctx.path(files::cross), hash);
  std::vector<std::string> mrows, ecols;
  std::map<std::pair<std::string, std::string>, std::optional<double>> cell;
  for (const auto& r : cross.rows) {
    const auto& model = r[cross.column("model")];
    const auto& eval = r[cross.column("eval")];
    if (std::find(mrows.begin(), mrows.end(), model) == mrows.end()) mrows.push_back(model);
    if (std::find(ecols.begin(), ecols.end(), eval) == ecols.end()) ecols.push_back(eval);
    const auto& v = r[cross.column("gap_closed_pct")];
    cell[{model, eval}] = v.empty() ? std::nullopt : std::optional<double>(parse_double(v));
  }
  std::vector<std::vector<std::optional<double>>> grid(mrows.size(), std::vector<std::optional<double>>(ecols.size()));
  for (std::size_t i = 0; i < mrows.size(); ++i)
    for (std::size_t j = 0; j < ecols.size(); ++j) grid[i][j] = cell[{mrows[i], ecols[j]}];
  write_file(ctx.path("plots/cross_evaluation.svg"),
             svg::heatmap(mrows, ecols, grid, {"% of VBS-SBS gap closed (row: training set, column: evaluation set)"}));

  const auto aggt = io::read_csv(ctx.path(files::aggregate), hash);
  std::vector<aas::AggregateCell> agg;
  for (const auto& r : aggt.rows)
    agg.push_back({r[0], static_cast<std::size_t>(parse_int(r[1])), r[2], static_cast<std::size_t>(parse_int(r[3])),
                   parse_double(r[4]), static_cast<std::size_t>(parse_int(r[5]))});
  std::vector<std::string> arows, acols;
  auto label = [](const std::string& s, std::size_t n) { return n ? s + " " + std::to_string(n) : s; };
  for (const auto& c : agg) {
    const auto r = label(c.train_strategy, c.train_size), col = label(c.eval_strategy, c.eval_size);
    if (std::find(arows.begin(), arows.end(), r) == arows.end()) arows.push_back(r);
    if (std::find(acols.begin(), acols.end(), col) == acols.end()) acols.push_back(col);
  }
  std::vector<std::vector<std::optional<double>>> ag(arows.size(), std::vector<std::optional<double>>(acols.size()));
  for (const auto& c : agg) {
    const auto r = std::find(arows.begin(), arows.end(), label(c.train_strategy, c.train_size)) - arows.begin();
    const auto col = std::find(acols.begin(), acols.end(), label(c.eval_strategy, c.eval_size)) - acols.begin();
    ag[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] = c.mean_gap_closed_pct;
  }
  write_file(ctx.path("plots/aggregate.svg"),
             svg::heatmap(arows, acols, ag, {"Mean % of gap closed by training strategy and size"}));

  // headline comparison on the unseen pool at the component-set sizes
  io::CsvTable hl;
  hl.config_hash = hash;
  hl.header = {"train_size", "strategy", "unseen_mean_gap_closed_pct", "components_unseen_mean_gap_closed_pct",
               "at_least_components"};
  for (int c : cfg.selection.component_instances) {
    const std::size_t s = registry_size() * static_cast<std::size_t>(c);
    const auto comp_v = aggregate_value(agg, "components", s, "unseen");
    for (auto strategy : cfg.selection.strategies) {
      HeadlineRow row;
      row.size = s;
      row.strategy = to_string(strategy);
      row.unseen_mean = aggregate_value(agg, row.strategy, s, "unseen");
      row.component_unseen_mean = comp_v;
      row.holds = row.unseen_mean && comp_v && *row.unseen_mean >= *comp_v;
      hl.rows.push_back({std::to_string(s), row.strategy, row.unseen_mean ? format_double(*row.unseen_mean) : "",
                         comp_v ? format_double(*comp_v) : "", row.holds ? "1" : "0"});
      summary.headline.push_back(row);
    }
  }
  io::write_csv(ctx.path(files::headline), hl);

  nlohmann::json sj = {
      {"sbs", sbs_id},
      {"powerset_rows", summary.powerset_rows},
      {"powerset_monotone_under_non_sbs_removal", summary.powerset_monotone},
      {"larger_gap_without_sbs", cf.exists},
      {"full_portfolio_gap", cf.full_gap},
  };
  if (cf.exists) sj["larger_gap_subset"] = cf.best_subset;
  io::write_json(ctx.path(files::summary), sj, hash);
  ctx.note("report written to " + ctx.out);
  return summary;
}

/// Every stage in order.
inline void run_all(const Context& ctx) {
  cmd_generate(ctx);
  cmd_features(ctx);
  cmd_run(ctx);
  cmd_select(ctx);
  cmd_train(ctx);
  cmd_evaluate(ctx);
  cmd_report(ctx);
}

}  // namespace aaslab::pipeline
