#include <gtest/gtest.h>

#include <cmath>

#include "aaslab/aas.hpp"

using namespace aaslab;
using namespace aaslab::aas;

namespace {

// rows[p][a] = mean AOCC of algorithm a on problem p+1
PerformanceTable table(const std::vector<std::string>& algs, const std::vector<std::vector<double>>& rows) {
  PerformanceTable t;
  t.dim = 2;
  t.algorithm_ids = algs;
  for (std::size_t p = 0; p < rows.size(); ++p) {
    t.problem_ids.push_back(static_cast<int>(p + 1));
    std::vector<PerformanceCell> r;
    for (double v : rows[p]) r.push_back({1, 100, v, {v}});
    t.cells.push_back(std::move(r));
  }
  return t;
}

PerformanceTable random_table(std::size_t problems, std::size_t algs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> ids;
  for (std::size_t a = 0; a < algs; ++a) ids.push_back("A" + std::to_string(a));
  std::vector<std::vector<double>> rows(problems, std::vector<double>(algs));
  for (auto& r : rows)
    for (auto& v : r) v = uniform_open01(rng);
  return table(ids, rows);
}

std::vector<int> ids_upto(int n) {
  std::vector<int> out;
  for (int i = 1; i <= n; ++i) out.push_back(i);
  return out;
}

const PowersetRow* find_row(const std::vector<PowersetRow>& rows, const std::vector<std::string>& algs) {
  for (const auto& r : rows)
    if (r.algorithms == algs) return &r;
  return nullptr;
}

}  // namespace

TEST(Labels, ArgmaxAndTies) {
  const auto t = table({"1", "2"}, {{0.2, 0.9}, {0.5, 0.5}});
  const auto d = label_instances(t, {"1", "2"}, {1, 2});
  EXPECT_EQ(d.rows[0].label, "2");
  EXPECT_EQ(d.rows[1].label, "1");
  EXPECT_EQ(d.rows[0].aocc, (std::vector<double>{0.2, 0.9}));
  for (const auto& r : label_instances(t, {"2"}, {1, 2}).rows) EXPECT_EQ(r.label, "2");
  try {
    label_instances(t, {}, {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

TEST(Labels, StrictlyDominatedAlgorithmChangesNothing) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto base = random_table(30, 4, derive_seed(2, "labels", trial));
    std::vector<std::vector<double>> rows;
    for (int pid : base.problem_ids) {
      auto r = base.row(pid);
      const double top = *std::max_element(r.begin(), r.end());
      r.push_back(top * uniform(rng, 0.0, 0.99));
      rows.push_back(r);
    }
    auto algs = base.algorithm_ids;
    algs.push_back("D");
    const auto extended = table(algs, rows);
    const auto a = label_instances(base, base.algorithm_ids, base.problem_ids);
    const auto b = label_instances(extended, algs, base.problem_ids);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].label, b.rows[i].label);
  }
}

TEST(Baselines, HandExample) {
  const auto t = table({"A", "B"}, {{0.9, 0.5}, {0.1, 0.6}});
  EXPECT_EQ(sbs(t, {1, 2}, {"A", "B"}), "B");
  EXPECT_DOUBLE_EQ(vbs_mean(t, {1, 2}, {"A", "B"}), 0.75);
  const auto sv = sbs_vbs(t, {1, 2}, all_algorithms(t));
  EXPECT_DOUBLE_EQ(sv.sbs_mean, 0.55);
  EXPECT_NEAR(sv.gap(), 0.2, 1e-15);
}

TEST(Baselines, DegenerateCases) {
  const auto same = table({"A", "B"}, {{0.3, 0.3}, {0.7, 0.7}});
  EXPECT_EQ(sbs_vbs(same, {1, 2}, all_algorithms(same)).gap(), 0.0);
  const auto one = table({"A", "B", "C"}, {{0.2, 0.8, 0.4}});
  const auto sv = sbs_vbs(one, {1}, all_algorithms(one));
  EXPECT_EQ(sv.sbs_id, "B");
  EXPECT_EQ(sv.vbs_mean, 0.8);
  EXPECT_EQ(sv.gap(), 0.0);
  try {
    sbs(one, {}, {"A"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

TEST(Baselines, OrderingInvariant) {
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_table(12, 5, derive_seed(3, "order", trial));
    const auto ids = ids_upto(12);
    const auto sv = sbs_vbs(t, ids, all_algorithms(t));
    double worst = 1.0;
    for (const auto& a : t.algorithm_ids) {
      double acc = 0.0;
      for (int pid : ids) acc += t.mean(pid, a);
      worst = std::min(worst, acc / 12.0);
    }
    EXPECT_GE(sv.vbs_mean, sv.sbs_mean);
    EXPECT_GE(sv.sbs_mean, worst);
  }
}

TEST(Powerset, CountsAndGuard) {
  const auto t3 = random_table(5, 3, 1);
  EXPECT_EQ(portfolio_powerset_gaps(t3, ids_upto(5)).size(), 1u);
  const auto t6 = random_table(5, 6, 1);
  const auto rows = portfolio_powerset_gaps(t6, ids_upto(5));
  EXPECT_EQ(rows.size(), 20u + 15u + 6u + 1u);
  for (const auto& r : rows) EXPECT_GE(r.algorithms.size(), 3u);
  EXPECT_EQ(portfolio_powerset_gaps(t6, ids_upto(5), 1).size(), 63u);
  const auto t13 = random_table(2, 13, 1);
  try {
    portfolio_powerset_gaps(t13, ids_upto(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::enumeration_guard);
  }
}

TEST(Powerset, RemovingNonSbsNeverIncreasesGap) {
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = random_table(10, 5, derive_seed(4, "powerset", trial));
    const auto rows = portfolio_powerset_gaps(t, ids_upto(10), 1);
    for (const auto& big : rows)
      for (const auto& small : rows) {
        if (small.algorithms.size() >= big.algorithms.size()) continue;
        const bool subset = std::includes(big.algorithms.begin(), big.algorithms.end(), small.algorithms.begin(),
                                          small.algorithms.end());
        if (!subset) continue;
        EXPECT_LE(small.vbs_mean, big.vbs_mean);
        if (small.sbs_id == big.sbs_id) EXPECT_LE(small.gap, big.gap);
      }
  }
}

TEST(Powerset, ComplementarityFinding) {
  // B wins on average, but A and C are each best on one half
  const auto t = table({"A", "B", "C", "D"}, {{0.9, 0.6, 0.1, 0.0}, {0.1, 0.6, 0.9, 0.0}});
  const auto rows = portfolio_powerset_gaps(t, {1, 2});
  const auto f = larger_gap_without_sbs(rows, 4);
  EXPECT_EQ(f.full_sbs, "B");
  EXPECT_NEAR(f.full_gap, 0.3, 1e-15);
  EXPECT_TRUE(f.exists);
  EXPECT_EQ(f.best_subset, (std::vector<std::string>{"A", "C", "D"}));
  EXPECT_NEAR(f.best_gap, 0.4, 1e-15);
  ASSERT_NE(find_row(rows, {"A", "B", "C"}), nullptr);
  EXPECT_THROW(larger_gap_without_sbs({}, 4), Error);
}

TEST(GapClosed, OracleConstantAndHandSelector) {
  const auto t = table({"A", "B"}, {{0.9, 0.5}, {0.1, 0.6}});
  const auto oracle = gap_closed(oracle_selector(t), t, {1, 2});
  ASSERT_TRUE(oracle.gap_closed_pct);
  EXPECT_DOUBLE_EQ(*oracle.gap_closed_pct, 100.0);
  EXPECT_EQ(*gap_closed(constant_selector("B"), t, {1, 2}).gap_closed_pct, 0.0);
  const auto hand = gap_closed([](int pid) { return pid == 1 ? std::string("A") : std::string("B"); }, t, {1, 2});
  EXPECT_DOUBLE_EQ(hand.selector_mean, 0.75);
  EXPECT_DOUBLE_EQ(*hand.gap_closed_pct, 100.0);
  const auto worse = gap_closed(constant_selector("A"), t, {1, 2});
  EXPECT_LT(*worse.gap_closed_pct, 0.0);
  EXPECT_FALSE(gap_closed(constant_selector("A"), t, {1}).gap_closed_pct);
}

TEST(GapClosed, TrainingSetSbsOption) {
  const auto t = table({"A", "B"}, {{0.9, 0.5}, {0.1, 0.6}, {0.8, 0.1}, {0.9, 0.2}});
  const auto r = gap_closed(constant_selector("A"), t, {1, 2}, {3, 4});
  EXPECT_EQ(r.sbs_id, "A");
  EXPECT_DOUBLE_EQ(r.sbs_mean, 0.5);
  EXPECT_DOUBLE_EQ(*r.gap_closed_pct, 0.0);
}

TEST(GapClosed, InvariantUnderRelabeling) {
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = random_table(15, 4, derive_seed(5, "relabel", trial));
    std::vector<std::string> renamed{"w", "x", "y", "z"};
    std::vector<std::size_t> perm{2, 0, 3, 1};
    std::vector<std::vector<double>> rows;
    for (int pid : t.problem_ids) {
      const auto r = t.row(pid);
      std::vector<double> p(4);
      for (std::size_t a = 0; a < 4; ++a) p[perm[a]] = r[a];
      rows.push_back(p);
    }
    std::vector<std::string> algs(4);
    for (std::size_t a = 0; a < 4; ++a) algs[perm[a]] = renamed[a];
    const auto u = table(algs, rows);
    Rng rng(derive_seed(5, "choice", trial));
    std::map<int, std::size_t> choice;
    for (int pid : t.problem_ids) choice[pid] = uniform_index(rng, 4);
    const auto a = gap_closed([&](int pid) { return t.algorithm_ids[choice[pid]]; }, t, t.problem_ids);
    const auto b = gap_closed([&](int pid) { return renamed[choice[pid]]; }, u, u.problem_ids);
    ASSERT_TRUE(a.gap_closed_pct && b.gap_closed_pct);
    EXPECT_NEAR(*a.gap_closed_pct, *b.gap_closed_pct, 1e-9);
  }
}

TEST(Selector, SeparableToyAndRoundTrip) {
  std::vector<std::vector<double>> rows;
  FeatureSpace fs;
  fs.names = {"f"};
  Rng rng(8);
  for (int pid = 1; pid <= 100; ++pid) {
    const double x = uniform_open01(rng);
    fs.rows[pid] = {x};
    rows.push_back(x < 0.5 ? std::vector<double>{0.8, 0.2} : std::vector<double>{0.2, 0.8});
  }
  const auto t = table({"1", "2"}, rows);
  const auto data = label_instances(t, {"1", "2"}, ids_upto(100));
  const auto m = train_selector(data, fs, {}, "toy", "v1");
  EXPECT_FALSE(m.constant);
  for (int pid = 1; pid <= 100; ++pid) EXPECT_EQ(m.predict(fs.row(pid)), fs.row(pid)[0] < 0.5 ? "1" : "2");
  EXPECT_DOUBLE_EQ(*gap_closed(model_selector(m, fs), t, ids_upto(100)).gap_closed_pct, 100.0);

  const auto again = train_selector(data, fs, {}, "toy", "v1");
  const auto back = SelectorModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.training_set, "toy");
  EXPECT_EQ(back.training_ids, m.training_ids);
  EXPECT_EQ(back.catalog_version, "v1");
  for (int probe = 0; probe < 1000; ++probe) {
    const std::vector<double> x{uniform(rng, -0.5, 1.5)};
    ASSERT_EQ(m.predict(x), again.predict(x));
    ASSERT_EQ(m.predict(x), back.predict(x));
  }
}

TEST(Selector, SingleLabelIsConstantAndCatalogChecked) {
  FeatureSpace fs;
  fs.names = {"f", "g"};
  for (int pid = 1; pid <= 5; ++pid) fs.rows[pid] = {0.1 * pid, 0.5};
  const auto t = table({"A", "B"}, {{0.9, 0.1}, {0.8, 0.2}, {0.7, 0.3}, {0.6, 0.4}, {0.9, 0.0}});
  const auto m = train_selector(label_instances(t, {"A", "B"}, ids_upto(5)), fs, {});
  EXPECT_TRUE(m.constant);
  EXPECT_EQ(m.predict({0.3, 0.3}), "A");

  FeatureSpace other = fs;
  other.names = {"f", "h"};
  try {
    model_selector(m, other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
  fs.rows.erase(3);
  try {
    train_selector(label_instances(t, {"A", "B"}, ids_upto(5)), fs, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
  }
}

TEST(CrossEvaluation, ShapeDiagonalAndUnseen) {
  const auto t = random_table(40, 3, 21);
  FeatureSpace fs;
  fs.names = {"f0", "f1"};
  Rng rng(4);
  for (int pid = 1; pid <= 40; ++pid) fs.rows[pid] = {uniform_open01(rng), uniform_open01(rng)};
  const std::vector<SetInfo> sets{{"random_s10_r1", "random", 10, 1, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}},
                                  {"random_s10_r2", "random", 10, 2, {11, 12, 13, 14, 15, 16, 17, 18, 19, 20}},
                                  {"greedy_s10_r1", "greedy", 10, 1, {21, 22, 23, 24, 25, 26, 27, 28, 29, 30}}};
  std::vector<SelectorModel> models;
  for (const auto& s : sets) models.push_back(train_selector(label_instances(t, t.algorithm_ids, s.ids), fs, {}, s.name));
  std::vector<const SelectorModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  const auto m1 = cross_evaluate(ptrs, sets, sets, t, fs, ids_upto(40), 1);
  const auto m2 = cross_evaluate(ptrs, sets, sets, t, fs, ids_upto(40), 2);
  ASSERT_EQ(m1.cells.size(), 3u);
  ASSERT_EQ(m1.evals.size(), 4u);
  EXPECT_EQ(m1.evals[m1.unseen_column()].name, "unseen");
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t e = 0; e < 4; ++e) {
      EXPECT_EQ(m1.cells[i][e].diagonal, i == e);
      EXPECT_EQ(m1.cells[i][e].report.gap_closed_pct, m2.cells[i][e].report.gap_closed_pct);
    }
    if (m1.cells[i][i].report.gap_closed_pct) EXPECT_NEAR(*m1.cells[i][i].report.gap_closed_pct, 100.0, 1e-9);
  }
  // unseen for model 0 is ids 11..40
  std::vector<int> unseen;
  for (int pid = 11; pid <= 40; ++pid) unseen.push_back(pid);
  EXPECT_EQ(m1.cells[0][3].report.selector_mean,
            gap_closed(model_selector(models[0], fs), t, unseen).selector_mean);
  const auto csv = cross_matrix_csv(m1, "aa");
  EXPECT_EQ(csv.rows.size(), 12u);
  EXPECT_EQ(csv.header.back(), "gap_closed_pct");
}

TEST(Aggregate, MeansExcludeDiagonal) {
  CrossMatrix m;
  m.models = {{"r1", "random", 10, 1, {}}, {"r2", "random", 10, 2, {}}};
  m.evals = {{"e1", "greedy", 20, 1, {}}, {"e2", "greedy", 20, 2, {}}};
  m.cells.assign(2, std::vector<CrossCell>(2));
  const double v[2][2] = {{10, 20}, {30, 40}};
  for (int i = 0; i < 2; ++i)
    for (int e = 0; e < 2; ++e) m.cells[i][e].report.gap_closed_pct = v[i][e];
  auto agg = aggregate_by_strategy_size(m);
  ASSERT_EQ(agg.size(), 1u);
  EXPECT_DOUBLE_EQ(agg[0].mean_gap_closed_pct, 25.0);
  EXPECT_EQ(agg[0].cells, 4u);

  m.cells[0][0].diagonal = true;
  m.cells[1][1].report.gap_closed_pct.reset();
  agg = aggregate_by_strategy_size(m);
  EXPECT_DOUBLE_EQ(agg[0].mean_gap_closed_pct, 25.0);
  EXPECT_EQ(agg[0].cells, 2u);

  CrossMatrix single;
  single.models = {m.models[0]};
  single.evals = {m.evals[0]};
  single.cells = {{m.cells[0][1]}};
  EXPECT_DOUBLE_EQ(aggregate_by_strategy_size(single)[0].mean_gap_closed_pct, 20.0);
  EXPECT_EQ(aggregate_csv(agg, "x").rows.size(), 1u);
}

TEST(Pca, IdenticalReferenceProjectsToOrigin) {
  const std::vector<std::vector<double>> ref(5, {0.3, 0.6, 0.9});
  for (const auto& p : pca_project(ref, {{0.1, 0.2, 0.3}, {0.3, 0.6, 0.9}})) {
    EXPECT_EQ(p[0], 0.0);
    EXPECT_EQ(p[1], 0.0);
  }
}

TEST(Pca, LineHasNoSecondCoordinate) {
  std::vector<std::vector<double>> ref;
  for (int i = 0; i < 20; ++i) {
    const double s = 0.05 * i;
    ref.push_back({0.1 + s, 0.5 - 0.3 * s, 0.2 + 0.7 * s});
  }
  const auto p = pca_project(ref, ref);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i][1], 0.0, 1e-9);
  EXPECT_GT(std::abs(p.front()[0] - p.back()[0]), 0.5);
  EXPECT_EQ(fit_pca(ref).axes.cols(), 1);
  EXPECT_THROW(fit_pca({{1.0}, {2.0}}), Error);
}

TEST(Pca, SignConventionAndRotationInvariance) {
  Rng rng(6);
  std::vector<std::vector<double>> ref, all;
  for (int i = 0; i < 30; ++i) ref.push_back({3 * standard_normal(rng), 1.5 * standard_normal(rng), 0.5 * standard_normal(rng), 0.1 * standard_normal(rng)});
  for (int i = 0; i < 15; ++i) all.push_back({uniform_open01(rng), uniform_open01(rng), uniform_open01(rng), uniform_open01(rng)});

  const auto proj = fit_pca(ref);
  for (Eigen::Index k = 0; k < proj.axes.cols(); ++k) {
    Eigen::Index arg;
    proj.axes.col(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(proj.axes(arg, k), 0.0);
  }

  Eigen::MatrixXd g(4, 4);
  for (Eigen::Index i = 0; i < 16; ++i) g(i / 4, i % 4) = standard_normal(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  auto rotate = [&](const std::vector<std::vector<double>>& v) {
    std::vector<std::vector<double>> out;
    for (const auto& x : v) {
      const Eigen::VectorXd r = q * Eigen::Map<const Eigen::VectorXd>(x.data(), 4);
      out.emplace_back(r.data(), r.data() + 4);
    }
    return out;
  };
  const auto a = pca_project(ref, all);
  const auto b = pca_project(rotate(ref), rotate(all));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = std::hypot(a[i][0] - a[j][0], a[i][1] - a[j][1]);
      const double db = std::hypot(b[i][0] - b[j][0], b[i][1] - b[j][1]);
      EXPECT_NEAR(da, db, 1e-9);
    }
}
