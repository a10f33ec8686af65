#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "aaslab/generator.hpp"
#include "aaslab/portfolio.hpp"

using namespace aaslab;

namespace {

std::vector<PortfolioProblem> small_suite(ComponentFactory& factory, std::size_t runs) {
  std::vector<PortfolioProblem> out;
  for (int id = 1; id <= 4; ++id) {
    auto f = std::make_shared<Problem>(bind_problem(generate_problem(2, 2, 31, id), factory));
    out.push_back({id, 2, runs, [f](std::span<const double> x) { return (*f)(x); }});
  }
  return out;
}

std::vector<OptimizerSpec> pick(std::initializer_list<const char*> ids) {
  std::vector<OptimizerSpec> out;
  for (const auto& s : default_portfolio())
    for (const char* id : ids)
      if (s.algorithm_id == id) out.push_back(s);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("aaslab-portfolio-" + name)).string();
}

}  // namespace

TEST(Aocc, AnalyticCases) {
  const std::vector<double> high(50, 1e2), higher(50, 1e5), solved(50, 1e-8), zero(50, 0.0), mid(50, 1e-3);
  EXPECT_NEAR(aocc(high, 50), 0.0, 1e-12);
  EXPECT_NEAR(aocc(higher, 50), 0.0, 1e-12);
  EXPECT_NEAR(aocc(solved, 50), 1.0, 1e-12);
  EXPECT_NEAR(aocc(zero, 50), 1.0, 1e-12);
  EXPECT_NEAR(aocc(mid, 50), 0.5, 1e-12);
  EXPECT_THROW(aocc(std::vector<double>{}, 5), Error);
  EXPECT_THROW(aocc(mid, 50, AoccConfig{1.0, 1.0}), Error);
}

TEST(Aocc, ShortTrajectoryIsPaddedWithLastValue) {
  const std::vector<double> t{1e2, 1e-3};
  std::vector<double> padded(10, 1e-3);
  padded[0] = 1e2;
  EXPECT_DOUBLE_EQ(aocc(t, 10), aocc(padded, 10));
  EXPECT_NEAR(aocc(t, 10), 0.45, 1e-12);
}

TEST(Aocc, PointwiseDominance) {
  Rng rng(4);
  for (int pair = 0; pair < 100; ++pair) {
    std::vector<double> a(200), b(200);
    double best_a = std::pow(10.0, uniform(rng, -2, 4)), best_b = best_a;
    for (std::size_t t = 0; t < a.size(); ++t) {
      best_b = std::min(best_b, best_b * std::pow(10.0, -uniform(rng, 0, 0.2)));
      best_a = std::min({best_a, best_b, best_a * std::pow(10.0, -uniform(rng, 0, 0.3))});
      a[t] = std::min(best_a, best_b);
      b[t] = best_b;
    }
    EXPECT_GE(aocc(a, 200), aocc(b, 200));
  }
}

TEST(Run, RandomSearchContract) {
  ComponentFactory factory(31);
  const auto f = bind_problem(generate_problem(2, 3, 31, 1), factory);
  const auto spec = pick({"RS"}).front();
  const auto t = run_algorithm(spec, f, 2, 100, 9);
  ASSERT_EQ(t.best_so_far.size(), 100u);
  EXPECT_EQ(t.evaluations, 100u);
  for (std::size_t i = 1; i < t.best_so_far.size(); ++i) EXPECT_LE(t.best_so_far[i], t.best_so_far[i - 1]);
  EXPECT_GE(t.best_so_far.back(), 0.0);
  const auto u = run_algorithm(spec, f, 2, 100, 9);
  EXPECT_EQ(t.best_so_far, u.best_so_far);
}

TEST(Run, EveryOptimizerRespectsBudgetAndIsDeterministic) {
  ComponentFactory factory(31);
  const auto f = bind_problem(generate_problem(3, 4, 31, 2), factory);
  std::size_t calls = 0;
  const Objective counted = [&](std::span<const double> x) {
    ++calls;
    return f(x);
  };
  for (const auto& spec : default_portfolio()) {
    calls = 0;
    const auto t = run_algorithm(spec, counted, 3, 777, 5);
    EXPECT_EQ(calls, 777u) << spec.algorithm_id;
    EXPECT_EQ(t.best_so_far.size(), 777u);
    EXPECT_FALSE(t.aborted) << t.diagnostic;
    for (std::size_t i = 1; i < t.best_so_far.size(); ++i) ASSERT_LE(t.best_so_far[i], t.best_so_far[i - 1]);
    EXPECT_EQ(t.best_so_far, run_algorithm(spec, counted, 3, 777, 5).best_so_far) << spec.algorithm_id;
  }
}

TEST(Run, NaNObjectiveAbortsAndPads) {
  int calls = 0;
  const Objective f = [&](std::span<const double>) { return ++calls > 10 ? std::nan("") : 5.0 - calls * 0.1; };
  const auto t = run_algorithm(pick({"RS"}).front(), f, 2, 50, 1);
  EXPECT_TRUE(t.aborted);
  EXPECT_FALSE(t.diagnostic.empty());
  EXPECT_EQ(t.evaluations, 10u);
  ASSERT_EQ(t.best_so_far.size(), 50u);
  EXPECT_DOUBLE_EQ(t.best_so_far.back(), 4.0);
}

TEST(Run, OnePlusOneEsSolvesSphere) {
  ComponentFactory factory(31);
  const auto f = bind_problem(component_problem(1, 1, 2, 1, 31), factory);
  const auto spec = pick({"ES"}).front();
  int solved = 0;
  for (std::size_t r = 0; r < 15; ++r)
    solved += run_algorithm(spec, f, 2, 4000, derive_seed(31, "es-pilot", r)).best_so_far.back() < 1e-6;
  // observed: 15 of 15
  EXPECT_GE(solved, 14);
}

TEST(Portfolio, SingleCellEqualsRunAocc) {
  ComponentFactory factory(31);
  auto problems = small_suite(factory, 1);
  problems.resize(1);
  PortfolioOptions opt;
  opt.budget_factor = 50;
  opt.master_seed = 3;
  const auto spec = pick({"DE"});
  const auto table = run_portfolio(problems, spec, opt);
  ASSERT_EQ(table.cells.size(), 1u);
  const auto t = run_algorithm(spec[0], problems[0].objective, 2, 100, run_seed(3, 1, spec[0], 0), 1, 0);
  EXPECT_EQ(table.cells[0][0].mean_aocc, aocc(t));
  EXPECT_EQ(table.cells[0][0].budget, 100u);
}

TEST(Portfolio, DuplicateIdGivesIdenticalColumn) {
  ComponentFactory factory(31);
  const auto problems = small_suite(factory, 3);
  auto specs = pick({"ES", "NM"});
  auto copy = specs[0];
  copy.algorithm_id = "ES-copy";
  specs.push_back(copy);
  PortfolioOptions opt;
  opt.budget_factor = 100;
  opt.master_seed = 3;
  const auto table = run_portfolio(problems, specs, opt);
  for (const auto& p : problems) {
    EXPECT_EQ(table.mean(p.problem_id, "ES"), table.mean(p.problem_id, "ES-copy"));
    const auto& c = table.cells[table.problem_index(p.problem_id)][0];
    const auto [lo, hi] = std::minmax_element(c.run_aocc.begin(), c.run_aocc.end());
    EXPECT_GE(c.mean_aocc, *lo);
    EXPECT_LE(c.mean_aocc, *hi);
    EXPECT_GE(c.mean_aocc, 0.0);
    EXPECT_LE(c.mean_aocc, 1.0);
  }
}

TEST(Portfolio, ResumeEqualsFreshRunAndJobsDoNotMatter) {
  ComponentFactory factory(31);
  const auto problems = small_suite(factory, 2);
  const auto specs = pick({"RS", "ES", "PSO"});
  PortfolioOptions opt;
  opt.budget_factor = 60;
  opt.master_seed = 12;
  opt.config_hash = "abc";
  const auto fresh = run_portfolio(problems, specs, opt);

  const auto path = temp_path("resume.checkpoint");
  std::filesystem::remove(path);
  auto partial = opt;
  partial.checkpoint_path = path;
  partial.stop_after_cells = 6;
  partial.jobs = 2;
  EXPECT_THROW(run_portfolio(problems, specs, partial), Error);
  partial.stop_after_cells = 0;
  const auto resumed = run_portfolio(problems, specs, partial);
  EXPECT_EQ(resumed.to_csv("abc").rows, fresh.to_csv("abc").rows);
  EXPECT_EQ(io::to_csv(resumed.to_csv("abc")), io::to_csv(fresh.to_csv("abc")));

  auto stale = partial;
  stale.config_hash = "def";
  try {
    run_portfolio(problems, specs, stale);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::staleness);
  }
  std::filesystem::remove(path);
}

TEST(Portfolio, CsvRoundTrip) {
  ComponentFactory factory(31);
  const auto problems = small_suite(factory, 2);
  PortfolioOptions opt;
  opt.budget_factor = 30;
  const auto table = run_portfolio(problems, pick({"RS", "BFGS"}), opt);
  const auto csv = table.to_csv("77");
  EXPECT_EQ(csv.header, (std::vector<std::string>{"problem_id", "algorithm_id", "runs", "budget", "mean_aocc", "aocc_1",
                                                  "aocc_2"}));
  const auto back = PerformanceTable::from_csv(io::parse_csv(io::to_csv(csv)), 2);
  EXPECT_EQ(back.problem_ids, table.problem_ids);
  EXPECT_EQ(back.algorithm_ids, table.algorithm_ids);
  for (int id : table.problem_ids) EXPECT_EQ(back.row(id), table.row(id));
}

TEST(Portfolio, InvalidPortfolios) {
  auto specs = pick({"RS", "ES"});
  specs[1].algorithm_id = "RS";
  EXPECT_THROW(validate_portfolio(specs), Error);
  specs[1].algorithm_id = "X";
  specs[1].name = "no_such_optimizer";
  EXPECT_THROW(validate_portfolio(specs), Error);
  EXPECT_THROW(validate_portfolio({}), Error);
  EXPECT_EQ(optimizer_kinds().size(), 6u);
}
